"""Central finite-difference gradient checks for kernels, layers, and models.

The same machinery backs the test suite and the ``gradcheck`` CLI command.
A check perturbs one coordinate at a time, so it is exact up to O(h^2)
truncation; h = 1e-5 with float64 puts the noise floor around 1e-10, far
below the 1e-4 acceptance threshold.

Relative error between an analytic gradient ``a`` and numeric ``n`` is
``|a - n| / max(|a|, |n|, floor)``; the floor turns the comparison into an
absolute bound once both gradients are tiny, where relative error is
meaningless against finite-difference noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE


@dataclass
class CheckResult:
    component: str
    parameter: str
    worst_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_rel_err <= self.tolerance

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return (f"[{status}] {self.component}/{self.parameter}: "
                f"worst rel err {self.worst_rel_err:.3e} at {self.worst_index} "
                f"(analytic {self.analytic:.6e}, numeric {self.numeric:.6e}, "
                f"tol {self.tolerance:.1e})")


def rel_err(analytic: np.ndarray, numeric: np.ndarray,
            floor: float = 1e-3) -> np.ndarray:
    analytic = np.asarray(analytic, dtype=DTYPE)
    numeric = np.asarray(numeric, dtype=DTYPE)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_grad(f, x: np.ndarray, h: float = 1e-5,
                 indices=None) -> np.ndarray:
    """Central-difference gradient of scalar-valued f at x.

    ``indices`` restricts the check to a subset of flat coordinates (used to
    keep whole-model checks under the runtime budget); unset means every
    coordinate.
    """
    x = np.asarray(x, dtype=DTYPE)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def compare_grads(component: str, parameter: str,
                  analytic: np.ndarray, numeric: np.ndarray,
                  tolerance: float = 1e-4, floor: float = 1e-3,
                  indices=None) -> CheckResult:
    """Build a CheckResult comparing analytic vs numeric gradients.

    When ``indices`` is given only those flat coordinates participate (the
    numeric array is assumed zero elsewhere).
    """
    a = np.asarray(analytic, dtype=DTYPE).reshape(-1)
    n = np.asarray(numeric, dtype=DTYPE).reshape(-1)
    if indices is not None:
        sel = np.asarray(list(indices), dtype=np.intp)
        a = a[sel]
        n = n[sel]
    errs = rel_err(a, n, floor=floor)
    worst = int(np.argmax(errs)) if errs.size else 0
    orig_index = (int(sel[worst]),) if indices is not None else \
        np.unravel_index(worst, np.asarray(analytic).shape)
    return CheckResult(
        component=component, parameter=parameter,
        worst_rel_err=float(errs[worst]) if errs.size else 0.0,
        worst_index=tuple(int(i) for i in np.atleast_1d(orig_index)),
        analytic=float(a[worst]) if a.size else 0.0,
        numeric=float(n[worst]) if n.size else 0.0,
        tolerance=tolerance)


def check_scalar_function(component: str, parameter: str, f, x: np.ndarray,
                          analytic: np.ndarray, h: float = 1e-5,
                          tolerance: float = 1e-4, floor: float = 1e-3,
                          indices=None) -> CheckResult:
    """Check d f() / d x against ``analytic``; f reads x by reference."""
    numeric = numeric_grad(f, x, h=h, indices=indices)
    return compare_grads(component, parameter, analytic, numeric,
                         tolerance=tolerance, floor=floor, indices=indices)
