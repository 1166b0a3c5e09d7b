"""Micro-benchmarks for the operator complexity comparison.

Timed subjects are forward-only kernel evaluations on seeded random data:
every kernel kind from the zoo plus a Volterra quadratic baseline
``x^T W2 x + w1^T x`` with an upper-triangular W2 (never trained; it
exists to show the cost of materializing second-order terms, which carry
n(n+1)/2 extra parameters per filter against the kernels' zero).

Each case runs one discarded warmup repetition and reports the median
wall time of the remaining repetitions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kernels import KERNEL_KINDS, KernelSpec, kernel_forward
from .tensor import seeded_randn

OPERATORS = KERNEL_KINDS + ("volterra2",)


@dataclass(frozen=True)
class BenchCase:
    operator: str
    patch_len: int      # n
    patch_count: int    # P
    filter_count: int   # K
    repetitions: int = 5

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ConfigError(
                f"operator must be one of {OPERATORS}, got {self.operator!r}")
        if self.repetitions < 3:
            raise ConfigError(
                f"repetitions must be >= 3 for a median, got {self.repetitions}")


def volterra2_params(patch_len: int) -> int:
    """Learnable parameters per filter: upper-triangular W2 plus w1."""
    return patch_len * (patch_len + 1) // 2 + patch_len


def volterra2_forward(patches: np.ndarray, w1: np.ndarray,
                      w2: np.ndarray) -> np.ndarray:
    """x^T W2 x + w1^T x for every (patch, filter) pair.

    patches (P, n), w1 (K, n), w2 (K, n, n) upper triangular.
    """
    p, n = patches.shape
    k = w1.shape[0]
    out = np.empty((p, k))
    for j in range(k):
        quad = (patches @ w2[j]) * patches
        out[:, j] = quad.sum(axis=1)
    out += patches @ w1.T
    return out


def _make_spec(operator: str) -> KernelSpec:
    if operator == "polynomial":
        return KernelSpec("polynomial", degree=3, coef0=1.0)
    if operator == "gaussian":
        return KernelSpec("gaussian", gamma=1.0)
    return KernelSpec(operator)


def _flops_estimate(case: BenchCase) -> float:
    n, p, k = case.patch_len, case.patch_count, case.filter_count
    if case.operator == "volterra2":
        return p * k * (2.0 * n * n + 4.0 * n)
    if case.operator == "l1":
        return 3.0 * p * k * n
    return 2.0 * p * k * n + p * k  # matmul plus the elementwise map


def run_case(case: BenchCase, seed: int = 0) -> dict:
    patches = seeded_randn((case.patch_count, case.patch_len), seed)
    filters = seeded_randn((case.filter_count, case.patch_len), seed + 1)
    if case.operator == "volterra2":
        w2 = np.triu(seeded_randn(
            (case.filter_count, case.patch_len, case.patch_len), seed + 2))

        def subject():
            return volterra2_forward(patches, filters, w2)
    else:
        spec = _make_spec(case.operator)

        def subject():
            return kernel_forward(patches, filters, spec)[0]

    subject()  # warmup, discarded
    times = []
    for _ in range(case.repetitions):
        t0 = time.perf_counter()
        subject()
        times.append(time.perf_counter() - t0)
    return {
        "operator": case.operator,
        "n": case.patch_len,
        "P": case.patch_count,
        "K": case.filter_count,
        "median_seconds": float(np.median(times)),
        "ops_estimate": _flops_estimate(case),
    }


def run_bench(cases, seed: int = 0) -> list[dict]:
    return [run_case(case, seed) for case in cases]


def default_cases(repetitions: int = 5) -> list[BenchCase]:
    """The standard comparison grid: all operators at one shape, plus the
    n-scaling series for the quadratic baseline and the loop-based l1."""
    cases = [BenchCase(op, 75, 10_000, 16, repetitions) for op in OPERATORS]
    cases += [BenchCase("volterra2", n, 2_000, 8, repetitions)
              for n in (32, 64, 128)]
    cases += [BenchCase("l1", n, 2_000, 8, repetitions) for n in (32, 64, 128)]
    cases += [BenchCase("polynomial", 25, 10_000, 16, repetitions),
              BenchCase("linear", 25, 10_000, 16, repetitions)]
    return cases
