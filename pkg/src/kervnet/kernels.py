"""The kernel zoo: patch-wise kernel responses and their analytic gradients.

``kernel_forward`` evaluates κ(patch, filter) for every (patch, filter)
pair in one shot; ``kernel_backward`` contracts the exact analytic
derivatives with an upstream gradient.  Dot-product kernels (linear,
polynomial, sigmoid) cost one matmul plus an elementwise map; gaussian and
euclidean-distance kernels use the norm expansion
``|x - w|^2 = |x|^2 + |w|^2 - 2 x.w`` so they also ride the same matmul.
Only the manhattan (l1) kernel needs the explicit difference tensor, which
is processed in fixed-size chunks of patch rows.

Gradients with respect to patches, filters, and the learnable
hyperparameters (the polynomial offset and the gaussian width) are all
factored through matrix products, so backward never materializes a
(patches x filters x length) tensor except in the l1 chunks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, NumericError
from .tensor import DTYPE, matmul

KERNEL_KINDS = ("linear", "polynomial", "gaussian", "l1", "l2", "sigmoid")

# Rows per chunk when the l1 kernel materializes difference tensors.
_L1_CHUNK_ELEMS = 4_000_000

# Positivity floor shared with the optimizer's projection step.
HYPER_FLOOR = 1e-6

# Euclidean distance below this is treated as zero in the l2 subgradient.
_L2_SINGULARITY = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Tagged choice of kernel function plus its hyperparameters.

    ``degree``/``coef0`` apply to the polynomial kernel, ``gamma`` to the
    gaussian.  ``degree`` is a positive integer and never trainable; a real
    exponent would take responses complex.  ``coef0`` stays >= 0 and
    ``gamma`` > 0, maintained by projection after optimizer steps.
    """

    kind: str
    degree: int = 3
    coef0: float = 1.0
    gamma: float = 1.0
    learn_coef0: bool = False
    learn_gamma: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}, "
                             f"expected one of {KERNEL_KINDS}")
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 1:
            raise ValueError(f"degree must be a positive integer, got {self.degree!r}")
        if self.coef0 < 0:
            raise ValueError(f"coef0 must be >= 0, got {self.coef0}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.learn_coef0 and self.kind != "polynomial":
            raise ValueError("learn_coef0 only applies to the polynomial kernel")
        if self.learn_gamma and self.kind != "gaussian":
            raise ValueError("learn_gamma only applies to the gaussian kernel")

    def learnable_hypers(self) -> tuple[str, ...]:
        names = []
        if self.learn_coef0:
            names.append("coef0")
        if self.learn_gamma:
            names.append("gamma")
        return tuple(names)

    def with_hypers(self, **values) -> "KernelSpec":
        return replace(self, **values)


@dataclass
class KernelCache:
    """Intermediates kept by forward so backward never rereads the batch."""

    spec: KernelSpec
    patches: np.ndarray
    filters: np.ndarray
    # per-kind extras, each (P, K) when present
    base: np.ndarray | None = None      # polynomial: x.w + coef0
    tanh_xw: np.ndarray | None = None   # sigmoid: tanh(x.w)
    sqdist: np.ndarray | None = None    # gaussian: |x - w|^2
    response: np.ndarray | None = None  # gaussian: exp(-gamma * sqdist)
    dist: np.ndarray | None = None      # l2: |x - w|_2
    extra: dict = field(default_factory=dict)


def _int_power(base: np.ndarray, exponent: int) -> np.ndarray:
    """base**exponent by repeated squaring; avoids libm pow for small ints."""
    result = None
    square = base
    e = exponent
    while e > 0:
        if e & 1:
            result = square.copy() if result is None else result * square
        e >>= 1
        if e:
            square = square * square
    return result if result is not None else np.ones_like(base)


def _pairwise_sqdist(patches: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """|x - w|^2 for all pairs via the norm expansion; clipped at 0."""
    x_sq = np.einsum("ij,ij->i", patches, patches)
    w_sq = np.einsum("ij,ij->i", filters, filters)
    d2 = x_sq[:, None] + w_sq[None, :] - 2.0 * matmul(patches, filters.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _l1_chunks(n_rows: int, row_elems: int):
    step = max(1, _L1_CHUNK_ELEMS // max(1, row_elems))
    for start in range(0, n_rows, step):
        yield start, min(n_rows, start + step)


def kernel_forward(patches: np.ndarray, filters: np.ndarray,
                   spec: KernelSpec) -> tuple[np.ndarray, KernelCache]:
    """Evaluate κ(patch_p, filter_k) for every pair.

    patches: (P, n) rows of vectorized receptive fields.
    filters: (K, n) rows of vectorized filters.
    Returns (responses (P, K), cache for backward).
    """
    patches = np.asarray(patches, dtype=DTYPE)
    filters = np.asarray(filters, dtype=DTYPE)
    if patches.ndim != 2 or filters.ndim != 2:
        raise DimensionError(
            f"kernel_forward expects 2-D inputs, got {patches.shape} and {filters.shape}")
    if patches.shape[1] != filters.shape[1]:
        raise DimensionError(
            f"patch length {patches.shape} does not match filter length {filters.shape}")
    if not np.isfinite(patches).all() or not np.isfinite(filters).all():
        raise NumericError("kernel_forward received non-finite inputs")

    cache = KernelCache(spec=spec, patches=patches, filters=filters)
    kind = spec.kind

    if kind == "linear":
        out = matmul(patches, filters.T)
    elif kind == "polynomial":
        base = matmul(patches, filters.T)
        base += spec.coef0
        out = _int_power(base, spec.degree)
        cache.base = base
    elif kind == "sigmoid":
        out = np.tanh(matmul(patches, filters.T))
        cache.tanh_xw = out
    elif kind == "gaussian":
        d2 = _pairwise_sqdist(patches, filters)
        out = np.exp(-spec.gamma * d2)
        cache.sqdist = d2
        cache.response = out
    elif kind == "l2":
        dist = np.sqrt(_pairwise_sqdist(patches, filters))
        out = dist
        cache.dist = dist
    elif kind == "l1":
        p, n = patches.shape
        k = filters.shape[0]
        out = np.empty((p, k), dtype=DTYPE)
        for lo, hi in _l1_chunks(p, k * n):
            diff = patches[lo:hi, None, :] - filters[None, :, :]
            out[lo:hi] = np.abs(diff).sum(axis=2)
    else:  # pragma: no cover - guarded by KernelSpec
        raise ValueError(f"unknown kernel kind {kind!r}")
    return out, cache


def kernel_backward(cache: KernelCache, upstream: np.ndarray):
    """Contract analytic kernel derivatives with an upstream gradient.

    upstream: (P, K), dLoss/dResponse.
    Returns (grad_patches (P, n), grad_filters (K, n), hyper_grads) where
    hyper_grads maps each learnable hyperparameter name to a scalar summed
    over all (patch, filter) pairs.
    """
    upstream = np.asarray(upstream, dtype=DTYPE)
    patches, filters = cache.patches, cache.filters
    expected = (patches.shape[0], filters.shape[0])
    if upstream.shape != expected:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match cached "
            f"responses {expected}")

    spec = cache.spec
    kind = spec.kind
    hyper_grads: dict[str, float] = {}

    if kind == "linear":
        grad_patches = matmul(upstream, filters)
        grad_filters = matmul(upstream.T, patches)
    elif kind == "polynomial":
        # d/dw (x.w + c)^d = d (x.w + c)^(d-1) x, symmetric in x;
        # d/dc = d (x.w + c)^(d-1)
        scale = spec.degree * _int_power(cache.base, spec.degree - 1)
        s = upstream * scale
        grad_patches = matmul(s, filters)
        grad_filters = matmul(s.T, patches)
        if spec.learn_coef0:
            hyper_grads["coef0"] = float(s.sum())
    elif kind == "sigmoid":
        s = upstream * (1.0 - cache.tanh_xw ** 2)
        grad_patches = matmul(s, filters)
        grad_filters = matmul(s.T, patches)
    elif kind == "gaussian":
        # d/dw = 2 gamma (x - w) kappa ;  d/dgamma = -|x - w|^2 kappa
        s = upstream * cache.response
        two_gamma = 2.0 * spec.gamma
        grad_patches = two_gamma * (matmul(s, filters)
                                    - s.sum(axis=1)[:, None] * patches)
        grad_filters = two_gamma * (matmul(s.T, patches)
                                    - s.sum(axis=0)[:, None] * filters)
        if spec.learn_gamma:
            hyper_grads["gamma"] = float(-(s * cache.sqdist).sum())
    elif kind == "l2":
        # d/dw = (w - x)/|x - w| with the zero vector inside the singularity
        safe = np.where(cache.dist < _L2_SINGULARITY, np.inf, cache.dist)
        t = upstream / safe
        grad_patches = t.sum(axis=1)[:, None] * patches - matmul(t, filters)
        grad_filters = t.sum(axis=0)[:, None] * filters - matmul(t.T, patches)
    elif kind == "l1":
        # d/dw = sign(w - x) elementwise, subgradient 0 at ties
        p, n = patches.shape
        k = filters.shape[0]
        grad_patches = np.zeros_like(patches)
        grad_filters = np.zeros_like(filters)
        for lo, hi in _l1_chunks(p, k * n):
            sgn = np.sign(patches[lo:hi, None, :] - filters[None, :, :])
            u = upstream[lo:hi, :, None]
            grad_patches[lo:hi] = (u * sgn).sum(axis=1)
            grad_filters -= (u * sgn).sum(axis=0)
    else:  # pragma: no cover
        raise ValueError(f"unknown kernel kind {kind!r}")
    return grad_patches, grad_filters, hyper_grads
