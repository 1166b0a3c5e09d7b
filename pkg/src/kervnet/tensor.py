"""Dense float64 tensor primitives: matmul, patch extraction, seeded RNG.

Tensors are plain C-contiguous ``numpy.ndarray`` objects with dtype float64.
Everything downstream (kernels, layers, training) builds on the few
primitives here, so their contracts are kept strict: explicit shape errors,
deterministic accumulation, and an im2col/col2im pair that is an exact
adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GeometryError

DTYPE = np.float64


def as_tensor(data) -> np.ndarray:
    """Coerce array-like data to a C-contiguous float64 array."""
    return np.ascontiguousarray(data, dtype=DTYPE)


def zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=DTYPE)


@dataclass(frozen=True)
class PatchGeometry:
    """Sliding-window parameters for patch extraction.

    ``padding_mode`` is either ``"zeros"`` (out-of-bounds reads are 0) or
    ``"circular"`` (indices wrap modulo the spatial extent).  Circular mode
    is what makes translation equivariance exact, so it is a first-class
    option rather than a test hack.
    """

    kernel_h: int
    kernel_w: int
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0
    dilation_h: int = 1
    dilation_w: int = 1
    padding_mode: str = "zeros"

    def __post_init__(self):
        for name in ("kernel_h", "kernel_w", "stride_h", "stride_w",
                     "dilation_h", "dilation_w"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.pad_h < 0 or self.pad_w < 0:
            raise GeometryError(f"pads must be >= 0, got ({self.pad_h}, {self.pad_w})")
        if self.padding_mode not in ("zeros", "circular"):
            raise GeometryError(f"unknown padding_mode {self.padding_mode!r}")

    def out_size(self, height: int, width: int) -> tuple[int, int]:
        """Output spatial extents for an input of the given extents."""
        h_out = (height + 2 * self.pad_h
                 - self.dilation_h * (self.kernel_h - 1) - 1) // self.stride_h + 1
        w_out = (width + 2 * self.pad_w
                 - self.dilation_w * (self.kernel_w - 1) - 1) // self.stride_w + 1
        if h_out < 1 or w_out < 1:
            raise GeometryError(
                f"geometry {self} yields non-positive output size "
                f"({h_out}, {w_out}) on input ({height}, {width})")
        return h_out, w_out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a (M,K) and b (K,N) float64 matrix.

    Accumulation is delegated to BLAS, which is deterministic run-to-run on
    a given machine.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(
            f"matmul expects 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a.astype(DTYPE, copy=False) @ b.astype(DTYPE, copy=False)


def _patch_index_grids(geom: PatchGeometry, height: int, width: int):
    """Row/column index grids for every (output position, kernel tap) pair.

    Returns ``(iy, ix)`` with shapes (H_out, kernel_h) and (W_out, kernel_w),
    holding indices into the *padded* image for zeros mode, or wrapped
    indices into the raw image for circular mode.
    """
    h_out, w_out = geom.out_size(height, width)
    oy = np.arange(h_out) * geom.stride_h - geom.pad_h
    ox = np.arange(w_out) * geom.stride_w - geom.pad_w
    ky = np.arange(geom.kernel_h) * geom.dilation_h
    kx = np.arange(geom.kernel_w) * geom.dilation_w
    iy = oy[:, None] + ky[None, :]
    ix = ox[:, None] + kx[None, :]
    if geom.padding_mode == "circular":
        iy %= height
        ix %= width
    else:
        iy += geom.pad_h
        ix += geom.pad_w
    return iy, ix


def im2col(inp: np.ndarray, geom: PatchGeometry) -> np.ndarray:
    """Rearrange an (N, C, H, W) image into a patch matrix.

    Row r holds the vectorized receptive field of output position r, rows
    ordered (n, out_y, out_x) and columns ordered (channel, tap_y, tap_x).
    Result shape: (N*H_out*W_out, C*kernel_h*kernel_w).
    """
    inp = np.asarray(inp, dtype=DTYPE)
    if inp.ndim != 4:
        raise DimensionError(f"im2col expects (N, C, H, W), got shape {inp.shape}")
    n, c, h, w = inp.shape
    h_out, w_out = geom.out_size(h, w)
    iy, ix = _patch_index_grids(geom, h, w)
    if geom.padding_mode == "zeros":
        img = np.pad(inp, ((0, 0), (0, 0), (geom.pad_h, geom.pad_h),
                           (geom.pad_w, geom.pad_w)))
    else:
        img = inp
    # Advanced indexing broadcast: (N, C, H_out, 1, kh, 1) x (1, W_out, 1, kw)
    patches = img[:, :, iy[:, None, :, None], ix[None, :, None, :]]
    # (N, C, H_out, W_out, kh, kw) -> (N, H_out, W_out, C, kh, kw)
    patches = patches.transpose(0, 2, 3, 1, 4, 5)
    return np.ascontiguousarray(
        patches.reshape(n * h_out * w_out, c * geom.kernel_h * geom.kernel_w))


def col2im(cols: np.ndarray, geom: PatchGeometry, out_shape) -> np.ndarray:
    """Scatter-add patch rows back to image positions; exact adjoint of im2col."""
    cols = np.asarray(cols, dtype=DTYPE)
    n, c, h, w = out_shape
    h_out, w_out = geom.out_size(h, w)
    expected = (n * h_out * w_out, c * geom.kernel_h * geom.kernel_w)
    if cols.shape != expected:
        raise DimensionError(
            f"col2im: cols shape {cols.shape} inconsistent with geometry, "
            f"expected {expected} for output {tuple(out_shape)}")
    patches = cols.reshape(n, h_out, w_out, c, geom.kernel_h, geom.kernel_w)
    patches = patches.transpose(0, 3, 1, 2, 4, 5)  # (N, C, H_out, W_out, kh, kw)
    iy, ix = _patch_index_grids(geom, h, w)
    if geom.padding_mode == "zeros":
        img = np.zeros((n, c, h + 2 * geom.pad_h, w + 2 * geom.pad_w), dtype=DTYPE)
    else:
        img = np.zeros((n, c, h, w), dtype=DTYPE)
    np.add.at(img, (slice(None), slice(None),
                    iy[:, None, :, None], ix[None, :, None, :]),
              patches)
    if geom.padding_mode == "zeros":
        img = img[:, :, geom.pad_h:geom.pad_h + h, geom.pad_w:geom.pad_w + w]
    return np.ascontiguousarray(img)


def seeded_randn(shape, seed: int) -> np.ndarray:
    """Standard-normal tensor; same (shape, seed) is bit-identical across runs."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(shape, dtype=DTYPE)


def seeded_uniform(shape, lo: float, hi: float, seed: int) -> np.ndarray:
    """Uniform tensor on [lo, hi); same (shape, seed) is bit-identical across runs."""
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError(f"bounds must be finite, got [{lo}, {hi}]")
    if lo > hi:
        raise ValueError(f"lower bound {lo} exceeds upper bound {hi}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return lo + (hi - lo) * rng.random(shape, dtype=DTYPE)
