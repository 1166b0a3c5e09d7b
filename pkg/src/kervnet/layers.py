"""Forward/backward network building blocks.

``Kerv2d`` is the sliding-window kernel operator: im2col, a patch-wise
kernel evaluation against the flattened filters, then reshape (plus an
optional per-channel bias added after the kernel map).  With the linear
kernel it *is* this framework's convolution; there is no separate
convolution implementation.

Every layer follows the same protocol: ``forward(x, train_mode)`` caches
what backward needs (only when training), ``backward(grad_out)`` returns
the input gradient and accumulates parameter gradients, and
``params()``/``grads()``/``param_tags()`` expose flat tensor lists for the
optimizer.  Tags are "weight", "bias", or "kernel_hyper"; the optimizer
uses them to skip weight decay on hyperparameters and to project
hyperparameters back to positivity.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionError, GeometryError, StateError
from .kernels import KernelCache, KernelSpec, kernel_backward, kernel_forward
from .tensor import DTYPE, PatchGeometry, col2im, im2col, seeded_uniform, zeros


class Layer:
    """Uniform forward/backward unit; parameter-free by default."""

    def forward(self, x: np.ndarray, train_mode: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def param_tags(self) -> list[str]:
        return []

    def zero_grads(self):
        for g in self.grads():
            g[...] = 0.0

    def describe(self) -> str:
        return type(self).__name__


class Kerv2d(Layer):
    """Sliding-window kernel operator over (N, C, H, W) inputs.

    The filter bank has shape (out_channels, in_channels/groups, kh, kw);
    each group's patches meet only that group's filters.  Kernel
    hyperparameters flagged learnable in the spec live in 1-element arrays
    so the optimizer can update them in place alongside the weights.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size,
                 stride=1, padding=0, dilation=1, groups: int = 1,
                 bias: bool = True, spec: KernelSpec | None = None,
                 padding_mode: str = "zeros", seed: int = 0):
        kh, kw = _pair(kernel_size)
        sh, sw = _pair(stride)
        ph, pw = _pair(padding)
        dh, dw = _pair(dilation)
        if in_channels % groups or out_channels % groups:
            raise DimensionError(
                f"groups={groups} must divide in_channels={in_channels} "
                f"and out_channels={out_channels}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.groups = groups
        self.geom = PatchGeometry(kh, kw, sh, sw, ph, pw, dh, dw, padding_mode)
        self.spec = spec if spec is not None else KernelSpec("linear")

        fan_in = (in_channels // groups) * kh * kw
        bound = 1.0 / np.sqrt(fan_in)
        self.weight = seeded_uniform(
            (out_channels, in_channels // groups, kh, kw), -bound, bound, seed)
        self.weight_grad = np.zeros_like(self.weight)
        self.use_bias = bias
        if bias:
            self.bias = zeros(out_channels)
            self.bias_grad = np.zeros_like(self.bias)
        self.hyper = {name: np.array([getattr(self.spec, name)], dtype=DTYPE)
                      for name in self.spec.learnable_hypers()}
        self.hyper_grad = {name: np.zeros(1, dtype=DTYPE) for name in self.hyper}
        self._cache = None

    def current_spec(self) -> KernelSpec:
        """Spec with learnable hyperparameters read from their live arrays."""
        if not self.hyper:
            return self.spec
        return self.spec.with_hypers(
            **{name: float(arr[0]) for name, arr in self.hyper.items()})

    def forward(self, x: np.ndarray, train_mode: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise DimensionError(
                f"expected input (N, {self.in_channels}, H, W), got {x.shape}")
        n = x.shape[0]
        h_out, w_out = self.geom.out_size(x.shape[2], x.shape[3])
        cols = im2col(x, self.geom)
        spec = self.current_spec()

        cg = self.in_channels // self.groups
        kg = self.out_channels // self.groups
        patch_len = cg * self.geom.kernel_h * self.geom.kernel_w
        flat_w = self.weight.reshape(self.out_channels, patch_len)

        responses = np.empty((cols.shape[0], self.out_channels), dtype=DTYPE)
        caches: list[KernelCache] = []
        for g in range(self.groups):
            cols_g = cols[:, g * patch_len:(g + 1) * patch_len]
            out_g, cache_g = kernel_forward(cols_g, flat_w[g * kg:(g + 1) * kg], spec)
            responses[:, g * kg:(g + 1) * kg] = out_g
            caches.append(cache_g)

        out = responses.reshape(n, h_out, w_out, self.out_channels)
        out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
        if self.use_bias:
            out += self.bias[None, :, None, None]
        if train_mode:
            self._cache = (x.shape, caches, (n, h_out, w_out))
        else:
            self._cache = None
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("Kerv2d.backward called without a cached forward pass")
        in_shape, caches, (n, h_out, w_out) = self._cache
        grad_out = np.asarray(grad_out, dtype=DTYPE)
        if grad_out.shape != (n, self.out_channels, h_out, w_out):
            raise DimensionError(
                f"grad_out shape {grad_out.shape} does not match forward "
                f"output {(n, self.out_channels, h_out, w_out)}")

        if self.use_bias:
            self.bias_grad += grad_out.sum(axis=(0, 2, 3))

        upstream = grad_out.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        cg = self.in_channels // self.groups
        kg = self.out_channels // self.groups
        patch_len = cg * self.geom.kernel_h * self.geom.kernel_w
        flat_wgrad = self.weight_grad.reshape(self.out_channels, patch_len)

        grad_cols = np.empty((upstream.shape[0], self.groups * patch_len), dtype=DTYPE)
        for g in range(self.groups):
            gp, gf, gh = kernel_backward(caches[g], upstream[:, g * kg:(g + 1) * kg])
            grad_cols[:, g * patch_len:(g + 1) * patch_len] = gp
            flat_wgrad[g * kg:(g + 1) * kg] += gf
            for name, val in gh.items():
                self.hyper_grad[name] += val
        return col2im(grad_cols, self.geom, in_shape)

    def params(self):
        out = [self.weight]
        if self.use_bias:
            out.append(self.bias)
        out.extend(self.hyper[name] for name in sorted(self.hyper))
        return out

    def grads(self):
        out = [self.weight_grad]
        if self.use_bias:
            out.append(self.bias_grad)
        out.extend(self.hyper_grad[name] for name in sorted(self.hyper))
        return out

    def param_tags(self):
        out = ["weight"]
        if self.use_bias:
            out.append("bias")
        out.extend("kernel_hyper" for _ in sorted(self.hyper))
        return out

    def describe(self) -> str:
        spec = self.current_spec()
        extras = {"polynomial": f", degree={spec.degree}, coef0={spec.coef0:g}",
                  "gaussian": f", gamma={spec.gamma:g}"}.get(spec.kind, "")
        return (f"Kerv2d({self.in_channels}->{self.out_channels}, "
                f"{self.geom.kernel_h}x{self.geom.kernel_w}, kernel={spec.kind}{extras})")


class _Pool2d(Layer):
    """Shared gather machinery for max/avg pooling (no padding)."""

    def __init__(self, window, stride=None):
        self.win_h, self.win_w = _pair(window)
        self.stride_h, self.stride_w = _pair(stride if stride is not None else window)
        if min(self.win_h, self.win_w, self.stride_h, self.stride_w) < 1:
            raise GeometryError("pooling window and stride must be >= 1")
        self._cache = None

    def _windows(self, x: np.ndarray):
        n, c, h, w = x.shape
        h_out = (h - self.win_h) // self.stride_h + 1
        w_out = (w - self.win_w) // self.stride_w + 1
        if h_out < 1 or w_out < 1:
            raise GeometryError(
                f"pooling window ({self.win_h}, {self.win_w}) too large "
                f"for input ({h}, {w})")
        iy = (np.arange(h_out) * self.stride_h)[:, None] + np.arange(self.win_h)
        ix = (np.arange(w_out) * self.stride_w)[:, None] + np.arange(self.win_w)
        # (N, C, H_out, W_out, win_h, win_w), window taps in row-major order
        wins = x[:, :, iy[:, None, :, None], ix[None, :, None, :]]
        return wins.reshape(n, c, h_out, w_out, self.win_h * self.win_w), (iy, ix)


class MaxPool2d(_Pool2d):
    """Max pooling; ties route the gradient to the first tap in row-major order."""

    def forward(self, x, train_mode=True):
        x = np.asarray(x, dtype=DTYPE)
        wins, grids = self._windows(x)
        arg = wins.argmax(axis=4)
        out = np.take_along_axis(wins, arg[..., None], axis=4)[..., 0]
        if train_mode:
            self._cache = (x.shape, arg, grids)
        return out

    def backward(self, grad_out):
        if self._cache is None:
            raise StateError("MaxPool2d.backward called without a cached forward pass")
        in_shape, arg, (iy, ix) = self._cache
        grad_out = np.asarray(grad_out, dtype=DTYPE)
        grad_in = np.zeros(in_shape, dtype=DTYPE)
        # argmax is a flat index into the (win_h, win_w) window
        ky, kx = np.unravel_index(arg, (self.win_h, self.win_w))
        oy = np.arange(arg.shape[2]) * self.stride_h
        ox = np.arange(arg.shape[3]) * self.stride_w
        rows = oy[None, None, :, None] + ky
        cols = ox[None, None, None, :] + kx
        nn = np.arange(in_shape[0])[:, None, None, None]
        cc = np.arange(in_shape[1])[None, :, None, None]
        np.add.at(grad_in, (nn, cc, rows, cols), grad_out)
        return grad_in


class AvgPool2d(_Pool2d):
    """Average pooling; backward spreads the gradient uniformly over the window."""

    def forward(self, x, train_mode=True):
        x = np.asarray(x, dtype=DTYPE)
        wins, grids = self._windows(x)
        out = wins.mean(axis=4)
        if train_mode:
            self._cache = (x.shape, out.shape, grids)
        return out

    def backward(self, grad_out):
        if self._cache is None:
            raise StateError("AvgPool2d.backward called without a cached forward pass")
        in_shape, out_shape, (iy, ix) = self._cache
        grad_out = np.asarray(grad_out, dtype=DTYPE)
        share = grad_out / (self.win_h * self.win_w)
        grad_in = np.zeros(in_shape, dtype=DTYPE)
        np.add.at(grad_in,
                  (slice(None), slice(None),
                   iy[:, None, :, None], ix[None, :, None, :]),
                  share[:, :, :, :, None, None])
        return grad_in


class ReLU(Layer):
    def forward(self, x, train_mode=True):
        x = np.asarray(x, dtype=DTYPE)
        mask = x > 0
        if train_mode:
            self._mask = mask
        return np.where(mask, x, 0.0)

    def backward(self, grad_out):
        if getattr(self, "_mask", None) is None:
            raise StateError("ReLU.backward called without a cached forward pass")
        return np.where(self._mask, np.asarray(grad_out, dtype=DTYPE), 0.0)


class Flatten(Layer):
    def forward(self, x, train_mode=True):
        x = np.asarray(x, dtype=DTYPE)
        if train_mode:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        if getattr(self, "_shape", None) is None:
            raise StateError("Flatten.backward called without a cached forward pass")
        return np.asarray(grad_out, dtype=DTYPE).reshape(self._shape)


class Dense(Layer):
    """Affine map y = x W^T + b with fan-in uniform initialization."""

    def __init__(self, in_features: int, out_features: int, seed: int = 0):
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / np.sqrt(in_features)
        self.weight = seeded_uniform((out_features, in_features), -bound, bound, seed)
        self.bias = zeros(out_features)
        self.weight_grad = np.zeros_like(self.weight)
        self.bias_grad = np.zeros_like(self.bias)
        self._cache = None

    def forward(self, x, train_mode=True):
        x = np.asarray(x, dtype=DTYPE)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(
                f"expected input (N, {self.in_features}), got {x.shape}")
        if train_mode:
            self._cache = x
        return x @ self.weight.T + self.bias

    def backward(self, grad_out):
        if self._cache is None:
            raise StateError("Dense.backward called without a cached forward pass")
        grad_out = np.asarray(grad_out, dtype=DTYPE)
        self.weight_grad += grad_out.T @ self._cache
        self.bias_grad += grad_out.sum(axis=0)
        return grad_out @ self.weight

    def params(self):
        return [self.weight, self.bias]

    def grads(self):
        return [self.weight_grad, self.bias_grad]

    def param_tags(self):
        return ["weight", "bias"]

    def describe(self):
        return f"Dense({self.in_features}->{self.out_features})"


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and the logit gradient.

    Returns (loss, grad) with grad = (softmax(logits) - onehot) / batch.
    """
    logits = np.asarray(logits, dtype=DTYPE)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(
            f"logits {logits.shape} and labels {labels.shape} are inconsistent")
    n, k = logits.shape
    if labels.min() < 0 or labels.max() >= k:
        raise DataError(
            f"labels must lie in [0, {k}), got range "
            f"[{int(labels.min())}, {int(labels.max())}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def _pair(v):
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ValueError(f"expected a pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)
