"""Dense 4-D tensors with reverse-mode automatic differentiation.

Every value is a (batch, channel, height, width) array of float32. The graph
is a dynamic tape: each op links its output tensor back to its parents and
stores a closure that routes the output gradient to them. Calling
``backward(loss)`` walks the tape once in reverse topological order.

Scalar results (losses) live in shape (1, 1, 1, 1) tensors; reductions
accumulate in float64 before casting back to float32.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, NumericalError


def _as_data(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 4:
        raise ConfigurationError(f"tensor data must be 4-D, got shape {arr.shape}")
    return arr


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values produced by op '{op}'")


class Tensor:
    """A 4-D float32 array, optionally tracked by the autodiff tape."""

    __slots__ = ("data", "requires_grad", "grad", "_op", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False):
        self.data = _as_data(values)
        _check_finite(self.data, "leaf")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @staticmethod
    def scalar(value: float, requires_grad: bool = False) -> "Tensor":
        return Tensor(np.full((1, 1, 1, 1), value, dtype=np.float32), requires_grad)

    @staticmethod
    def zeros(shape, requires_grad: bool = False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=np.float32), requires_grad)

    def item(self) -> float:
        if self.data.size != 1:
            raise ConfigurationError("item() requires a scalar tensor")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def update_data(self, values: np.ndarray) -> None:
        """Designated parameter-update entry point (optimizer steps)."""
        arr = _as_data(values)
        if arr.shape != self.data.shape:
            raise ConfigurationError("update_data must preserve shape")
        _check_finite(arr, "update_data")
        self.data = arr

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad += g

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op}, grad={self.requires_grad})"


def from_op(data: np.ndarray, parents, backward_fn, op: str) -> Tensor:
    """Wrap an op result in a tensor wired into the tape.

    ``backward_fn(grad)`` must route the float32 output gradient to each
    parent via ``parent._accumulate``. Used by every op here and by the
    fused loss ops elsewhere in the package.
    """
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data.astype(np.float32, copy=False)
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out._op = op
    out._parents = tuple(parents)
    out._backward = backward_fn if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# elementwise ops


def _binary(a: Tensor, b: Tensor, kind: str):
    if a.data.shape != b.data.shape:
        raise ConfigurationError(
            f"{kind}: shape mismatch {a.data.shape} vs {b.data.shape}"
        )


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "add")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return from_op(a.data + b.data, (a, b), backward_fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "sub")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return from_op(a.data - b.data, (a, b), backward_fn, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "mul")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return from_op(a.data * b.data, (a, b), backward_fn, "mul")


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * np.float32(factor))

    return from_op(a.data * np.float32(factor), (a,), backward_fn, "scale")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return from_op(np.where(mask, a.data, np.float32(0)), (a,), backward_fn, "relu")


def clamp01(a: Tensor) -> Tensor:
    # Subgradient is zero outside the open interval: saturated entries stay
    # frozen until something else moves them.
    mask = (a.data > 0) & (a.data < 1)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return from_op(np.clip(a.data, 0.0, 1.0), (a,), backward_fn, "clamp01")


def channel_affine(a: Tensor, ch_scale: np.ndarray, ch_shift: np.ndarray) -> Tensor:
    """Per-channel y = x * scale + shift with constant coefficients.

    This is both input normalization and a folded batch norm.
    """
    c = a.data.shape[1]
    ch_scale = np.asarray(ch_scale, dtype=np.float32).reshape(-1)
    ch_shift = np.asarray(ch_shift, dtype=np.float32).reshape(-1)
    if ch_scale.shape != (c,) or ch_shift.shape != (c,):
        raise ConfigurationError(
            f"channel_affine: expected {c} coefficients, got "
            f"{ch_scale.shape} / {ch_shift.shape}"
        )
    s4 = ch_scale.reshape(1, c, 1, 1)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * s4)

    data = a.data * s4 + ch_shift.reshape(1, c, 1, 1)
    return from_op(data, (a,), backward_fn, "channel_affine")


# ---------------------------------------------------------------------------
# convolution


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    b, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols, oh, ow


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Standard cross-correlation over the spatial axes."""
    if stride < 1 or padding < 0:
        raise ConfigurationError("conv2d: stride must be >= 1 and padding >= 0")
    oc, ic, kh, kw = weight.data.shape
    b, c, h, w = x.data.shape
    if c != ic:
        raise ConfigurationError(f"conv2d: input has {c} channels, weight expects {ic}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ConfigurationError("conv2d: kernel larger than padded input")
    if bias is not None and bias.data.size != oc:
        raise ConfigurationError(f"conv2d: bias must have {oc} values")

    cols, oh, ow = _im2col(x.data, kh, kw, stride, padding)
    cols2 = cols.reshape(b, ic * kh * kw, oh * ow)
    w2 = weight.data.reshape(oc, ic * kh * kw)
    out = np.matmul(w2[None], cols2).reshape(b, oc, oh, ow)
    if bias is not None:
        out = out + bias.data.reshape(1, oc, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward_fn(g):
        g2 = g.reshape(b, oc, oh * ow)
        if weight.requires_grad:
            dw = np.matmul(g2, cols2.transpose(0, 2, 1)).sum(axis=0)
            weight._accumulate(dw.reshape(oc, ic, kh, kw))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2, 3)).reshape(bias.data.shape))
        if x.requires_grad:
            dcols = np.matmul(w2.T[None], g2).reshape(b, ic, kh, kw, oh, ow)
            hp, wp = h + 2 * padding, w + 2 * padding
            dxp = np.zeros((b, ic, hp, wp), dtype=np.float32)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += dcols[:, :, i, j]
            if padding:
                dxp = dxp[:, :, padding : padding + h, padding : padding + w]
            x._accumulate(dxp)

    return from_op(out, parents, backward_fn, "conv2d")


# ---------------------------------------------------------------------------
# pooling


def pool2d(x: Tensor, kind: str, k: int, stride: int | None = None) -> Tensor:
    """Max or average pooling. Max routes gradient to the first argmax in
    row-major window scan order."""
    if kind not in ("max", "avg"):
        raise ConfigurationError(f"pool2d: unknown kind '{kind}'")
    if k < 1:
        raise ConfigurationError("pool2d: k must be >= 1")
    stride = k if stride is None else stride
    if stride < 1:
        raise ConfigurationError("pool2d: stride must be >= 1")
    b, c, h, w = x.data.shape
    if h < k or w < k:
        raise ConfigurationError(f"pool2d: spatial extent {h}x{w} smaller than k={k}")
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1

    offsets = [(i, j) for i in range(k) for j in range(k)]
    if kind == "max":
        out = None
        arg = None
        for idx, (i, j) in enumerate(offsets):
            v = x.data[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            if out is None:
                out = v.copy()
                arg = np.zeros(v.shape, dtype=np.int32)
            else:
                better = v > out  # strict: ties keep the earlier offset
                out[better] = v[better]
                arg[better] = idx

        def backward_fn(g):
            if not x.requires_grad:
                return
            dx = np.zeros_like(x.data)
            for idx, (i, j) in enumerate(offsets):
                sl = dx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
                sl += g * (arg == idx)
            x._accumulate(dx)

        return from_op(out, (x,), backward_fn, "maxpool")

    inv = np.float32(1.0 / (k * k))
    acc = np.zeros((b, c, oh, ow), dtype=np.float32)
    for i, j in offsets:
        acc += x.data[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    acc *= inv

    def backward_fn(g):
        if not x.requires_grad:
            return
        dx = np.zeros_like(x.data)
        gi = g * inv
        for i, j in offsets:
            sl = dx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            sl += gi
        x._accumulate(dx)

    return from_op(acc, (x,), backward_fn, "avgpool")


# ---------------------------------------------------------------------------
# softmax across channels


def softmax_channels(x: Tensor) -> Tensor:
    """Softmax over the channel axis, independently per (batch, y, x)."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        if x.requires_grad:
            dot = (g * y).sum(axis=1, keepdims=True)
            x._accumulate(y * (g - dot))

    return from_op(y, (x,), backward_fn, "softmax_channels")


# ---------------------------------------------------------------------------
# resize / texture sampling / pixel scatter


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resampling to (out_h, out_w), edges clamped."""
    if out_h < 1 or out_w < 1:
        raise ConfigurationError("bilinear_resize: output extents must be >= 1")
    b, c, h, w = x.data.shape
    if (out_h, out_w) == (h, w):
        def backward_fn(g):
            if x.requires_grad:
                x._accumulate(g)
        return from_op(x.data.copy(), (x,), backward_fn, "bilinear_resize")

    sy = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    sx = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0).astype(np.float32)
    fx = (sx - x0).astype(np.float32)

    wy0, wy1 = (1 - fy)[:, None], fy[:, None]
    wx0, wx1 = (1 - fx)[None, :], fx[None, :]
    d = x.data
    out = (
        d[:, :, y0][:, :, :, x0] * (wy0 * wx0)
        + d[:, :, y0][:, :, :, x1] * (wy0 * wx1)
        + d[:, :, y1][:, :, :, x0] * (wy1 * wx0)
        + d[:, :, y1][:, :, :, x1] * (wy1 * wx1)
    )

    def backward_fn(g):
        if not x.requires_grad:
            return
        dflat = np.zeros((b, c, h * w), dtype=np.float32)
        bi = np.arange(b)[:, None, None]
        ci = np.arange(c)[None, :, None]
        for yi, wy in ((y0, wy0), (y1, wy1)):
            for xi, wx in ((x0, wx0), (x1, wx1)):
                idx = (yi[:, None] * w + xi[None, :]).reshape(-1)
                vals = (g * (wy * wx)).reshape(b, c, -1)
                np.add.at(dflat, (bi, ci, idx[None, None, :]), vals)
        x._accumulate(dflat.reshape(b, c, h, w))

    return from_op(out.astype(np.float32), (x,), backward_fn, "bilinear_resize")


def sample_texture(texture: Tensor, uv: np.ndarray) -> Tensor:
    """Bilinear texture lookup at N uv points; uv wraps by repeat.

    Returns a (1, C, 1, N) tensor. Gradients spread to the four neighboring
    texels with the bilinear weights. v runs bottom-up (image row 0 is the
    top of the texture, v=0 the bottom).
    """
    if texture.data.shape[0] != 1:
        raise ConfigurationError("sample_texture: texture batch extent must be 1")
    uv = np.asarray(uv, dtype=np.float64)
    if uv.ndim != 2 or uv.shape[1] != 2:
        raise ConfigurationError("sample_texture: uv must be (N, 2)")
    if not np.all(np.isfinite(uv)):
        raise NumericalError("sample_texture: non-finite uv")
    _, c, h, w = texture.data.shape
    n = uv.shape[0]

    u = uv[:, 0] - np.floor(uv[:, 0])
    v = uv[:, 1] - np.floor(uv[:, 1])
    px = u * w - 0.5
    py = (1.0 - v) * h - 0.5
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = (px - x0).astype(np.float32)
    fy = (py - y0).astype(np.float32)
    x0i = np.mod(x0, w)
    x1i = np.mod(x0 + 1, w)
    y0i = np.mod(y0, h)
    y1i = np.mod(y0 + 1, h)

    t = texture.data[0]  # (C, H, W)
    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    out = (
        t[:, y0i, x0i] * w00
        + t[:, y0i, x1i] * w01
        + t[:, y1i, x0i] * w10
        + t[:, y1i, x1i] * w11
    ).reshape(1, c, 1, n)

    def backward_fn(g):
        if not texture.requires_grad:
            return
        gflat = g.reshape(c, n)
        dt = np.zeros_like(texture.data)
        ci = np.arange(c)[:, None]
        for yi, xi, wgt in ((y0i, x0i, w00), (y0i, x1i, w01), (y1i, x0i, w10), (y1i, x1i, w11)):
            np.add.at(dt[0], (ci, yi[None, :], xi[None, :]), gflat * wgt[None, :])
        texture._accumulate(dt)

    return from_op(out.astype(np.float32), (texture,), backward_fn, "sample_texture")


def scatter_pixels(values: Tensor, rows: np.ndarray, cols: np.ndarray, height: int, width: int) -> Tensor:
    """Place N per-pixel values (1, C, 1, N) into a zeroed (1, C, H, W) image.

    Pixel positions must be unique (one sample per covered pixel).
    """
    _, c, _, n = values.data.shape
    if rows.shape != (n,) or cols.shape != (n,):
        raise ConfigurationError("scatter_pixels: index extents must match value count")
    img = np.zeros((1, c, height, width), dtype=np.float32)
    img[0, :, rows, cols] = values.data.reshape(c, n).T

    def backward_fn(g):
        if values.requires_grad:
            values._accumulate(g[0, :, rows, cols].T.reshape(values.data.shape))

    return from_op(img, (values,), backward_fn, "scatter_pixels")


# ---------------------------------------------------------------------------
# reductions


def sum_all(x: Tensor) -> Tensor:
    val = x.data.sum(dtype=np.float64)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, np.float32(g.reshape(()))))

    return from_op(np.full((1, 1, 1, 1), val, dtype=np.float32), (x,), backward_fn, "sum_all")


def mean_all(x: Tensor) -> Tensor:
    inv = 1.0 / x.data.size
    val = x.data.sum(dtype=np.float64) * inv

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, np.float32(g.reshape(()) * inv)))

    return from_op(np.full((1, 1, 1, 1), val, dtype=np.float32), (x,), backward_fn, "mean_all")


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor) -> None:
    """Reverse-topological gradient accumulation from a scalar loss.

    Populates ``.grad`` on every requires_grad tensor reachable from the
    loss. Deterministic for a fixed graph.
    """
    if loss.data.size != 1:
        raise ConfigurationError("backward: loss must be scalar")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in reversed(node._parents):
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss._accumulate(np.ones((1, 1, 1, 1), dtype=np.float32))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
