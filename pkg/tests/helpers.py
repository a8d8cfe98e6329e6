"""Independent oracles shared by the test suite.

Everything here is deliberately naive: central finite differences for
gradients, nested-loop references for convolution/pooling, brute-force
scans for nearest-neighbor losses. None of it calls back into the code
paths it checks.
"""

from __future__ import annotations

import numpy as np

FD_H = 1e-3
FD_REL = 1e-2
FD_ABS = 1e-4


def fd_gradient(f, x: np.ndarray, flat_indices, h: float = FD_H) -> np.ndarray:
    """Central differences of scalar f(x) at the given flat coordinates."""
    grads = np.empty(len(flat_indices), dtype=np.float64)
    for n, idx in enumerate(flat_indices):
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[idx] += h
        xm[idx] -= h
        fp = f(xp.reshape(x.shape))
        fm = f(xm.reshape(x.shape))
        grads[n] = (fp - fm) / (2.0 * h)
    return grads


def sample_indices(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    count = min(count, size)
    return rng.choice(size, size=count, replace=False)


def assert_close_grads(analytic: np.ndarray, numeric: np.ndarray,
                       rel: float = FD_REL, abs_floor: float = FD_ABS, context: str = ""):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    tol = np.maximum(abs_floor, rel * np.maximum(np.abs(analytic), np.abs(numeric)))
    bad = np.abs(analytic - numeric) > tol
    assert not bad.any(), (
        f"{context}: {bad.sum()}/{bad.size} gradient entries off; "
        f"worst analytic={analytic[bad][:5]} vs fd={numeric[bad][:5]}"
    )


def gradcheck(build, x0: np.ndarray, rng: np.random.Generator, n_coords: int = 200,
              h: float = FD_H, rel: float = FD_REL, abs_floor: float = FD_ABS,
              context: str = ""):
    """Check backward() of `build` (ndarray -> scalar loss via the library)
    against central differences on up to n_coords sampled coordinates.

    Both sides are compared in units of a loss normalized to magnitude <= 1:
    the loss leaves the library as float32, so finite differences carry
    rounding noise ~ eps32 * |L| / h, and normalizing keeps that under the
    absolute floor while leaving the relative comparison untouched.
    """
    from texstyle import tensor as T

    x = T.Tensor(x0, requires_grad=True)
    loss = build(x)
    T.backward(loss)
    assert x.grad is not None, f"{context}: no gradient reached the input"

    s = 1.0 / max(1.0, abs(loss.item()))
    idx = sample_indices(rng, x0.size, n_coords)

    def f(arr):
        return build(T.Tensor(arr)).item() * s

    numeric = fd_gradient(f, x0.astype(np.float64), idx, h)
    analytic = x.grad.reshape(-1)[idx] * s
    assert_close_grads(analytic, numeric, rel, abs_floor, context)


# ---------------------------------------------------------------------------
# naive reference implementations


def conv2d_loops(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                 stride: int, pad: int) -> np.ndarray:
    """Direct 6-nested-loop cross-correlation in float64."""
    bs, ic, h, wd = x.shape
    oc, _, kh, kw = w.shape
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((bs, oc, oh, ow))
    for n in range(bs):
        for o in range(oc):
            for y in range(oh):
                for xx in range(ow):
                    acc = 0.0
                    for c in range(ic):
                        for i in range(kh):
                            for j in range(kw):
                                acc += xp[n, c, y * stride + i, xx * stride + j] * w[o, c, i, j]
                    out[n, o, y, xx] = acc + (b[o] if b is not None else 0.0)
    return out


def maxpool_loops(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    bs, c, h, w = x.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    out = np.zeros((bs, c, oh, ow), dtype=np.float64)
    for n in range(bs):
        for cc in range(c):
            for y in range(oh):
                for xx in range(ow):
                    out[n, cc, y, xx] = x[n, cc, y * stride : y * stride + k, xx * stride : xx * stride + k].max()
    return out


def nnfm_loops(render_vecs: np.ndarray, style_vecs: np.ndarray, eps: float = 1e-8) -> float:
    """O(MN) double loop over cosine distances, float64."""
    total = 0.0
    for fi in render_vecs.astype(np.float64):
        best = np.inf
        ni = np.linalg.norm(fi)
        for fs in style_vecs.astype(np.float64):
            d = 1.0 - fi.dot(fs) / (ni * np.linalg.norm(fs) + eps)
            if d < best:
                best = d
        total += best
    return total / len(render_vecs)


def gram_reference(vecs: np.ndarray) -> np.ndarray:
    v = vecs.astype(np.float64)
    return v.T @ v / len(v)


def blob_image(n: int = 32, period: float = 2.0) -> np.ndarray:
    """Smooth colorful (3, n, n) test image with structure at n/period px."""
    yy, xx = np.mgrid[0:n, 0:n] / n
    img = np.stack(
        [
            0.5 + 0.5 * np.sin(2 * np.pi * period * xx),
            0.5 + 0.5 * np.cos(2 * np.pi * period * yy),
            0.5 + 0.5 * np.sin(2 * np.pi * period * (xx + yy)),
        ]
    ).astype(np.float32)
    return np.clip(img, 0.0, 1.0)


def stripe_image(n: int = 32, period: int = 8, diagonal: bool = False) -> np.ndarray:
    """Two-color stripes; diagonal stripes are not symmetric under flips."""
    yy, xx = np.mgrid[0:n, 0:n]
    coord = yy + xx if diagonal else xx
    a = (coord // (period // 2)) % 2
    colors = np.array([[0.9, 0.2, 0.2], [0.2, 0.3, 0.9]], dtype=np.float32)
    return np.ascontiguousarray(colors[a].transpose(2, 0, 1))


def palette_loss_loops(texture: np.ndarray, colors: np.ndarray) -> float:
    """texture (3, H, W), colors (Q, 3): mean over texels of the squared
    distance to the nearest color."""
    _, h, w = texture.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            px = texture[:, y, x].astype(np.float64)
            total += min(((px - c.astype(np.float64)) ** 2).sum() for c in colors)
    return total / (h * w)
