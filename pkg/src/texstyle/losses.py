"""Style, content, and color losses over feature sets and textures.

The style losses treat their style operand as gradient-constant; only the
render features carry gradients. Distance computations run in float64 and
only the final scalars are cast back to float32 tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .backbones import FeatureSet, concat_style_features  # noqa: F401  (re-export)
from .errors import ConfigurationError
from .palette import Palette
from .tensor import Tensor, from_op

COSINE_EPS = 1e-8


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - a.b / (|a||b| + eps), in [0, 2]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = np.linalg.norm(a) * np.linalg.norm(b) + COSINE_EPS
    return float(1.0 - a.dot(b) / denom)


def _check_tap_match(f_i: FeatureSet, f_s: FeatureSet, op: str) -> None:
    if not f_s.taps or any(t.data.size == 0 for t in f_s.taps.values()):
        raise ConfigurationError(f"{op}: empty style feature set")
    if f_i.tap_names() != f_s.tap_names():
        raise ConfigurationError(
            f"{op}: tap mismatch {f_i.tap_names()} vs {f_s.tap_names()}"
        )
    for name in f_i.tap_names():
        ci = f_i.taps[name].data.shape[1]
        cs = f_s.taps[name].data.shape[1]
        if ci != cs:
            raise ConfigurationError(f"{op}: channel width mismatch at '{name}' ({ci} vs {cs})")


def _mean_of(terms: list[Tensor]) -> Tensor:
    out = terms[0]
    for t in terms[1:]:
        out = T.add(out, t)
    return T.scale(out, 1.0 / len(terms))


def _nnfm_tap(f_i: Tensor, style_vectors: np.ndarray) -> Tensor:
    """Mean over render vectors of the cosine distance to the nearest style
    vector; the nearest index is chosen once and held constant in backward."""
    b, c, h, w = f_i.data.shape
    m = b * h * w
    x = f_i.data.transpose(0, 2, 3, 1).reshape(m, c).astype(np.float64)
    s = style_vectors.astype(np.float64)

    xn = np.linalg.norm(x, axis=1)
    sn = np.linalg.norm(s, axis=1)
    dots = x @ s.T
    denom = xn[:, None] * sn[None, :] + COSINE_EPS
    dist = 1.0 - dots / denom
    nearest = dist.argmin(axis=1)  # ties -> lowest index
    rows = np.arange(m)
    loss = dist[rows, nearest].sum() / m

    def backward_fn(g):
        if not f_i.requires_grad:
            return
        gs = float(g.reshape(())) / m
        s_star = s[nearest]                      # (m, c)
        sn_star = sn[nearest]                    # (m,)
        den = xn * sn_star + COSINE_EPS          # (m,)
        dot_star = dots[rows, nearest]           # (m,)
        xn_safe = np.maximum(xn, 1e-20)
        grad = -s_star / den[:, None] + (dot_star * sn_star / (xn_safe * den**2))[:, None] * x
        grad *= gs
        f_i._accumulate(grad.reshape(b, h, w, c).transpose(0, 3, 1, 2).astype(np.float32))

    return from_op(np.full((1, 1, 1, 1), loss, dtype=np.float32), (f_i,), backward_fn, "nnfm_tap")


def nnfm_loss(f_i: FeatureSet, f_s: FeatureSet) -> Tensor:
    """Nearest-neighbor feature matching: per tap, each render vector is
    matched to its closest style vector in cosine distance and the distances
    are averaged; tap losses are then averaged."""
    _check_tap_match(f_i, f_s, "nnfm_loss")
    return _mean_of([_nnfm_tap(f_i.taps[n], f_s.vectors(n)) for n in f_i.tap_names()])


def _gram(x: np.ndarray) -> np.ndarray:
    """Channel Gram matrix of a (count, C) vector bag: C x C / count."""
    return x.T.astype(np.float64) @ x.astype(np.float64) / len(x)


def _gram_tap(f_i: Tensor, style_vectors: np.ndarray) -> Tensor:
    b, c, h, w = f_i.data.shape
    m = b * h * w
    x = f_i.data.transpose(1, 0, 2, 3).reshape(c, m).astype(np.float64)
    g_i = x @ x.T / m
    g_s = _gram(style_vectors)
    diff = g_i - g_s
    loss = (diff * diff).sum() / (c * c)

    def backward_fn(g):
        if not f_i.requires_grad:
            return
        gs = float(g.reshape(()))
        grad = (4.0 * gs / (c * c * m)) * (diff @ x)
        f_i._accumulate(grad.reshape(c, b, h, w).transpose(1, 0, 2, 3).astype(np.float32))

    return from_op(np.full((1, 1, 1, 1), loss, dtype=np.float32), (f_i,), backward_fn, "gram_tap")


def gram_loss(f_i: FeatureSet, f_s: FeatureSet) -> Tensor:
    """Baseline style loss: mean squared difference of channel Gram matrices,
    averaged over taps."""
    _check_tap_match(f_i, f_s, "gram_loss")
    return _mean_of([_gram_tap(f_i.taps[n], f_s.vectors(n)) for n in f_i.tap_names()])


def content_loss(f_c: FeatureSet, f_i: FeatureSet) -> Tensor:
    """Mean squared feature difference per tap, averaged over taps. The
    content side is detached: gradient flows only through the render."""
    if f_c.tap_names() != f_i.tap_names():
        raise ConfigurationError(
            f"content_loss: tap mismatch {f_c.tap_names()} vs {f_i.tap_names()}"
        )
    terms = []
    for name in f_i.tap_names():
        a = f_i.taps[name]
        ref = f_c.taps[name]
        if a.data.shape != ref.data.shape:
            raise ConfigurationError(
                f"content_loss: shape mismatch at '{name}' ({a.data.shape} vs {ref.data.shape})"
            )
        d = T.sub(a, ref.detach())
        terms.append(T.mean_all(T.mul(d, d)))
    return _mean_of(terms)


def color_palette_loss(texture_sum: Tensor, palette: Palette) -> Tensor:
    """Per texel, squared RGB distance to the nearest palette color, averaged
    over texels. The nearest assignment is constant in backward."""
    if len(palette.colors) == 0:
        raise ConfigurationError("color_palette_loss: empty palette")
    _, c, h, w = texture_sum.data.shape
    if c != 3:
        raise ConfigurationError(f"color_palette_loss: texture must have 3 channels, got {c}")
    npix = h * w
    x = texture_sum.data.reshape(3, npix).T.astype(np.float64)
    centers = palette.colors.astype(np.float64)
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    residual = x - centers[assign]
    loss = (residual * residual).sum() / npix

    def backward_fn(g):
        if not texture_sum.requires_grad:
            return
        gs = float(g.reshape(())) * 2.0 / npix
        texture_sum._accumulate((gs * residual).T.reshape(1, 3, h, w).astype(np.float32))

    return from_op(
        np.full((1, 1, 1, 1), loss, dtype=np.float32), (texture_sum,), backward_fn, "palette_loss"
    )


# ---------------------------------------------------------------------------
# weighting


@dataclass
class LossWeights:
    lambda_nnfm: float = 1e4
    lambda_content: float = 22.0
    lambda_color: float = 2000.0
    color_decay: str = "linear"  # linear to zero over the run, or "none"

    def __post_init__(self):
        for v in (self.lambda_nnfm, self.lambda_content, self.lambda_color):
            if not np.isfinite(v) or v < 0:
                raise ConfigurationError("loss weights must be finite and non-negative")
        if self.color_decay not in ("linear", "none"):
            raise ConfigurationError(f"unknown color decay '{self.color_decay}'")

    def color_at(self, iteration: int, total_iterations: int) -> float:
        if self.color_decay == "none":
            return self.lambda_color
        if total_iterations <= 0:
            return self.lambda_color
        frac = min(max(iteration / total_iterations, 0.0), 1.0)
        return self.lambda_color * (1.0 - frac)


@dataclass
class LossReport:
    iteration: int
    nnfm: float
    content: float
    color: float
    total: float

    CSV_HEADER = "iteration,nnfm,content,color,total"

    def csv_row(self) -> str:
        return f"{self.iteration},{self.nnfm!r},{self.content!r},{self.color!r},{self.total!r}"


def total_loss(
    terms: dict[str, Tensor],
    weights: LossWeights,
    iteration: int,
    total_iterations: int,
) -> tuple[Tensor, LossReport]:
    """Weighted sum of available loss terms; lambda_color follows its decay
    schedule. Returns the backprop-able total and the 64-bit report."""
    lam = {
        "nnfm": weights.lambda_nnfm,
        "content": weights.lambda_content,
        "color": weights.color_at(iteration, total_iterations),
    }
    for key in terms:
        if key not in lam:
            raise ConfigurationError(f"total_loss: unknown term '{key}'")

    total_t: Tensor | None = None
    vals = {}
    acc = 0.0
    for key, weight in lam.items():
        term = terms.get(key)
        vals[key] = term.item() if term is not None else 0.0
        acc += weight * vals[key]
        if term is not None and weight != 0.0:
            contrib = T.scale(term, weight)
            total_t = contrib if total_t is None else T.add(total_t, contrib)
    if total_t is None:
        total_t = Tensor.scalar(0.0)
    report = LossReport(iteration, vals["nnfm"], vals["content"], vals["color"], acc)
    return total_t, report
