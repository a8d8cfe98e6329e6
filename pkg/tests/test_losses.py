import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from texstyle import tensor as T
from texstyle.backbones import FeatureSet, concat_style_features
from texstyle.errors import ConfigurationError
from texstyle.losses import (
    LossWeights,
    color_palette_loss,
    content_loss,
    cosine_distance,
    gram_loss,
    nnfm_loss,
    total_loss,
)
from texstyle.palette import Palette
from texstyle.tensor import Tensor

from helpers import gradcheck, gram_reference, nnfm_loops, palette_loss_loops


def bag(vectors: np.ndarray) -> Tensor:
    """(N, C) style vectors as a constant feature tensor."""
    v = np.asarray(vectors, dtype=np.float32)
    return Tensor(v.T.reshape(1, v.shape[1], 1, -1))


def feat(arr: np.ndarray, grad=False) -> Tensor:
    return Tensor(np.asarray(arr, dtype=np.float32), requires_grad=grad)


def fs(**taps) -> FeatureSet:
    return FeatureSet(taps)


# ---------------------------------------------------------------------------
# cosine distance


def test_cosine_identical_vectors():
    v = np.array([0.3, -1.2, 2.0])
    assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-7)


def test_cosine_orthogonal():
    assert cosine_distance([1, 0], [0, 1]) == pytest.approx(1.0)


def test_cosine_opposite():
    assert cosine_distance([1.0, 2.0], [-1.0, -2.0]) == pytest.approx(2.0, abs=1e-7)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_cosine_range(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(2, 5))
    d = cosine_distance(a, b)
    assert -1e-9 <= d <= 2.0 + 1e-9


# ---------------------------------------------------------------------------
# NNFM


def test_nnfm_zero_when_render_subset_of_style(rng):
    vecs = rng.normal(size=(6, 4)).astype(np.float32)
    f_i = fs(tap=feat(vecs[:4].T.reshape(1, 4, 1, 4)))
    f_s = fs(tap=bag(vecs))
    assert nnfm_loss(f_i, f_s).item() == pytest.approx(0.0, abs=1e-6)


def test_nnfm_hand_computed_two_by_two():
    f_i = fs(tap=feat(np.array([[1, 0], [0, 1]], dtype=np.float32).T.reshape(1, 2, 1, 2)))
    f_s = fs(tap=bag(np.array([[1, 0], [1, 1]], dtype=np.float32)))
    expected = 0.5 * (0.0 + (1.0 - 1.0 / np.sqrt(2.0)))
    assert nnfm_loss(f_i, f_s).item() == pytest.approx(expected, abs=1e-6)


def test_nnfm_matches_brute_force(rng):
    render = rng.normal(size=(64, 16)).astype(np.float32)
    style = rng.normal(size=(128, 16)).astype(np.float32)
    f_i = fs(tap=feat(render.T.reshape(1, 16, 1, 64)))
    f_s = fs(tap=bag(style))
    assert nnfm_loss(f_i, f_s).item() == pytest.approx(nnfm_loops(render, style), abs=1e-6)


def test_nnfm_self_is_zero_and_nonnegative(rng):
    for _ in range(5):
        v = rng.normal(size=(10, 6)).astype(np.float32)
        f = fs(tap=feat(v.T.reshape(1, 6, 1, 10)))
        s = fs(tap=bag(v))
        val = nnfm_loss(f, s).item()
        assert 0.0 <= val < 1e-6


def test_nnfm_empty_style_rejected():
    f_i = fs(tap=feat(np.ones((1, 3, 2, 2))))
    with pytest.raises(ConfigurationError):
        nnfm_loss(f_i, fs())


def test_nnfm_tap_name_mismatch():
    f_i = fs(a=feat(np.ones((1, 3, 2, 2))))
    f_s = fs(b=bag(np.ones((4, 3))))
    with pytest.raises(ConfigurationError):
        nnfm_loss(f_i, f_s)


def test_nnfm_channel_mismatch():
    f_i = fs(tap=feat(np.ones((1, 3, 2, 2))))
    f_s = fs(tap=bag(np.ones((4, 5))))
    with pytest.raises(ConfigurationError):
        nnfm_loss(f_i, f_s)


def test_nnfm_style_scale_invariance(rng):
    render = rng.normal(size=(12, 5)).astype(np.float32)
    style = rng.normal(size=(20, 5)).astype(np.float32)
    scales = rng.uniform(0.5, 2.0, size=(20, 1)).astype(np.float32)
    f_i = fs(tap=feat(render.T.reshape(1, 5, 1, 12)))
    a = nnfm_loss(f_i, fs(tap=bag(style))).item()
    b = nnfm_loss(f_i, fs(tap=bag(style * scales))).item()
    assert a == pytest.approx(b, abs=1e-6)


def test_nnfm_monotone_under_union(rng):
    render = rng.normal(size=(20, 6)).astype(np.float32)
    style = rng.normal(size=(30, 6)).astype(np.float32)
    extra = rng.normal(size=(10, 6)).astype(np.float32)
    f_i = fs(tap=feat(render.T.reshape(1, 6, 1, 20)))
    base = nnfm_loss(f_i, fs(tap=bag(style))).item()
    grown = nnfm_loss(f_i, fs(tap=bag(np.concatenate([style, extra])))).item()
    assert grown <= base + 1e-7


def test_nnfm_gradient_fd(rng):
    style = rng.normal(size=(24, 6)).astype(np.float32)
    f_s = fs(tap=bag(style))
    x0 = rng.normal(size=(1, 6, 3, 4)).astype(np.float32)
    gradcheck(lambda v: nnfm_loss(fs(tap=v), f_s), x0, rng, context="nnfm")


def test_nnfm_multi_tap_average(rng):
    r1 = rng.normal(size=(8, 4)).astype(np.float32)
    r2 = rng.normal(size=(6, 5)).astype(np.float32)
    s1 = rng.normal(size=(12, 4)).astype(np.float32)
    s2 = rng.normal(size=(9, 5)).astype(np.float32)
    f_i = fs(a=feat(r1.T.reshape(1, 4, 1, 8)), b=feat(r2.T.reshape(1, 5, 1, 6)))
    f_s = fs(a=bag(s1), b=bag(s2))
    expected = 0.5 * (nnfm_loops(r1, s1) + nnfm_loops(r2, s2))
    assert nnfm_loss(f_i, f_s).item() == pytest.approx(expected, abs=1e-6)


# ---------------------------------------------------------------------------
# concatenation


def test_concat_single_set_unchanged(rng):
    s = fs(tap=bag(rng.normal(size=(7, 3)).astype(np.float32)))
    out = concat_style_features([s])
    np.testing.assert_array_equal(out.taps["tap"].data, s.taps["tap"].data)


def test_concat_duplicates_leave_loss_unchanged(rng):
    render = rng.normal(size=(10, 4)).astype(np.float32)
    style = rng.normal(size=(15, 4)).astype(np.float32)
    f_i = fs(tap=feat(render.T.reshape(1, 4, 1, 10)))
    one = nnfm_loss(f_i, fs(tap=bag(style))).item()
    tripled = concat_style_features([fs(tap=bag(style))] * 3)
    assert nnfm_loss(f_i, tripled).item() == pytest.approx(one, abs=1e-7)


def test_concat_identity_mean_of_minima(rng):
    render = rng.normal(size=(32, 8)).astype(np.float32)
    s1 = rng.normal(size=(16, 8)).astype(np.float32)
    s2 = rng.normal(size=(24, 8)).astype(np.float32)
    f_i = fs(tap=feat(render.T.reshape(1, 8, 1, 32)))
    merged = concat_style_features([fs(tap=bag(s1)), fs(tap=bag(s2))])
    engine = nnfm_loss(f_i, merged).item()

    def per_render_minima(style):
        x = render.astype(np.float64)
        s = style.astype(np.float64)
        d = 1.0 - (x @ s.T) / (
            np.linalg.norm(x, axis=1)[:, None] * np.linalg.norm(s, axis=1)[None, :] + 1e-8
        )
        return d.min(axis=1)

    expected = np.minimum(per_render_minima(s1), per_render_minima(s2)).mean()
    # the loss leaves the engine as float32; the identity holds exactly at
    # that precision
    assert np.float32(engine) == np.float32(expected)
    both = nnfm_loss(f_i, fs(tap=bag(s1))).item()
    assert engine <= min(both, nnfm_loss(f_i, fs(tap=bag(s2))).item()) + 1e-9


def test_concat_tap_mismatch():
    with pytest.raises(ConfigurationError):
        concat_style_features([fs(a=bag(np.ones((2, 3)))), fs(b=bag(np.ones((2, 3))))])


# ---------------------------------------------------------------------------
# Gram


def test_gram_identical_sets_zero(rng):
    v = rng.normal(size=(9, 4)).astype(np.float32)
    f_i = fs(tap=feat(v.T.reshape(1, 4, 1, 9)))
    f_s = fs(tap=bag(v))
    assert gram_loss(f_i, f_s).item() == pytest.approx(0.0, abs=1e-7)


def test_gram_zero_render_gives_mean_squared_style_gram(rng):
    style = rng.normal(size=(11, 3)).astype(np.float32)
    f_i = fs(tap=feat(np.zeros((1, 3, 1, 5), dtype=np.float32)))
    f_s = fs(tap=bag(style))
    g_s = gram_reference(style)
    assert gram_loss(f_i, f_s).item() == pytest.approx((g_s**2).mean(), rel=1e-5)


def test_gram_matches_reference(rng):
    render = rng.normal(size=(14, 6)).astype(np.float32)
    style = rng.normal(size=(21, 6)).astype(np.float32)
    f_i = fs(tap=feat(render.T.reshape(1, 6, 1, 14)))
    f_s = fs(tap=bag(style))
    expected = ((gram_reference(render) - gram_reference(style)) ** 2).mean()
    assert gram_loss(f_i, f_s).item() == pytest.approx(expected, rel=1e-5, abs=1e-5)


def test_gram_gradient_fd(rng):
    style = rng.normal(size=(10, 4)).astype(np.float32)
    f_s = fs(tap=bag(style))
    x0 = rng.normal(size=(1, 4, 2, 3)).astype(np.float32)
    gradcheck(lambda v: gram_loss(fs(tap=v), f_s), x0, rng, context="gram")


# ---------------------------------------------------------------------------
# content


def test_content_identical_is_zero(rng):
    v = rng.normal(size=(1, 4, 5, 5)).astype(np.float32)
    assert content_loss(fs(tap=feat(v)), fs(tap=feat(v.copy()))).item() == 0.0


def test_content_uniform_offset(rng):
    v = rng.normal(size=(1, 3, 4, 4)).astype(np.float32)
    delta = 0.25
    out = content_loss(fs(tap=feat(v)), fs(tap=feat(v + delta)))
    assert out.item() == pytest.approx(delta**2, rel=1e-4)


def test_content_matches_elementwise_oracle(rng):
    a = rng.normal(size=(1, 3, 6, 6)).astype(np.float32)
    b = rng.normal(size=(1, 3, 6, 6)).astype(np.float32)
    expected = ((a.astype(np.float64) - b) ** 2).mean()
    assert content_loss(fs(tap=feat(a)), fs(tap=feat(b))).item() == pytest.approx(expected, rel=1e-5)


def test_content_shape_mismatch():
    with pytest.raises(ConfigurationError):
        content_loss(fs(tap=feat(np.ones((1, 3, 4, 4)))), fs(tap=feat(np.ones((1, 3, 5, 5)))))


def test_content_gradient_only_through_render(rng):
    ref_raw = feat(rng.normal(size=(1, 3, 4, 4)), grad=True)
    f_c = fs(tap=ref_raw)
    x0 = rng.normal(size=(1, 3, 4, 4)).astype(np.float32)
    gradcheck(lambda v: content_loss(f_c, fs(tap=v)), x0, rng, context="content")
    assert ref_raw.grad is None  # detached inside the loss


# ---------------------------------------------------------------------------
# color palette loss


def test_palette_loss_zero_when_texels_match(rng):
    colors = rng.uniform(size=(4, 3)).astype(np.float32)
    pal = Palette(colors)
    idx = rng.integers(0, 4, size=16)
    tex = colors[idx].T.reshape(1, 3, 4, 4)
    assert color_palette_loss(feat(tex), pal).item() == pytest.approx(0.0, abs=1e-7)


def test_palette_loss_single_texel_distance():
    pal = Palette(np.array([[0.5, 0.5, 0.5]], dtype=np.float32))
    tex = np.full((1, 3, 1, 1), 0.7, dtype=np.float32)
    d2 = 3 * 0.2**2
    assert color_palette_loss(feat(tex), pal).item() == pytest.approx(d2, rel=1e-5)


def test_palette_loss_matches_exhaustive(rng):
    colors = rng.uniform(size=(8, 3)).astype(np.float32)
    tex = rng.uniform(size=(1, 3, 6, 6)).astype(np.float32)
    got = color_palette_loss(feat(tex), Palette(colors)).item()
    assert got == pytest.approx(palette_loss_loops(tex[0], colors), abs=1e-6)


def test_palette_loss_permutation_invariant(rng):
    colors = rng.uniform(size=(5, 3)).astype(np.float32)
    tex = feat(rng.uniform(size=(1, 3, 5, 5)))
    a = color_palette_loss(tex, Palette(colors)).item()
    b = color_palette_loss(tex, Palette(colors[::-1].copy())).item()
    assert a == pytest.approx(b, abs=1e-9)


def test_palette_loss_gradient_fd(rng):
    colors = rng.uniform(size=(4, 3)).astype(np.float32)
    pal = Palette(colors)
    tex0 = rng.uniform(size=(1, 3, 4, 4)).astype(np.float32)
    gradcheck(lambda v: color_palette_loss(v, pal), tex0, rng, context="palette")


def test_palette_loss_needs_rgb():
    pal = Palette(np.array([[0.5, 0.5, 0.5]], dtype=np.float32))
    with pytest.raises(ConfigurationError):
        color_palette_loss(feat(np.ones((1, 4, 2, 2))), pal)


# ---------------------------------------------------------------------------
# total


def test_total_all_zero_terms():
    w = LossWeights()
    total, report = total_loss(
        {"nnfm": Tensor.scalar(0.0), "content": Tensor.scalar(0.0), "color": Tensor.scalar(0.0)},
        w, 0, 100,
    )
    assert total.item() == 0.0
    assert report.total == 0.0


def test_total_paper_weights_sum():
    w = LossWeights(1e4, 22.0, 2000.0)
    total, report = total_loss(
        {"nnfm": Tensor.scalar(1.0), "content": Tensor.scalar(1.0), "color": Tensor.scalar(1.0)},
        w, 0, 100,
    )
    assert report.total == pytest.approx(12022.0)
    assert total.item() == pytest.approx(12022.0, rel=1e-6)


def test_total_color_decays_to_zero_at_end():
    w = LossWeights(0.0, 0.0, 2000.0, color_decay="linear")
    _, report = total_loss({"color": Tensor.scalar(1.0)}, w, 100, 100)
    assert report.total == 0.0
    assert w.color_at(100, 100) == 0.0
    assert w.color_at(0, 100) == 2000.0


def test_total_constant_schedule():
    w = LossWeights(0.0, 0.0, 500.0, color_decay="none")
    assert w.color_at(99, 100) == 500.0


def test_total_rejects_unknown_term():
    with pytest.raises(ConfigurationError):
        total_loss({"bogus": Tensor.scalar(1.0)}, LossWeights(), 0, 10)


def test_total_backward_reaches_terms(rng):
    x = feat(rng.uniform(0.2, 0.8, size=(1, 3, 4, 4)), grad=True)
    pal = Palette(rng.uniform(size=(3, 3)).astype(np.float32))
    term = color_palette_loss(x, pal)
    total, _ = total_loss({"color": term}, LossWeights(0, 0, 10.0, "none"), 0, 10)
    T.backward(total)
    assert x.grad is not None and np.any(x.grad != 0)
