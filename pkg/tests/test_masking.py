import math
from fractions import Fraction

import numpy as np
import pytest

from hitok.core.tensor import Tensor, no_grad
from hitok.errors import ShapeError, StrategyError
from hitok.masking import MaskPlan, apply_mask, build_mask, diff_matrix, evaluate_masking, get_strategy
from hitok.masking.strategies import RepeatPrevStrategy
from hitok.tokenizer import HierLatents, HierTokenizer
from hitok.tokenizer.lfq import codes_from_indices, index_to_signs


def strict_mean_candidates(scores):
    """Oracle exact: positions strictement sous la moyenne, en arithmétique rationnelle."""
    values = [Fraction(float(s)) for s in scores.ravel()]
    mean = sum(values, Fraction(0)) / len(values)
    return np.array([v < mean for v in values]).reshape(scores.shape)


def test_mask_properties_on_random_grids():
    rng = np.random.default_rng(0)
    for trial in range(1000):
        shape = (int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        scores = rng.integers(0, 9, size=shape) / 8.0
        cap = 0.85 if trial % 2 else float(rng.uniform(0.05, 1.0))
        plan = build_mask(scores, cap, np.random.default_rng(trial))
        oracle = strict_mean_candidates(scores)

        assert plan.mask.shape == (shape[0] + 1,) + shape[1:]
        assert not plan.mask[0].any()
        assert plan.masked_fraction <= cap
        assert not (plan.mask[1:] & ~oracle).any()
        assert plan.masked_count == min(int(oracle.sum()), math.floor(cap * scores.size))
        plan.validate()


def test_equal_scores_mask_nothing():
    plan = build_mask(np.full((3, 2, 2), 0.25), 0.85)
    assert plan.masked_count == 0
    assert plan.kept_fraction == 1.0


def test_cap_subset_is_seeded():
    scores = np.zeros((4, 4, 4))
    scores[0, 0, 0] = 1.0
    first = build_mask(scores, 0.5, np.random.default_rng(7))
    second = build_mask(scores, 0.5, np.random.default_rng(7))
    assert first.masked_count == 32
    np.testing.assert_array_equal(first.mask, second.mask)


def test_diff_matrix_is_normalized_hamming():
    signs = index_to_signs(np.array([[[0]], [[3]], [[3]]]), 4)
    np.testing.assert_allclose(diff_matrix(signs)[:, 0, 0], [0.5, 0.0])
    with pytest.raises(ShapeError):
        diff_matrix(np.ones((2, 2, 2)))


def test_repeat_prev_follows_chains():
    latent = Tensor(np.arange(4, dtype=float).reshape(4, 1, 1, 1))
    mask = np.array([False, True, True, False]).reshape(4, 1, 1)
    out = apply_mask(latent, MaskPlan(mask, 'repeat_prev'))
    assert out.data.reshape(-1).tolist() == [0.0, 0.0, 0.0, 3.0]
    assert RepeatPrevStrategy.source_positions(mask).reshape(-1).tolist() == [0, 0, 0, 3]


def test_repeat_prev_gradient_flows_to_source(float64):
    latent = Tensor(np.ones((3, 1, 1, 2)), requires_grad=True)
    mask = np.array([False, True, False]).reshape(3, 1, 1)
    apply_mask(latent, MaskPlan(mask)).sum().backward()
    np.testing.assert_array_equal(latent.grad[:, 0, 0, 0], [2.0, 0.0, 1.0])


def test_zero_and_learned_strategies():
    latent = Tensor(np.ones((2, 1, 2, 3)))
    mask = np.array([[[False, False]], [[True, False]]])
    zero = apply_mask(latent, MaskPlan(mask, 'zero'))
    assert zero.data[1, 0, 0].tolist() == [0.0, 0.0, 0.0]
    token = Tensor([0.5, -0.5, 2.0])
    learned = apply_mask(latent, MaskPlan(mask, 'learned'), token)
    assert learned.data[1, 0, 0].tolist() == [0.5, -0.5, 2.0]
    assert learned.data[1, 0, 1].tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(StrategyError):
        apply_mask(latent, MaskPlan(mask, 'learned'))
    with pytest.raises(StrategyError):
        apply_mask(latent, MaskPlan(mask, 'zero'), token)


def test_frame_zero_and_unknown_strategy_are_rejected():
    with pytest.raises(StrategyError):
        MaskPlan(np.zeros((2, 1, 1), dtype=bool), 'blur')
    with pytest.raises(StrategyError):
        get_strategy('blur')
    bad = MaskPlan(np.array([True, False]).reshape(2, 1, 1))
    with pytest.raises(StrategyError):
        bad.validate()
    with pytest.raises(StrategyError):
        apply_mask(Tensor(np.ones((2, 1, 1, 1))), bad)


def _static_latents(tokenizer, rng):
    """Codes constants dans le temps, sauf quelques positions de l'image 1."""
    codes = []
    for layer in tokenizer.cfg.layers:
        t, h, w = layer.latent_shape
        frame = rng.integers(0, 1 << layer.quant_dim, size=(1, h, w))
        indices = np.repeat(frame, t, axis=0)
        if t > 1:
            indices[1, 0, 0] = (indices[1, 0, 0] + 1) % (1 << layer.quant_dim)
        codes.append(codes_from_indices(indices[None], layer.quant_dim))
    return HierLatents(codes, [None] * len(codes))


def test_repeat_masking_of_static_regions_is_lossless(tiny_hierarchy):
    tokenizer = HierTokenizer(tiny_hierarchy, seed=1)
    latents = _static_latents(tokenizer, np.random.default_rng(3))
    plans = tokenizer.plan_masks(latents, strategy='repeat_prev', cap=0.85)
    assert plans[0].masked_count > 0
    with no_grad():
        full = tokenizer.decode(latents, masks={})
        masked = tokenizer.decode(latents, masks=plans)
    np.testing.assert_array_equal(masked, full)


def test_masked_stream_round_trip_through_latents(tiny_hierarchy):
    tokenizer = HierTokenizer(tiny_hierarchy, seed=2)
    latents = _static_latents(tokenizer, np.random.default_rng(4))
    latents.masks = tokenizer.plan_masks(latents, strategy='zero')
    stream = latents.to_stream()
    assert stream.is_masked and stream.strategy == 'zero'
    assert (stream.grids[0].indices[stream.grids[0].mask] == 0).all()
    restored = HierLatents.from_stream(stream)
    np.testing.assert_array_equal(restored.masks[0].mask, latents.masks[0].mask)


def test_masking_report_on_static_clip(tiny_hierarchy, monkeypatch):
    tokenizer = HierTokenizer(tiny_hierarchy, seed=5)
    latents = _static_latents(tokenizer, np.random.default_rng(6))
    monkeypatch.setattr(tokenizer, 'encode', lambda video: latents)
    video = np.random.default_rng(7).uniform(size=(8, 16, 16, 3))
    report = evaluate_masking(tokenizer, video, cap=0.85, seed=0)
    assert set(report['strategies']) == {'repeat_prev', 'zero', 'learned'}
    assert report['strategies']['repeat_prev'] == report['unmasked_psnr']
    plans = tokenizer.plan_masks(latents, strategy='learned', cap=0.85, seed=0)
    masked = sum(plan.masked_count for plan in plans.values())
    assert masked > 0
    assert report['total_tokens'] == tiny_hierarchy.total_tokens == 36
    assert report['effective_tokens'] == report['total_tokens'] - masked
    assert report['layer0_masked'] == pytest.approx(plans[0].masked_fraction)
