import numpy as np
import pytest

from hitok.config import HierarchyConfig, SamplingParams
from hitok.core.tensor import Tensor, no_grad
from hitok.data import encode_caption
from hitok.errors import ConfigError, ShapeError
from hitok.generator import (
    Generator, IncrementalDecoder, KvCache, SequenceLayout, cfg_logits, generate, generate_tokens, rope3d, sample_token,
    seed_diversity, teacher_forced_accuracy, token_probabilities, top_k_filter,
)
from hitok.generator.pipeline import DEFAULT_SWEEP, generate_sweep, layer_cross_entropy
from hitok.tokenizer import HierTokenizer, HierTokenStream

CAPTION = "a red square moves right"


def random_tokens(layout, rng):
    return np.concatenate([rng.integers(0, layout.vocab_size(m), size=end - start)
                           for m, start, end in layout.segments])


def test_desk_layout():
    layout = SequenceLayout.from_hierarchy(HierarchyConfig(), 8)
    assert layout.video_length == 73 and layout.total_length == 81
    assert layout.segments == ((2, 0, 1), (1, 1, 9), (0, 9, 73))
    assert layout.layer_ids[:8].tolist() == [3] * 8
    assert layout.layer_ids[8:11].tolist() == [2, 1, 1]
    assert layout.coordinates[3].tolist() == [3, 0, 0]
    # deuxième jeton de la couche 1 (grille 2x2x2, ordre raster)
    assert layout.coordinates[8 + 2].tolist() == [0, 0, 1]
    assert layout.coordinates[-1].tolist() == [3, 3, 3]
    parts = layout.split_tokens(np.arange(73))
    assert [p.size for p in parts] == [64, 8, 1]
    assert parts[2].tolist() == [0]
    assert layout.owner(0) == 2 and layout.owner(9) == 0
    with pytest.raises(ShapeError):
        layout.owner(73)


def test_rope_relative_offset_on_each_axis():
    rng = np.random.default_rng(0)
    allocation = (6, 6, 4)
    worst = 0.0
    for _ in range(100):
        q, k = rng.normal(size=16), rng.normal(size=16)
        axis = int(rng.integers(3))
        p, delta, shift = (int(v) for v in rng.integers(0, 50, size=3))
        positions = np.tile(rng.integers(0, 20, size=3), (2, 1))
        positions[0, axis] = p
        positions[1, axis] = p + delta
        x = Tensor(np.stack([q, k]), dtype=np.float64)
        a = rope3d(x, positions, allocation).data
        moved = positions.copy()
        moved[:, axis] += shift
        b = rope3d(x, moved, allocation).data
        worst = max(worst, abs(a[0] @ a[1] - b[0] @ b[1]))
    assert worst < 1e-5


def test_rope_rejects_bad_allocation():
    with pytest.raises(ShapeError):
        rope3d(Tensor(np.ones((1, 16))), np.zeros((1, 3)), (6, 6, 6))


def test_cfg_identities():
    rng = np.random.default_rng(1)
    cond, uncond = rng.normal(size=10), rng.normal(size=10)
    np.testing.assert_array_equal(cfg_logits(cond, uncond, 1.0), cond)
    np.testing.assert_array_equal(cfg_logits(cond, uncond, 0.0), uncond)
    np.testing.assert_allclose(cfg_logits(np.array([1.0, 2.0]), np.zeros(2), 7.5), [7.5, 15.0], atol=1e-7)
    with pytest.raises(ShapeError):
        cfg_logits(cond, uncond[:5], 2.0)


def test_sampling_filters():
    logits = np.array([1.0, 3.0, 2.0, -1.0])
    assert np.isneginf(top_k_filter(logits, 2)[[0, 3]]).all()
    probs = token_probabilities(logits, top_k=2)
    assert probs[0] == 0.0 and probs[3] == 0.0
    assert probs.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(token_probabilities(logits + 100.0, 0.7), token_probabilities(logits, 0.7), atol=1e-7)
    assert sample_token(logits, np.random.default_rng(0), top_k=1) == 1
    draws = [sample_token(logits, np.random.default_rng(s), temperature=0.5) for s in range(5)]
    assert draws == [sample_token(logits, np.random.default_rng(s), temperature=0.5) for s in range(5)]
    with pytest.raises(ShapeError):
        token_probabilities(logits, temperature=0.0)


def test_kv_cache_matches_full_recompute(small_generator):
    rng = np.random.default_rng(2)
    layout = small_generator.layout
    text_ids = encode_caption(CAPTION, 8)
    worst = 0.0
    checked = 0
    with no_grad():
        for _ in range(2):
            tokens = random_tokens(layout, rng)
            decoder = IncrementalDecoder(small_generator, text_ids)
            cached = decoder.start()
            prefixes = set(rng.choice(layout.video_length, size=10, replace=False).tolist())
            for n in range(layout.video_length):
                if n in prefixes:
                    full = small_generator.next_logits(text_ids, tokens[:n])
                    worst = max(worst, float(np.abs(cached - full).max()))
                    checked += 1
                cached = decoder.feed(int(tokens[n]))
            assert cached is None
            assert decoder.cache.length == layout.total_length - 1
    assert checked == 20
    assert worst < 1e-4


def test_cache_consistency_checks(small_generator):
    cache = KvCache(2)
    cache.store(0, np.zeros((1, 2, 3, 16)), np.zeros((1, 2, 3, 16)))
    with pytest.raises(ShapeError):
        cache.length
    decoder = IncrementalDecoder(small_generator, encode_caption(CAPTION, 8))
    decoder.start()
    with pytest.raises(ShapeError):
        decoder.start()


def test_training_logits_use_shifted_supervision(small_generator):
    rng = np.random.default_rng(3)
    layout = small_generator.layout
    tokens = random_tokens(layout, rng)[None]
    text = encode_caption(CAPTION, 8)[None]
    with no_grad():
        logits = small_generator.training_logits(text, np.array([False]), tokens, training=False)
        assert [l.shape for l in logits] == [(32, 64), (4, 16)]
        changed = tokens.copy()
        j = 10
        start, _ = layout.segment_of(0)
        changed[0, j] = (changed[0, j] + 1) % layout.vocab_size(layout.owner(j))
        other = small_generator.training_logits(text, np.array([False]), changed, training=False)
    # la prédiction du jeton j ne voit que les jetons < j
    row = j - start
    np.testing.assert_allclose(other[0].data[:row + 1], logits[0].data[:row + 1], atol=1e-5)
    assert not np.allclose(other[0].data[row + 1:], logits[0].data[row + 1:])
    np.testing.assert_allclose(other[1].data, logits[1].data, atol=1e-5)


def test_unconditional_prefix_ignores_caption(small_generator):
    layout = small_generator.layout
    tokens = random_tokens(layout, np.random.default_rng(4))[:5]
    with no_grad():
        a = small_generator.next_logits(encode_caption("a red circle moves up", 8), tokens, uncond=True)
        b = small_generator.next_logits(encode_caption("a blue square moves left", 8), tokens, uncond=True)
        c = small_generator.next_logits(encode_caption("a blue square moves left", 8), tokens, uncond=False)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(b, c)


def test_generation_is_seeded_and_valid(small_generator, tiny_hierarchy):
    params = SamplingParams(cfg_scale=7.5, seed=11)
    first = generate_tokens(small_generator, CAPTION, params)
    second = generate_tokens(small_generator, CAPTION, params)
    assert first.equals(second)
    assert first.total_tokens == small_generator.layout.video_length
    assert [g.quant_dim for g in first.grids] == [6, 4]
    result = generate(HierTokenizer(tiny_hierarchy), small_generator, CAPTION, params)
    assert result.video.shape == tiny_hierarchy.input_shape
    study = seed_diversity(small_generator, CAPTION, seeds=[0, 1, 2], params=SamplingParams(cfg_scale=1.0))
    assert study['pairs'] == 3
    assert study['distinct_pairs'] == 3


def test_cfg_sweep_shares_seed_and_caption(small_generator, tiny_hierarchy):
    results = generate_sweep(HierTokenizer(tiny_hierarchy), small_generator, CAPTION, SamplingParams(seed=4))
    assert DEFAULT_SWEEP == (1.0, 5.0, 7.5)
    assert [r.params.cfg_scale for r in results] == [1.0, 5.0, 7.5]
    for result in results:
        assert result.caption == CAPTION and result.params.seed == 4
        assert result.stream.total_tokens == 36
        assert [g.quant_dim for g in result.stream.grids] == [6, 4]
        assert result.video.shape == tiny_hierarchy.input_shape
        assert 0.0 <= result.video.min() and result.video.max() <= 1.0


def test_generation_limits(small_generator, tiny_hierarchy):
    with pytest.raises(ConfigError):
        generate_tokens(small_generator, CAPTION, SamplingParams(max_tokens=10))
    other = HierarchyConfig()
    with pytest.raises(ConfigError):
        generate(HierTokenizer(other), small_generator, CAPTION)


def test_teacher_forced_reports_every_layer(small_generator):
    layout = small_generator.layout
    flat = random_tokens(layout, np.random.default_rng(5))
    stream = HierTokenStream.from_flat(flat, list(layout.layers))
    accuracy = teacher_forced_accuracy(small_generator, CAPTION, stream)
    assert set(accuracy) == {0, 1}
    assert all(0.0 <= value <= 1.0 for value in accuracy.values())
    ce = layer_cross_entropy(small_generator, CAPTION, stream)
    assert all(value > 0 for value in ce.values())


def test_decoder_requires_start(small_generator):
    decoder = IncrementalDecoder(small_generator, None, uncond=True)
    with pytest.raises(ShapeError):
        decoder.feed(0)


def test_generator_checkpoint_round_trip(small_generator, tiny_hierarchy, tmp_path):
    from hitok.config import RunConfig

    run = RunConfig(hierarchy=tiny_hierarchy, generator=small_generator.cfg)
    path = str(tmp_path / 'gen.htck')
    small_generator.save(path, run)
    loaded = Generator.load(path)
    text_ids = encode_caption(CAPTION, 8)
    tokens = np.array([1, 2, 3], dtype=np.int64)
    with no_grad():
        np.testing.assert_allclose(loaded.next_logits(text_ids, tokens), small_generator.next_logits(text_ids, tokens))
