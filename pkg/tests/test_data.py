import numpy as np
import pytest

from hitok.data import (
    SceneSpec, caption_oracle, dataset, encode_caption, make_clip, parse_caption, read_dataset, split_holdout,
    write_dataset,
)
from hitok.data.captions import BOS, COLORS, MOTIONS, PAD, SHAPES, UNK, VOCAB_SIZE
from hitok.data.oracle import foreground
from hitok.data.synth import MOTION_STEP, random_spec
from hitok.errors import ConfigError


def test_caption_encoding():
    ids = encode_caption("a red circle moves left", 8)
    assert ids.shape == (8,)
    assert ids[0] == BOS and ids[-1] == PAD
    assert UNK in encode_caption("a purple circle", 8)
    assert ids.max() < VOCAB_SIZE
    assert parse_caption("a blue square moves up") == {'color': 'blue', 'shape': 'square', 'motion': 'up'}


def test_dataset_is_deterministic():
    first = dataset(3, 4, 16, 32, 32)
    second = dataset(3, 4, 16, 32, 32)
    for (a, ca), (b, cb) in zip(first, second):
        np.testing.assert_array_equal(a, b)
        assert ca == cb
    assert first[0][0].shape == (16, 32, 32, 3)


def test_generated_clips_pass_oracle():
    for clip, caption in dataset(0, 24, 16, 32, 32):
        result = caption_oracle(clip, caption)
        assert result.passed, (caption, result.detected)


def test_oracle_rejects_mirrored_motion():
    clip, caption = make_clip(SceneSpec('square', 'green', 'right', size=10, start=(4, 2)), 16, 32, 32)
    assert caption == "a green square moves right"
    assert caption_oracle(clip, caption).passed
    mirrored = clip[:, :, ::-1]
    result = caption_oracle(mirrored, caption)
    assert result.color and not result.motion


def test_oracle_on_empty_clip():
    assert not caption_oracle(np.full((4, 16, 16, 3), 0.5), "a red square moves up").color


def test_object_leaving_frame_is_rejected():
    with pytest.raises(ConfigError):
        make_clip(SceneSpec('circle', 'red', 'left', size=10, start=(0, 5)), 16, 32, 32)


def test_dataset_store_round_trip(tmp_path):
    items = dataset(1, 3, 8, 16, 16)
    write_dataset(items, str(tmp_path))
    restored = read_dataset(str(tmp_path))
    assert [caption for _, caption in restored] == [caption for _, caption in items]
    for (clip, caption), (original, _) in zip(restored, items):
        np.testing.assert_allclose(clip, original, atol=0.5 / 255 + 1e-12)
        assert caption_oracle(clip, caption).passed
    train, held = split_holdout(restored, 1)
    assert len(train) == 2 and len(held) == 1
    with pytest.raises(ConfigError):
        split_holdout(restored, 3)
    with pytest.raises(ConfigError):
        read_dataset(str(tmp_path / 'vide'))


def test_overlong_caption_is_rejected():
    ids = encode_caption("a red circle moves left and up", 8)
    assert PAD not in ids
    with pytest.raises(ConfigError):
        encode_caption("a small red circle moves slowly to the left", 8)


def _grammar_spec(shape, color, motion, frames=16, extent=32, size=10):
    travel = frames - 1
    dy, dx = MOTION_STEP[motion]
    start = [travel if step < 0 else 0 if step > 0 else (extent - size) // 2 for step in (dy, dx)]
    return SceneSpec(shape, color, motion, speed=1, size=size, start=(start[0], start[1]))


def test_oracle_passes_every_grammar_spec():
    checked = 0
    for shape in SHAPES:
        for color in COLORS:
            for motion in MOTIONS:
                clip, caption = make_clip(_grammar_spec(shape, color, motion), 16, 32, 32)
                result = caption_oracle(clip, caption)
                assert result.passed, (caption, result.detected)
                checked += 1
    assert checked == 36


def test_random_specs_cover_the_grammar():
    rng = np.random.default_rng(0)
    seen = {(s.shape, s.color, s.motion) for s in (random_spec(rng, 16, 32, 32) for _ in range(1000))}
    assert len(seen) == 36


def test_static_and_moving_clips():
    still, _ = make_clip(SceneSpec('triangle', 'blue', 'up', speed=0, size=8, start=(4, 4)), 6, 16, 16)
    assert all(np.array_equal(still[0], frame) for frame in still[1:])
    moving, _ = make_clip(SceneSpec('square', 'red', 'right', speed=1, size=6, start=(5, 0)), 8, 16, 16)
    fg = foreground(moving)
    centroids = [np.nonzero(frame)[1].mean() for frame in fg]
    np.testing.assert_allclose(np.diff(centroids), 1.0)


def test_single_item_dataset():
    items = dataset(5, 1, 8, 16, 16)
    assert len(items) == 1
    with pytest.raises(ConfigError):
        dataset(5, 0, 8, 16, 16)
