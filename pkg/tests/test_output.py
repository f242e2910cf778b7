import json
import math
from pathlib import Path

import numpy as np
import pytest

from hitok.config import HierarchyConfig, RunConfig
from hitok.errors import BadMagicError, CodecError, TruncatedPayloadError, VersionMismatchError
from hitok.masking import build_mask
from hitok.output import (
    PpmCodec, StatsJsonFormatter, StatsTextFormatter, TokenStreamCodec, VideoCodec, bits_per_pixel,
    compression_ratio, effective_tokens, export_frames, hierarchy_stats, payload_bits,
)
from hitok.output.accounting import masked_payload_bits
from hitok.output.bitstream import BitReader, BitWriter
from hitok.tokenizer import HierTokenStream, TokenGrid

CONFIGS = Path(__file__).resolve().parent.parent / 'configs'
DESK_HEADER_BYTES = 6 + 3 * 7


def random_stream(rng, masked=False):
    layers = int(rng.integers(1, 4))
    grids = []
    for _ in range(layers):
        quant_dim = int(rng.integers(1, 20))
        shape = tuple(int(n) for n in rng.integers(1, 5, size=3))
        indices = rng.integers(0, 1 << quant_dim, size=shape)
        mask = None
        if masked and shape[0] > 1 and rng.random() < 0.7:
            mask = rng.random(shape) < 0.5
            mask[0] = False
            indices[mask] = 0
        grids.append(TokenGrid(quant_dim, indices, mask))
    stream = HierTokenStream(grids)
    if stream.is_masked:
        stream.strategy = ['repeat_prev', 'zero', 'learned'][int(rng.integers(3))]
    return stream


def header_bytes(stream):
    size = 6 + 7 * stream.num_layers
    if stream.is_masked:
        size += 1 + stream.num_layers
    return size


def desk_stream():
    cfg = HierarchyConfig()
    rng = np.random.default_rng(0)
    return HierTokenStream([TokenGrid(layer.quant_dim, rng.integers(0, layer.codebook_size, layer.latent_shape))
                            for layer in cfg.layers])


@pytest.mark.parametrize("masked", [False, True])
def test_token_stream_round_trip(masked):
    rng = np.random.default_rng(int(masked))
    codec = TokenStreamCodec()
    for _ in range(100):
        stream = random_stream(rng, masked)
        payload = codec.encode(stream)
        assert codec.decode(payload).equals(stream)
        assert len(payload) - header_bytes(stream) == math.ceil(payload_bits(stream) / 8)


def test_desk_payload_is_89_bytes():
    payload = TokenStreamCodec().encode(desk_stream())
    assert len(payload) - DESK_HEADER_BYTES == 89
    assert payload[:4] == b'HTVT'
    # couche la plus grossière en premier: quant_dim 6, grille 1x1x1
    assert payload[6:13] == bytes([6, 1, 0, 1, 0, 1, 0])


def test_token_stream_errors():
    codec = TokenStreamCodec()
    payload = codec.encode(desk_stream())
    with pytest.raises(BadMagicError):
        codec.decode(b'XXXX' + payload[4:])
    with pytest.raises(VersionMismatchError):
        codec.decode(payload[:4] + bytes([2]) + payload[5:])
    with pytest.raises(TruncatedPayloadError):
        codec.decode(payload[:-1])
    with pytest.raises(TruncatedPayloadError):
        codec.decode(payload[:10])
    with pytest.raises(CodecError):
        codec.decode(payload + b'\x00')


def test_video_round_trip_and_errors(tmp_path):
    rng = np.random.default_rng(0)
    codec = VideoCodec()
    for _ in range(100):
        shape = tuple(int(n) for n in rng.integers(1, 6, size=3)) + (int(rng.integers(1, 4)),)
        video = rng.integers(0, 256, size=shape).astype(np.uint8)
        np.testing.assert_array_equal(codec.decode_u8(codec.encode(video)), video)
    video = rng.uniform(size=(2, 3, 4, 3))
    path = str(tmp_path / 'clip.htvv')
    codec.save(video, path)
    np.testing.assert_allclose(codec.load(path), np.round(video * 255) / 255)
    payload = codec.encode(video)
    with pytest.raises(BadMagicError):
        codec.decode(b'HTVT' + payload[4:])
    with pytest.raises(VersionMismatchError):
        codec.decode(payload[:4] + bytes([9]) + payload[5:])
    with pytest.raises(TruncatedPayloadError):
        codec.decode(payload[:-1])


def test_bit_writer_is_msb_first():
    writer = BitWriter()
    writer.write(np.array([5]), 3)
    writer.write_flags(np.array([True, False]))
    assert writer.getvalue() == bytes([0b10110000])
    reader = BitReader(writer.getvalue())
    assert reader.read(1, 3).tolist() == [5]
    assert reader.read_flags(2).tolist() == [True, False]
    with pytest.raises(TruncatedPayloadError):
        reader.read(1, 8)
    with pytest.raises(CodecError):
        BitWriter().write(np.array([8]), 3)


def test_ppm_export(tmp_path):
    video = np.zeros((3, 2, 4, 1))
    video[1] = 1.0
    paths = export_frames(video, str(tmp_path / 'frames'))
    assert [p.rsplit('/', 1)[-1] for p in paths] == ['frame_0000.ppm', 'frame_0001.ppm', 'frame_0002.ppm']
    with open(paths[1], 'rb') as f:
        payload = f.read()
    assert payload.startswith(b'P6\n4 2\n255\n')
    frame = PpmCodec().decode(payload)
    assert frame.shape == (2, 4, 3) and (frame == 255).all()


def test_table3_statistics():
    cfg = RunConfig.load(f'{CONFIGS}/table3_multilayer.json').hierarchy
    stats = hierarchy_stats(cfg)
    assert [layer['tokens'] for layer in stats['layers']] == [2048, 256, 128, 16]
    assert stats['total_tokens'] == 2448
    assert stats['compression_ratio'] == pytest.approx(1713.36, abs=0.05)
    assert stats['bpp'] == pytest.approx(42800 / 4194304)
    assert round(stats['bpp'], 6) == 0.010204
    text = StatsTextFormatter().format(stats)
    assert "total tokens        : 2448" in text
    assert "compression ratio   : 1713.36" in text
    assert json.loads(StatsJsonFormatter().format(stats))['total_tokens'] == 2448


def test_single_layer_statistics():
    cfg = RunConfig.load(f'{CONFIGS}/table3_single_layer.json').hierarchy
    assert cfg.total_tokens == 2312
    assert compression_ratio(cfg.input_shape, cfg.total_tokens) == pytest.approx(4194304 / 2312)
    assert bits_per_pixel(cfg) == pytest.approx(2312 * 18 / 4194304)


def test_desk_statistics_match_payload():
    cfg = RunConfig.load(f'{CONFIGS}/desk_default.json').hierarchy
    stats = hierarchy_stats(cfg)
    assert stats['total_bits'] == 710
    assert stats['payload_bytes'] == 89
    assert stats['bpp'] == pytest.approx(710 / 16384)


def test_masked_accounting():
    cfg = HierarchyConfig()
    scores = np.zeros((3, 4, 4))
    scores[0] = 1.0
    plan = build_mask(scores, 0.85)
    assert plan.masked_count == 32
    assert effective_tokens(cfg, {0: plan}) == cfg.total_tokens - 32
    assert masked_payload_bits(cfg, {0: plan}) == 64 + 32 * 10 + 64 + 6
