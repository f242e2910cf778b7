import json
from pathlib import Path

import pytest

from hitok.config import HierarchyConfig, RunConfig, SamplingParams, load_sidecar, sidecar_path
from hitok.errors import ConfigError, HitokError, StrategyError, TruncatedPayloadError
from hitok.settings import THREADS_ENV, thread_count

CONFIGS = Path(__file__).resolve().parent.parent / 'configs'


@pytest.mark.parametrize("name", ['desk_default.json', 'table3_multilayer.json', 'table3_single_layer.json'])
def test_bundled_configs_load(name):
    config = RunConfig.load(str(CONFIGS / name))
    config.hierarchy.validate()


def test_desk_file_matches_defaults():
    assert RunConfig.load(str(CONFIGS / 'desk_default.json')).to_dict() == RunConfig().to_dict()


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({'hierarchy': {'widths': [1]}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({'optimizer': {}})


@pytest.mark.parametrize("section", [
    {'hierarchy': {'mask_cap': 0.0}},
    {'hierarchy': {'mask_strategy': 'blur'}},
    {'hierarchy': {'layers': [{'quant_dim': 64, 'latent_shape': [4, 4, 4]}]}},
    {'hierarchy': {'layers': [{'quant_dim': 10, 'latent_shape': [4, 4, 4]},
                              {'quant_dim': 8, 'latent_shape': [4, 4, 4]}]}},
    {'generator': {'hidden': 130}},
    {'generator': {'rope_allocation': [12, 10, 11]}},
    {'sampling': {'temperature': 0}},
    {'tokenizer_train': {'progressive_boundary': 1.5}},
])
def test_invalid_values_are_rejected(section):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(section)


def test_echo_round_trip(tmp_path):
    config = RunConfig.from_dict({'sampling': {'cfg_scale': 5.0, 'top_k': 8}})
    path = str(tmp_path / 'model.htck')
    config.echo(sidecar_path(path))
    restored = load_sidecar(path)
    assert restored.sampling == SamplingParams(cfg_scale=5.0, top_k=8)
    with open(sidecar_path(path)) as f:
        assert json.load(f)['hierarchy']['input_shape'] == [16, 32, 32, 3]


def test_invalid_json_is_a_config_error(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"hierarchy": ')
    with pytest.raises(ConfigError):
        RunConfig.load(str(path))


def test_hierarchy_arithmetic():
    cfg = HierarchyConfig()
    assert cfg.stride_product == (4, 8, 8)
    assert cfg.compressor_strides() == [(2, 2, 2), (2, 2, 2)]
    assert cfg.token_counts() == [64, 8, 1]


def test_error_lines_and_exit_codes():
    assert ConfigError("champ\ninconnu").one_line() == "error: config: champ inconnu"
    assert TruncatedPayloadError("x").exit_code == 3
    assert StrategyError("x").exit_code == 2
    assert issubclass(TruncatedPayloadError, HitokError)


def test_thread_count(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "4")
    assert thread_count() == 4
    monkeypatch.setenv(THREADS_ENV, "beaucoup")
    assert thread_count() == 1
    monkeypatch.delenv(THREADS_ENV)
    assert thread_count() == 1
