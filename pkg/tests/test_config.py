"""Config parsing: defaults, strict key checking, backend construction."""

import json

import pytest

from armada.backends import (
    HttpLlmClient,
    MockFeatureClient,
    MockImageEditor,
    MockLlmClient,
)
from armada.config import (
    PipelineConfig,
    build_editor,
    build_embedder,
    build_llm,
    load_config,
    parse_config,
)
from armada.errors import ConfigError
from armada.selection import AbsoluteBand, QuantileBand
from armada.substitution import Strategy
from pathlib import Path


def _load(tmp_path, obj):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    return load_config(path)


def test_empty_config_gives_defaults(tmp_path):
    config = _load(tmp_path, {})
    assert config.ratio == 1.0
    assert config.seed == 0
    assert config.parallelism == 1
    assert config.extractor == "llm"
    assert config.selection == QuantileBand(0.25, 0.75)
    assert config.llm.kind == "mock"
    assert config.base_dir == tmp_path
    assert config.enabled_strategies() == list(Strategy)


def test_full_config_round_trip(tmp_path):
    config = _load(
        tmp_path,
        {
            "ratio": 2.5,
            "seed": 42,
            "parallelism": 8,
            "extractor": "lexicon",
            "strategy_weights": {"WithinEntity": 2.0, "SiblingEntity": 1.0, "LlmAttribute": 0.0},
            "selection": "absolute:0:12.5",
            "backends": {
                "llm": {"kind": "mock", "fixtures": "fx.json"},
                "editor": {"kind": "mock"},
                "embedder": {"kind": "mock", "dim": 6, "rows": 5},
            },
        },
    )
    assert config.ratio == 2.5
    assert config.seed == 42
    assert config.parallelism == 8
    assert config.extractor == "lexicon"
    assert config.selection == AbsoluteBand(0.0, 12.5)
    assert config.embedder.options == {"dim": 6, "rows": 5}
    assert config.enabled_strategies() == [Strategy.WITHIN_ENTITY, Strategy.SIBLING_ENTITY]


def test_zero_weight_disables_and_heaviest_first(tmp_path):
    config = _load(tmp_path, {"strategy_weights": {"LlmAttribute": 5.0, "WithinEntity": 0.0}})
    assert config.enabled_strategies() == [Strategy.LLM_ATTRIBUTE, Strategy.SIBLING_ENTITY]


@pytest.mark.parametrize(
    "obj",
    [
        {"ratios": 1.0},
        {"ratio": "2"},
        {"ratio": -1},
        {"ratio": True},
        {"seed": 1.5},
        {"seed": False},
        {"parallelism": 0},
        {"parallelism": "4"},
        {"extractor": "regex"},
        {"strategy_weights": {"Mystery": 1.0}},
        {"strategy_weights": {"WithinEntity": -1.0}},
        {"strategy_weights": {"WithinEntity": 0, "SiblingEntity": 0, "LlmAttribute": 0}},
        {"selection": "quantile:0.9:0.1"},
        {"selection": 5},
        {"backends": {"llmx": {}}},
        {"backends": {"llm": {"kind": "grpc"}}},
        {"backends": {"llm": {"kind": "mock", "endpoint": "http://x"}}},
        {"backends": {"editor": {"kind": "mock", "fixtures": "x"}}},
        {"backends": {"embedder": {"kind": "http", "dim": 4}}},
    ],
)
def test_rejects_malformed_config(tmp_path, obj):
    with pytest.raises(ConfigError):
        _load(tmp_path, obj)


def test_rejects_invalid_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_rejects_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_parse_config_rejects_non_object():
    with pytest.raises(ConfigError):
        parse_config(["not", "an", "object"], base_dir=Path())


def test_build_llm_mock_from_file(tmp_path):
    fixtures = tmp_path / "fx.json"
    fixtures.write_text(json.dumps({"p": "r"}), encoding="utf-8")
    config = _load(tmp_path, {"backends": {"llm": {"kind": "mock", "fixtures": "fx.json"}}})
    client = build_llm(config)
    assert isinstance(client, MockLlmClient)
    assert client.complete("p") == "r"


def test_build_llm_mock_from_resource(tmp_path):
    config = _load(
        tmp_path,
        {"backends": {"llm": {"kind": "mock", "fixtures": "resource:reef_llm.json"}}},
    )
    assert isinstance(build_llm(config), MockLlmClient)


def test_build_llm_mock_requires_fixtures():
    with pytest.raises(ConfigError):
        build_llm(PipelineConfig())


def test_build_llm_http(tmp_path):
    config = _load(
        tmp_path,
        {
            "backends": {
                "llm": {
                    "kind": "http",
                    "endpoint": "http://llm.test",
                    "model": "m1",
                    "timeout": 5,
                    "max_retries": 2,
                    "rate_limit": 10,
                }
            }
        },
    )
    client = build_llm(config)
    assert isinstance(client, HttpLlmClient)
    assert client.endpoint == "http://llm.test"
    assert client.model == "m1"
    assert client.timeout == 5.0
    assert client.max_retries == 2
    assert client.rate_limiter is not None


def test_build_llm_http_requires_endpoint_and_model(tmp_path):
    config = _load(tmp_path, {"backends": {"llm": {"kind": "http", "model": "m"}}})
    with pytest.raises(ConfigError):
        build_llm(config)
    config = _load(tmp_path, {"backends": {"llm": {"kind": "http", "endpoint": "http://x"}}})
    with pytest.raises(ConfigError):
        build_llm(config)


def test_build_editor_and_embedder_mocks():
    config = PipelineConfig()
    assert isinstance(build_editor(config), MockImageEditor)
    embedder = build_embedder(config)
    assert isinstance(embedder, MockFeatureClient)
    assert (embedder.rows, embedder.dim) == (4, 8)
