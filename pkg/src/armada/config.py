"""Pipeline configuration: strict JSON with unknown keys rejected.

Backend sections choose `mock` or `http` per model and carry only the keys
that kind understands, so a typo fails the run up front instead of silently
falling back to a default.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import (
    HttpFeatureClient,
    HttpImageEditor,
    HttpLlmClient,
    MockFeatureClient,
    MockImageEditor,
    MockLlmClient,
    TokenBucket,
)
from .errors import ConfigError, InvalidBand
from .selection import DEFAULT_POLICY, AbsoluteBand, QuantileBand, parse_policy
from .substitution import Strategy

_TOP_KEYS = {
    "ratio",
    "seed",
    "parallelism",
    "extractor",
    "strategy_weights",
    "selection",
    "backends",
}
_BACKEND_SLOTS = {"llm", "editor", "embedder"}
_BACKEND_KEYS = {
    ("llm", "mock"): {"kind", "fixtures"},
    ("llm", "http"): {"kind", "endpoint", "model", "timeout", "max_retries", "rate_limit"},
    ("editor", "mock"): {"kind"},
    ("editor", "http"): {"kind", "endpoint", "timeout", "max_retries", "rate_limit"},
    ("embedder", "mock"): {"kind", "dim", "rows"},
    ("embedder", "http"): {"kind", "endpoint", "timeout", "max_retries", "rate_limit"},
}

RESOURCE_PREFIX = "resource:"


@dataclass
class BackendConfig:
    kind: str = "mock"
    options: dict = field(default_factory=dict)


def _default_weights() -> dict[Strategy, float]:
    return {strategy: 1.0 for strategy in Strategy}


@dataclass
class PipelineConfig:
    ratio: float = 1.0
    seed: int = 0
    parallelism: int = 1
    extractor: str = "llm"
    strategy_weights: dict[Strategy, float] = field(default_factory=_default_weights)
    selection: AbsoluteBand | QuantileBand = DEFAULT_POLICY
    llm: BackendConfig = field(default_factory=BackendConfig)
    editor: BackendConfig = field(default_factory=BackendConfig)
    embedder: BackendConfig = field(default_factory=BackendConfig)
    # directory the config file lives in; anchors relative fixture paths
    base_dir: Path = field(default_factory=Path)

    def enabled_strategies(self) -> list[Strategy]:
        """Strategies with positive weight, heaviest first; ties keep the
        canonical WithinEntity, SiblingEntity, LlmAttribute order."""
        order = list(Strategy)
        enabled = [s for s in order if self.strategy_weights.get(s, 0.0) > 0.0]
        return sorted(enabled, key=lambda s: (-self.strategy_weights[s], order.index(s)))


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def parse_config(obj: dict, base_dir: Path) -> PipelineConfig:
    _expect(isinstance(obj, dict), "config must be a JSON object")
    unknown = set(obj) - _TOP_KEYS
    _expect(not unknown, f"unknown config keys: {sorted(unknown)}")

    config = PipelineConfig(base_dir=base_dir)

    if "ratio" in obj:
        _expect(isinstance(obj["ratio"], (int, float)) and not isinstance(obj["ratio"], bool),
                "ratio must be a number")
        _expect(obj["ratio"] >= 0, "ratio must be nonnegative")
        config.ratio = float(obj["ratio"])
    if "seed" in obj:
        _expect(isinstance(obj["seed"], int) and not isinstance(obj["seed"], bool),
                "seed must be an integer")
        config.seed = obj["seed"]
    if "parallelism" in obj:
        _expect(isinstance(obj["parallelism"], int) and obj["parallelism"] >= 1,
                "parallelism must be an integer >= 1")
        config.parallelism = obj["parallelism"]
    if "extractor" in obj:
        _expect(obj["extractor"] in ("llm", "lexicon"),
                "extractor must be 'llm' or 'lexicon'")
        config.extractor = obj["extractor"]
    if "strategy_weights" in obj:
        weights = obj["strategy_weights"]
        _expect(isinstance(weights, dict), "strategy_weights must be an object")
        names = {s.value: s for s in Strategy}
        unknown = set(weights) - set(names)
        _expect(not unknown, f"unknown strategies in strategy_weights: {sorted(unknown)}")
        parsed = dict(_default_weights())
        for name, weight in weights.items():
            _expect(
                isinstance(weight, (int, float)) and not isinstance(weight, bool)
                and weight >= 0,
                f"weight for {name} must be a nonnegative number",
            )
            parsed[names[name]] = float(weight)
        _expect(sum(parsed.values()) > 0, "strategy weights must not all be zero")
        config.strategy_weights = parsed
    if "selection" in obj:
        _expect(isinstance(obj["selection"], str), "selection must be a policy string")
        try:
            config.selection = parse_policy(obj["selection"])
        except InvalidBand as exc:
            raise ConfigError(f"bad selection policy: {exc}") from exc
    if "backends" in obj:
        backends = obj["backends"]
        _expect(isinstance(backends, dict), "backends must be an object")
        unknown = set(backends) - _BACKEND_SLOTS
        _expect(not unknown, f"unknown backend slots: {sorted(unknown)}")
        for slot in _BACKEND_SLOTS:
            if slot not in backends:
                continue
            section = backends[slot]
            _expect(isinstance(section, dict), f"backends.{slot} must be an object")
            kind = section.get("kind", "mock")
            _expect(kind in ("mock", "http"), f"backends.{slot}.kind must be 'mock' or 'http'")
            allowed = _BACKEND_KEYS[(slot, kind)]
            unknown = set(section) - allowed
            _expect(not unknown, f"unknown keys in backends.{slot}: {sorted(unknown)}")
            options = {k: v for k, v in section.items() if k != "kind"}
            setattr(config, slot, BackendConfig(kind=kind, options=options))
    return config


def load_config(path: Path | str) -> PipelineConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from exc
    return parse_config(obj, base_dir=path.parent)


def _http_kwargs(options: dict) -> dict:
    kwargs = {}
    if "timeout" in options:
        kwargs["timeout"] = float(options["timeout"])
    if "max_retries" in options:
        kwargs["max_retries"] = int(options["max_retries"])
    rate = options.get("rate_limit")
    if rate is not None:
        kwargs["rate_limiter"] = TokenBucket(rate=float(rate))
    return kwargs


def build_llm(config: PipelineConfig):
    section = config.llm
    if section.kind == "mock":
        fixtures = section.options.get("fixtures")
        _expect(isinstance(fixtures, str) and fixtures != "",
                "mock llm backend needs a 'fixtures' file")
        if fixtures.startswith(RESOURCE_PREFIX):
            return MockLlmClient.from_resource(fixtures[len(RESOURCE_PREFIX):])
        return MockLlmClient.from_file(config.base_dir / fixtures)
    endpoint = section.options.get("endpoint")
    model = section.options.get("model")
    _expect(isinstance(endpoint, str) and endpoint != "", "http llm backend needs an endpoint")
    _expect(isinstance(model, str) and model != "", "http llm backend needs a model name")
    return HttpLlmClient(endpoint, model, **_http_kwargs(section.options))


def build_editor(config: PipelineConfig):
    section = config.editor
    if section.kind == "mock":
        return MockImageEditor()
    return HttpImageEditor(section.options.get("endpoint"), **_http_kwargs(section.options))


def build_embedder(config: PipelineConfig):
    section = config.embedder
    if section.kind == "mock":
        return MockFeatureClient(
            dim=int(section.options.get("dim", 8)),
            rows=int(section.options.get("rows", 4)),
        )
    return HttpFeatureClient(section.options.get("endpoint"), **_http_kwargs(section.options))
