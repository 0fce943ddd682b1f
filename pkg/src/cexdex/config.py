"""Scenario, detector and analysis configuration files.

Scenarios are YAML documents parsed into frozen dataclasses. Every problem raises a
:class:`~cexdex.errors.ScenarioError` naming the dotted path of the offending field.
Bundled scenarios are addressed by bare name (``default``, ``fig3``, ``subsidy``,
``volatility``); anything else is read as a file path.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import yaml

from .amm import Pool
from .analytics import AnalysisConfig
from .detect import DetectorConfig
from .errors import CexDexError, ScenarioError
from .market import (
    DEFAULT_START_TIMESTAMP,
    SLOT_SECONDS,
    CandleBar,
    PricePathConfig,
    gen_price_path,
)
from .pbs import (
    BackgroundConfig,
    BuilderProfile,
    SearcherKind,
    SearcherProfile,
    TipStyle,
    WorldState,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

SCENARIO_KEYS = {
    "name",
    "seed",
    "slots",
    "first_slot",
    "genesis",
    "output_dir",
    "chain",
    "price_paths",
    "pools",
    "searchers",
    "builders",
    "background",
    "detector",
    "analysis",
    "profit_curve",
}


@dataclass(frozen=True)
class PoolSpec:
    """Pool definition; ``price`` defaults to the off-chain price at the first slot."""

    pool_id: str
    token_x: str
    token_y: str
    liquidity: float
    fee: float = 0.003
    price: float | None = None


@dataclass(frozen=True)
class ChainSpec:
    base_fee_gwei: float = 20.0
    base_fee_floor: float = 1.0
    offchain_fee: float = 0.001
    eth_usd: float = 1600.0
    missed_slot_rate: float = 0.0
    relays: tuple[str, ...] = ("relay",)


@dataclass(frozen=True)
class ProfitCurveSpec:
    """Grid of price gaps over which the closed-form profit is tabulated."""

    liquidity: float = 1e6
    p_on: float = 1.0
    fee: float = 0.003
    offchain_fee: float = 0.001
    delta_min: float = 0.0
    delta_max: float = 0.05
    n_points: int = 101

    def deltas(self) -> np.ndarray:
        return np.linspace(self.delta_min, self.delta_max, self.n_points)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    slots: int
    first_slot: int = 1
    genesis: int = DEFAULT_START_TIMESTAMP
    output_dir: str | None = None
    chain: ChainSpec = field(default_factory=ChainSpec)
    price_paths: Mapping[str, PricePathConfig] = field(default_factory=dict)
    pools: tuple[PoolSpec, ...] = ()
    searchers: tuple[SearcherProfile, ...] = ()
    builders: tuple[BuilderProfile, ...] = ()
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    profit_curve: ProfitCurveSpec | None = None

    @property
    def slot_range(self) -> range:
        return range(self.first_slot, self.first_slot + self.slots)

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        """Fully resolved configuration, every default spelled out."""
        return {
            "name": self.name,
            "seed": self.seed,
            "slots": self.slots,
            "first_slot": self.first_slot,
            "genesis": self.genesis,
            "output_dir": self.output_dir,
            "chain": {**asdict(self.chain), "relays": list(self.chain.relays)},
            "price_paths": {
                token: {
                    k: v
                    for k, v in asdict(cfg).items()
                    if k not in ("seed", "start_timestamp")
                }
                for token, cfg in sorted(self.price_paths.items())
            },
            "pools": [asdict(pool) for pool in self.pools],
            "searchers": [_profile_dict(s) for s in self.searchers],
            "builders": [_profile_dict(b) for b in self.builders],
            "background": asdict(self.background),
            "detector": self.detector.to_dict(),
            "analysis": self.analysis.to_dict(),
            "profit_curve": None if self.profit_curve is None else asdict(self.profit_curve),
        }


def _profile_dict(profile: SearcherProfile | BuilderProfile) -> dict:
    out = {}
    for f in fields(profile):
        value = getattr(profile, f.name)
        if isinstance(value, frozenset):
            value = sorted(value)
        elif hasattr(value, "value"):
            value = value.value
        out[f.name] = value
    return out


def _check_keys(data: Mapping, allowed: Iterable[str], path: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ScenarioError(_join(path, str(unknown[0])), "unknown key")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ScenarioError(path, "expected a mapping")
    return dict(value)


def _list(value: Any, path: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ScenarioError(path, "expected a list")
    return value


_NUMERIC = {"float": float, "int": int}


def _numbers(factory: Callable[..., T], data: Mapping, path: str) -> dict:
    """Check and coerce the fields annotated ``int`` or ``float`` (optionally ``| None``).

    YAML 1.1 reads ``1.0e6`` as a string, so a bare dataclass would accept it silently.
    """
    out = dict(data)
    for f in fields(factory):  # type: ignore[arg-type]
        annotation = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        base, _, rest = annotation.partition(" | ")
        kind = _NUMERIC.get(base)
        if kind is None or f.name not in out:
            continue
        value = out[f.name]
        if value is None and rest == "None":
            continue
        valid = isinstance(value, int) if kind is int else isinstance(value, (int, float))
        if isinstance(value, bool) or not valid:
            expected = "an integer" if kind is int else "a number"
            raise ScenarioError(_join(path, f.name), f"expected {expected}, got {value!r}")
        out[f.name] = kind(value)
    return out


def _build(factory: Callable[..., T], data: Mapping, path: str) -> T:
    """Instantiate a dataclass from a mapping, translating failures into field paths."""
    allowed = {f.name for f in fields(factory)}  # type: ignore[arg-type]
    _check_keys(data, allowed, path)
    data = _numbers(factory, data, path)
    try:
        return factory(**data)
    except (TypeError, ValueError, CexDexError) as exc:
        raise ScenarioError(path, str(exc)) from exc


def _enum(enum: Callable[[Any], T], value: Any, path: str) -> T:
    try:
        return enum(value)
    except ValueError as exc:
        raise ScenarioError(path, f"invalid value {value!r}") from exc


def _searcher(data: dict, path: str) -> SearcherProfile:
    if "kind" in data:
        data["kind"] = _enum(SearcherKind, data["kind"], _join(path, "kind"))
    if "tip_style" in data:
        data["tip_style"] = _enum(TipStyle, data["tip_style"], _join(path, "tip_style"))
    if "pool_set" in data:
        pools = _list(data["pool_set"], _join(path, "pool_set"))
        data["pool_set"] = frozenset(str(p) for p in pools)
    return _build(SearcherProfile, data, path)


def _builder(data: dict, path: str) -> BuilderProfile:
    for key in ("integrated_searchers", "relay_set"):
        if key in data:
            data[key] = frozenset(str(v) for v in _list(data[key], _join(path, key)))
    return _build(BuilderProfile, data, path)


def detector_from_dict(data: Mapping, path: str = "detector") -> DetectorConfig:
    data = dict(data)
    if "established_tokens" in data:
        data["established_tokens"] = frozenset(
            str(t) for t in _list(data["established_tokens"], _join(path, "established_tokens"))
        )
    if "exempt_searchers" in data:
        exempt = _mapping(data["exempt_searchers"], _join(path, "exempt_searchers"))
        data["exempt_searchers"] = {str(k): str(v) for k, v in exempt.items()}
    return _build(DetectorConfig, data, path)


def analysis_from_dict(data: Mapping, path: str = "analysis") -> AnalysisConfig:
    data = dict(data)
    if "top_tokens" in data:
        tokens = _list(data["top_tokens"], _join(path, "top_tokens"))
        data["top_tokens"] = frozenset(str(t) for t in tokens)
    if "cdf_thresholds" in data:
        thresholds = _list(data["cdf_thresholds"], _join(path, "cdf_thresholds"))
        data["cdf_thresholds"] = tuple(float(q) for q in thresholds)
    if data.get("integrated_pairs") is not None:
        pairs = _mapping(data["integrated_pairs"], _join(path, "integrated_pairs"))
        data["integrated_pairs"] = {str(k): str(v) for k, v in pairs.items()}
    return _build(AnalysisConfig, data, path)


def parse_scenario(data: Any, source: str = "<scenario>") -> ScenarioConfig:
    """Validate a parsed YAML document and build the scenario.

    Raises
    ------
    ScenarioError
        For unknown or missing keys, wrong types, unresolved ids and invariant violations.
    """
    data = _mapping(data, "<root>")
    _check_keys(data, SCENARIO_KEYS, "")
    if "seed" not in data:
        raise ScenarioError("seed", "missing mandatory key")
    if not isinstance(data["seed"], int) or isinstance(data["seed"], bool) or data["seed"] < 0:
        raise ScenarioError("seed", "must be a nonnegative integer")
    slots = data.get("slots", 0)
    if not isinstance(slots, int) or slots < 0:
        raise ScenarioError("slots", "must be a nonnegative integer")
    first_slot = data.get("first_slot", 1)
    if not isinstance(first_slot, int) or first_slot < 1:
        raise ScenarioError("first_slot", "must be an integer of at least 1")

    chain_data = _mapping(data.get("chain"), "chain")
    if "relays" in chain_data:
        chain_data["relays"] = tuple(str(r) for r in _list(chain_data["relays"], "chain.relays"))
    chain = _build(ChainSpec, chain_data, "chain")
    if not 0 <= chain.offchain_fee < 1:
        raise ScenarioError("chain.offchain_fee", "must be in [0, 1)")
    if not 0 <= chain.missed_slot_rate <= 1:
        raise ScenarioError("chain.missed_slot_rate", "must be in [0, 1]")

    paths = {}
    for token, path_data in _mapping(data.get("price_paths"), "price_paths").items():
        path = f"price_paths.{token}"
        path_data = _mapping(path_data, path)
        if "seed" in path_data or "start_timestamp" in path_data:
            raise ScenarioError(path, "seed and start_timestamp are derived from the scenario")
        paths[str(token)] = _build(PricePathConfig, path_data, path)

    pools = []
    for i, pool_data in enumerate(_list(data.get("pools"), "pools")):
        pools.append(_build(PoolSpec, _mapping(pool_data, f"pools[{i}]"), f"pools[{i}]"))
    pool_ids = [p.pool_id for p in pools]
    _unique(pool_ids, "pools", "pool_id")

    searchers = [
        _searcher(_mapping(s, f"searchers[{i}]"), f"searchers[{i}]")
        for i, s in enumerate(_list(data.get("searchers"), "searchers"))
    ]
    _unique([s.searcher_id for s in searchers], "searchers", "searcher_id")
    builders = [
        _builder(_mapping(b, f"builders[{i}]"), f"builders[{i}]")
        for i, b in enumerate(_list(data.get("builders"), "builders"))
    ]
    builder_ids = [b.builder_id for b in builders]
    _unique(builder_ids, "builders", "builder_id")

    for i, searcher in enumerate(searchers):
        unknown = sorted(searcher.pool_set - set(pool_ids))
        if unknown:
            raise ScenarioError(f"searchers[{i}].pool_set", f"unknown pool {unknown[0]!r}")
        if searcher.builder_id is not None and searcher.builder_id not in builder_ids:
            raise ScenarioError(
                f"searchers[{i}].builder_id", f"unknown builder {searcher.builder_id!r}"
            )

    resolved_builders = []
    for i, builder in enumerate(builders):
        own = frozenset(s.searcher_id for s in searchers if s.builder_id == builder.builder_id)
        if builder.integrated_searchers and builder.integrated_searchers != own:
            raise ScenarioError(
                f"builders[{i}].integrated_searchers",
                "must list exactly the searchers naming this builder",
            )
        if not builder.relay_set <= set(chain.relays):
            raise ScenarioError(
                f"builders[{i}].relay_set", "names a relay missing from chain.relays"
            )
        resolved_builders.append(replace(builder, integrated_searchers=own))

    curve = data.get("profit_curve")
    return ScenarioConfig(
        name=str(data.get("name", Path(source).stem)),
        seed=data["seed"],
        slots=slots,
        first_slot=first_slot,
        genesis=int(data.get("genesis", DEFAULT_START_TIMESTAMP)),
        output_dir=data.get("output_dir"),
        chain=chain,
        price_paths=paths,
        pools=tuple(pools),
        searchers=tuple(searchers),
        builders=tuple(resolved_builders),
        background=_build(
            BackgroundConfig, _mapping(data.get("background"), "background"), "background"
        ),
        detector=detector_from_dict(_mapping(data.get("detector"), "detector")),
        analysis=analysis_from_dict(_mapping(data.get("analysis"), "analysis")),
        profit_curve=(
            None
            if curve is None
            else _build(ProfitCurveSpec, _mapping(curve, "profit_curve"), "profit_curve")
        ),
    )


def _unique(ids: list[str], section: str, key: str) -> None:
    seen = set()
    for i, identifier in enumerate(ids):
        if identifier in seen:
            raise ScenarioError(f"{section}[{i}].{key}", f"duplicate id {identifier!r}")
        seen.add(identifier)


def bundled_scenarios() -> list[str]:
    folder = resources.files("cexdex").joinpath("resources/scenarios")
    names = (entry.name for entry in folder.iterdir() if entry.name.endswith(".yaml"))
    return sorted(name.removesuffix(".yaml") for name in names)


def _read_yaml(text: str, source: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("<root>", f"{source} is not valid YAML ({exc})") from exc


def load_scenario(name_or_path: str | Path) -> ScenarioConfig:
    """Load a bundled scenario by name or a scenario file by path.

    Raises
    ------
    FileNotFoundError
        If the argument is neither a bundled name nor an existing file.
    ScenarioError
        If the scenario is invalid.
    """
    key = str(name_or_path)
    if key in bundled_scenarios():
        text = resources.files("cexdex").joinpath(f"resources/scenarios/{key}.yaml").read_text()
        logger.debug(f"loading bundled scenario {key}")
        return parse_scenario(_read_yaml(text, key), key)
    path = Path(name_or_path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario {key!r} is neither bundled nor a file")
    return parse_scenario(_read_yaml(path.read_text(), str(path)), str(path))


def _section_file(path: Path, section: str) -> dict:
    data = _read_yaml(Path(path).read_text(), str(path))
    data = _mapping(data, "<root>")
    # a whole scenario file may be passed; use its section
    if section in data and isinstance(data[section], Mapping):
        return dict(data[section])
    return data


def load_detector_config(path: Path | None) -> DetectorConfig:
    """Detector settings from a YAML file (or a scenario's ``detector`` section)."""
    if path is None:
        return DetectorConfig()
    return detector_from_dict(_section_file(path, "detector"), "detector")


def load_analysis_config(path: Path | None) -> AnalysisConfig:
    """Analysis settings from a YAML file (or a scenario's ``analysis`` section)."""
    if path is None:
        return AnalysisConfig()
    return analysis_from_dict(_section_file(path, "analysis"), "analysis")


def dump_yaml(data: Mapping, path: Path) -> Path:
    Path(path).write_text(yaml.safe_dump(dict(data), default_flow_style=False, sort_keys=False))
    return Path(path)


def build_price_paths(scenario: ScenarioConfig) -> dict[str, list[CandleBar]]:
    """Candle paths per token covering every lead-up window of the scenario.

    Paths start one slot before the first lead-up so latency-delayed observations are
    covered; each token's seed is derived from the scenario seed and the token's position.
    """
    start = scenario.genesis + SLOT_SECONDS * (scenario.first_slot - 2)
    paths = {}
    for i, token in enumerate(sorted(scenario.price_paths)):
        config = replace(
            scenario.price_paths[token], seed=scenario.seed * 1000 + i, start_timestamp=start
        )
        n_steps = (scenario.slots + 1) * SLOT_SECONDS // config.step_seconds
        paths[token] = gen_price_path(config, max(n_steps, 1))
    return paths


def build_world(scenario: ScenarioConfig) -> WorldState:
    """Initial world of a scenario; unpriced pools start at the off-chain price ratio."""
    usd = {token: cfg.initial_price for token, cfg in scenario.price_paths.items()}
    pools = {}
    for i, spec in enumerate(scenario.pools):
        price = spec.price
        if price is None:
            price = usd.get(spec.token_x, 1.0) / usd.get(spec.token_y, 1.0)
        try:
            pools[spec.pool_id] = Pool(
                spec.pool_id, spec.token_x, spec.token_y, spec.liquidity, price, spec.fee
            )
        except (TypeError, ValueError, CexDexError) as exc:
            raise ScenarioError(f"pools[{i}]", str(exc)) from exc
    return WorldState(
        pools=pools,
        searchers=scenario.searchers,
        builders=scenario.builders,
        background=scenario.background,
        seed=scenario.seed,
        relays=frozenset(scenario.chain.relays),
        base_fee_gwei=scenario.chain.base_fee_gwei,
        base_fee_floor=scenario.chain.base_fee_floor,
        offchain_fee=scenario.chain.offchain_fee,
        eth_usd=scenario.chain.eth_usd,
        genesis=scenario.genesis,
        missed_slot_rate=scenario.chain.missed_slot_rate,
    )
