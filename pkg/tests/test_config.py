"""NumPy-style tests for scenario and section config files."""

import pathlib

import pytest
import yaml

from cexdex.config import (
    build_price_paths,
    build_world,
    bundled_scenarios,
    dump_yaml,
    load_analysis_config,
    load_detector_config,
    load_scenario,
    parse_scenario,
)
from cexdex.errors import ScenarioError
from cexdex.market import SLOT_SECONDS, slot_leadup_volatility
from cexdex.pbs import SearcherKind

MINIMAL = {
    "seed": 1,
    "slots": 3,
    "price_paths": {"ETH": {"initial_price": 1600.0, "vol_per_step": 0.0005}},
    "pools": [{"pool_id": "ETH-USDC", "token_x": "ETH", "token_y": "USDC", "liquidity": 1e5}],
    "searchers": [
        {"searcher_id": "s1", "pool_set": ["ETH-USDC"]},
        {"searcher_id": "s2", "kind": "integrated", "builder_id": "b1", "pool_set": ["ETH-USDC"]},
    ],
    "builders": [{"builder_id": "b1"}, {"builder_id": "b2"}],
}


def _scenario(**changes: object) -> dict:
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data.update(changes)
    return data


def test_bundled_scenarios_load() -> None:
    """Test that every bundled scenario parses and builds a world.

    Notes
    -----
    Price paths must cover every slot's lead-up window.
    """
    assert {"default", "fig3", "subsidy", "volatility"} <= set(bundled_scenarios())
    for name in bundled_scenarios():
        scenario = load_scenario(name)
        world = build_world(scenario)
        assert set(world.pools) == {p.pool_id for p in scenario.pools}
        for pool in world.pools.values():
            assert isinstance(pool.liquidity, float) and pool.liquidity > 0
        paths = build_price_paths(scenario)
        for bars in paths.values():
            slot_leadup_volatility(bars, scenario.slot_range[-1], scenario.genesis)
            slot_leadup_volatility(bars, scenario.first_slot, scenario.genesis)


def test_parse_minimal_scenario() -> None:
    scenario = parse_scenario(_scenario(), "minimal.yaml")
    assert scenario.name == "minimal"
    assert list(scenario.slot_range) == [1, 2, 3]
    assert scenario.builders[0].integrated_searchers == frozenset({"s2"})
    assert scenario.searchers[1].kind is SearcherKind.INTEGRATED
    world = build_world(scenario)
    assert world.pools["ETH-USDC"].price == pytest.approx(1600.0)


def test_price_paths_follow_seed() -> None:
    scenario = parse_scenario(_scenario())
    first = build_price_paths(scenario)
    assert first == build_price_paths(scenario)
    assert first != build_price_paths(scenario.with_seed(2))
    assert first["ETH"][0].timestamp == scenario.genesis - SLOT_SECONDS


@pytest.mark.parametrize(
    ("changes", "field"),
    [
        ({"seed": -1}, "seed"),
        ({"seed": "seven"}, "seed"),
        ({"colour": "blue"}, "colour"),
        ({"pools": [{"pool_id": "p", "token_x": "ETH", "token_y": "USDC"}]}, "pools[0]"),
        ({"searchers": [{"searcher_id": "s1", "pool_set": ["nope"]}]}, "searchers[0].pool_set"),
        ({"searchers": [{"searcher_id": "s1", "kind": "sideways"}]}, "searchers[0].kind"),
        (
            {"searchers": [{"searcher_id": "s1", "kind": "integrated", "builder_id": "b9"}]},
            "searchers[0].builder_id",
        ),
        ({"builders": [{"builder_id": "b1"}, {"builder_id": "b1"}]}, "builders[1].builder_id"),
        ({"builders": [{"builder_id": "b1", "relay_set": ["elsewhere"]}]}, "builders[0].relay_set"),
        (
            {
                "builders": [
                    {"builder_id": "b1", "integrated_searchers": ["s1"]},
                    {"builder_id": "b2"},
                ]
            },
            "builders[0].integrated_searchers",
        ),
        ({"price_paths": {"ETH": {"initial_price": 1.0, "seed": 3}}}, "price_paths.ETH"),
        ({"chain": {"offchain_fee": 1.5}}, "chain.offchain_fee"),
        (
            {
                "pools": [
                    {"pool_id": "p", "token_x": "ETH", "token_y": "USDC", "liquidity": "1.0e6"}
                ]
            },
            "pools[0].liquidity",
        ),
        (
            {"builders": [{"builder_id": "b1", "margin_fraction": True}]},
            "builders[0].margin_fraction",
        ),
        ({"searchers": [{"searcher_id": "s1", "latency_ms": 2.5}]}, "searchers[0].latency_ms"),
        ({"background": {"extra_fee_gwei": "lots"}}, "background.extra_fee_gwei"),
    ],
)
def test_parse_errors_name_the_field(changes: dict, field: str) -> None:
    """Test that each invalid scenario names its offending field.

    Parameters
    ----------
    changes : dict
        Top-level keys replaced in the minimal scenario.
    field : str
        Expected dotted path (or its prefix) in the error.
    """
    with pytest.raises(ScenarioError) as info:
        parse_scenario(_scenario(**changes))
    assert info.value.field.startswith(field)


def test_yaml_exponent_literals() -> None:
    """Test numeric fields written in exponent notation.

    Notes
    -----
    YAML 1.1 reads ``1.0e6`` as a string, which is rejected with the field path;
    ``1.0e+6`` and a plain integer both load as the float 1e6.
    """
    template = (
        "seed: 1\n"
        "price_paths: {{ETH: {{initial_price: 1600.0}}}}\n"
        "pools: [{{pool_id: p, token_x: ETH, token_y: USDC, liquidity: {}}}]\n"
    )
    with pytest.raises(ScenarioError) as info:
        parse_scenario(yaml.safe_load(template.format("1.0e6")))
    assert info.value.field == "pools[0].liquidity"
    for literal in ("1.0e+6", "1000000"):
        scenario = parse_scenario(yaml.safe_load(template.format(literal)))
        assert isinstance(scenario.pools[0].liquidity, float)
        assert build_world(scenario).pools["p"].liquidity == pytest.approx(1e6)


def test_seed_is_mandatory() -> None:
    data = _scenario()
    del data["seed"]
    with pytest.raises(ScenarioError, match="seed"):
        parse_scenario(data)


def test_load_scenario_missing_file(tmp_path: pathlib.Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "absent.yaml")


def test_load_scenario_from_file(tmp_path: pathlib.Path) -> None:
    path = dump_yaml(_scenario(name="custom"), tmp_path / "custom.yaml")
    scenario = load_scenario(path)
    assert scenario.name == "custom"
    assert parse_scenario(scenario.to_dict()) == scenario

    (tmp_path / "broken.yaml").write_text("seed: [1\n")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "broken.yaml")


def test_section_configs(tmp_path: pathlib.Path) -> None:
    """Test detector and analysis configs from section files and whole scenarios.

    Notes
    -----
    A scenario file passed as a detector config contributes its ``detector`` section.
    """
    assert load_detector_config(None).gas_cap == 400_000
    path = dump_yaml(
        {"gas_cap": 300_000, "established_tokens": ["ETH", "USDC"]}, tmp_path / "detector.yaml"
    )
    detector = load_detector_config(path)
    assert detector.gas_cap == 300_000
    assert detector.established_tokens == frozenset({"ETH", "USDC"})

    scenario = dump_yaml(
        _scenario(detector={"exempt_searchers": {"s2": "b1"}}, analysis={"subsidy_min_run": 7}),
        tmp_path / "scenario.yaml",
    )
    assert load_detector_config(scenario).exempt_searchers == {"s2": "b1"}
    assert load_analysis_config(scenario).subsidy_min_run == 7

    bad = dump_yaml({"gas_cap": 1, "colour": "blue"}, tmp_path / "bad.yaml")
    with pytest.raises(ScenarioError):
        load_detector_config(bad)
