"""NumPy-style tests for volatility-level sweeps."""

from dataclasses import replace

import pytest

from cexdex.config import load_scenario
from cexdex.errors import DomainError
from cexdex.sweep import SWEEP_COLUMNS, scale_volatility, volatility_sweep


def test_scale_volatility() -> None:
    scenario = load_scenario("volatility")
    scaled = scale_volatility(scenario, 2.0)
    base, doubled = scenario.price_paths["ETH"], scaled.price_paths["ETH"]
    assert doubled.jump_scale == pytest.approx(2.0 * base.jump_scale)
    assert doubled.vol_per_step == pytest.approx(2.0 * base.vol_per_step)
    assert doubled.jump_intensity_per_step == base.jump_intensity_per_step
    assert scaled.seed == scenario.seed
    with pytest.raises(DomainError):
        scale_volatility(scenario, 0.0)


def test_short_sweep_table() -> None:
    scenario = replace(load_scenario("volatility"), slots=20)
    result = volatility_sweep(scenario, levels=(1.0, 0.5), top_quantile=0.9)
    assert list(result.table.columns) == SWEEP_COLUMNS
    assert result.table["level"].tolist() == [0.5, 1.0]
    assert (result.table["n_blocks"] == 20).all()
    assert result.table["integrated_win_rate"].between(0, 1).all()
    assert set(result.blocks["level"]) == {0.5, 1.0}
    with pytest.raises(DomainError):
        volatility_sweep(scenario, levels=())


@pytest.mark.slow
def test_integrated_builder_gains_with_volatility() -> None:
    """Test the bundled volatility scenario swept over four levels.

    Notes
    -----
    With 1000 slots per level and one fixed seed, the integrated builder's win rate never
    falls as volatility rises, and the flagged gas share of the top 0.1% most volatile
    blocks first-order stochastically dominates the unconditional gas share.
    """
    scenario = replace(load_scenario("volatility"), slots=1000)
    result = volatility_sweep(scenario, levels=(0.25, 0.5, 1.0, 2.0), top_quantile=0.999)

    assert (result.table["n_blocks"] >= 1000).all()
    assert result.win_rate_nondecreasing()
    rates = result.table["integrated_win_rate"]
    assert rates.iloc[-1] > rates.iloc[0]
    assert result.gas_share_dominates()
    cdfs = result.gas_share_cdfs()
    assert cdfs.loc[cdfs["threshold"] == 0.999, "n_blocks"].iloc[0] >= 1
