"""NumPy-style tests for the tidy per-block and daily frames."""

import math

import pandas as pd
import pytest

from cexdex.market import CandleBar
from cexdex.pbs import BlockTrace, SwapEvent
from cexdex.transform import (
    block_metrics,
    daily_volatility,
    day_range,
    join_flags_on_slot,
    leadup_volatility,
    tidy,
    tidy_blocks,
)

GENESIS = 1_672_531_200  # a Sunday, 00:00 UTC


def test_tidy_sorts_and_smooths() -> None:
    """Test chronological ordering and the rolling mean.

    Notes
    -----
    Dates arrive out of order; the rolling mean is computed after sorting.
    """
    raw = pd.DataFrame(
        {"day": ["2023-01-03", "2023-01-01", "2023-01-02"], "share": [0.6, 0.2, 0.4]}
    )
    out = tidy(raw, "day", "share", roll=2)
    assert out["share"].tolist() == [0.2, 0.4, 0.6]
    assert out["share_roll_2"].round(2).tolist() == [0.2, 0.3, 0.5]


def _swap(slot: int, index: int, gas: int, fee: float) -> SwapEvent:
    return SwapEvent(
        slot=slot,
        tx_index=index,
        sender="0xa",
        recipient="0xa",
        pool_id="ETH-USDC",
        token_in="USDC",
        token_out="ETH",
        amount_in=100.0,
        amount_out=0.06,
        amount_usd=100.0 * (index + 1),
        gas_used=gas,
        priority_fee_per_gas=fee,
    )


def _blocks() -> list[BlockTrace]:
    first = (_swap(1, 0, 100_000, 10.0), _swap(1, 1, 300_000, 1.0))
    return [
        BlockTrace(
            1,
            "b1",
            0.001,
            20.0,
            400_000,
            first,
            winning_bid=0.001,
            timestamp_ms=(GENESIS + 12) * 1000,
        ),
        BlockTrace(2, "", 0.0, 20.0, 0, missed=True, timestamp_ms=(GENESIS + 24) * 1000),
        BlockTrace(3, "b2", 0.0, 19.0, 0, winning_bid=0.0, timestamp_ms=(GENESIS + 36) * 1000),
    ]


def test_tidy_blocks() -> None:
    frame = tidy_blocks(_blocks())
    assert frame["slot"].tolist() == [1, 3]
    assert frame["day"].tolist() == ["2023-01-01", "2023-01-01"]
    assert frame["weekday"].tolist() == [6, 6]
    assert frame["hour"].tolist() == [0, 0]
    fees = 10.0 * 100_000 * 1e-9 + 1.0 * 300_000 * 1e-9
    assert frame["fees_received"].iloc[0] == pytest.approx(fees)
    assert frame["profit"].iloc[0] == pytest.approx(0.0013 - 0.001)
    assert (frame["consensus_reward"] == 0.04).all()
    assert frame["proposer_income"].tolist() == pytest.approx([0.041, 0.04])


def test_block_metrics_shares() -> None:
    """Test flagged gas and value shares.

    Notes
    -----
    Only the first swap of block 1 is flagged; block 3 has neither gas nor fees and gets
    zero shares.
    """
    blocks = tidy_blocks(_blocks())
    flags = pd.DataFrame(
        {
            "slot": [1, 1],
            "tx_index": [0, 1],
            "tx_hash": ["0x0", "0x1"],
            "gas_used": [100_000, 300_000],
            "fees_eth": [0.001, 0.0003],
            "amount_usd": [100.0, 200.0],
            "flagged": [True, False],
        }
    )
    metrics = block_metrics(flags, blocks).set_index("slot")
    assert metrics.loc[1, "gas_share"] == pytest.approx(0.25)
    assert metrics.loc[1, "value_share"] == pytest.approx(0.001 / 0.0013)
    assert metrics.loc[1, "flagged_volume"] == 100.0
    assert metrics.loc[1, "dex_volume"] == 300.0
    assert metrics.loc[3, "gas_share"] == 0.0
    assert metrics.loc[3, "value_share"] == 0.0

    joined = join_flags_on_slot(flags, blocks)
    assert joined["day"].tolist() == ["2023-01-01", "2023-01-01"]


def test_leadup_volatility_takes_the_largest_symbol() -> None:
    calm = [CandleBar(GENESIS + i, 1, 100.0, 100.0, 100.0, 100.0) for i in range(24)]
    wild = [CandleBar(GENESIS + i, 1, 10.0, 20.0, 10.0, 10.0) for i in range(12)]
    series = leadup_volatility([1, 2, 5], {"CALM": calm, "WILD": wild}, GENESIS)
    assert series.loc[1] == pytest.approx(math.log10(2.0))
    assert series.loc[2] == 0.0
    assert math.isnan(series.loc[5])


def test_daily_volatility_and_day_range() -> None:
    day = 86_400
    bars = [
        CandleBar(GENESIS, 60, 100.0, 110.0, 100.0, 105.0),
        CandleBar(GENESIS + 2 * day, 60, 100.0, 100.0, 10.0, 50.0),
    ]
    daily = daily_volatility({"ETH": bars})
    assert daily.loc["2023-01-01", "volatility_ETH"] == pytest.approx(math.log10(1.1))
    assert daily.loc["2023-01-03", "volatility_ETH"] == pytest.approx(1.0)
    assert day_range(pd.Series(["2023-01-01", "2023-01-03"])) == [
        "2023-01-01",
        "2023-01-02",
        "2023-01-03",
    ]
    assert day_range(pd.Series([], dtype=str)) == []
