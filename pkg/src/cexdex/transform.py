"""Transform utilities turning blocks, flags and candles into tidy per-block and daily frames."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import CexDexError
from .market import CandleBar, as_series, slot_leadup_volatility
from .pbs import CONSENSUS_REWARD_ETH, BlockTrace


def tidy(df: pd.DataFrame, date_col: str, value_col: str, roll: int = 7) -> pd.DataFrame:
    """Create a tidy, chronologically ordered DataFrame with a rolling mean.

    Parameters
    ----------
    df : pandas.DataFrame
        Raw input data containing at least the date and value columns.
    date_col : str
        Name of the column with dates parsable by :func:`pandas.to_datetime`.
    value_col : str
        Name of the column with the measurement to smooth.
    roll : int, default=7
        Rolling window size (number of observations) used to compute the mean.

    Returns
    -------
    pandas.DataFrame
        Sorted copy of the two columns with a new column ``"{value_col}_roll_{roll}"``.

    Examples
    --------
    >>> import pandas as pd
    >>> raw = pd.DataFrame({"day": ["2023-01-02", "2023-01-01"], "share": [0.2, 0.4]})
    >>> tidy(raw, "day", "share", roll=2)["share_roll_2"].round(2).tolist()
    [0.4, 0.3]
    """
    out = df[[date_col, value_col]].copy()
    out[date_col] = pd.to_datetime(out[date_col])
    out = out.sort_values(date_col).dropna()
    out[f"{value_col}_roll_{roll}"] = out[value_col].rolling(roll, min_periods=1).mean()
    return out.reset_index(drop=True)


def tidy_blocks(blocks: Sequence[BlockTrace]) -> pd.DataFrame:
    """One row per proposed block with UTC time fields and fee accounting.

    Missed slots are dropped. Columns: ``slot``, ``builder_id``, ``timestamp``, ``day``,
    ``weekday``, ``hour``, ``gas_used``, ``fees_received``, ``proposer_payment``,
    ``profit``, ``consensus_reward``, ``proposer_income``, ``base_fee_per_gas``, ``n_txs``.

    ``proposer_income`` adds the fixed consensus-layer reward to the builder's payment.
    """
    rows = [
        {
            "slot": b.slot,
            "builder_id": b.builder_id,
            "timestamp_ms": b.timestamp_ms,
            "gas_used": b.gas_used,
            "fees_received": b.fees_received,
            "proposer_payment": b.proposer_payment,
            "profit": b.builder_profit,
            "base_fee_per_gas": b.base_fee_per_gas,
            "n_txs": len(b.txs),
        }
        for b in blocks
        if not b.missed
    ]
    frame = pd.DataFrame(
        rows,
        columns=[
            "slot",
            "builder_id",
            "timestamp_ms",
            "gas_used",
            "fees_received",
            "proposer_payment",
            "profit",
            "base_fee_per_gas",
            "n_txs",
        ],
    )
    frame = frame.astype(
        {
            "slot": "int64",
            "builder_id": str,
            "timestamp_ms": "int64",
            "gas_used": "int64",
            "fees_received": float,
            "proposer_payment": float,
            "profit": float,
            "base_fee_per_gas": float,
            "n_txs": "int64",
        }
    )
    timestamp = pd.to_datetime(frame["timestamp_ms"], unit="ms", utc=True)
    frame.insert(2, "timestamp", timestamp)
    frame.insert(3, "day", timestamp.dt.strftime("%Y-%m-%d"))
    frame.insert(4, "weekday", timestamp.dt.dayofweek)
    frame.insert(5, "hour", timestamp.dt.hour)
    after_profit = frame.columns.get_loc("profit") + 1
    frame.insert(after_profit, "consensus_reward", CONSENSUS_REWARD_ETH)
    frame.insert(
        after_profit + 1, "proposer_income", frame["proposer_payment"] + CONSENSUS_REWARD_ETH
    )
    return frame.drop(columns="timestamp_ms").sort_values("slot").reset_index(drop=True)


def join_flags_on_slot(flags: pd.DataFrame, blocks: pd.DataFrame) -> pd.DataFrame:
    """Attach block time fields to every flag record.

    Parameters
    ----------
    flags : pandas.DataFrame
        Detector output, one row per swap.
    blocks : pandas.DataFrame
        Output of :func:`tidy_blocks`.

    Returns
    -------
    pandas.DataFrame
        ``flags`` with ``timestamp``, ``day``, ``weekday`` and ``hour`` columns, in slot and
        transaction order.
    """
    timing = blocks[["slot", "timestamp", "day", "weekday", "hour"]]
    df = pd.merge(flags, timing, on="slot", how="left")
    return df.sort_values(["slot", "tx_index"]).reset_index(drop=True)


def block_metrics(flags: pd.DataFrame, blocks: pd.DataFrame) -> pd.DataFrame:
    """Per-block share of gas and value taken by flagged swaps.

    ``gas_share`` is flagged gas over block gas and ``value_share`` flagged fees over the
    fees the builder received; both are 0 for blocks without flagged swaps.
    """
    flagged = flags[flags["flagged"].astype(bool)]
    per_block = flagged.groupby("slot").agg(
        flagged_gas=("gas_used", "sum"),
        flagged_fees=("fees_eth", "sum"),
        flagged_volume=("amount_usd", "sum"),
        n_flagged=("tx_hash", "count"),
    )
    volume = flags.groupby("slot")["amount_usd"].sum().rename("dex_volume")
    out = blocks.set_index("slot").join(per_block).join(volume)
    out[["flagged_gas", "flagged_fees", "flagged_volume", "n_flagged", "dex_volume"]] = out[
        ["flagged_gas", "flagged_fees", "flagged_volume", "n_flagged", "dex_volume"]
    ].fillna(0)
    out["gas_share"] = (out["flagged_gas"] / out["gas_used"].replace(0, np.nan)).fillna(0.0)
    out["value_share"] = (out["flagged_fees"] / out["fees_received"].replace(0, np.nan)).fillna(0.0)
    return out.reset_index()


def leadup_volatility(
    slots: Sequence[int], candles: Mapping[str, Sequence[CandleBar]], genesis: int
) -> pd.Series:
    """Lead-up volatility per slot: the largest over all symbols whose candles cover it.

    Slots no symbol covers get NaN.
    """
    series = {symbol: as_series(bars) for symbol, bars in candles.items()}
    values = []
    for slot in slots:
        best = math.nan
        for bars in series.values():
            try:
                vol = slot_leadup_volatility(bars, slot, genesis)
            except CexDexError:
                continue
            best = vol if math.isnan(best) else max(best, vol)
        values.append(best)
    return pd.Series(
        values,
        index=pd.Index(list(slots), name="slot", dtype="int64"),
        name="leadup_volatility",
        dtype=float,
    )


def daily_volatility(candles: Mapping[str, Sequence[CandleBar]]) -> pd.DataFrame:
    """Daily ``log10(high / low)`` per symbol, UTC days, wide by ``volatility_<symbol>``."""
    frames = []
    for symbol, bars in sorted(candles.items()):
        frame = pd.DataFrame(
            {
                "timestamp": [b.timestamp for b in bars],
                "high": [b.high for b in bars],
                "low": [b.low for b in bars],
            }
        )
        if frame.empty:
            continue
        timestamps = pd.to_datetime(frame["timestamp"], unit="s", utc=True)
        frame["day"] = timestamps.dt.strftime("%Y-%m-%d")
        daily = frame.groupby("day").agg(high=("high", "max"), low=("low", "min"))
        frames.append(np.log10(daily["high"] / daily["low"]).rename(f"volatility_{symbol}"))
    if not frames:
        return pd.DataFrame(index=pd.Index([], name="day"))
    return pd.concat(frames, axis=1)


def day_range(days: pd.Series) -> list[str]:
    """Every UTC day between the first and last of ``days`` (empty when ``days`` is)."""
    if days.empty:
        return []
    span = pd.date_range(days.min(), days.max(), freq="D")
    return [d.strftime("%Y-%m-%d") for d in span]
