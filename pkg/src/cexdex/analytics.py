"""Aggregate analyses of detector output: volumes, shares, builder profits and correlations.

Every analysis takes the flags table (one row per swap, see :mod:`cexdex.detect`) and the
block traces, and returns plain DataFrames that :func:`run_analysis` collects under the
file stems they are written to.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import UndefinedCorrelationError
from .market import CandleBar
from .pbs import BidRecord, BlockTrace, MevLabel
from .stats import conditional_cdf, pearson_with_p
from .transform import (
    block_metrics,
    daily_volatility,
    day_range,
    join_flags_on_slot,
    leadup_volatility,
    tidy,
    tidy_blocks,
)

logger = logging.getLogger(__name__)

DEFAULT_TOP_TOKENS = frozenset({"ETH", "WETH", "BTC", "WBTC", "USDC", "USDT", "DAI"})
DEFAULT_CDF_THRESHOLDS = (0.0, 0.9, 0.99, 0.999)
MEV_TYPES = ("non_atomic", "sandwich", "cyclic_arb", "liquidation")
CORRELATION_COLUMNS = ["x", "y", "r", "p", "n"]
# a sandwich counts once, through its front-run leg
_MEV_KINDS = {
    MevLabel.SANDWICH_FRONT: "sandwich",
    MevLabel.CYCLIC_ARB: "cyclic_arb",
    MevLabel.LIQUIDATION: "liquidation",
}


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs of the analysis step.

    ``integrated_pairs`` maps searchers to the builder they belong to; when omitted the
    pairs are inferred from the searcher-builder matrix, pairing a searcher with a builder
    that includes at least ``integrated_min_share`` of its flagged volume.
    """

    top_tokens: frozenset[str] = DEFAULT_TOP_TOKENS
    subsidy_min_run: int = 50
    cdf_thresholds: tuple[float, ...] = DEFAULT_CDF_THRESHOLDS
    integrated_min_share: float = 0.75
    integrated_pairs: Mapping[str, str] | None = None
    size_bins: int = 20

    def to_dict(self) -> dict:
        return {
            "top_tokens": sorted(self.top_tokens),
            "subsidy_min_run": self.subsidy_min_run,
            "cdf_thresholds": list(self.cdf_thresholds),
            "integrated_min_share": self.integrated_min_share,
            "integrated_pairs": (
                None if self.integrated_pairs is None else dict(self.integrated_pairs)
            ),
            "size_bins": self.size_bins,
        }


@dataclass(frozen=True)
class DailyAggregate:
    day: str
    searcher_volume: Mapping[str, float] = field(default_factory=dict)
    flagged_volume: float = 0.0
    dex_volume: float = 0.0
    n_blocks: int = 0
    mev_counts: Mapping[str, int] = field(default_factory=dict)
    mev_tips_eth: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class BuilderProfitRecord:
    slot: int
    builder_id: str
    fees_received: float
    proposer_payment: float

    @property
    def profit(self) -> float:
        return self.fees_received - self.proposer_payment


@dataclass(frozen=True)
class SubsidyWindow:
    builder_id: str
    first_slot: int
    last_slot: int
    n_blocks: int
    total_loss: float
    flagged_fraction: float


class DetectorScore(NamedTuple):
    precision: float
    recall: float
    true_positives: int
    false_positives: int
    false_negatives: int


def _flagged(flags: pd.DataFrame) -> pd.DataFrame:
    return flags[flags["flagged"].astype(bool)]


def searcher_builder_matrix(flags: pd.DataFrame) -> pd.DataFrame:
    """Share of each searcher's flagged USD volume included by each builder.

    Returns
    -------
    pandas.DataFrame
        Searchers as rows, builders as columns; each row sums to 1. Searchers without
        flagged volume are omitted.
    """
    flagged = _flagged(flags)
    if flagged.empty:
        return pd.DataFrame(index=pd.Index([], name="searcher", dtype=str))
    volume = flagged.pivot_table(
        index="searcher", columns="builder_id", values="amount_usd", aggfunc="sum", fill_value=0.0
    )
    totals = volume.sum(axis=1)
    volume = volume[totals > 0]
    matrix = volume.div(totals[totals > 0], axis=0)
    matrix.index.name = "searcher"
    matrix.columns.name = None
    return matrix.sort_index().sort_index(axis=1)


def infer_integrated_pairs(matrix: pd.DataFrame, min_share: float = 0.75) -> dict[str, str]:
    """Pair each searcher with the builder holding at least ``min_share`` of its volume."""
    if matrix.empty:
        return {}
    best = matrix.idxmax(axis=1)
    share = matrix.max(axis=1)
    return {
        searcher: str(best[searcher]) for searcher in matrix.index if share[searcher] >= min_share
    }


def builder_profit_records(blocks: Sequence[BlockTrace]) -> list[BuilderProfitRecord]:
    return [
        BuilderProfitRecord(b.slot, b.builder_id, b.fees_received, b.proposer_payment)
        for b in blocks
        if not b.missed
    ]


def builder_profit_scan(
    blocks: Sequence[BlockTrace],
    flags: pd.DataFrame | None = None,
    integrated_pairs: Mapping[str, str] | None = None,
    min_run: int = 50,
    tol: float = 1e-9,
) -> tuple[list[BuilderProfitRecord], list[SubsidyWindow]]:
    """Per-block builder profit and the windows in which a builder paid more than it earned.

    A subsidy window is a maximal run of at least ``min_run`` consecutive blocks of one
    builder (consecutive among that builder's blocks) that all lost more than ``tol`` ETH.

    Parameters
    ----------
    blocks : Sequence[BlockTrace]
        Proposed blocks; missed slots are ignored.
    flags : pandas.DataFrame, optional
        Detector output used to report how many loss-making blocks carried a flagged swap
        of the builder's integrated searchers.
    integrated_pairs : Mapping[str, str], optional
        Searcher to builder pairs.
    min_run : int, default=50
        Shortest run reported.
    tol : float, default=1e-9
        Losses up to this many ETH count as break-even.

    Returns
    -------
    tuple[list[BuilderProfitRecord], list[SubsidyWindow]]
        Records in slot order and windows ordered by builder then first slot.
    """
    records = sorted(builder_profit_records(blocks), key=lambda r: r.slot)
    pairs = dict(integrated_pairs or {})
    integrated_slots: dict[str, set[int]] = {}
    if flags is not None and pairs:
        flagged = _flagged(flags)
        owners = zip(flagged["searcher"], flagged["slot"], flagged["builder_id"])
        for searcher, slot, builder in owners:
            if pairs.get(searcher) == builder:
                integrated_slots.setdefault(builder, set()).add(int(slot))

    by_builder: dict[str, list[BuilderProfitRecord]] = {}
    for record in records:
        by_builder.setdefault(record.builder_id, []).append(record)

    windows = []
    for builder_id in sorted(by_builder):
        run: list[BuilderProfitRecord] = []
        for record in [*by_builder[builder_id], None]:
            if record is not None and record.profit < -tol:
                run.append(record)
                continue
            if len(run) >= min_run:
                with_flag = integrated_slots.get(builder_id, set())
                windows.append(
                    SubsidyWindow(
                        builder_id=builder_id,
                        first_slot=run[0].slot,
                        last_slot=run[-1].slot,
                        n_blocks=len(run),
                        total_loss=-sum(r.profit for r in run),
                        flagged_fraction=sum(r.slot in with_flag for r in run) / len(run),
                    )
                )
            run = []
    return records, windows


def detector_eval(flags: pd.DataFrame, ground_truth: pd.DataFrame | Sequence[str]) -> DetectorScore:
    """Precision and recall of the flagged swaps against known arbitrage swap ids.

    An empty flag set has precision 1 and an empty truth set has recall 1.
    """
    flagged = set(_flagged(flags)["tx_hash"])
    if isinstance(ground_truth, pd.DataFrame):
        truth = set(ground_truth["swap_id"])
    else:
        truth = set(ground_truth)
    hits = len(flagged & truth)
    precision = hits / len(flagged) if flagged else 1.0
    recall = hits / len(truth) if truth else 1.0
    return DetectorScore(precision, recall, hits, len(flagged - truth), len(truth - flagged))


def _mev_events(blocks: Sequence[BlockTrace]) -> pd.DataFrame:
    """Background MEV occurrences per block; a sandwich counts once with both attack legs' tips."""
    rows = []
    for block in blocks:
        sandwich_tip = 0.0
        for tx in block.txs:
            if tx.mev_label is MevLabel.SANDWICH_FRONT:
                rows.append((block.slot, "sandwich", 1, tx.fees_eth))
            elif tx.mev_label is MevLabel.SANDWICH_BACK:
                sandwich_tip += tx.fees_eth
            elif tx.mev_label is MevLabel.CYCLIC_ARB:
                rows.append((block.slot, "cyclic_arb", 1, tx.fees_eth))
            elif tx.mev_label is MevLabel.LIQUIDATION:
                rows.append((block.slot, "liquidation", 1, tx.fees_eth))
        if sandwich_tip:
            rows.append((block.slot, "sandwich", 0, sandwich_tip))
    return pd.DataFrame(rows, columns=["slot", "mev_type", "count", "tip_eth"])


def daily_aggregates(
    flags: pd.DataFrame, blocks: Sequence[BlockTrace]
) -> list[DailyAggregate]:
    """One aggregate per UTC day between the first and last block, zeros for empty days."""
    block_frame = tidy_blocks(blocks)
    joined = join_flags_on_slot(flags, block_frame)
    flagged = _flagged(joined)
    mev = _mev_events(blocks).merge(block_frame[["slot", "day"]], on="slot")
    nonatomic = flagged.assign(mev_type="non_atomic", count=1, tip_eth=flagged["fees_eth"])
    nonatomic = nonatomic[["slot", "mev_type", "count", "tip_eth", "day"]]
    mev = pd.concat([mev, nonatomic], ignore_index=True)

    searcher_volume = flagged.groupby(["day", "searcher"])["amount_usd"].sum()
    dex_volume = joined.groupby("day")["amount_usd"].sum()
    n_blocks = block_frame.groupby("day")["slot"].count()
    mev_counts = mev.groupby(["day", "mev_type"])[["count", "tip_eth"]].sum()

    aggregates = []
    for day in day_range(block_frame["day"]):
        volumes = (
            {s: float(v) for s, v in searcher_volume.loc[day].items()}
            if day in searcher_volume.index.get_level_values(0)
            else {}
        )
        counts = {kind: 0 for kind in MEV_TYPES}
        tips = {kind: 0.0 for kind in MEV_TYPES}
        if day in mev_counts.index.get_level_values(0):
            for kind, row in mev_counts.loc[day].iterrows():
                counts[kind] = int(row["count"])
                tips[kind] = float(row["tip_eth"])
        aggregates.append(
            DailyAggregate(
                day=day,
                searcher_volume=volumes,
                flagged_volume=sum(volumes.values()),
                dex_volume=float(dex_volume.get(day, 0.0)),
                n_blocks=int(n_blocks.get(day, 0)),
                mev_counts=counts,
                mev_tips_eth=tips,
            )
        )
    return aggregates


def _daily_tables(aggregates: Sequence[DailyAggregate]) -> dict[str, pd.DataFrame]:
    daily = pd.DataFrame(
        [(a.day, a.n_blocks, a.flagged_volume, a.dex_volume) for a in aggregates],
        columns=["day", "n_blocks", "flagged_volume", "dex_volume"],
    )
    searcher_rows = [
        (a.day, searcher, volume, volume / a.flagged_volume)
        for a in aggregates
        for searcher, volume in sorted(a.searcher_volume.items())
        if a.flagged_volume > 0
    ]
    daily_searcher = pd.DataFrame(searcher_rows, columns=["day", "searcher", "volume_usd", "share"])
    mev_rows = [
        (a.day, kind, a.mev_counts.get(kind, 0), a.mev_tips_eth.get(kind, 0.0))
        for a in aggregates
        for kind in MEV_TYPES
    ]
    mev_daily = pd.DataFrame(mev_rows, columns=["day", "mev_type", "count", "tip_eth"])
    return {"daily": daily, "daily_searcher": daily_searcher, "mev_daily": mev_daily}


def trade_size_tables(flags: pd.DataFrame, n_bins: int = 20) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Quartiles of flagged trade sizes per searcher and a log-spaced histogram."""
    flagged = _flagged(flags)
    grouped = flagged.groupby("searcher")["amount_usd"]
    quantiles = pd.DataFrame(
        {
            "n_trades": grouped.count(),
            "p25": grouped.quantile(0.25),
            "p50": grouped.quantile(0.50),
            "p75": grouped.quantile(0.75),
        }
    ).reset_index()
    if flagged.empty:
        return quantiles, pd.DataFrame(columns=["searcher", "bin_left", "bin_right", "count"])
    low, high = flagged["amount_usd"].min(), flagged["amount_usd"].max()
    top = math.log10(high) if high > low else math.log10(low) + 1
    edges = np.logspace(math.log10(low), top, n_bins + 1)
    rows = []
    for searcher, amounts in grouped:
        counts, _ = np.histogram(amounts, bins=edges)
        rows.extend((searcher, edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts))
    return quantiles, pd.DataFrame(rows, columns=["searcher", "bin_left", "bin_right", "count"])


def top_token_table(flags: pd.DataFrame, top_tokens: frozenset[str]) -> pd.DataFrame:
    """Per searcher, the proportion of flagged trades and volume between two top tokens."""
    flagged = _flagged(flags).copy()
    flagged["in_top"] = flagged["token_in"].isin(top_tokens) & flagged["token_out"].isin(top_tokens)
    flagged["top_volume"] = flagged["amount_usd"].where(flagged["in_top"], 0.0)
    grouped = flagged.groupby("searcher")
    table = pd.DataFrame(
        {
            "n_trades": grouped["tx_hash"].count(),
            "trade_proportion": grouped["in_top"].mean(),
            "volume_proportion": grouped["top_volume"].sum() / grouped["amount_usd"].sum(),
        }
    )
    return table.reset_index().sort_values(["n_trades", "searcher"], ascending=[False, True])


def report_aggregates(
    flags: pd.DataFrame,
    blocks: Sequence[BlockTrace],
    candles: Mapping[str, Sequence[CandleBar]],
    config: AnalysisConfig | None = None,
) -> dict[str, pd.DataFrame]:
    """Daily volumes and shares, trade sizes, top-token proportions and daily MEV counts.

    Returns
    -------
    dict[str, pandas.DataFrame]
        ``daily`` (with ``volatility_<symbol>`` columns joined from the candles),
        ``daily_searcher``, ``trade_size``, ``trade_size_hist``, ``top_tokens`` and
        ``mev_daily``.
    """
    config = config or AnalysisConfig()
    tables = _daily_tables(daily_aggregates(flags, blocks))
    volatility = daily_volatility(candles)
    tables["daily"] = tables["daily"].merge(volatility, left_on="day", right_index=True, how="left")
    tables["trade_size"], tables["trade_size_hist"] = trade_size_tables(flags, config.size_bins)
    tables["top_tokens"] = top_token_table(flags, config.top_tokens)
    return tables


def _correlation_row(x_name: str, x: pd.Series, y_name: str, y: pd.Series) -> dict:
    pair = pd.concat([x, y], axis=1).dropna()
    try:
        r, p, n = pearson_with_p(pair.iloc[:, 0], pair.iloc[:, 1])
    except UndefinedCorrelationError:
        r, p, n = math.nan, math.nan, len(pair)
    return {"x": x_name, "y": y_name, "r": r, "p": p, "n": n}


def weekday_hour_table(joined: pd.DataFrame) -> pd.DataFrame:
    """Flagged volume by UTC weekday (0 is Monday) and hour, all 168 cells."""
    flagged = _flagged(joined)
    grid = pd.MultiIndex.from_product([range(7), range(24)], names=["weekday", "hour"])
    table = flagged.groupby(["weekday", "hour"]).agg(
        flagged_volume=("amount_usd", "sum"), n_flagged=("tx_hash", "count")
    )
    table = table.reindex(grid, fill_value=0)
    return table.reset_index()


def cumulative_volume(daily_searcher: pd.DataFrame) -> pd.DataFrame:
    if daily_searcher.empty:
        return pd.DataFrame(columns=["day", "searcher", "cumulative_volume_usd"])
    ordered = daily_searcher.sort_values(["searcher", "day"])
    ordered = ordered.assign(
        cumulative_volume_usd=ordered.groupby("searcher")["volume_usd"].cumsum()
    )
    table = ordered[["day", "searcher", "cumulative_volume_usd"]]
    return table.sort_values(["day", "searcher"]).reset_index(drop=True)


def hft_tables(
    joined: pd.DataFrame, block_frame: pd.DataFrame, pairs: Mapping[str, str], days: Sequence[str]
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Daily share of blocks and flagged volume of builders with integrated searchers.

    Also correlates, per integrated pair, the builder's daily block share with the
    searcher's daily share of flagged volume.
    """
    hft_builders = set(pairs.values())
    blocks_per_day = block_frame.groupby("day")["slot"].count().reindex(days, fill_value=0)
    hft_frame = block_frame[block_frame["builder_id"].isin(hft_builders)]
    hft_blocks = hft_frame.groupby("day")["slot"].count()
    flagged = _flagged(joined)
    flagged_per_day = flagged.groupby("day")["amount_usd"].sum().reindex(days, fill_value=0.0)
    hft_flagged = flagged[flagged["builder_id"].isin(hft_builders)]
    hft_volume = hft_flagged.groupby("day")["amount_usd"].sum()
    daily = pd.DataFrame(index=pd.Index(list(days), name="day"))
    daily["n_blocks"] = blocks_per_day
    daily["hft_block_share"] = (
        hft_blocks.reindex(days, fill_value=0) / blocks_per_day.replace(0, np.nan)
    ).fillna(0.0)
    daily["hft_flagged_share"] = (
        hft_volume.reindex(days, fill_value=0.0) / flagged_per_day.replace(0, np.nan)
    ).fillna(0.0)
    smoothed = tidy(daily.reset_index(), "day", "hft_block_share", roll=7)
    daily["hft_block_share_roll_7"] = smoothed["hft_block_share_roll_7"].to_numpy()

    block_base = blocks_per_day.replace(0, np.nan)
    volume_base = flagged_per_day.replace(0, np.nan)
    rows = []
    for searcher, builder in sorted(pairs.items()):
        own_blocks = block_frame[block_frame["builder_id"] == builder].groupby("day")["slot"]
        own_volume = flagged[flagged["searcher"] == searcher].groupby("day")["amount_usd"]
        builder_share = own_blocks.count().reindex(days, fill_value=0) / block_base
        searcher_share = own_volume.sum().reindex(days, fill_value=0.0) / volume_base
        row = _correlation_row(
            f"block_share_{builder}", builder_share, f"volume_share_{searcher}", searcher_share
        )
        rows.append({"searcher": searcher, "builder_id": builder, **row})
    pair_table = pd.DataFrame(rows, columns=["searcher", "builder_id", *CORRELATION_COLUMNS])
    return daily.reset_index(), pair_table


def builder_mev_counts(blocks: Sequence[BlockTrace], flags: pd.DataFrame) -> pd.DataFrame:
    """Per builder: blocks won and MEV occurrences per block by type."""
    flagged_per_slot = _flagged(flags).groupby("slot")["tx_hash"].count()
    counts: dict[str, dict[str, int]] = {}
    for block in blocks:
        if block.missed:
            continue
        row = counts.setdefault(block.builder_id, {"n_blocks": 0, **dict.fromkeys(MEV_TYPES, 0)})
        row["n_blocks"] += 1
        row["non_atomic"] += int(flagged_per_slot.get(block.slot, 0))
        for tx in block.txs:
            kind = _MEV_KINDS.get(tx.mev_label)
            if kind:
                row[kind] += 1
    rows = [
        {
            "builder_id": builder_id,
            "n_blocks": row["n_blocks"],
            **{f"{kind}_per_block": row[kind] / row["n_blocks"] for kind in MEV_TYPES},
        }
        for builder_id, row in sorted(counts.items())
    ]
    columns = ["builder_id", "n_blocks", *[f"{kind}_per_block" for kind in MEV_TYPES]]
    return pd.DataFrame(rows, columns=columns)


def heuristic_table(flags: pd.DataFrame) -> pd.DataFrame:
    """Proportion of each searcher's swaps passing each heuristic, plus an all-swaps row."""
    columns = [
        "h1_simple",
        "h2_private",
        "h3_tip",
        "h4_first_in_direction",
        "h5_established",
        "h3_exempted",
        "flagged",
    ]
    searchers = sorted(set(_flagged(flags)["searcher"]))
    rows = []
    for searcher in searchers:
        mine = flags[flags["searcher"] == searcher]
        shares = mine[columns].astype(float).mean().to_dict()
        rows.append({"searcher": searcher, "n_swaps": len(mine), **shares})
    overall = flags[columns].astype(float).mean() if len(flags) else pd.Series(0.0, index=columns)
    rows.append({"searcher": "all", "n_swaps": len(flags), **overall.to_dict()})
    return pd.DataFrame(rows, columns=["searcher", "n_swaps", *columns])


def base_fee_feedback(metrics: pd.DataFrame) -> pd.DataFrame:
    """Flagged gas share of block ``n`` next to the base fee change into block ``n + 1``."""
    ordered = metrics.sort_values("slot").reset_index(drop=True)
    following = ordered.shift(-1)
    consecutive = following["slot"] == ordered["slot"] + 1
    table = pd.DataFrame(
        {
            "slot": ordered["slot"],
            "gas_used": ordered["gas_used"],
            "gas_share": ordered["gas_share"],
            "base_fee_change": following["base_fee_per_gas"] / ordered["base_fee_per_gas"] - 1.0,
        }
    )
    return table[consecutive].reset_index(drop=True)


def bid_stream_table(bids: Sequence[BidRecord], blocks: Sequence[BlockTrace]) -> pd.DataFrame:
    winners = {b.slot: b.builder_id for b in blocks if not b.missed}
    frame = pd.DataFrame(
        [(b.slot, b.builder_id, b.relay, b.t_offset_ms, b.bid_eth) for b in bids],
        columns=["slot", "builder_id", "relay", "t_offset_ms", "bid_eth"],
    )
    frame["is_winner"] = [
        winners.get(slot) == builder for slot, builder in zip(frame["slot"], frame["builder_id"])
    ]
    ordered = frame.sort_values(["slot", "builder_id", "t_offset_ms"], kind="stable")
    return ordered.reset_index(drop=True)


def run_analysis(
    flags: pd.DataFrame,
    blocks: Sequence[BlockTrace],
    candles: Mapping[str, Sequence[CandleBar]],
    genesis: int,
    bids: Sequence[BidRecord] = (),
    ground_truth: pd.DataFrame | None = None,
    config: AnalysisConfig | None = None,
) -> dict[str, pd.DataFrame]:
    """Every analysis table, keyed by the file stem it is written to.

    Parameters
    ----------
    flags : pandas.DataFrame
        Detector output.
    blocks : Sequence[BlockTrace]
        Blocks of the dataset.
    candles : Mapping[str, Sequence[CandleBar]]
        Off-chain candles per symbol.
    genesis : int
        UNIX seconds of slot 0, for lead-up windows.
    bids : Sequence[BidRecord], optional
        Relay bids that survived the payment cross-check.
    ground_truth : pandas.DataFrame, optional
        Known arbitrage swaps; adds ``detector_eval``.
    config : AnalysisConfig, optional
        Analysis settings.

    Returns
    -------
    dict[str, pandas.DataFrame]
        Tables in a fixed order.
    """
    config = config or AnalysisConfig()
    tables = report_aggregates(flags, blocks, candles, config)

    block_frame = tidy_blocks(blocks)
    joined = join_flags_on_slot(flags, block_frame)
    days = day_range(block_frame["day"])

    matrix = searcher_builder_matrix(flags)
    tables["searcher_builder_matrix"] = matrix.reset_index()
    pairs = (
        dict(config.integrated_pairs)
        if config.integrated_pairs is not None
        else infer_integrated_pairs(matrix, config.integrated_min_share)
    )
    tables["integrated_pairs"] = pd.DataFrame(
        sorted(pairs.items()), columns=["searcher", "builder_id"]
    )

    records, windows = builder_profit_scan(blocks, flags, pairs, config.subsidy_min_run)
    tables["builder_profit"] = pd.DataFrame(
        [(r.slot, r.builder_id, r.fees_received, r.proposer_payment, r.profit) for r in records],
        columns=["slot", "builder_id", "fees_received", "proposer_payment", "profit"],
    )
    tables["subsidy_windows"] = pd.DataFrame(
        [
            (w.builder_id, w.first_slot, w.last_slot, w.n_blocks, w.total_loss, w.flagged_fraction)
            for w in windows
        ],
        columns=[
            "builder_id",
            "first_slot",
            "last_slot",
            "n_blocks",
            "total_loss",
            "flagged_fraction",
        ],
    )

    metrics = block_metrics(flags, block_frame)
    volatility = leadup_volatility(metrics["slot"].tolist(), candles, genesis)
    metrics = metrics.merge(volatility.reset_index(), on="slot", how="left")
    condition = metrics.set_index("slot")["leadup_volatility"]
    for stem, column in (
        ("gas_share_cdf", "gas_share"),
        ("value_share_cdf", "value_share"),
        ("block_size_cdf", "gas_used"),
        ("block_value_cdf", "fees_received"),
    ):
        tables[stem] = conditional_cdf(
            metrics.set_index("slot")[column], condition, config.cdf_thresholds
        )
    tables["block_metrics"] = metrics

    tables["weekday_hour"] = weekday_hour_table(joined)
    tables["cumulative_volume"] = cumulative_volume(tables["daily_searcher"])
    hft_daily, pair_correlation = hft_tables(joined, block_frame, pairs, days)
    tables["hft_daily"], tables["builder_searcher_correlation"] = hft_daily, pair_correlation
    tables["builder_mev_counts"] = builder_mev_counts(blocks, flags)
    tables["heuristic_table"] = heuristic_table(flags)
    tables["base_fee_feedback"] = base_fee_feedback(metrics)
    tables["bid_streams"] = bid_stream_table(bids, blocks)

    daily = tables["daily"].set_index("day")
    hft_share = hft_daily.set_index("day")["hft_block_share"]
    flagged_volume = daily["flagged_volume"]
    rows = []
    for column in [c for c in daily.columns if c.startswith("volatility_")]:
        rows.append(_correlation_row(column, daily[column], "flagged_volume", flagged_volume))
        rows.append(_correlation_row(column, daily[column], "hft_block_share", hft_share))
    other_volume = daily["dex_volume"] - flagged_volume
    rows.append(
        _correlation_row("non_arbitrage_volume", other_volume, "flagged_volume", flagged_volume)
    )
    # per block, so short datasets still give a usable sample
    rows.append(
        _correlation_row(
            "leadup_volatility",
            metrics["leadup_volatility"],
            "block_flagged_volume",
            metrics["flagged_volume"],
        )
    )
    feedback = tables["base_fee_feedback"]
    rows.append(
        _correlation_row(
            "gas_share", feedback["gas_share"], "base_fee_change", feedback["base_fee_change"]
        )
    )
    tables["correlations"] = pd.DataFrame(rows, columns=CORRELATION_COLUMNS)

    if ground_truth is not None:
        score = detector_eval(flags, ground_truth)
        tables["detector_eval"] = pd.DataFrame([score._asdict()])

    logger.debug(f"built {len(tables)} analysis table(s)")
    return tables
