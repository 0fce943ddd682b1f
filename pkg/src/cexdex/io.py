"""Dataset files: CSV schemas, writing simulator output, and validated loading.

A dataset directory holds ``blocks.csv``, ``swaps.csv``, ``bids.csv``, ``mempool.csv``,
``candles.csv``, optionally ``ground_truth.csv``, and a ``manifest.yaml`` with checksums.
Floats are written in shortest round-trip form and read back exactly. Swap privacy is
not stored; it is derived on load from the mempool sightings.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TypeVar

import pandas as pd

from .detect import FLAG_COLUMNS, HEURISTIC_COLUMNS
from .errors import DatasetValidationError, DomainError, ValidationIssue
from .manifest import MANIFEST_NAME, DatasetManifest, file_entry, verify
from .market import CANDLE_COLUMNS, CandleBar, candles_to_frame
from .pbs import (
    ArbRecord,
    BidRecord,
    BlockTrace,
    MempoolSighting,
    MevLabel,
    SimulationResult,
    SwapEvent,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

BLOCK_COLUMNS = [
    "slot",
    "builder_id",
    "proposer_payment",
    "winning_bid",
    "base_fee_per_gas",
    "gas_used",
    "gas_limit",
    "extra_gas_used",
    "extra_fees_eth",
    "timestamp_ms",
    "missed",
]
SWAP_COLUMNS = [
    "tx_hash",
    "slot",
    "tx_index",
    "sender",
    "recipient",
    "searcher_id",
    "pool_id",
    "token_in",
    "token_out",
    "amount_in",
    "amount_out",
    "amount_usd",
    "gas_used",
    "priority_fee_per_gas",
    "coinbase_transfer",
    "mev_label",
    "n_swaps_in_tx",
]
BID_COLUMNS = ["slot", "builder_id", "relay", "t_offset_ms", "bid_eth"]
MEMPOOL_COLUMNS = ["tx_hash", "first_seen_ms"]
CANDLE_FILE_COLUMNS = ["symbol", *CANDLE_COLUMNS]
GROUND_TRUTH_COLUMNS = [
    "swap_id",
    "slot",
    "searcher_id",
    "builder_id",
    "pool_id",
    "direction",
    "p_off",
    "target_end_price",
    "post_trade_price",
    "profit_usd",
    "tip_eth",
]

FILE_NAMES = {
    "blocks": "blocks.csv",
    "swaps": "swaps.csv",
    "bids": "bids.csv",
    "mempool": "mempool.csv",
    "candles": "candles.csv",
    "ground_truth": "ground_truth.csv",
}


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    """Write a CSV the way every cexdex output is written (no index, ``\\n`` line ends)."""
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def blocks_to_frame(blocks: Iterable[BlockTrace]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (
                b.slot,
                b.builder_id,
                b.proposer_payment,
                b.winning_bid,
                b.base_fee_per_gas,
                b.gas_used,
                b.gas_limit,
                b.extra_gas_used,
                b.extra_fees_eth,
                b.timestamp_ms,
                b.missed,
            )
            for b in blocks
        ],
        columns=BLOCK_COLUMNS,
    )


def swaps_to_frame(blocks: Iterable[BlockTrace]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (
                tx.tx_hash,
                tx.slot,
                tx.tx_index,
                tx.sender,
                tx.recipient,
                tx.searcher_id,
                tx.pool_id,
                tx.token_in,
                tx.token_out,
                tx.amount_in,
                tx.amount_out,
                tx.amount_usd,
                tx.gas_used,
                tx.priority_fee_per_gas,
                tx.coinbase_transfer,
                tx.mev_label.value,
                tx.n_swaps_in_tx,
            )
            for b in blocks
            for tx in b.txs
        ],
        columns=SWAP_COLUMNS,
    )


def bids_to_frame(bids: Iterable[BidRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [(b.slot, b.builder_id, b.relay, b.t_offset_ms, b.bid_eth) for b in bids],
        columns=BID_COLUMNS,
    )


def sightings_to_frame(sightings: Iterable[MempoolSighting]) -> pd.DataFrame:
    return pd.DataFrame([(s.tx_hash, s.first_seen_ms) for s in sightings], columns=MEMPOOL_COLUMNS)


def arbitrages_to_frame(records: Iterable[ArbRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (
                r.tx_hash,
                r.slot,
                r.searcher_id,
                r.builder_id,
                r.pool_id,
                r.direction.value,
                r.p_off,
                r.target_end_price,
                r.post_trade_price,
                r.profit_usd,
                r.tip_eth,
            )
            for r in records
        ],
        columns=GROUND_TRUTH_COLUMNS,
    )


def write_dataset(
    directory: Path,
    result: SimulationResult,
    price_paths: Mapping[str, Sequence[CandleBar]],
    first_slot: int,
    last_slot: int,
    genesis: int,
    source: str = "",
    with_ground_truth: bool = True,
) -> DatasetManifest:
    """Write simulator output as a dataset directory and return its manifest.

    Parameters
    ----------
    directory : pathlib.Path
        Target directory, created when missing.
    result : SimulationResult
        Output of :func:`cexdex.pbs.simulate`.
    price_paths : Mapping[str, Sequence[CandleBar]]
        Off-chain candles per symbol.
    first_slot, last_slot : int
        Declared slot range (inclusive).
    genesis : int
        UNIX seconds of slot 0.
    source : str, optional
        Provenance recorded in the manifest.
    with_ground_truth : bool, default=True
        Also write ``ground_truth.csv``.

    Returns
    -------
    DatasetManifest
        The manifest written to ``directory / "manifest.yaml"``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    candles = pd.concat(
        [candles_to_frame(bars, symbol) for symbol, bars in sorted(price_paths.items())]
        or [pd.DataFrame(columns=CANDLE_FILE_COLUMNS)],
        ignore_index=True,
    )
    frames = {
        "blocks": blocks_to_frame(result.blocks),
        "swaps": swaps_to_frame(result.blocks),
        "bids": bids_to_frame(result.bids),
        "mempool": sightings_to_frame(result.sightings),
        "candles": candles[CANDLE_FILE_COLUMNS],
    }
    if with_ground_truth:
        frames["ground_truth"] = arbitrages_to_frame(result.arbitrages)

    entries = {}
    for role, frame in frames.items():
        path = write_table(frame, directory / FILE_NAMES[role])
        entries[role] = file_entry(path, directory)
    manifest = DatasetManifest(
        first_slot=first_slot,
        last_slot=last_slot,
        genesis=genesis,
        files=entries,
        source=source,
    )
    manifest.write(directory)
    logger.debug(f"wrote dataset with {len(result.blocks)} block(s) to {directory}")
    return manifest


@dataclass
class Dataset:
    """A loaded dataset and every issue found while loading it."""

    manifest: DatasetManifest
    blocks: list[BlockTrace] = field(default_factory=list)
    bids: list[BidRecord] = field(default_factory=list)
    sightings: list[MempoolSighting] = field(default_factory=list)
    candles: dict[str, list[CandleBar]] = field(default_factory=dict)
    ground_truth: pd.DataFrame | None = None
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def raise_for_issues(self) -> None:
        if self.issues:
            raise DatasetValidationError(self.issues)


class _Reader:
    """Row-wise CSV parsing that turns every problem into a :class:`ValidationIssue`."""

    def __init__(self, root: Path, issues: list[ValidationIssue]) -> None:
        self.root = root
        self.issues = issues

    def rows(
        self, manifest: DatasetManifest, role: str, columns: Sequence[str]
    ) -> list[tuple[int, dict]]:
        entry = manifest.files.get(role)
        if entry is None or not (self.root / entry.path).is_file():
            return []
        try:
            frame = pd.read_csv(self.root / entry.path, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError:
            self.issues.append(ValidationIssue(entry.path, None, "parse", "file has no header"))
            return []
        except pd.errors.ParserError as exc:
            self.issues.append(ValidationIssue(entry.path, None, "parse", str(exc)))
            return []
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            self.issues.append(
                ValidationIssue(entry.path, None, "parse", f"missing columns {missing}")
            )
            return []
        # header is line 1
        return [(i + 2, row) for i, row in enumerate(frame.to_dict("records"))]

    def build(self, file: str, line: int, make: Callable[[], T]) -> T | None:
        try:
            return make()
        except DomainError as exc:
            self.issues.append(ValidationIssue(file, line, "invariant", str(exc)))
        except (ValueError, KeyError) as exc:
            self.issues.append(ValidationIssue(file, line, "parse", str(exc)))
        return None


def _bool(text: str) -> bool:
    if text in ("True", "true", "1"):
        return True
    if text in ("False", "false", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _swap(row: dict) -> SwapEvent:
    return SwapEvent(
        slot=int(row["slot"]),
        tx_index=int(row["tx_index"]),
        sender=row["sender"],
        recipient=row["recipient"],
        pool_id=row["pool_id"],
        token_in=row["token_in"],
        token_out=row["token_out"],
        amount_in=float(row["amount_in"]),
        amount_out=float(row["amount_out"]),
        amount_usd=float(row["amount_usd"]),
        gas_used=int(row["gas_used"]),
        priority_fee_per_gas=float(row["priority_fee_per_gas"]),
        coinbase_transfer=float(row["coinbase_transfer"]),
        mev_label=MevLabel(row["mev_label"]),
        n_swaps_in_tx=int(row["n_swaps_in_tx"]),
        searcher_id=row["searcher_id"] or None,
    )


def load_and_validate(path: Path) -> Dataset:
    """Load a dataset directory and validate it, collecting every issue.

    Checks checksums, parses each record, enforces type invariants, resolves references
    (swaps, bids and ground truth must name known blocks and swaps), verifies the declared
    slot range, and derives swap privacy: a swap is private unless a sighting precedes
    its block's first-seen time.

    Parameters
    ----------
    path : pathlib.Path
        Dataset directory or its ``manifest.yaml``.

    Returns
    -------
    Dataset
        Parsed records; ``issues`` lists every problem, in file order.

    Raises
    ------
    FileNotFoundError
        If no manifest exists at ``path``.
    """
    path = Path(path)
    root = path if path.is_dir() else path.parent
    if not (root / MANIFEST_NAME).is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
    try:
        manifest = DatasetManifest.read(root)
    except (ValueError, TypeError) as exc:
        fallback = DatasetManifest(first_slot=0, last_slot=-1, genesis=0)
        return Dataset(fallback, issues=[ValidationIssue(MANIFEST_NAME, None, "parse", str(exc))])

    issues = verify(manifest, root)
    reader = _Reader(root, issues)
    names = {role: entry.path for role, entry in manifest.files.items()}

    block_rows: dict[int, tuple[int, dict]] = {}
    for line, row in reader.rows(manifest, "blocks", BLOCK_COLUMNS):
        slot = reader.build(names["blocks"], line, lambda: int(row["slot"]))
        if slot is None:
            continue
        if slot in block_rows:
            issues.append(
                ValidationIssue(names["blocks"], line, "invariant", f"duplicate slot {slot}")
            )
            continue
        block_rows[slot] = (line, row)

    swaps_by_slot: dict[int, list[SwapEvent]] = {}
    for line, row in reader.rows(manifest, "swaps", SWAP_COLUMNS):
        swap = reader.build(names["swaps"], line, lambda: _swap(row))
        if swap is None:
            continue
        if swap.tx_hash != row["tx_hash"]:
            issues.append(
                ValidationIssue(
                    names["swaps"],
                    line,
                    "invariant",
                    f"tx_hash {row['tx_hash']} does not match slot/index",
                )
            )
            continue
        if swap.slot not in block_rows:
            issues.append(
                ValidationIssue(
                    names["swaps"],
                    line,
                    "referential",
                    f"swap {swap.tx_hash} references missing block {swap.slot}",
                )
            )
            continue
        swaps_by_slot.setdefault(swap.slot, []).append(swap)

    sightings = []
    first_seen: dict[str, int] = {}
    for line, row in reader.rows(manifest, "mempool", MEMPOOL_COLUMNS):
        sighting = reader.build(
            names["mempool"],
            line,
            lambda: MempoolSighting(row["tx_hash"], int(row["first_seen_ms"])),
        )
        if sighting is not None:
            sightings.append(sighting)
            seen = first_seen.get(sighting.tx_hash)
            first_seen[sighting.tx_hash] = (
                sighting.first_seen_ms if seen is None else min(seen, sighting.first_seen_ms)
            )

    known_swaps = {tx.tx_hash for txs in swaps_by_slot.values() for tx in txs}
    ground_truth = None
    truth_by_slot: dict[int, set[str]] = {}
    if "ground_truth" in manifest.files:
        truth_rows = reader.rows(manifest, "ground_truth", GROUND_TRUTH_COLUMNS)
        kept = []
        for line, row in truth_rows:
            if row["swap_id"] not in known_swaps:
                issues.append(
                    ValidationIssue(
                        names["ground_truth"], line, "referential", f"unknown swap {row['swap_id']}"
                    )
                )
                continue
            slot = reader.build(names["ground_truth"], line, lambda: int(row["slot"]))
            if slot is not None:
                truth_by_slot.setdefault(slot, set()).add(row["swap_id"])
                kept.append(row)
        ground_truth = _typed_ground_truth(kept)

    blocks = []
    for slot in sorted(block_rows):
        line, row = block_rows[slot]
        block = reader.build(
            names["blocks"],
            line,
            lambda: _block(row, slot, swaps_by_slot, first_seen, truth_by_slot),
        )
        if block is None:
            continue
        for violation in block.violations():
            issues.append(ValidationIssue(names["blocks"], line, "invariant", violation))
        blocks.append(block)

    declared = set(manifest.slots)
    present = set(block_rows)
    if declared - present:
        issues.append(
            ValidationIssue(
                names.get("blocks", "blocks.csv"),
                None,
                "invariant",
                f"{len(declared - present)} declared slot(s) missing",
            )
        )
    if present - declared:
        issues.append(
            ValidationIssue(
                names.get("blocks", "blocks.csv"),
                None,
                "invariant",
                f"{len(present - declared)} slot(s) outside the declared range",
            )
        )

    bids = []
    for line, row in reader.rows(manifest, "bids", BID_COLUMNS):
        bid = reader.build(
            names["bids"],
            line,
            lambda: BidRecord(
                slot=int(row["slot"]),
                builder_id=row["builder_id"],
                bid_eth=float(row["bid_eth"]),
                t_offset_ms=int(row["t_offset_ms"]),
                relay=row["relay"],
            ),
        )
        if bid is None:
            continue
        if bid.slot not in block_rows:
            issues.append(
                ValidationIssue(
                    names["bids"], line, "referential", f"bid references missing block {bid.slot}"
                )
            )
            continue
        bids.append(bid)

    candles: dict[str, list[CandleBar]] = {}
    for line, row in reader.rows(manifest, "candles", CANDLE_FILE_COLUMNS):
        bar = reader.build(
            names["candles"],
            line,
            lambda: CandleBar(
                timestamp=int(row["timestamp"]),
                interval=int(row["interval"]),
                open=float(row["open"]),
                high=float(row["high"]),
                low=float(row["low"]),
                close=float(row["close"]),
            ),
        )
        if bar is not None:
            candles.setdefault(row["symbol"], []).append(bar)

    if issues:
        logger.warning(f"dataset {root} has {len(issues)} validation issue(s)")
    return Dataset(
        manifest=manifest,
        blocks=blocks,
        bids=bids,
        sightings=sightings,
        candles=candles,
        ground_truth=ground_truth,
        issues=issues,
    )


def _block(
    row: dict,
    slot: int,
    swaps_by_slot: Mapping[int, list[SwapEvent]],
    first_seen: Mapping[str, int],
    truth_by_slot: Mapping[int, set[str]],
) -> BlockTrace:
    timestamp_ms = int(row["timestamp_ms"])
    txs = []
    for tx in sorted(swaps_by_slot.get(slot, []), key=lambda tx: tx.tx_index):
        seen = first_seen.get(tx.tx_hash)
        txs.append(replace(tx, is_private=seen is None or seen >= timestamp_ms))
    return BlockTrace(
        slot=slot,
        builder_id=row["builder_id"],
        proposer_payment=float(row["proposer_payment"]),
        base_fee_per_gas=float(row["base_fee_per_gas"]),
        gas_used=int(row["gas_used"]),
        txs=tuple(txs),
        winning_bid=float(row["winning_bid"]),
        ground_truth_arb_ids=frozenset(truth_by_slot.get(slot, set())),
        gas_limit=int(row["gas_limit"]),
        timestamp_ms=timestamp_ms,
        missed=_bool(row["missed"]),
        extra_gas_used=int(row["extra_gas_used"]),
        extra_fees_eth=float(row["extra_fees_eth"]),
    )


def _typed_ground_truth(rows: list[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=GROUND_TRUTH_COLUMNS)
    for column in ("p_off", "target_end_price", "post_trade_price", "profit_usd", "tip_eth"):
        frame[column] = frame[column].astype(float)
    frame["slot"] = frame["slot"].astype(int)
    return frame


def cross_check_relay_bids(
    blocks: Sequence[BlockTrace], bids: Sequence[BidRecord], tol: float = 1e-9
) -> tuple[list[BidRecord], list[int]]:
    """Drop all bids of blocks whose relay-reported value disagrees with the payment.

    The relay-reported winning value of a block is its largest bid. When it differs from
    the block's proposer payment by more than ``tol`` ETH, every bid of that block is
    discarded.

    Returns
    -------
    tuple[list[BidRecord], list[int]]
        Kept bids (in input order) and the sorted slots whose bids were discarded.
    """
    payments = {block.slot: block.proposer_payment for block in blocks}
    reported: dict[int, float] = {}
    for bid in bids:
        reported[bid.slot] = max(reported.get(bid.slot, bid.bid_eth), bid.bid_eth)
    discarded = sorted(
        slot
        for slot, value in reported.items()
        if slot not in payments or abs(value - payments[slot]) > tol
    )
    if discarded:
        logger.warning(
            f"discarding relay bids of {len(discarded)} block(s) with mismatched payments"
        )
    dropped = set(discarded)
    return [bid for bid in bids if bid.slot not in dropped], discarded


def write_flags(flags: pd.DataFrame, path: Path) -> Path:
    return write_table(flags[FLAG_COLUMNS], path)


def load_flags(path: Path) -> pd.DataFrame:
    """Read a flags file written by :func:`write_flags`.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ValueError
        If columns are missing.
    """
    text_columns = [
        "tx_hash",
        "builder_id",
        "searcher",
        "sender",
        "recipient",
        "pool_id",
        "token_in",
        "token_out",
    ]
    flags = pd.read_csv(
        path,
        dtype={column: str for column in text_columns},
        keep_default_na=False,
        float_precision="round_trip",
    )
    missing = [c for c in FLAG_COLUMNS if c not in flags.columns]
    if missing:
        raise ValueError(f"{path}: missing flag columns {missing}")
    for column in HEURISTIC_COLUMNS:
        flags[column] = (
            flags[column].map(lambda v: v if isinstance(v, bool) else _bool(str(v))).astype(bool)
        )
    for column in ("slot", "tx_index", "gas_used"):
        flags[column] = flags[column].astype("int64")
    for column in ("amount_usd", "fees_eth"):
        flags[column] = flags[column].astype(float)
    return flags[FLAG_COLUMNS]
