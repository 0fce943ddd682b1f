"""Heuristic identification of non-atomic arbitrage swaps in block traces.

A swap is flagged when it is a simple swap, was never seen in the public mempool, tips
the fee recipient, is the first swap in its pool and direction within the block, and
trades two established tokens. Searchers known to be subsidized by the block's builder
are waived from the tipping requirement.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources

import pandas as pd
import yaml
from joblib import Parallel, delayed

from .errors import BlockValidationError, DomainError
from .pbs import BlockTrace, MevLabel, SwapEvent

logger = logging.getLogger(__name__)

HEURISTIC_COLUMNS = [
    "h1_simple",
    "h2_private",
    "h3_tip",
    "h4_first_in_direction",
    "h5_established",
    "h3_exempted",
    "flagged",
]
FLAG_COLUMNS = [
    "slot",
    "tx_index",
    "tx_hash",
    "builder_id",
    "searcher",
    "sender",
    "recipient",
    "pool_id",
    "token_in",
    "token_out",
    "amount_usd",
    "gas_used",
    "fees_eth",
    *HEURISTIC_COLUMNS,
]


@lru_cache(maxsize=1)
def default_established_tokens() -> frozenset[str]:
    """Token symbols shipped in ``resources/established_tokens.yaml``."""
    text = resources.files("cexdex").joinpath("resources/established_tokens.yaml").read_text()
    return frozenset(str(token) for token in yaml.safe_load(text)["tokens"])


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds and token list of the detector.

    Parameters
    ----------
    gas_cap : int, default=400000
        Largest gas use of a simple swap.
    min_priority_fee_gwei : float, default=1.0
        Smallest priority fee per gas that counts as a tip.
    established_tokens : frozenset[str]
        Tokens considered established; defaults to the bundled list.
    exempt_searchers : Mapping[str, str]
        Searcher to builder pairs waived from the tipping heuristic in that builder's blocks.
    """

    gas_cap: int = 400_000
    min_priority_fee_gwei: float = 1.0
    established_tokens: frozenset[str] = field(default_factory=default_established_tokens)
    exempt_searchers: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.gas_cap <= 0:
            raise DomainError(f"gas_cap must be positive, got {self.gas_cap}")
        if self.min_priority_fee_gwei < 0:
            raise DomainError("min_priority_fee_gwei must be nonnegative")
        object.__setattr__(self, "established_tokens", frozenset(self.established_tokens))
        object.__setattr__(self, "exempt_searchers", dict(self.exempt_searchers))

    def to_dict(self) -> dict:
        return {
            "gas_cap": self.gas_cap,
            "min_priority_fee_gwei": self.min_priority_fee_gwei,
            "established_tokens": sorted(self.established_tokens),
            "exempt_searchers": dict(sorted(self.exempt_searchers.items())),
        }


@dataclass(frozen=True)
class HeuristicVector:
    h1_simple: bool
    h2_private: bool
    h3_tip: bool
    h4_first_in_direction: bool
    h5_established: bool
    h3_exempted: bool = False

    @property
    def flagged(self) -> bool:
        return (
            self.h1_simple
            and self.h2_private
            and (self.h3_tip or self.h3_exempted)
            and self.h4_first_in_direction
            and self.h5_established
        )

    def as_row(self) -> dict[str, bool]:
        return {**asdict(self), "flagged": self.flagged}


def searcher_key(swap: SwapEvent) -> str:
    """Searcher a swap is attributed to: its searcher id, else the recipient contract."""
    return swap.searcher_id or swap.recipient


def first_in_direction(block: BlockTrace, swap: SwapEvent) -> bool:
    """Whether every earlier swap in the same pool and direction went to the same recipient.

    Examples
    --------
    A swap with no earlier same-direction swap in its pool is trivially first.
    """
    for earlier in block.txs:
        if earlier.tx_index >= swap.tx_index:
            break
        same_direction = (
            earlier.pool_id == swap.pool_id
            and earlier.token_in == swap.token_in
            and earlier.token_out == swap.token_out
        )
        if same_direction and earlier.recipient != swap.recipient:
            return False
    return True


def _classify(swap: SwapEvent, block: BlockTrace, config: DetectorConfig) -> HeuristicVector:
    exempt_builder = config.exempt_searchers.get(searcher_key(swap))
    return HeuristicVector(
        h1_simple=(
            swap.n_swaps_in_tx == 1
            and swap.mev_label is MevLabel.NONE
            and swap.gas_used <= config.gas_cap
        ),
        h2_private=swap.is_private,
        h3_tip=(
            swap.coinbase_transfer > 0
            or swap.priority_fee_per_gas >= config.min_priority_fee_gwei
        ),
        h4_first_in_direction=first_in_direction(block, swap),
        h5_established=(
            swap.token_in in config.established_tokens
            and swap.token_out in config.established_tokens
        ),
        h3_exempted=exempt_builder is not None and exempt_builder == block.builder_id,
    )


def classify_swap(swap: SwapEvent, block: BlockTrace, config: DetectorConfig) -> HeuristicVector:
    """Evaluate the five heuristics and the tipping exemption for one swap.

    Raises
    ------
    DomainError
        If ``swap`` is not part of ``block``.
    """
    if swap not in block.txs:
        raise DomainError(f"swap {swap.tx_hash} is not part of block {block.slot}")
    return _classify(swap, block, config)


def detect_block(
    block: BlockTrace, config: DetectorConfig
) -> list[tuple[SwapEvent, HeuristicVector]]:
    """Classify every swap of a block, in transaction order.

    Raises
    ------
    BlockValidationError
        If the block violates any of its invariants.
    """
    violations = block.violations()
    if violations:
        raise BlockValidationError(block.slot, violations)
    return [(swap, _classify(swap, block, config)) for swap in block.txs]


def detect_blocks(
    blocks: Sequence[BlockTrace], config: DetectorConfig, n_jobs: int = 1
) -> list[list[tuple[SwapEvent, HeuristicVector]]]:
    """Run :func:`detect_block` over many blocks, fanned out with joblib; order is kept."""
    results = Parallel(n_jobs=n_jobs)(delayed(detect_block)(block, config) for block in blocks)
    n_flagged = sum(vector.flagged for result in results for _, vector in result)
    logger.debug(f"classified {len(blocks)} block(s), {n_flagged} swap(s) flagged")
    return list(results)


def flags_to_frame(
    blocks: Sequence[BlockTrace], results: Sequence[Sequence[tuple[SwapEvent, HeuristicVector]]]
) -> pd.DataFrame:
    """Tabulate detector output with one row per swap (the flags file layout)."""
    rows = []
    for block, result in zip(blocks, results):
        for swap, vector in result:
            rows.append(
                {
                    "slot": block.slot,
                    "tx_index": swap.tx_index,
                    "tx_hash": swap.tx_hash,
                    "builder_id": block.builder_id,
                    "searcher": searcher_key(swap),
                    "sender": swap.sender,
                    "recipient": swap.recipient,
                    "pool_id": swap.pool_id,
                    "token_in": swap.token_in,
                    "token_out": swap.token_out,
                    "amount_usd": swap.amount_usd,
                    "gas_used": swap.gas_used,
                    "fees_eth": swap.fees_eth,
                    **vector.as_row(),
                }
            )
    frame = pd.DataFrame(rows, columns=FLAG_COLUMNS)
    return frame.astype(
        {
            "slot": "int64",
            "tx_index": "int64",
            "gas_used": "int64",
            "amount_usd": float,
            "fees_eth": float,
            **{column: bool for column in HEURISTIC_COLUMNS},
        }
    )
