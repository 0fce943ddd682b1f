"""Slot-level simulation of the proposer-builder separation pipeline.

Searchers watch off-chain prices and send non-atomic arbitrage bundles to builders,
builders assemble blocks from bundles and background flow and stream rising bids to a
relay, and the proposer takes the highest bid. Every included arbitrage is recorded as
ground truth so the detector can be scored against it.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .amm import ArbOpportunity, Direction, Pool, optimal_arb_size, swap_exact_in
from .errors import DomainError
from .market import SLOT_SECONDS, CandleBar, PriceSeries, as_series

logger = logging.getLogger(__name__)

SLOT_MS = SLOT_SECONDS * 1000
BID_CADENCE_MS = 100
GAS_LIMIT = 30_000_000
GAS_TARGET = 15_000_000
GAS_SIMPLE_SWAP = 150_000
GAS_CURVE_SWAP = 350_000
GAS_COMPLEX_SWAP = 450_000
GWEI = 1e-9
BASE_FEE_MAX_CHANGE = 0.125
CONSENSUS_REWARD_ETH = 0.04


class SearcherKind(str, Enum):
    INDEPENDENT = "independent"
    INTEGRATED = "integrated"


class TipStyle(str, Enum):
    PRIORITY_FEE = "priority_fee"
    COINBASE_TRANSFER = "coinbase_transfer"
    SUBSIDIZED = "subsidized"


class MevLabel(str, Enum):
    NONE = "none"
    SANDWICH_FRONT = "sandwich_front"
    SANDWICH_VICTIM = "sandwich_victim"
    SANDWICH_BACK = "sandwich_back"
    CYCLIC_ARB = "cyclic_arb"
    LIQUIDATION = "liquidation"


@dataclass(frozen=True)
class SearcherProfile:
    """A non-atomic arbitrage searcher.

    ``min_profit_threshold`` is in USD; ``tip_fraction`` is the share of the net profit
    (after gas) handed to the builder. ``address`` doubles as sender and recipient of the
    searcher's swaps and defaults to the searcher id.
    """

    searcher_id: str
    kind: SearcherKind = SearcherKind.INDEPENDENT
    builder_id: str | None = None
    tip_style: TipStyle = TipStyle.PRIORITY_FEE
    min_profit_threshold: float = 0.0
    latency_ms: int = 0
    pool_set: frozenset[str] = frozenset()
    tip_fraction: float = 0.8
    exclusive_routing: bool = True
    address: str = ""

    def __post_init__(self) -> None:
        if not self.address:
            object.__setattr__(self, "address", self.searcher_id)
        if self.kind is SearcherKind.INTEGRATED and not self.builder_id:
            raise DomainError(f"integrated searcher {self.searcher_id} needs a builder_id")
        if self.kind is SearcherKind.INDEPENDENT and self.builder_id:
            raise DomainError(f"independent searcher {self.searcher_id} cannot name a builder")
        if self.tip_style is TipStyle.SUBSIDIZED and self.kind is not SearcherKind.INTEGRATED:
            raise DomainError(
                f"searcher {self.searcher_id}: only integrated searchers are subsidized"
            )
        if not 0 <= self.tip_fraction <= 1:
            raise DomainError(f"searcher {self.searcher_id}: tip_fraction must be in [0, 1]")
        if self.latency_ms < 0:
            raise DomainError(f"searcher {self.searcher_id}: latency must be nonnegative")


@dataclass(frozen=True)
class BuilderProfile:
    """A block builder.

    ``mempool_coverage`` is the probability that a background transaction reaches this
    builder. Subsidies of ``subsidy_per_block`` ETH are added to bids for slots in
    ``[subsidy_start_slot, subsidy_end_slot)`` until ``subsidy_budget`` is spent.
    With probability ``overbid_rate`` per slot the builder also submits a bid above what it
    can pay, which the relay rejects.
    """

    builder_id: str
    margin_fraction: float = 0.05
    subsidy_budget: float = 0.0
    subsidy_per_block: float = 0.0
    subsidy_start_slot: int | None = None
    subsidy_end_slot: int | None = None
    integrated_searchers: frozenset[str] = frozenset()
    relay_set: frozenset[str] = frozenset({"relay"})
    accepts_external: bool = True
    mempool_coverage: float = 0.9
    overbid_rate: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.margin_fraction <= 1:
            raise DomainError(f"builder {self.builder_id}: margin_fraction must be in [0, 1]")
        if self.subsidy_budget < 0 or self.subsidy_per_block < 0:
            raise DomainError(f"builder {self.builder_id}: subsidies must be nonnegative")
        if not 0 <= self.mempool_coverage <= 1:
            raise DomainError(f"builder {self.builder_id}: mempool_coverage must be in [0, 1]")
        if not 0 <= self.overbid_rate <= 1:
            raise DomainError(f"builder {self.builder_id}: overbid_rate must be in [0, 1]")

    def subsidizes(self, slot: int) -> bool:
        if self.subsidy_per_block <= 0:
            return False
        after_start = self.subsidy_start_slot is None or slot >= self.subsidy_start_slot
        before_end = self.subsidy_end_slot is None or slot < self.subsidy_end_slot
        return after_start and before_end


@dataclass(frozen=True)
class SwapEvent:
    """One executed DEX swap transaction.

    ``priority_fee_per_gas`` is in GWei, ``coinbase_transfer`` in ETH. A transaction that
    routes through several pools is one event with ``n_swaps_in_tx > 1``.
    """

    slot: int
    tx_index: int
    sender: str
    recipient: str
    pool_id: str
    token_in: str
    token_out: str
    amount_in: float
    amount_out: float
    amount_usd: float
    gas_used: int
    priority_fee_per_gas: float = 0.0
    coinbase_transfer: float = 0.0
    is_private: bool = False
    mev_label: MevLabel = MevLabel.NONE
    n_swaps_in_tx: int = 1
    searcher_id: str | None = None

    def __post_init__(self) -> None:
        if not (self.amount_in > 0 and self.amount_out > 0 and self.amount_usd > 0):
            raise DomainError(f"swap {self.tx_hash}: amounts must be positive")
        if self.gas_used <= 0:
            raise DomainError(f"swap {self.tx_hash}: gas_used must be positive")
        if self.priority_fee_per_gas < 0 or self.coinbase_transfer < 0:
            raise DomainError(f"swap {self.tx_hash}: tips must be nonnegative")
        if self.n_swaps_in_tx < 1:
            raise DomainError(f"swap {self.tx_hash}: n_swaps_in_tx must be at least 1")

    @property
    def tx_hash(self) -> str:
        return tx_hash(self.slot, self.tx_index)

    @property
    def fees_eth(self) -> float:
        """Priority fees plus coinbase transfer paid to the fee recipient."""
        return self.priority_fee_per_gas * self.gas_used * GWEI + self.coinbase_transfer


def tx_hash(slot: int, tx_index: int) -> str:
    return f"0x{slot:012x}{tx_index:06x}"


@dataclass(frozen=True)
class BlockTrace:
    """A proposed block (or a missed slot) with its swaps and PBS payment.

    Construction does not validate; :meth:`violations` lists broken invariants so that
    loaders can report every problem at once.
    """

    slot: int
    builder_id: str
    proposer_payment: float
    base_fee_per_gas: float
    gas_used: int
    txs: tuple[SwapEvent, ...] = ()
    winning_bid: float = 0.0
    ground_truth_arb_ids: frozenset[str] = frozenset()
    gas_limit: int = GAS_LIMIT
    timestamp_ms: int = 0
    missed: bool = False
    extra_gas_used: int = 0
    extra_fees_eth: float = 0.0

    @property
    def fees_received(self) -> float:
        return sum(tx.fees_eth for tx in self.txs) + self.extra_fees_eth

    @property
    def builder_profit(self) -> float:
        return self.fees_received - self.proposer_payment

    def violations(self) -> list[str]:
        problems = []
        if self.gas_used > self.gas_limit:
            problems.append(f"gas_used {self.gas_used} exceeds gas_limit {self.gas_limit}")
        if sum(tx.gas_used for tx in self.txs) + self.extra_gas_used != self.gas_used:
            problems.append("gas_used differs from the sum of transaction gas")
        if abs(self.proposer_payment - self.winning_bid) > 1e-12:
            problems.append("proposer_payment differs from winning_bid")
        indices = [tx.tx_index for tx in self.txs]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            problems.append("tx indices are not strictly increasing")
        if any(tx.slot != self.slot for tx in self.txs):
            problems.append("transaction slot differs from block slot")
        unknown = self.ground_truth_arb_ids - {tx.tx_hash for tx in self.txs}
        if unknown:
            problems.append(f"ground truth ids not in block: {sorted(unknown)}")
        if self.missed and self.txs:
            problems.append("missed slot carries transactions")
        return problems


@dataclass(frozen=True)
class BidRecord:
    """One builder bid as stored by a relay, ``t_offset_ms`` after the slot's lead-up began."""

    slot: int
    builder_id: str
    bid_eth: float
    t_offset_ms: int
    relay: str = "relay"

    def __post_init__(self) -> None:
        if not 0 <= self.t_offset_ms <= SLOT_MS:
            raise DomainError(f"bid offset {self.t_offset_ms} outside [0, {SLOT_MS}] ms")
        if self.bid_eth < 0:
            raise DomainError(f"bid of {self.builder_id} in slot {self.slot} is negative")


@dataclass(frozen=True)
class MempoolSighting:
    """Earliest time any monitoring node saw a transaction."""

    tx_hash: str
    first_seen_ms: int


@dataclass(frozen=True)
class ArbRecord:
    """Ground truth for one included arbitrage swap."""

    tx_hash: str
    slot: int
    searcher_id: str
    builder_id: str
    pool_id: str
    direction: Direction
    p_off: float
    target_end_price: float
    post_trade_price: float
    profit_usd: float
    tip_eth: float


@dataclass(frozen=True)
class BackgroundConfig:
    """Expected counts per block of each kind of background transaction.

    Counts are ``floor(rate)`` plus one more with probability ``rate - floor(rate)``, so an
    integer rate gives exactly that many per block.
    The non-swap filler (``extra_gas_mean`` gas at ``extra_fee_gwei``) is sized so a default
    block carries about 0.12 ETH of execution-layer value.
    """

    plain_swaps: float = 8.0
    sandwiches: float = 0.3
    cyclic_arbs: float = 0.2
    liquidations: float = 0.05
    multi_swaps: float = 1.0
    high_gas_swaps: float = 0.5
    curve_fraction: float = 0.1
    private_fraction: float = 0.15
    mean_trade_usd: float = 5_000.0
    mean_priority_fee_gwei: float = 1.5
    extra_gas_mean: float = 12_000_000.0
    extra_fee_gwei: float = 9.5

    def __post_init__(self) -> None:
        rates = (
            self.plain_swaps,
            self.sandwiches,
            self.cyclic_arbs,
            self.liquidations,
            self.multi_swaps,
            self.high_gas_swaps,
        )
        if any(r < 0 for r in rates):
            raise DomainError("background rates must be nonnegative")
        if not (0 <= self.curve_fraction <= 1 and 0 <= self.private_fraction <= 1):
            raise DomainError("background fractions must be in [0, 1]")
        if self.extra_gas_mean < 0 or self.extra_fee_gwei < 0:
            raise DomainError("extra gas and fee must be nonnegative")

    @classmethod
    def silent(cls) -> BackgroundConfig:
        """No background flow at all."""
        return cls(
            plain_swaps=0.0,
            sandwiches=0.0,
            cyclic_arbs=0.0,
            liquidations=0.0,
            multi_swaps=0.0,
            high_gas_swaps=0.0,
            extra_gas_mean=0.0,
        )


def _count(rng: np.random.Generator, rate: float) -> int:
    whole = math.floor(rate)
    return whole + int(rng.random() < rate - whole)


def _address(rng: np.random.Generator, prefix: str = "0x") -> str:
    return f"{prefix}{int(rng.integers(0, 2**40)):010x}"


def _quote(
    pool: Pool, direction: Direction, amount_usd: float, usd: Mapping[str, float]
) -> tuple[str, str, float, float]:
    """Token pair and amounts of a swap worth ``amount_usd`` against ``pool``."""
    if direction is Direction.BUY_X:
        amount_in = amount_usd / usd.get(pool.token_y, 1.0)
        token_in, token_out = pool.token_y, pool.token_x
    else:
        amount_in = amount_usd / (usd.get(pool.token_y, 1.0) * pool.price)
        token_in, token_out = pool.token_x, pool.token_y
    amount_out, _ = swap_exact_in(pool, amount_in, direction)
    return token_in, token_out, amount_in, amount_out


def gen_background_txs(
    config: BackgroundConfig,
    seed: int | Sequence[int],
    pools: Mapping[str, Pool],
    usd_prices: Mapping[str, float] | None = None,
    slot: int = 0,
) -> list[SwapEvent]:
    """Generate labelled background swaps for one block.

    Sandwich attacks occupy three adjacent indices (front, victim, back). Swaps are quoted
    against the given pool states without changing them. The output is a pure function of
    ``(config, seed, pools, usd_prices, slot)``.

    Parameters
    ----------
    config : BackgroundConfig
        Per-block rates and fee levels.
    seed : int or Sequence[int]
        Seed of the generator.
    pools : Mapping[str, Pool]
        Pools the flow trades against.
    usd_prices : Mapping[str, float], optional
        USD price per token; tokens not listed count as 1 USD.
    slot : int, default=0
        Slot written into the events.

    Returns
    -------
    list[SwapEvent]
        Events with provisional indices ``0..n-1``.
    """
    rng = np.random.default_rng(seed)
    usd = dict(usd_prices or {})
    pool_ids = sorted(pools)
    if not pool_ids:
        return []

    def pick() -> tuple[Pool, Direction]:
        pool = pools[pool_ids[int(rng.integers(len(pool_ids)))]]
        direction = Direction.BUY_X if rng.random() < 0.5 else Direction.SELL_X
        return pool, direction

    def trade_usd() -> float:
        return float(config.mean_trade_usd * rng.lognormal(-0.5, 1.0))

    def priority_fee() -> float:
        return float(config.mean_priority_fee_gwei * rng.lognormal(-0.125, 0.5))

    groups: list[list[dict]] = []

    for _ in range(_count(rng, config.plain_swaps)):
        pool, direction = pick()
        user = _address(rng)
        gas = GAS_CURVE_SWAP if rng.random() < config.curve_fraction else GAS_SIMPLE_SWAP
        token_in, token_out, amount_in, amount_out = _quote(pool, direction, trade_usd(), usd)
        groups.append(
            [
                dict(
                    sender=user,
                    recipient=user,
                    pool=pool,
                    token_in=token_in,
                    token_out=token_out,
                    amount_in=amount_in,
                    amount_out=amount_out,
                    gas_used=gas,
                    priority_fee_per_gas=priority_fee(),
                    is_private=bool(rng.random() < config.private_fraction),
                )
            ]
        )

    for _ in range(_count(rng, config.sandwiches)):
        pool, direction = pick()
        attacker, victim = _address(rng, "0xa"), _address(rng)
        size = trade_usd()
        back = Direction.SELL_X if direction is Direction.BUY_X else Direction.BUY_X
        legs = []
        for label, who, leg_direction, usd_size in (
            (MevLabel.SANDWICH_FRONT, attacker, direction, 2 * size),
            (MevLabel.SANDWICH_VICTIM, victim, direction, size),
            (MevLabel.SANDWICH_BACK, attacker, back, 2 * size),
        ):
            token_in, token_out, amount_in, amount_out = _quote(pool, leg_direction, usd_size, usd)
            is_attack = label is not MevLabel.SANDWICH_VICTIM
            legs.append(
                dict(
                    sender=who,
                    recipient=who,
                    pool=pool,
                    token_in=token_in,
                    token_out=token_out,
                    amount_in=amount_in,
                    amount_out=amount_out,
                    gas_used=GAS_SIMPLE_SWAP,
                    priority_fee_per_gas=priority_fee() * (3.0 if is_attack else 1.0),
                    coinbase_transfer=0.002 if label is MevLabel.SANDWICH_BACK else 0.0,
                    is_private=is_attack,
                    mev_label=label,
                )
            )
        groups.append(legs)

    for label, rate, n_swaps, gas in (
        (MevLabel.CYCLIC_ARB, config.cyclic_arbs, 3, 300_000),
        (MevLabel.LIQUIDATION, config.liquidations, 1, 500_000),
    ):
        for _ in range(_count(rng, rate)):
            pool, direction = pick()
            bot = _address(rng, "0xb")
            token_in, token_out, amount_in, amount_out = _quote(pool, direction, trade_usd(), usd)
            groups.append(
                [
                    dict(
                        sender=bot,
                        recipient=bot,
                        pool=pool,
                        token_in=token_in,
                        token_out=token_out,
                        amount_in=amount_in,
                        amount_out=amount_out,
                        gas_used=gas,
                        priority_fee_per_gas=priority_fee(),
                        coinbase_transfer=0.001,
                        is_private=True,
                        mev_label=label,
                        n_swaps_in_tx=n_swaps,
                    )
                ]
            )

    for n_swaps_low, rate, gas_low, gas_high in (
        (2, config.multi_swaps, 250_000, 400_000),
        (1, config.high_gas_swaps, GAS_COMPLEX_SWAP, 900_000),
    ):
        for _ in range(_count(rng, rate)):
            pool, direction = pick()
            user = _address(rng)
            n_swaps = int(rng.integers(n_swaps_low, 5)) if n_swaps_low > 1 else 1
            token_in, token_out, amount_in, amount_out = _quote(pool, direction, trade_usd(), usd)
            groups.append(
                [
                    dict(
                        sender=user,
                        recipient=user,
                        pool=pool,
                        token_in=token_in,
                        token_out=token_out,
                        amount_in=amount_in,
                        amount_out=amount_out,
                        gas_used=int(rng.integers(gas_low, gas_high)),
                        priority_fee_per_gas=priority_fee(),
                        is_private=bool(rng.random() < config.private_fraction),
                        n_swaps_in_tx=n_swaps,
                    )
                ]
            )

    order = rng.permutation(len(groups))
    events: list[SwapEvent] = []
    for group_index in order:
        for leg in groups[group_index]:
            pool = leg.pop("pool")
            y_amount = leg["amount_in"] if leg["token_in"] == pool.token_y else leg["amount_out"]
            events.append(
                SwapEvent(
                    slot=slot,
                    tx_index=len(events),
                    pool_id=pool.pool_id,
                    amount_usd=y_amount * usd.get(pool.token_y, 1.0),
                    **leg,
                )
            )
    return events


def base_fee_update(
    prev_base_fee: float,
    prev_gas_used: int,
    target: int = GAS_TARGET,
    floor: float = 0.0,
) -> float:
    """Next block's base fee after a block of ``prev_gas_used`` gas.

    ``next = prev * (1 + 0.125 * (used - target) / target)``, clamped below at ``floor``.

    Examples
    --------
    >>> base_fee_update(10.0, 30_000_000)
    11.25
    """
    if not 0 <= prev_gas_used <= 2 * target:
        raise DomainError(f"gas used {prev_gas_used} outside [0, {2 * target}]")
    updated = prev_base_fee * (1.0 + BASE_FEE_MAX_CHANGE * (prev_gas_used - target) / target)
    return max(floor, updated)


def builder_bid(
    builder: BuilderProfile,
    block_value: float,
    t_offset_ms: int = SLOT_MS,
    subsidy: float = 0.0,
    remaining_budget: float | None = None,
) -> float:
    """Bid a builder submits for a block worth ``block_value`` ETH.

    ``(1 - margin) * block_value`` without a subsidy. A subsidizing builder forfeits its
    margin and bids ``block_value`` plus the subsidy, capped at the remaining subsidy budget
    (the profile's ``subsidy_budget`` when ``remaining_budget`` is omitted), so a block it
    wins with a subsidy always loses exactly the amount spent.

    Examples
    --------
    >>> builder_bid(BuilderProfile("b", margin_fraction=0.1), 1.0)
    0.9
    """
    if block_value < 0:
        raise DomainError(f"block value must be nonnegative, got {block_value}")
    if not 0 <= t_offset_ms <= SLOT_MS:
        raise DomainError(f"bid offset {t_offset_ms} outside [0, {SLOT_MS}] ms")
    budget = builder.subsidy_budget if remaining_budget is None else remaining_budget
    spend = min(max(subsidy, 0.0), max(budget, 0.0))
    if spend > 0:
        return block_value + spend
    return (1.0 - builder.margin_fraction) * block_value


def relay_accepts(bid: float, block_value: float, remaining_budget: float) -> bool:
    """A relay only forwards bids the builder can pay from fees and subsidy budget."""
    return bid <= block_value + max(remaining_budget, 0.0) + 1e-12


@dataclass(frozen=True)
class WorldState:
    """Everything that persists from one slot to the next.

    ``base_fee_gwei`` and ``subsidy_spent`` evolve; pools move only through arbitrages.
    """

    pools: Mapping[str, Pool]
    searchers: tuple[SearcherProfile, ...]
    builders: tuple[BuilderProfile, ...]
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    seed: int = 0
    relays: frozenset[str] = frozenset({"relay"})
    base_fee_gwei: float = 20.0
    base_fee_floor: float = 1.0
    offchain_fee: float = 0.001
    eth_usd: float = 1600.0
    genesis: int = 1_672_531_200
    missed_slot_rate: float = 0.0
    subsidy_spent: Mapping[str, float] = field(default_factory=dict)

    def remaining_budget(self, builder: BuilderProfile) -> float:
        return builder.subsidy_budget - self.subsidy_spent.get(builder.builder_id, 0.0)


@dataclass(frozen=True)
class _Bundle:
    searcher: SearcherProfile
    pool: Pool
    opportunity: ArbOpportunity
    amount_in: float
    target_end_price: float
    profit_usd: float
    tip_eth: float
    priority_fee_per_gas: float
    coinbase_transfer: float
    arrival_ms: int


@dataclass(frozen=True)
class _Candidate:
    builder: BuilderProfile
    bundles: tuple[_Bundle, ...]
    background: tuple[SwapEvent, ...]
    extra_gas: int
    extra_fees: float
    value: float
    subsidy: float
    bids: tuple[BidRecord, ...]
    final_bid: float


@dataclass(frozen=True)
class SlotResult:
    """Outcome of one slot: the proposed block, relayed bids, and the advanced world.

    ``rejected`` holds bids the relay refused to forward; they never reach the auction.
    """

    block: BlockTrace
    bids: tuple[BidRecord, ...]
    world: WorldState
    arbitrages: tuple[ArbRecord, ...] = ()
    sightings: tuple[MempoolSighting, ...] = ()
    rejected: tuple[BidRecord, ...] = ()


class _Prices:
    """USD prices per token at arbitrary instants; tokens without a path are stablecoins."""

    def __init__(self, paths: Mapping[str, Sequence[CandleBar]]) -> None:
        self.paths: dict[str, PriceSeries] = {k: as_series(v) for k, v in paths.items()}

    def usd(self, token: str, t: float) -> float:
        series = self.paths.get(token)
        return 1.0 if series is None else series.price_at(t)

    def pair(self, pool: Pool, t: float) -> float:
        return self.usd(pool.token_x, t) / self.usd(pool.token_y, t)

    def snapshot(self, t: float) -> dict[str, float]:
        return {token: self.usd(token, t) for token in self.paths}


def _searcher_bundles(
    world: WorldState, prices: _Prices, slot_start: int, eth_usd: float
) -> list[_Bundle]:
    gas_cost_eth = GAS_SIMPLE_SWAP * world.base_fee_gwei * GWEI
    bundles = []
    for searcher in sorted(world.searchers, key=lambda s: s.searcher_id):
        seen_at = slot_start - searcher.latency_ms / 1000.0
        for pool_id in sorted(searcher.pool_set):
            pool = world.pools[pool_id]
            opportunity = ArbOpportunity.observe(
                pool, prices.pair(pool, seen_at), world.offchain_fee
            )
            solution = optimal_arb_size(
                pool, opportunity.p_off_avg, opportunity.off_fee_g, opportunity.direction
            )
            if not solution.is_trade:
                continue
            profit_y = solution.profit_in_y(opportunity.p_off_avg)
            profit_usd = profit_y * prices.usd(pool.token_y, seen_at)
            net_usd = profit_usd - gas_cost_eth * eth_usd
            if net_usd <= 0:
                continue
            tip_usd = (
                0.0
                if searcher.tip_style is TipStyle.SUBSIDIZED
                else searcher.tip_fraction * net_usd
            )
            if net_usd - tip_usd <= searcher.min_profit_threshold:
                continue
            tip_eth = tip_usd / eth_usd
            by_fee = searcher.tip_style is TipStyle.PRIORITY_FEE
            bundles.append(
                _Bundle(
                    searcher=searcher,
                    pool=pool,
                    opportunity=opportunity,
                    amount_in=solution.amount_in,
                    target_end_price=solution.end_price,
                    profit_usd=profit_usd,
                    tip_eth=tip_eth,
                    priority_fee_per_gas=tip_eth / GAS_SIMPLE_SWAP / GWEI if by_fee else 0.0,
                    coinbase_transfer=0.0 if by_fee else tip_eth,
                    arrival_ms=max(0, SLOT_MS - BID_CADENCE_MS - searcher.latency_ms),
                )
            )
    return bundles


def _routed_to(builder: BuilderProfile, bundle: _Bundle) -> bool:
    searcher = bundle.searcher
    if searcher.builder_id == builder.builder_id:
        return True
    if searcher.kind is SearcherKind.INTEGRATED and searcher.exclusive_routing:
        return False
    return builder.accepts_external


def _select_bundles(builder: BuilderProfile, bundles: list[_Bundle]) -> tuple[_Bundle, ...]:
    """One bundle per pool: highest tip, own integrated searchers on ties; ordered by tip."""
    best: dict[str, _Bundle] = {}
    for bundle in bundles:
        if not _routed_to(builder, bundle):
            continue
        current = best.get(bundle.pool.pool_id)
        if current is None or _preference(builder, bundle) < _preference(builder, current):
            best[bundle.pool.pool_id] = bundle
    return tuple(sorted(best.values(), key=lambda b: (-b.tip_eth, b.searcher.searcher_id)))


def _preference(builder: BuilderProfile, bundle: _Bundle) -> tuple[float, int, str]:
    own = bundle.searcher.builder_id == builder.builder_id
    return (-bundle.tip_eth, 0 if own else 1, bundle.searcher.searcher_id)


def _group_starts(events: Sequence[SwapEvent]) -> list[int]:
    """Group id per event; sandwich victim and back-run legs stay with their front-run."""
    groups, current = [], -1
    for event in events:
        if event.mev_label not in (MevLabel.SANDWICH_VICTIM, MevLabel.SANDWICH_BACK):
            current += 1
        groups.append(current)
    return groups


def _bid_stream(
    builder: BuilderProfile,
    slot: int,
    arrivals: list[tuple[int, float]],
    base_value: float,
    subsidy: float,
    remaining: float,
    relay: str,
) -> tuple[list[BidRecord], float]:
    """Rebid on the 100 ms grid whenever the accrued block value changes."""
    events: dict[int, float] = {}
    for arrival_ms, value in arrivals:
        tick = min(SLOT_MS, math.ceil(arrival_ms / BID_CADENCE_MS) * BID_CADENCE_MS)
        events[tick] = events.get(tick, 0.0) + value
    value, bids = base_value, []
    first = builder_bid(builder, value, 0, subsidy, remaining)
    if 0 not in events:
        bids.append(BidRecord(slot, builder.builder_id, first, 0, relay))
    for tick in sorted(events):
        value += events[tick]
        bid = builder_bid(builder, value, tick, subsidy, remaining)
        bids.append(BidRecord(slot, builder.builder_id, bid, tick, relay))
    return bids, value


def _sightings(
    rng: np.random.Generator, txs: Sequence[SwapEvent], block_seen_ms: int
) -> list[MempoolSighting]:
    sightings = []
    for tx in txs:
        if not tx.is_private:
            seen = block_seen_ms - int(rng.integers(200, SLOT_MS))
            sightings.append(MempoolSighting(tx.tx_hash, seen))
        elif rng.random() < 0.3:
            # private flow leaks to the network once the block propagates
            seen = block_seen_ms + int(rng.integers(50, 2000))
            sightings.append(MempoolSighting(tx.tx_hash, seen))
    return sightings


def select_winner(final_bids: Mapping[str, float]) -> str | None:
    """Builder with the highest bid; ties go to the lowest builder id."""
    if not final_bids:
        return None
    return min(final_bids, key=lambda builder_id: (-final_bids[builder_id], builder_id))


def run_slot(
    world: WorldState, slot: int, price_paths: Mapping[str, Sequence[CandleBar]]
) -> SlotResult:
    """Simulate one slot of the PBS pipeline.

    Parameters
    ----------
    world : WorldState
        Pools, profiles, base fee and subsidy bookkeeping at the start of the slot.
    slot : int
        Slot number, at least 1; its lead-up spans the 12 seconds before
        ``world.genesis + 12 * slot``.
    price_paths : Mapping[str, Sequence[CandleBar]]
        Off-chain USD price path per volatile token.

    Returns
    -------
    SlotResult
        The winning block (or a missed slot), the relayed bids, arbitrage ground truth,
        mempool sightings, and the world advanced past this slot.
    """
    if slot < 1:
        raise DomainError(f"slot must be at least 1, got {slot}")
    rng = np.random.default_rng([world.seed, slot])
    prices = _Prices(price_paths)
    slot_start = world.genesis + SLOT_SECONDS * slot
    usd_now = prices.snapshot(slot_start)
    eth_usd = usd_now.get("ETH", world.eth_usd)

    bundles = _searcher_bundles(world, prices, slot_start, eth_usd)
    background = gen_background_txs(
        world.background, [world.seed, slot, 1], world.pools, usd_now, slot
    )
    arrivals = rng.integers(0, SLOT_MS, len(background))
    groups = _group_starts(background)
    n_groups = groups[-1] + 1 if groups else 0
    extra_gas_mean = world.background.extra_gas_mean
    extra_gas_target = (
        int(np.clip(rng.normal(extra_gas_mean, 0.3 * extra_gas_mean), 0, 0.9 * GAS_LIMIT))
        if extra_gas_mean > 0
        else 0
    )

    candidates: dict[str, _Candidate] = {}
    rejected: list[BidRecord] = []
    for builder in sorted(world.builders, key=lambda b: b.builder_id):
        visible = rng.random(n_groups) < builder.mempool_coverage
        relays = sorted(builder.relay_set & world.relays)
        if not relays:
            continue
        chosen = _select_bundles(builder, bundles)
        gas = sum(GAS_SIMPLE_SWAP for _ in chosen)
        included: list[SwapEvent] = []
        stream: list[tuple[int, float]] = [(b.arrival_ms, b.tip_eth) for b in chosen]
        for event, group, arrival in zip(background, groups, arrivals):
            if not visible[group] or gas + event.gas_used > GAS_LIMIT:
                continue
            gas += event.gas_used
            included.append(event)
            stream.append((int(arrival), event.fees_eth))
        extra_gas = min(extra_gas_target, GAS_LIMIT - gas)
        extra_fees = extra_gas * world.background.extra_fee_gwei * GWEI
        remaining = world.remaining_budget(builder)
        subsidy = (
            min(builder.subsidy_per_block, max(remaining, 0.0))
            if builder.subsidizes(slot)
            else 0.0
        )
        bids, value = _bid_stream(builder, slot, stream, extra_fees, subsidy, remaining, relays[0])
        if builder.overbid_rate > 0 and rng.random() < builder.overbid_rate:
            unpayable = value + max(remaining, 0.0) + max(0.1 * value, 0.01)
            bids.append(
                BidRecord(slot, builder.builder_id, unpayable, bids[-1].t_offset_ms, relays[0])
            )
        valid = [bid for bid in bids if relay_accepts(bid.bid_eth, value, remaining)]
        if len(valid) < len(bids):
            rejected.extend(bid for bid in bids if bid not in valid)
            logger.warning(
                f"relay rejected {len(bids) - len(valid)} bid(s) of {builder.builder_id} "
                f"in slot {slot}"
            )
        if not valid:
            continue
        candidates[builder.builder_id] = _Candidate(
            builder=builder,
            bundles=chosen,
            background=tuple(included),
            extra_gas=extra_gas,
            extra_fees=extra_fees,
            value=value,
            subsidy=subsidy,
            bids=tuple(valid),
            final_bid=valid[-1].bid_eth,
        )

    missed = rng.random() < world.missed_slot_rate
    winner_id = None if missed else select_winner({k: c.final_bid for k, c in candidates.items()})
    block_seen_ms = slot_start * 1000 + int(rng.integers(300, 2500))
    if winner_id is None:
        logger.debug(f"slot {slot} missed")
        block = BlockTrace(
            slot=slot,
            builder_id="",
            proposer_payment=0.0,
            base_fee_per_gas=world.base_fee_gwei,
            gas_used=0,
            timestamp_ms=block_seen_ms,
            missed=True,
        )
        return SlotResult(block=block, bids=(), world=world, rejected=tuple(rejected))

    winner = candidates[winner_id]
    pools = dict(world.pools)
    txs: list[SwapEvent] = []
    records: list[ArbRecord] = []
    for bundle in winner.bundles:
        pool = pools[bundle.pool.pool_id]
        amount_out, pool_after = swap_exact_in(pool, bundle.amount_in, bundle.opportunity.direction)
        pools[pool.pool_id] = pool_after
        buy_x = bundle.opportunity.direction is Direction.BUY_X
        y_amount = bundle.amount_in if buy_x else amount_out
        event = SwapEvent(
            slot=slot,
            tx_index=len(txs),
            sender=bundle.searcher.address,
            recipient=bundle.searcher.address,
            pool_id=pool.pool_id,
            token_in=pool.token_y if buy_x else pool.token_x,
            token_out=pool.token_x if buy_x else pool.token_y,
            amount_in=bundle.amount_in,
            amount_out=amount_out,
            amount_usd=y_amount * usd_now.get(pool.token_y, 1.0),
            gas_used=GAS_SIMPLE_SWAP,
            priority_fee_per_gas=bundle.priority_fee_per_gas,
            coinbase_transfer=bundle.coinbase_transfer,
            is_private=True,
            searcher_id=bundle.searcher.searcher_id,
        )
        txs.append(event)
        records.append(
            ArbRecord(
                tx_hash=event.tx_hash,
                slot=slot,
                searcher_id=bundle.searcher.searcher_id,
                builder_id=winner_id,
                pool_id=pool.pool_id,
                direction=bundle.opportunity.direction,
                p_off=bundle.opportunity.p_off_avg,
                target_end_price=bundle.target_end_price,
                post_trade_price=pool_after.price,
                profit_usd=bundle.profit_usd,
                tip_eth=bundle.tip_eth,
            )
        )
    for event in winner.background:
        txs.append(replace(event, tx_index=len(txs)))

    gas_used = sum(tx.gas_used for tx in txs) + winner.extra_gas
    block = BlockTrace(
        slot=slot,
        builder_id=winner_id,
        proposer_payment=winner.final_bid,
        base_fee_per_gas=world.base_fee_gwei,
        gas_used=gas_used,
        txs=tuple(txs),
        winning_bid=winner.final_bid,
        ground_truth_arb_ids=frozenset(r.tx_hash for r in records),
        timestamp_ms=block_seen_ms,
        extra_gas_used=winner.extra_gas,
        extra_fees_eth=winner.extra_fees,
    )

    spent = dict(world.subsidy_spent)
    if winner.subsidy > 0:
        spent[winner_id] = spent.get(winner_id, 0.0) + winner.subsidy
    advanced = replace(
        world,
        pools=pools,
        base_fee_gwei=base_fee_update(
            world.base_fee_gwei, gas_used, GAS_TARGET, world.base_fee_floor
        ),
        subsidy_spent=spent,
    )
    relayed = tuple(bid for c in candidates.values() for bid in c.bids)
    return SlotResult(
        block=block,
        bids=relayed,
        world=advanced,
        arbitrages=tuple(records),
        sightings=tuple(_sightings(rng, txs, block_seen_ms)),
        rejected=tuple(rejected),
    )


@dataclass
class SimulationResult:
    """Accumulated output of consecutive slots."""

    blocks: list[BlockTrace] = field(default_factory=list)
    bids: list[BidRecord] = field(default_factory=list)
    arbitrages: list[ArbRecord] = field(default_factory=list)
    sightings: list[MempoolSighting] = field(default_factory=list)
    rejected_bids: list[BidRecord] = field(default_factory=list)
    world: WorldState | None = None


def simulate(
    world: WorldState, slots: Sequence[int], price_paths: Mapping[str, Sequence[CandleBar]]
) -> SimulationResult:
    """Run consecutive slots, threading the world state from one slot to the next."""
    paths = {token: as_series(bars) for token, bars in price_paths.items()}
    result = SimulationResult(world=world)
    for slot in slots:
        outcome = run_slot(world, slot, paths)
        world = outcome.world
        result.blocks.append(outcome.block)
        result.bids.extend(outcome.bids)
        result.arbitrages.extend(outcome.arbitrages)
        result.sightings.extend(outcome.sightings)
        result.rejected_bids.extend(outcome.rejected)
    result.world = world
    logger.info(
        f"simulated {len(result.blocks)} slot(s): "
        f"{sum(b.missed for b in result.blocks)} missed, {len(result.arbitrages)} arbitrage(s)"
    )
    return result
