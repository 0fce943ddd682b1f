"""NumPy-style tests for the proposer-builder separation simulator."""

import pytest

from cexdex.amm import Pool
from cexdex.errors import DomainError
from cexdex.market import PricePathConfig, gen_price_path
from cexdex.pbs import (
    GAS_LIMIT,
    GAS_TARGET,
    BackgroundConfig,
    BuilderProfile,
    MevLabel,
    SearcherKind,
    SearcherProfile,
    TipStyle,
    WorldState,
    base_fee_update,
    builder_bid,
    gen_background_txs,
    relay_accepts,
    run_slot,
    select_winner,
    simulate,
    tx_hash,
)

GENESIS = 1_672_531_200


def _paths(price: float = 1700.0, jumps: float = 0.0, n_slots: int = 40) -> dict:
    config = PricePathConfig(
        initial_price=price,
        jump_intensity_per_step=jumps,
        jump_scale=0.01 if jumps else 0.0,
        seed=9,
        start_timestamp=GENESIS - 12,
    )
    return {"ETH": gen_price_path(config, 12 * (n_slots + 2))}


def _world(**overrides: object) -> WorldState:
    settings: dict = dict(
        pools={"ETH-USDC": Pool("ETH-USDC", "ETH", "USDC", 1e5, 1600.0, fee=0.003)},
        searchers=(SearcherProfile("searcher", pool_set=frozenset({"ETH-USDC"})),),
        builders=(BuilderProfile("builder", margin_fraction=0.05),),
        background=BackgroundConfig.silent(),
        seed=1,
        genesis=GENESIS,
    )
    settings.update(overrides)
    return WorldState(**settings)


def test_single_arbitrage_reaches_end_price() -> None:
    """Test one searcher against one mispriced pool.

    Notes
    -----
    With the off-chain price past break-even exactly one arbitrage swap is included and
    the pool ends at ``P_off (1 - g)(1 - f)`` within 1e-9 relative.
    """
    world = _world()
    result = run_slot(world, 1, _paths(1700.0))

    assert not result.block.missed
    assert len(result.block.txs) == 1
    assert len(result.arbitrages) == 1
    expected = 1700.0 * (1 - world.offchain_fee) * (1 - 0.003)
    assert result.world.pools["ETH-USDC"].price == pytest.approx(expected, rel=1e-9)
    record = result.arbitrages[0]
    assert record.post_trade_price == pytest.approx(record.target_end_price, rel=1e-9)
    assert result.block.ground_truth_arb_ids == {record.tx_hash}
    assert result.block.txs[0].is_private
    assert result.block.violations() == []


def test_no_arbitrage_inside_fee_band() -> None:
    result = run_slot(_world(), 1, _paths(1601.0))
    assert result.block.txs == ()
    assert result.arbitrages == ()


def test_slot_zero_rejected() -> None:
    with pytest.raises(DomainError):
        run_slot(_world(), 0, _paths())


def test_builder_bid_examples() -> None:
    """Test bids with and without subsidies.

    Notes
    -----
    A margin-free builder receiving 0.059 ETH in fees that spends 56.121 ETH of subsidy
    bids 56.18 ETH; an empty block without subsidy bids 0. A builder with a 5% margin
    forfeits it while subsidizing, so even a 0.01 ETH subsidy on 1 ETH of fees loses 0.01.
    """
    subsidizer = BuilderProfile("b", margin_fraction=0.0, subsidy_budget=100.0)
    assert builder_bid(subsidizer, 0.059, subsidy=56.121) == pytest.approx(56.18)
    assert builder_bid(BuilderProfile("b"), 0.0) == 0.0
    assert builder_bid(BuilderProfile("b", margin_fraction=0.1), 2.0) == pytest.approx(1.8)
    assert builder_bid(subsidizer, 1.0, subsidy=5.0, remaining_budget=2.0) == pytest.approx(3.0)
    margined = BuilderProfile(
        "b", margin_fraction=0.05, subsidy_budget=10.0, subsidy_per_block=0.01
    )
    bid = builder_bid(margined, 1.0, 0, 0.01, 10.0)
    assert bid == pytest.approx(1.01)
    assert 1.0 - bid == pytest.approx(-0.01)
    assert builder_bid(margined, 1.0, 0, 0.0, 10.0) == pytest.approx(0.95)
    with pytest.raises(DomainError):
        builder_bid(subsidizer, -1.0)


def test_relay_accepts() -> None:
    assert relay_accepts(1.0, 1.0, 0.0)
    assert relay_accepts(3.0, 1.0, 2.0)
    assert not relay_accepts(3.5, 1.0, 2.0)


def test_base_fee_update() -> None:
    """Test the base fee rule around the gas target.

    Notes
    -----
    A block at target keeps the fee, a full block raises it by 12.5%, an empty one lowers
    it by 12.5%, never below the floor.
    """
    assert base_fee_update(20.0, GAS_TARGET) == pytest.approx(20.0)
    assert base_fee_update(20.0, GAS_LIMIT) == pytest.approx(22.5)
    assert base_fee_update(20.0, 0) == pytest.approx(17.5)
    assert base_fee_update(1.0, 0, floor=0.95) == pytest.approx(0.95)


def test_select_winner_ties() -> None:
    assert select_winner({"b2": 1.0, "b1": 1.0, "b0": 0.5}) == "b1"
    assert select_winner({}) is None


def test_profiles_validate() -> None:
    with pytest.raises(DomainError):
        SearcherProfile("s", kind=SearcherKind.INTEGRATED)
    with pytest.raises(DomainError):
        SearcherProfile("s", builder_id="b")
    with pytest.raises(DomainError):
        SearcherProfile("s", tip_style=TipStyle.SUBSIDIZED)
    with pytest.raises(DomainError):
        BuilderProfile("b", margin_fraction=1.5)
    with pytest.raises(DomainError):
        BuilderProfile("b", subsidy_budget=-1.0)
    with pytest.raises(DomainError):
        BuilderProfile("b", overbid_rate=1.5)


def test_missed_slot() -> None:
    """Test that a missed slot yields an empty trace and leaves the world untouched."""
    world = _world(missed_slot_rate=1.0)
    result = run_slot(world, 1, _paths(1700.0))
    assert result.block.missed
    assert result.block.txs == ()
    assert result.bids == ()
    assert result.world == world


def test_integrated_searcher_routes_exclusively() -> None:
    """Test that integrated searchers only reach their own builder.

    Notes
    -----
    Over a volatile run every included swap of the integrated searcher sits in a block of
    its builder, and the other builder never carries it.
    """
    searchers = (
        SearcherProfile(
            "hft",
            kind=SearcherKind.INTEGRATED,
            builder_id="b_hft",
            tip_style=TipStyle.COINBASE_TRANSFER,
            tip_fraction=0.9,
            pool_set=frozenset({"ETH-USDC"}),
        ),
        SearcherProfile("open", tip_fraction=0.5, latency_ms=300, pool_set=frozenset({"ETH-USDC"})),
    )
    builders = (
        BuilderProfile("b_hft", margin_fraction=0.01),
        BuilderProfile("b_open", margin_fraction=0.01),
    )
    pools = {"ETH-USDC": Pool("ETH-USDC", "ETH", "USDC", 1e5, 1700.0)}
    world = _world(searchers=searchers, builders=builders, pools=pools)
    result = simulate(world, range(1, 31), _paths(1700.0, jumps=0.2, n_slots=30))

    hft_swaps = [
        (b.builder_id, tx) for b in result.blocks for tx in b.txs if tx.searcher_id == "hft"
    ]
    assert hft_swaps
    assert all(builder == "b_hft" for builder, _ in hft_swaps)
    assert all(tx.coinbase_transfer > 0 for _, tx in hft_swaps)


def test_subsidized_builder_wins_at_a_loss() -> None:
    """Test subsidy spending and budget exhaustion.

    Notes
    -----
    The subsidizing builder wins every slot while its 10 ETH budget lasts (two slots at
    5 ETH), paying more than it receives; its subsidized searcher tips nothing.
    """
    searchers = (
        SearcherProfile(
            "hft",
            kind=SearcherKind.INTEGRATED,
            builder_id="b_sub",
            tip_style=TipStyle.SUBSIDIZED,
            pool_set=frozenset({"ETH-USDC"}),
        ),
    )
    builders = (
        BuilderProfile("b_plain", margin_fraction=0.0),
        BuilderProfile("b_sub", margin_fraction=0.0, subsidy_budget=10.0, subsidy_per_block=5.0),
    )
    world = _world(searchers=searchers, builders=builders, background=BackgroundConfig())
    result = simulate(world, range(1, 5), _paths(1700.0, jumps=0.2, n_slots=4))

    first, second = result.blocks[0], result.blocks[1]
    for block in (first, second):
        assert block.builder_id == "b_sub"
        assert block.builder_profit < -4.0
        searcher_txs = [tx for tx in block.txs if tx.searcher_id]
        assert all(tx.priority_fee_per_gas == 0 for tx in searcher_txs)
        assert all(tx.coinbase_transfer == 0 for tx in searcher_txs)
    assert result.world is not None
    assert result.world.subsidy_spent["b_sub"] == pytest.approx(10.0)
    assert all(b.builder_profit >= -1e-12 for b in result.blocks[2:])


def test_simulate_is_deterministic() -> None:
    world = _world(background=BackgroundConfig())
    paths = _paths(1700.0, jumps=0.2, n_slots=10)
    first = simulate(world, range(1, 11), paths)
    second = simulate(world, range(1, 11), paths)
    assert first.blocks == second.blocks
    assert first.bids == second.bids
    assert first.sightings == second.sightings


def test_blocks_satisfy_invariants() -> None:
    """Test block invariants over a busy run.

    Notes
    -----
    Gas stays under the limit and equals the sum over transactions, indices increase,
    and every block was paid exactly its winning bid.
    """
    background = BackgroundConfig(plain_swaps=20, sandwiches=1.5, cyclic_arbs=1, multi_swaps=2)
    world = _world(background=background)
    result = simulate(world, range(1, 21), _paths(1700.0, jumps=0.2, n_slots=20))
    for block in result.blocks:
        assert block.violations() == []
        assert block.gas_used <= GAS_LIMIT


def test_gen_background_txs() -> None:
    """Test labels and determinism of the background flow.

    Notes
    -----
    Integer rates give exact counts; sandwiches occupy three adjacent indices.
    """
    pools = {"ETH-USDC": Pool("ETH-USDC", "ETH", "USDC", 1e5, 1600.0)}
    config = BackgroundConfig(
        plain_swaps=5, sandwiches=2, cyclic_arbs=1, liquidations=1, multi_swaps=0, high_gas_swaps=0
    )
    events = gen_background_txs(config, 3, pools, {"ETH": 1600.0}, slot=7)
    assert events == gen_background_txs(config, 3, pools, {"ETH": 1600.0}, slot=7)
    assert len(events) == 5 + 2 * 3 + 1 + 1
    assert [e.tx_index for e in events] == list(range(len(events)))
    labels = [e.mev_label for e in events]
    for i, label in enumerate(labels):
        if label is MevLabel.SANDWICH_FRONT:
            assert labels[i + 1 : i + 3] == [MevLabel.SANDWICH_VICTIM, MevLabel.SANDWICH_BACK]
    assert gen_background_txs(BackgroundConfig.silent(), 3, pools) == []


def test_tx_hash_format() -> None:
    assert tx_hash(1, 2) == "0x000000000001000002"


def test_winner_is_the_bid_argmax() -> None:
    """Test the auction outcome against the relayed bid streams.

    Notes
    -----
    In every proposed slot the winner holds the largest final bid and the proposer is
    paid exactly that bid.
    """
    world = _world(
        searchers=(
            SearcherProfile("s_fast", pool_set=frozenset({"ETH-USDC"}), latency_ms=50),
            SearcherProfile(
                "s_slow", pool_set=frozenset({"ETH-USDC"}), latency_ms=400, tip_fraction=0.5
            ),
        ),
        builders=(
            BuilderProfile("b1", margin_fraction=0.02),
            BuilderProfile("b2", margin_fraction=0.10),
            BuilderProfile("b3", margin_fraction=0.05, mempool_coverage=0.5),
        ),
        background=BackgroundConfig(plain_swaps=6),
    )
    result = simulate(world, range(1, 31), _paths(1700.0, jumps=0.2, n_slots=30))

    final: dict[int, dict[str, float]] = {}
    for bid in sorted(result.bids, key=lambda b: (b.slot, b.t_offset_ms)):
        final.setdefault(bid.slot, {})[bid.builder_id] = bid.bid_eth
    proposed = [block for block in result.blocks if not block.missed]
    assert proposed
    for block in proposed:
        bids = final[block.slot]
        assert bids[block.builder_id] == max(bids.values())
        assert block.proposer_payment == block.winning_bid == bids[block.builder_id]


def test_subsidized_blocks_are_exactly_the_loss_making_ones() -> None:
    """Test profit signs across a subsidy window with margined builders.

    Notes
    -----
    Slots 5 to 14 offer a 0.01 ETH subsidy out of a 0.05 ETH budget. A block loses money
    exactly when its builder spent subsidy in that slot, and the loss equals the spend.
    """
    builders = (
        BuilderProfile("b_plain", margin_fraction=0.05),
        BuilderProfile(
            "b_sub",
            margin_fraction=0.05,
            subsidy_budget=0.05,
            subsidy_per_block=0.01,
            subsidy_start_slot=5,
            subsidy_end_slot=15,
        ),
    )
    world = _world(builders=builders, background=BackgroundConfig())
    paths = _paths(1700.0, jumps=0.2, n_slots=20)

    total_spent = 0.0
    for slot in range(1, 21):
        before = world.subsidy_spent.get("b_sub", 0.0)
        result = run_slot(world, slot, paths)
        world = result.world
        spent = world.subsidy_spent.get("b_sub", 0.0) - before
        total_spent += spent
        block = result.block
        assert (block.builder_profit < -1e-9) == (spent > 0), slot
        if spent > 0:
            assert block.builder_id == "b_sub"
            assert block.builder_profit == pytest.approx(-spent, abs=1e-9)
    assert total_spent > 0
    assert total_spent <= 0.05 + 1e-12


def test_default_block_value() -> None:
    """Test the execution-layer value of blocks under the default background flow.

    Notes
    -----
    Without arbitrage the fees a builder receives average about 0.12 ETH per block.
    """
    world = _world(background=BackgroundConfig())
    result = simulate(world, range(1, 101), _paths(1600.0, n_slots=100))
    values = [block.fees_received for block in result.blocks]
    assert sum(values) / len(values) == pytest.approx(0.12, abs=0.02)


def test_relay_rejects_overbids() -> None:
    """Test a builder that bids beyond what it can pay in every slot.

    Notes
    -----
    Each slot carries one rejected bid of the misbehaving builder; it never reaches the
    relayed bids, and the auction still pays the largest accepted bid.
    """
    builders = (
        BuilderProfile("b_over", margin_fraction=0.05, overbid_rate=1.0),
        BuilderProfile("b_fair", margin_fraction=0.05),
    )
    world = _world(builders=builders, background=BackgroundConfig(plain_swaps=4))
    result = simulate(world, range(1, 11), _paths(1700.0, jumps=0.2, n_slots=10))

    assert len(result.rejected_bids) == 10
    assert {bid.builder_id for bid in result.rejected_bids} == {"b_over"}
    assert not set(result.rejected_bids) & set(result.bids)
    for block in result.blocks:
        rejected = [bid for bid in result.rejected_bids if bid.slot == block.slot]
        own = [
            bid.bid_eth
            for bid in result.bids
            if bid.slot == block.slot and bid.builder_id == "b_over"
        ]
        assert rejected[0].bid_eth > max(own)
        accepted = [bid.bid_eth for bid in result.bids if bid.slot == block.slot]
        assert block.proposer_payment == max(accepted)

    quiet_world = _world(background=BackgroundConfig(plain_swaps=4))
    quiet = simulate(quiet_world, range(1, 11), _paths(1700.0, n_slots=10))
    assert quiet.rejected_bids == []
