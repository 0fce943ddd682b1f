"""NumPy-style tests for the constant-product pool and arbitrage sizing."""

import math

import numpy as np
import pytest
from scipy import optimize

from cexdex.amm import (
    ArbOpportunity,
    Direction,
    Pool,
    arb_profit,
    breakeven_delta,
    optimal_arb_size,
    profit_curve,
    reserves_from_state,
    swap_exact_in,
)
from cexdex.errors import DomainError

F, G, L = 0.003, 0.001, 1e6


def _numeric_profit(liquidity: float, p_on: float, delta_p: float, f: float, g: float) -> float:
    """Maximize ``P_off (1 - g) dx(dy) - dy`` over the trade size with scipy."""
    x, y = reserves_from_state(liquidity, p_on)
    p_off = p_on + delta_p

    def negative_profit(dy: float) -> float:
        dx = x * (1 - f) * dy / (y + (1 - f) * dy)
        return -(p_off * (1 - g) * dx - dy)

    upper = 4 * liquidity * (math.sqrt(p_off) - math.sqrt(p_on)) / (1 - f)
    result = optimize.minimize_scalar(
        negative_profit, bounds=(0.0, upper), method="bounded", options={"xatol": upper * 1e-10}
    )
    return -float(result.fun)


def test_reserves_from_state() -> None:
    """Test reserve derivation from liquidity and price.

    Notes
    -----
    ``x * y`` must equal ``L**2`` and ``y / x`` the price.
    """
    x, y = reserves_from_state(L, 2.5)
    assert x * y == pytest.approx(L**2)
    assert y / x == pytest.approx(2.5)
    with pytest.raises(DomainError):
        reserves_from_state(0.0, 1.0)


def test_pool_rejects_invalid_state() -> None:
    with pytest.raises(DomainError):
        Pool("p", "X", "Y", -1.0, 1.0)
    with pytest.raises(DomainError):
        Pool("p", "X", "Y", 1.0, 0.0)
    with pytest.raises(DomainError):
        Pool("p", "X", "Y", 1.0, 1.0, fee=1.0)


def test_swap_exact_in_buy_x() -> None:
    """Test a buy-X swap against the textbook output formula.

    Notes
    -----
    The fee is charged on the input, lands in the Y accumulator, and the invariant of
    the price-setting reserves holds with the fee-adjusted input.
    """
    pool = Pool("p", "X", "Y", L, 1.0, fee=F)
    dy = 10_000.0
    dx, after = swap_exact_in(pool, dy, Direction.BUY_X)

    x, y = pool.reserve_x, pool.reserve_y
    assert dx == pytest.approx(x * (1 - F) * dy / (y + (1 - F) * dy))
    assert after.fee_accumulator_y == pytest.approx(F * dy)
    invariant = (x - dx) * (y + (1 - F) * dy)
    assert after.reserve_x * after.reserve_y == pytest.approx(invariant, rel=1e-12)
    assert after.price > pool.price


def test_swap_exact_in_sell_x_mirrors_buy() -> None:
    pool = Pool("p", "X", "Y", L, 4.0, fee=F)
    dy, after = swap_exact_in(pool, 500.0, Direction.SELL_X)

    x, y = pool.reserve_x, pool.reserve_y
    assert dy == pytest.approx(y * (1 - F) * 500.0 / (x + (1 - F) * 500.0))
    assert after.fee_accumulator_x == pytest.approx(F * 500.0)
    assert after.price < pool.price


def test_swap_zero_and_negative_amounts() -> None:
    pool = Pool("p", "X", "Y", L, 1.0)
    out, after = swap_exact_in(pool, 0.0, Direction.BUY_X)
    assert out == 0.0
    assert after == pool
    with pytest.raises(DomainError):
        swap_exact_in(pool, -1.0, Direction.BUY_X)


def test_optimal_arb_reaches_end_price() -> None:
    """Test that executing the optimal trade leaves the pool at ``P_end``.

    Notes
    -----
    ``P_end = P_off (1 - g)(1 - f)`` to 1e-9 relative.
    """
    pool = Pool("p", "X", "Y", L, 1.0, fee=F)
    solution = optimal_arb_size(pool, 1.02, G)
    assert solution.direction is Direction.BUY_X

    dx, after = swap_exact_in(pool, solution.amount_in, Direction.BUY_X)
    expected = 1.02 * (1 - G) * (1 - F)
    assert after.price == pytest.approx(expected, rel=1e-9)
    assert solution.end_price == pytest.approx(expected, rel=1e-12)
    assert dx == pytest.approx(solution.amount_out, rel=1e-9)
    assert solution.profit == pytest.approx(arb_profit(L, 1.0, 0.02, F, G).profit, rel=1e-9)


def test_optimal_arb_sell_side() -> None:
    pool = Pool("p", "X", "Y", L, 1.0, fee=F)
    solution = optimal_arb_size(pool, 0.97, G)
    assert solution.direction is Direction.SELL_X

    _, after = swap_exact_in(pool, solution.amount_in, Direction.SELL_X)
    assert after.price == pytest.approx(0.97 / ((1 - G) * (1 - F)), rel=1e-9)
    assert solution.end_price == pytest.approx(after.price, rel=1e-9)
    assert solution.profit > 0


def test_optimal_arb_zero_inside_fee_band() -> None:
    """Test the zero solution when the gap does not cover the fees.

    Notes
    -----
    At exactly the break-even gap the trade size is zero, as it is for no gap at all.
    """
    pool = Pool("p", "X", "Y", L, 1.0, fee=F)
    for p_off in (1.0, 1.0 + breakeven_delta(1.0, F, G), 1.002, 0.998):
        solution = optimal_arb_size(pool, p_off, G)
        assert not solution.is_trade
        assert solution.amount_in == 0.0
        assert solution.end_price == pool.price


def test_optimal_arb_forced_direction() -> None:
    pool = Pool("p", "X", "Y", L, 1.0, fee=F)
    assert not optimal_arb_size(pool, 1.05, G, Direction.SELL_X).is_trade
    assert optimal_arb_size(pool, 1.05, G, Direction.BUY_X).is_trade
    with pytest.raises(DomainError):
        optimal_arb_size(pool, 0.0, G)


def test_arb_profit_reference_points() -> None:
    """Test closed-form profits at the reference parameter set.

    Notes
    -----
    ``L = 1e6``, ``P_on = 1``, ``f = 0.3%``, ``g = 0.1%``.
    """
    assert arb_profit(L, 1.0, 0.01, F, G).profit == pytest.approx(8.889, abs=1e-3)
    assert arb_profit(L, 1.0, 0.05, F, G).profit == pytest.approx(514.35, abs=0.02)
    below = arb_profit(L, 1.0, 0.003, F, G)
    assert below.profit == 0.0
    assert not below.profitable


def test_breakeven_delta() -> None:
    """Test the break-even gap and the shape of the profit curve around it.

    Notes
    -----
    Profit is zero at the break-even gap and strictly increasing beyond it.
    """
    delta_star = breakeven_delta(1.0, F, G)
    assert delta_star == pytest.approx(0.0040121, abs=1e-6)
    assert arb_profit(L, 1.0, delta_star, F, G).profit == pytest.approx(0.0, abs=1e-9)

    curve = profit_curve(L, 1.0, F, G, np.linspace(delta_star, 0.05, 200))
    assert (np.diff(curve["profit"].to_numpy())[1:] > 0).all()
    assert not curve["profitable"].iloc[0]
    assert curve["profitable"].iloc[1:].all()

    bisected = optimize.brentq(lambda d: (1 + d) * (1 - F) * (1 - G) - 1.0, 0.0, 0.05, xtol=1e-14)
    assert bisected == pytest.approx(delta_star, abs=1e-12)


def test_profit_curve_columns() -> None:
    curve = profit_curve(L, 1.0, F, G, [0.0, 0.01, 0.05])
    assert list(curve.columns) == ["delta_p", "profit", "profitable", "amount_in", "end_price"]
    assert curve["amount_in"].iloc[0] == 0.0
    assert curve["profit"].iloc[2] > curve["profit"].iloc[1] > 0


def _numeric_sell_profit(liquidity: float, p_on: float, p_off: float, f: float, g: float) -> float:
    """Maximize ``dy(dx) (1 - g) / P_off - dx`` in X tokens for a sell-X trade."""
    x, y = reserves_from_state(liquidity, p_on)

    def negative_profit(dx: float) -> float:
        dy = y * (1 - f) * dx / (x + (1 - f) * dx)
        return -(dy * (1 - g) / p_off - dx)

    upper = 4 * liquidity * abs(1 / math.sqrt(p_off) - 1 / math.sqrt(p_on)) / (1 - f)
    result = optimize.minimize_scalar(
        negative_profit, bounds=(0.0, upper), method="bounded", options={"xatol": upper * 1e-10}
    )
    return -float(result.fun)


def test_arb_profit_matches_numeric_maximization() -> None:
    """Test the closed form against numeric maximization over trade size.

    Notes
    -----
    1000 seeded tuples with ``L`` in ``[1e3, 1e8]``, ``P_on`` in ``[1e-3, 1e4]``, pool fees
    from {0, 0.05%, 0.3%, 1%}, exchange fees from {0, 0.1%, 0.2%} and gaps within 20% of
    ``P_on`` on either side. Profitable tuples agree with scipy to 1e-6 relative on both
    sides; tuples inside the fee band yield the zero trade.
    """
    rng = np.random.default_rng(2023)
    n_buy = n_sell = 0
    for _ in range(1000):
        liquidity = 10 ** rng.uniform(3, 8)
        p_on = 10 ** rng.uniform(-3, 4)
        f = float(rng.choice([0.0, 0.0005, 0.003, 0.01]))
        g = float(rng.choice([0.0, 0.001, 0.002]))
        delta_p = p_on * rng.uniform(-0.2, 0.2)
        p_off = p_on + delta_p
        pool = Pool("p", "X", "Y", liquidity, p_on, fee=f)
        solution = optimal_arb_size(pool, p_off, g)
        closed = arb_profit(liquidity, p_on, delta_p, f, g)

        if closed.profitable:
            n_buy += 1
            assert solution.direction is Direction.BUY_X
            expected = _numeric_profit(liquidity, p_on, delta_p, f, g)
            assert closed.profit == pytest.approx(expected, rel=1e-6)
            assert solution.profit == pytest.approx(closed.profit, rel=1e-9)
        elif solution.is_trade:
            n_sell += 1
            assert solution.direction is Direction.SELL_X
            expected = _numeric_sell_profit(liquidity, p_on, p_off, f, g)
            assert solution.profit == pytest.approx(expected, rel=1e-6)
        else:
            assert solution.amount_in == 0.0
            assert solution.profit == 0.0
    assert n_buy > 100
    assert n_sell > 100


def test_observed_opportunity_direction() -> None:
    """Test the gap seen against a pool from either side.

    Notes
    -----
    A higher off-chain price means buying X on-chain; a lower one means selling it. The
    observed gap feeds the sizing unchanged.
    """
    pool = Pool("p", "ETH", "USDC", L, 1600.0, fee=F)
    above = ArbOpportunity.observe(pool, 1700.0, G)
    assert above.direction is Direction.BUY_X
    assert above.delta_p == pytest.approx(100.0)
    assert (above.pool_id, above.p_on, above.off_fee_g) == ("p", 1600.0, G)

    below = ArbOpportunity.observe(pool, 1500.0, G)
    assert below.direction is Direction.SELL_X
    assert below.delta_p == pytest.approx(-100.0)
    solution = optimal_arb_size(pool, below.p_off_avg, below.off_fee_g, below.direction)
    assert solution.direction is Direction.SELL_X
    assert solution.end_price == pytest.approx(1500.0 / ((1 - G) * (1 - F)), rel=1e-9)

    with pytest.raises(DomainError):
        ArbOpportunity.observe(pool, 0.0, G)
