"""Constant-product pool state, swaps, and non-atomic arbitrage sizing.

A pool holding reserves ``x`` of token X and ``y`` of token Y satisfies ``x * y = L**2``
and quotes the marginal price ``P = y / x`` (Y per X). All amounts are real-valued.
Fees are taken from the input amount and routed into a fee accumulator, so the
price-setting reserves after a buy-X swap are ``(x - dx, y + (1 - f) dy)``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import DomainError

# Relative slack on the profitability boundary so that the break-even point itself
# returns the exact zero solution instead of a rounding-sized trade.
PRICE_RTOL = 1e-12


class Direction(str, Enum):
    """Side of the on-chain leg of an arbitrage."""

    BUY_X = "buy_x_on_chain"
    SELL_X = "sell_x_on_chain"


@dataclass(frozen=True)
class Pool:
    """Two-token constant-product pool.

    Parameters
    ----------
    pool_id : str
        Opaque identifier.
    token_x, token_y : str
        Token symbols; the price is quoted in ``token_y`` per ``token_x``.
    liquidity : float
        ``L = sqrt(x * y)``, strictly positive.
    price : float
        Marginal price ``P = y / x``, strictly positive.
    fee : float, default=0.003
        Fee fraction in ``[0, 1)`` charged on the input amount.
    fee_accumulator_x, fee_accumulator_y : float, default=0.0
        Fees collected outside the price-setting reserves.
    """

    pool_id: str
    token_x: str
    token_y: str
    liquidity: float
    price: float
    fee: float = 0.003
    fee_accumulator_x: float = 0.0
    fee_accumulator_y: float = 0.0

    def __post_init__(self) -> None:
        if not (self.liquidity > 0 and math.isfinite(self.liquidity)):
            raise DomainError(
                f"pool {self.pool_id}: liquidity must be positive, got {self.liquidity}"
            )
        if not (self.price > 0 and math.isfinite(self.price)):
            raise DomainError(f"pool {self.pool_id}: price must be positive, got {self.price}")
        if not 0 <= self.fee < 1:
            raise DomainError(f"pool {self.pool_id}: fee must be in [0, 1), got {self.fee}")
        if self.fee_accumulator_x < 0 or self.fee_accumulator_y < 0:
            raise DomainError(f"pool {self.pool_id}: fee accumulators must be nonnegative")

    @property
    def reserve_x(self) -> float:
        return self.liquidity / math.sqrt(self.price)

    @property
    def reserve_y(self) -> float:
        return self.liquidity * math.sqrt(self.price)

    def mirrored(self) -> Pool:
        """Return the same pool seen from the other token (X and Y swapped, price inverted)."""
        return Pool(
            pool_id=self.pool_id,
            token_x=self.token_y,
            token_y=self.token_x,
            liquidity=self.liquidity,
            price=1.0 / self.price,
            fee=self.fee,
            fee_accumulator_x=self.fee_accumulator_y,
            fee_accumulator_y=self.fee_accumulator_x,
        )


@dataclass(frozen=True)
class ArbOpportunity:
    """Observed price gap between a pool and the off-chain venue."""

    pool_id: str
    direction: Direction
    p_on: float
    p_off_avg: float
    off_fee_g: float

    @property
    def delta_p(self) -> float:
        return self.p_off_avg - self.p_on

    @classmethod
    def observe(cls, pool: Pool, p_off_avg: float, g: float) -> ArbOpportunity:
        """Gap seen against ``pool``; buying X on-chain when the off-chain price is higher."""
        if not p_off_avg > 0:
            raise DomainError(f"off-chain price must be positive, got {p_off_avg}")
        direction = Direction.BUY_X if p_off_avg >= pool.price else Direction.SELL_X
        return cls(pool.pool_id, direction, pool.price, p_off_avg, g)


@dataclass(frozen=True)
class ArbSolution:
    """Optimal non-atomic arbitrage against one pool.

    Amounts and profit are denominated in the token paid on-chain: Y for a buy-X
    arbitrage, X for a sell-X arbitrage. ``end_price`` is always quoted in Y per X.
    """

    direction: Direction | None
    amount_in: float
    amount_out: float
    end_price: float
    offchain_proceeds: float
    profit: float

    @property
    def is_trade(self) -> bool:
        return self.direction is not None and self.amount_in > 0

    def profit_in_y(self, p_off_avg: float) -> float:
        """Profit converted to token Y at the off-chain price."""
        if self.direction is Direction.SELL_X:
            return self.profit * p_off_avg
        return self.profit


class ProfitEstimate(NamedTuple):
    """Closed-form profit and whether the price gap lies in the profitable range."""

    profit: float
    profitable: bool


def reserves_from_state(liquidity: float, price: float) -> tuple[float, float]:
    """Derive reserves ``(x, y) = (L / sqrt(P), L * sqrt(P))`` from liquidity and price.

    Parameters
    ----------
    liquidity : float
        Pool liquidity ``L``.
    price : float
        Marginal price ``P`` in Y per X.

    Returns
    -------
    tuple[float, float]
        Reserves of X and Y.

    Raises
    ------
    DomainError
        If either argument is not strictly positive.

    Examples
    --------
    >>> reserves_from_state(2000.0, 4.0)
    (1000.0, 4000.0)
    """
    if not (liquidity > 0 and price > 0):
        raise DomainError(f"liquidity and price must be positive, got L={liquidity}, P={price}")
    root = math.sqrt(price)
    return liquidity / root, liquidity * root


def _swap_buy_x(pool: Pool, dy: float) -> tuple[float, Pool]:
    if dy == 0:
        return 0.0, pool
    x, y = pool.reserve_x, pool.reserve_y
    effective_in = (1.0 - pool.fee) * dy
    dx = x * effective_in / (y + effective_in)
    new_x = x - dx
    new_y = y + effective_in
    updated = replace(
        pool,
        liquidity=math.sqrt(new_x * new_y),
        price=new_y / new_x,
        fee_accumulator_y=pool.fee_accumulator_y + pool.fee * dy,
    )
    return dx, updated


def swap_exact_in(pool: Pool, amount_in: float, direction: Direction) -> tuple[float, Pool]:
    """Execute a swap with a fixed input amount.

    Parameters
    ----------
    pool : Pool
        Pool state before the swap.
    amount_in : float
        Amount of the paid token: Y for ``Direction.BUY_X``, X for ``Direction.SELL_X``.
    direction : Direction
        Side of the trade.

    Returns
    -------
    tuple[float, Pool]
        Amount of the received token and the pool state after the swap. For a buy-X swap
        ``dx = x (1 - f) dy / (y + (1 - f) dy)`` and ``f * dy`` lands in ``fee_accumulator_y``.

    Raises
    ------
    DomainError
        If ``amount_in`` is negative.
    """
    if amount_in < 0 or not math.isfinite(amount_in):
        raise DomainError(f"swap input must be a nonnegative amount, got {amount_in}")
    if direction is Direction.BUY_X:
        return _swap_buy_x(pool, amount_in)
    out, mirrored = _swap_buy_x(pool.mirrored(), amount_in)
    return out, mirrored.mirrored()


def _zero_solution(pool: Pool) -> ArbSolution:
    return ArbSolution(
        direction=None,
        amount_in=0.0,
        amount_out=0.0,
        end_price=pool.price,
        offchain_proceeds=0.0,
        profit=0.0,
    )


def _optimal_buy_x(pool: Pool, p_off_avg: float, g: float) -> ArbSolution | None:
    f = pool.fee
    end_price = p_off_avg * (1.0 - g) * (1.0 - f)
    if end_price <= pool.price * (1.0 + PRICE_RTOL):
        return None
    root_on, root_end = math.sqrt(pool.price), math.sqrt(end_price)
    dy = pool.liquidity * (root_end - root_on) / (1.0 - f)
    dx = pool.liquidity * (1.0 / root_on - 1.0 / root_end)
    proceeds = p_off_avg * (1.0 - g) * dx
    return ArbSolution(
        direction=Direction.BUY_X,
        amount_in=dy,
        amount_out=dx,
        end_price=end_price,
        offchain_proceeds=proceeds,
        profit=proceeds - dy,
    )


def optimal_arb_size(
    pool: Pool, p_off_avg: float, g: float, direction: Direction | None = None
) -> ArbSolution:
    """Size the profit-maximizing on-chain leg of a non-atomic arbitrage.

    The trade pushes the pool to ``P_end = P_off (1 - g)(1 - f)`` for a buy-X arbitrage,
    paying ``dy = L (sqrt(P_end) - sqrt(P_on)) / (1 - f)`` and receiving
    ``dx = L (1 / sqrt(P_on) - 1 / sqrt(P_end))``, which is then sold off-chain for
    ``P_off (1 - g) dx``. Sell-X arbitrages reuse the same computation on the mirrored pool.

    Parameters
    ----------
    pool : Pool
        Pool state at the start of the block.
    p_off_avg : float
        Average attainable off-chain price for the trade, Y per X.
    g : float
        Off-chain fee fraction in ``[0, 1)``.
    direction : Direction, optional
        Restrict the search to one side; inferred from the price gap when omitted.

    Returns
    -------
    ArbSolution
        The optimal trade, or the zero solution (all amounts 0, ``end_price = P_on``)
        when the gap does not exceed the fees.
    """
    if not p_off_avg > 0:
        raise DomainError(f"off-chain price must be positive, got {p_off_avg}")
    if not 0 <= g < 1:
        raise DomainError(f"off-chain fee must be in [0, 1), got {g}")

    if direction in (None, Direction.BUY_X):
        solution = _optimal_buy_x(pool, p_off_avg, g)
        if solution is not None:
            return solution
        if direction is Direction.BUY_X:
            return _zero_solution(pool)

    mirrored = _optimal_buy_x(pool.mirrored(), 1.0 / p_off_avg, g)
    if mirrored is None:
        return _zero_solution(pool)
    return replace(mirrored, direction=Direction.SELL_X, end_price=1.0 / mirrored.end_price)


def breakeven_delta(p_on: float, f: float, g: float) -> float:
    """Smallest price gap ``ΔP* = P_on (1 / ((1 - f)(1 - g)) - 1)`` that pays for both fees."""
    if not p_on > 0:
        raise DomainError(f"on-chain price must be positive, got {p_on}")
    if not (0 <= f < 1 and 0 <= g < 1):
        raise DomainError(f"fees must be in [0, 1), got f={f}, g={g}")
    return p_on * (1.0 / ((1.0 - f) * (1.0 - g)) - 1.0)


def arb_profit(liquidity: float, p_on: float, delta_p: float, f: float, g: float) -> ProfitEstimate:
    """Closed-form profit of the optimal buy-X arbitrage.

    ``profit = L (sqrt(P_on) - sqrt((1 - f)(1 - g)(ΔP + P_on)))**2 / ((1 - f) sqrt(P_on))``

    Outside the profitable range ``P_on < (P_on + ΔP)(1 - f)(1 - g)`` the expression is not
    an attainable profit, so the estimate is 0 with ``profitable=False``.

    Examples
    --------
    >>> round(arb_profit(1e6, 1.0, 0.01, 0.003, 0.001).profit, 3)
    8.889
    """
    if not (liquidity > 0 and p_on > 0):
        raise DomainError(f"liquidity and price must be positive, got L={liquidity}, P={p_on}")
    if not (0 <= f < 1 and 0 <= g < 1):
        raise DomainError(f"fees must be in [0, 1), got f={f}, g={g}")
    end_price = (1.0 - f) * (1.0 - g) * (delta_p + p_on)
    if end_price <= p_on * (1.0 + PRICE_RTOL):
        return ProfitEstimate(0.0, False)
    root_on = math.sqrt(p_on)
    profit = liquidity * (root_on - math.sqrt(end_price)) ** 2 / ((1.0 - f) * root_on)
    return ProfitEstimate(profit, True)


def profit_curve(
    liquidity: float, p_on: float, f: float, g: float, deltas: Sequence[float] | np.ndarray
) -> pd.DataFrame:
    """Tabulate the optimal-arbitrage profit over a grid of price gaps.

    Returns
    -------
    pandas.DataFrame
        Columns ``delta_p``, ``profit``, ``profitable``, ``amount_in`` and ``end_price``.
    """
    pool = Pool("curve", "X", "Y", liquidity, p_on, f)
    rows = []
    for delta in deltas:
        estimate = arb_profit(liquidity, p_on, float(delta), f, g)
        p_off = p_on + float(delta)
        solution = (
            optimal_arb_size(pool, p_off, g, Direction.BUY_X) if p_off > 0 else _zero_solution(pool)
        )
        rows.append(
            {
                "delta_p": float(delta),
                "profit": estimate.profit,
                "profitable": estimate.profitable,
                "amount_in": solution.amount_in,
                "end_price": solution.end_price,
            }
        )
    return pd.DataFrame(rows, columns=["delta_p", "profit", "profitable", "amount_in", "end_price"])
