"""Synthetic off-chain price paths and volatility metrics.

Paths are geometric Brownian motion with compound Poisson jumps on the log price,
sampled at ``ticks_per_step`` sub-ticks and aggregated into OHLC candle bars.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import overload

import numpy as np
import pandas as pd

from .errors import DomainError, SlotRangeError

SLOT_SECONDS = 12
DEFAULT_START_TIMESTAMP = 1_672_531_200  # 2023-01-01T00:00:00Z

CANDLE_COLUMNS = ["timestamp", "interval", "open", "high", "low", "close"]


@dataclass(frozen=True)
class CandleBar:
    """Price bar covering ``[timestamp, timestamp + interval)`` seconds."""

    timestamp: int
    interval: int
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self) -> None:
        if self.interval <= 0:
            raise DomainError(f"bar {self.timestamp}: interval must be positive")
        if not self.low > 0:
            raise DomainError(f"bar {self.timestamp}: low must be positive, got {self.low}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise DomainError(f"bar {self.timestamp}: high/low do not bracket open/close")

    @property
    def end(self) -> int:
        return self.timestamp + self.interval


@dataclass(frozen=True)
class PricePathConfig:
    """Parameters of a seeded jump-diffusion price path.

    Parameters
    ----------
    initial_price : float
        Starting price, strictly positive.
    drift_per_step : float, default=0.0
        Drift of the log price per bar.
    vol_per_step : float, default=0.0
        Standard deviation of the diffusive log return per bar.
    jump_intensity_per_step : float, default=0.0
        Expected number of jumps per bar.
    jump_scale : float, default=0.0
        Standard deviation of a single log-normal jump.
    step_seconds : int, default=1
        Bar length; must divide the 12 second slot.
    seed : int, default=0
        Seed of the random generator.
    ticks_per_step : int, default=4
        Simulated ticks aggregated into each bar.
    start_timestamp : int
        UNIX seconds of the first bar.
    """

    initial_price: float
    drift_per_step: float = 0.0
    vol_per_step: float = 0.0
    jump_intensity_per_step: float = 0.0
    jump_scale: float = 0.0
    step_seconds: int = 1
    seed: int = 0
    ticks_per_step: int = 4
    start_timestamp: int = DEFAULT_START_TIMESTAMP

    def __post_init__(self) -> None:
        if not self.initial_price > 0:
            raise DomainError(f"initial price must be positive, got {self.initial_price}")
        if self.vol_per_step < 0 or self.jump_intensity_per_step < 0 or self.jump_scale < 0:
            raise DomainError("volatility, jump intensity and jump scale must be nonnegative")
        if self.step_seconds <= 0 or SLOT_SECONDS % self.step_seconds != 0:
            raise DomainError(f"step_seconds must divide {SLOT_SECONDS}, got {self.step_seconds}")
        if self.ticks_per_step < 1:
            raise DomainError("ticks_per_step must be at least 1")


def gen_price_path(config: PricePathConfig, n_steps: int) -> list[CandleBar]:
    """Generate ``n_steps`` candle bars from a seeded jump-diffusion.

    Identical ``(config, n_steps)`` always yield identical bars.

    Parameters
    ----------
    config : PricePathConfig
        Process parameters and seed.
    n_steps : int
        Number of bars, at least 1.

    Returns
    -------
    list[CandleBar]
        Consecutive bars starting at ``config.start_timestamp``.
    """
    if n_steps < 1:
        raise DomainError(f"n_steps must be at least 1, got {n_steps}")
    k = config.ticks_per_step
    rng = np.random.default_rng(config.seed)
    shocks = rng.standard_normal((n_steps, k))
    n_jumps = rng.poisson(config.jump_intensity_per_step / k, (n_steps, k))
    jump_draws = rng.standard_normal((n_steps, k))

    increments = config.drift_per_step / k + config.vol_per_step / math.sqrt(k) * shocks
    increments = increments + config.jump_scale * np.sqrt(n_jumps) * jump_draws
    ticks = config.initial_price * np.exp(np.cumsum(increments.ravel())).reshape(n_steps, k)

    closes = ticks[:, -1]
    opens = np.concatenate(([config.initial_price], closes[:-1]))
    highs = np.maximum(ticks.max(axis=1), opens)
    lows = np.minimum(ticks.min(axis=1), opens)

    start, step = config.start_timestamp, config.step_seconds
    return [
        CandleBar(
            timestamp=start + i * step,
            interval=step,
            open=float(opens[i]),
            high=float(highs[i]),
            low=float(lows[i]),
            close=float(closes[i]),
        )
        for i in range(n_steps)
    ]


def candles_to_frame(bars: Sequence[CandleBar], symbol: str | None = None) -> pd.DataFrame:
    """Tabulate bars with the candle file columns (plus ``symbol`` when given)."""
    frame = pd.DataFrame(
        [(b.timestamp, b.interval, b.open, b.high, b.low, b.close) for b in bars],
        columns=CANDLE_COLUMNS,
    )
    if symbol is not None:
        frame.insert(0, "symbol", symbol)
    return frame


class PriceSeries(Sequence[CandleBar]):
    """Read-only bar sequence with cached arrays for time lookups."""

    def __init__(self, bars: Sequence[CandleBar]) -> None:
        self._bars = list(bars)
        self.starts = np.array([b.timestamp for b in self._bars], dtype=np.int64)
        self.ends = np.array([b.end for b in self._bars], dtype=np.int64)
        self.highs = np.array([b.high for b in self._bars], dtype=float)
        self.lows = np.array([b.low for b in self._bars], dtype=float)
        self.closes = np.array([b.close for b in self._bars], dtype=float)

    def __len__(self) -> int:
        return len(self._bars)

    @overload
    def __getitem__(self, index: int) -> CandleBar: ...

    @overload
    def __getitem__(self, index: slice) -> list[CandleBar]: ...

    def __getitem__(self, index: int | slice) -> CandleBar | list[CandleBar]:
        return self._bars[index]

    def covers(self, start: float, end: float) -> bool:
        return len(self) > 0 and start >= self.starts[0] and end <= self.ends[-1]

    def price_at(self, t: float) -> float:
        """Last observable price at instant ``t`` (seconds).

        The close of the latest bar ending at or before ``t``; the first bar's open while
        ``t`` is inside the first bar.
        """
        if len(self) == 0 or t < self.starts[0]:
            raise SlotRangeError(f"instant {t} precedes the price series")
        idx = int(np.searchsorted(self.ends, t, side="right")) - 1
        return self._bars[0].open if idx < 0 else float(self.closes[idx])

    def window_volatility(self, start: float, end: float) -> float:
        lo = int(np.searchsorted(self.starts, start, side="left"))
        hi = int(np.searchsorted(self.ends, end, side="right"))
        if hi <= lo:
            raise DomainError(f"no bars in volatility window ({start}, {end})")
        return math.log10(float(self.highs[lo:hi].max()) / float(self.lows[lo:hi].min()))


def as_series(bars: Sequence[CandleBar]) -> PriceSeries:
    return bars if isinstance(bars, PriceSeries) else PriceSeries(bars)


def volatility(bars: Sequence[CandleBar], window: tuple[float, float] | None = None) -> float:
    """Volatility ``log10(max high / min low)`` over a window of bars.

    Parameters
    ----------
    bars : Sequence[CandleBar]
        Price series.
    window : tuple[float, float], optional
        ``(start, end)`` UNIX seconds; bars lying fully inside the window are used. The
        whole series is used when omitted.

    Raises
    ------
    DomainError
        If the window contains no bars.

    Examples
    --------
    >>> round(volatility([CandleBar(0, 1, 1.5, 2.0, 1.0, 1.5)]), 5)
    0.30103
    """
    if len(bars) == 0:
        raise DomainError("volatility of an empty window is undefined")
    series = as_series(bars)
    if window is None:
        return series.window_volatility(series.starts[0], series.ends[-1])
    return series.window_volatility(*window)


def price_at(bars: Sequence[CandleBar], t: float) -> float:
    """Last observable price at instant ``t``; see :meth:`PriceSeries.price_at`."""
    return as_series(bars).price_at(t)


def leadup_window(slot: int, genesis: int = DEFAULT_START_TIMESTAMP) -> tuple[int, int]:
    """``(start, end)`` seconds between the previous slot's start and this slot's start."""
    return genesis + SLOT_SECONDS * (slot - 1), genesis + SLOT_SECONDS * slot


def _covered_window(
    bars: Sequence[CandleBar], slot: int, genesis: int
) -> tuple[PriceSeries, int, int]:
    if slot < 1:
        raise SlotRangeError(f"slot {slot} has no lead-up window")
    series = as_series(bars)
    start, end = leadup_window(slot, genesis)
    if not series.covers(start, end):
        raise SlotRangeError(f"lead-up window of slot {slot} lies outside the price series")
    return series, start, end


def slot_leadup_return(
    bars: Sequence[CandleBar], slot: int, genesis: int = DEFAULT_START_TIMESTAMP
) -> float:
    """Relative price change over a slot's 12 second lead-up window.

    Parameters
    ----------
    bars : Sequence[CandleBar]
        Price series covering the window.
    slot : int
        Slot number; slot ``s`` starts at ``genesis + 12 s``.
    genesis : int
        UNIX seconds of slot 0.

    Returns
    -------
    float
        ``close(end) / close(start) - 1``.

    Raises
    ------
    SlotRangeError
        If the window is not covered by ``bars``.
    """
    series, start, end = _covered_window(bars, slot, genesis)
    return series.price_at(end) / series.price_at(start) - 1.0


def slot_leadup_volatility(
    bars: Sequence[CandleBar], slot: int, genesis: int = DEFAULT_START_TIMESTAMP
) -> float:
    """Volatility of the bars inside a slot's lead-up window."""
    series, start, end = _covered_window(bars, slot, genesis)
    return series.window_volatility(start, end)
