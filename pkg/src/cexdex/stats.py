"""Correlation tests and empirical distribution helpers."""

from __future__ import annotations

from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import special

from .errors import DomainError, UndefinedCorrelationError

CDF_COLUMNS = ["threshold", "value", "cdf", "n_blocks"]


class CorrelationResult(NamedTuple):
    r: float
    p: float
    n: int


def pearson_with_p(
    x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray
) -> CorrelationResult:
    """Sample Pearson correlation with a two-sided p-value.

    The p-value comes from the t statistic ``r sqrt((n - 2) / (1 - r**2))`` with ``n - 2``
    degrees of freedom, evaluated as the regularized incomplete beta function
    ``I_{1 - r**2}((n - 2) / 2, 1 / 2)``.

    Parameters
    ----------
    x, y : array-like
        Paired observations of equal length, at least 3.

    Returns
    -------
    CorrelationResult
        ``(r, p, n)``.

    Raises
    ------
    UndefinedCorrelationError
        If fewer than 3 pairs are given or either series has zero variance.

    Examples
    --------
    >>> round(pearson_with_p([1, 2, 3, 4, 5], [2, 1, 4, 3, 6]).r, 5)
    0.82199
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DomainError(f"series must be 1-d and of equal length, got {xs.shape} and {ys.shape}")
    n = len(xs)
    if n < 3:
        raise UndefinedCorrelationError(f"correlation needs at least 3 pairs, got {n}")
    dx, dy = xs - xs.mean(), ys - ys.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation undefined for a series with zero variance")
    r = float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))
    residual = 1.0 - r * r
    p = 0.0 if residual <= 0 else float(special.betainc((n - 2) / 2.0, 0.5, residual))
    return CorrelationResult(r, p, n)


def empirical_cdf(values: Sequence[float] | np.ndarray | pd.Series) -> pd.DataFrame:
    """Step CDF of a sample: one row per distinct value with the fraction at or below it."""
    data = np.sort(np.asarray(values, dtype=float))
    data = data[~np.isnan(data)]
    if data.size == 0:
        return pd.DataFrame({"value": pd.Series(dtype=float), "cdf": pd.Series(dtype=float)})
    distinct = np.unique(data)
    cdf = np.searchsorted(data, distinct, side="right") / data.size
    return pd.DataFrame({"value": distinct, "cdf": cdf})


def conditional_cdf(
    block_metric: pd.Series, condition_metric: pd.Series, thresholds: Sequence[float]
) -> pd.DataFrame:
    """Empirical CDFs of a block metric restricted to high values of a condition metric.

    Parameters
    ----------
    block_metric : pandas.Series
        Per-block value whose distribution is reported (e.g. flagged gas share).
    condition_metric : pandas.Series
        Per-block conditioning value (e.g. lead-up volatility), aligned on the same index.
    thresholds : Sequence[float]
        Quantile levels in ``[0, 1)``; 0 is the unconditional distribution, ``q > 0`` keeps
        blocks whose condition metric strictly exceeds its ``q``-quantile.

    Returns
    -------
    pandas.DataFrame
        Long table with columns ``threshold``, ``value``, ``cdf`` and ``n_blocks``. A
        threshold that selects no block contributes one row with ``n_blocks = 0`` and NaN
        ``value`` and ``cdf``.
    """
    joined = pd.concat({"metric": block_metric, "condition": condition_metric}, axis=1).dropna()
    frames = []
    for q in thresholds:
        if not 0 <= q < 1:
            raise DomainError(f"threshold must be in [0, 1), got {q}")
        if q == 0 or joined.empty:
            selected = joined
        else:
            cut = joined["condition"].quantile(q)
            selected = joined[joined["condition"] > cut]
        cdf = empirical_cdf(selected["metric"])
        if cdf.empty:
            cdf = pd.DataFrame({"value": [np.nan], "cdf": [np.nan]})
        cdf.insert(0, "threshold", float(q))
        cdf["n_blocks"] = len(selected)
        frames.append(cdf)
    if not frames:
        return pd.DataFrame(columns=CDF_COLUMNS)
    return pd.concat(frames, ignore_index=True)[CDF_COLUMNS]


def _cdf_at(cdf: pd.DataFrame, points: np.ndarray) -> np.ndarray:
    values = cdf["value"].to_numpy(dtype=float)
    levels = cdf["cdf"].to_numpy(dtype=float)
    idx = np.searchsorted(values, points, side="right") - 1
    return np.where(idx < 0, 0.0, levels[np.clip(idx, 0, None)])


def stochastically_dominates(upper: pd.DataFrame, lower: pd.DataFrame, atol: float = 1e-12) -> bool:
    """First-order dominance: ``F_upper(v) <= F_lower(v)`` at every value of either sample."""
    upper = upper.dropna(subset=["value"])
    lower = lower.dropna(subset=["value"])
    if upper.empty or lower.empty:
        return False
    grid = np.union1d(upper["value"].to_numpy(dtype=float), lower["value"].to_numpy(dtype=float))
    return bool(np.all(_cdf_at(upper, grid) <= _cdf_at(lower, grid) + atol))
