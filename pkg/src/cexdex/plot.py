"""Plotting utilities for report tables."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

logger = logging.getLogger(__name__)


def make_profit_curve_plot(curve: pd.DataFrame, breakeven: float | None = None) -> plt.Figure:
    """Arbitrage profit against the price gap between the venues.

    Parameters
    ----------
    curve : pandas.DataFrame
        Output of :func:`cexdex.amm.profit_curve` with ``delta_p`` and ``profit`` columns.
    breakeven : float, optional
        Break-even gap, drawn as a vertical line.

    Returns
    -------
    matplotlib.figure.Figure
        Single-panel figure.

    Examples
    --------
    >>> import numpy as np
    >>> from cexdex.amm import profit_curve
    >>> curve = profit_curve(1e6, 1.0, 0.003, 0.001, np.linspace(0, 0.05, 51))
    >>> fig = make_profit_curve_plot(curve)
    >>> fig.savefig("profit_curve.png")
    """
    sns.set_theme(style="whitegrid")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve["delta_p"], curve["profit"], color="steelblue", linewidth=1.8)
    if breakeven is not None:
        ax.axvline(
            breakeven,
            color="grey",
            linestyle="--",
            linewidth=1,
            label=f"break-even {breakeven:.5f}",
        )
        ax.legend()
    ax.set_xlabel("Price difference ΔP")
    ax.set_ylabel("Profit (token Y)")
    ax.set_title("Arbitrage profit")
    fig.tight_layout()
    return fig


def make_matrix_plot(matrix: pd.DataFrame) -> plt.Figure:
    """Heatmap of the share of each searcher's flagged volume per builder."""
    sns.set_theme(style="white")
    data = matrix.set_index("searcher") if "searcher" in matrix.columns else matrix
    width = 1.2 * max(len(data.columns), 2) + 2
    fig, ax = plt.subplots(figsize=(width, 0.5 * max(len(data), 2) + 1.5))
    if data.empty:
        ax.text(0.5, 0.5, "no flagged volume", ha="center", va="center")
        ax.set_axis_off()
    else:
        sns.heatmap(data, annot=True, fmt=".2f", cmap="Blues", vmin=0, vmax=1, cbar=False, ax=ax)
        ax.set_xlabel("Builder")
        ax.set_ylabel("Searcher")
    ax.set_title("Searcher volume by builder")
    fig.tight_layout()
    return fig


def _plot_cdf(ax: plt.Axes, cdf: pd.DataFrame, label: str) -> None:
    for threshold, group in cdf.groupby("threshold"):
        if group["n_blocks"].iloc[0] == 0:
            continue
        name = "all blocks" if threshold == 0 else f"top {100 * (1 - threshold):g}% volatility"
        ax.step(group["value"], group["cdf"], where="post", label=name)
    ax.set_xlabel(label)
    ax.set_ylabel("CDF")
    ax.legend(fontsize=8)


def make_cdf_plot(tables: Mapping[str, pd.DataFrame]) -> plt.Figure:
    """Conditional CDFs of gas share, value share, block size and block value."""
    sns.set_theme(style="whitegrid")
    panels = [
        ("gas_share_cdf", "Flagged gas share"),
        ("value_share_cdf", "Flagged value share"),
        ("block_size_cdf", "Block gas used"),
        ("block_value_cdf", "Block fees (ETH)"),
    ]
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.5))
    for ax, (stem, label) in zip(axes, panels):
        _plot_cdf(ax, tables[stem], label)
    fig.tight_layout()
    return fig


def make_daily_plot(daily: pd.DataFrame, hft_daily: pd.DataFrame) -> plt.Figure:
    """Daily flagged share of DEX volume and the block share of integrated builders."""
    sns.set_theme(style="whitegrid")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    share = daily["flagged_volume"] / daily["dex_volume"].where(daily["dex_volume"] > 0)
    ax1.plot(pd.to_datetime(daily["day"]), share, marker="o", color="steelblue")
    ax1.set_ylabel("Flagged share of DEX volume")
    ax1.tick_params(axis="x", rotation=90, labelsize=9)
    ax2.plot(
        pd.to_datetime(hft_daily["day"]),
        hft_daily["hft_block_share"],
        marker="o",
        color="coral",
        label="daily",
    )
    ax2.plot(
        pd.to_datetime(hft_daily["day"]),
        hft_daily["hft_block_share_roll_7"],
        color="black",
        linewidth=1,
        label="7-day mean",
    )
    ax2.set_ylabel("Blocks won by integrated builders")
    ax2.tick_params(axis="x", rotation=90, labelsize=9)
    ax2.legend()
    fig.tight_layout()
    return fig


def render_figures(tables: Mapping[str, pd.DataFrame], out_dir: Path) -> list[Path]:
    """Write every figure the available tables allow as PNG files into ``out_dir``."""
    out_dir = Path(out_dir)
    figures = {
        "searcher_builder_matrix.png": make_matrix_plot(tables["searcher_builder_matrix"]),
        "conditional_cdfs.png": make_cdf_plot(tables),
        "daily_shares.png": make_daily_plot(tables["daily"], tables["hft_daily"]),
    }
    if "profit_curve" in tables:
        figures["profit_curve.png"] = make_profit_curve_plot(tables["profit_curve"])
    paths = []
    for name, fig in figures.items():
        path = out_dir / name
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
        logger.debug(f"wrote {path}")
    return paths
