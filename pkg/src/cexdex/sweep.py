"""Volatility-level sweeps: one scenario re-run with its price paths scaled up or down.

Every level reuses the scenario seed, so the price paths of two levels share their shocks
and jump times and differ only in size.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import ScenarioConfig, build_price_paths, build_world
from .detect import detect_blocks, flags_to_frame
from .errors import DomainError, UndefinedCorrelationError
from .pbs import simulate
from .stats import conditional_cdf, pearson_with_p, stochastically_dominates
from .transform import block_metrics, leadup_volatility, tidy_blocks

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.25, 0.5, 1.0, 2.0)
SWEEP_COLUMNS = ["level", "n_blocks", "n_flagged", "integrated_win_rate", "r", "p"]


@dataclass(frozen=True)
class SweepResult:
    """Per-level summary rows and the pooled per-block frame they were computed from."""

    table: pd.DataFrame
    blocks: pd.DataFrame
    top_quantile: float

    def win_rate_nondecreasing(self) -> bool:
        rates = self.table.sort_values("level")["integrated_win_rate"].to_numpy(dtype=float)
        return bool(np.all(np.diff(rates) >= 0))

    def gas_share_cdfs(self) -> pd.DataFrame:
        thresholds = [0.0, self.top_quantile]
        blocks = self.blocks
        return conditional_cdf(blocks["gas_share"], blocks["leadup_volatility"], thresholds)

    def gas_share_dominates(self) -> bool:
        """Whether the gas share of the most volatile blocks dominates the unconditional one."""
        cdfs = self.gas_share_cdfs()
        return stochastically_dominates(
            cdfs[cdfs["threshold"] == self.top_quantile], cdfs[cdfs["threshold"] == 0.0]
        )


def scale_volatility(scenario: ScenarioConfig, level: float) -> ScenarioConfig:
    """Multiply diffusion volatility and jump size of every price path by ``level``."""
    if not level > 0:
        raise DomainError(f"volatility level must be positive, got {level}")
    paths = {
        token: replace(
            cfg, vol_per_step=cfg.vol_per_step * level, jump_scale=cfg.jump_scale * level
        )
        for token, cfg in scenario.price_paths.items()
    }
    return replace(scenario, price_paths=paths)


def run_level(scenario: ScenarioConfig, level: float) -> tuple[dict, pd.DataFrame]:
    """Simulate, detect and reduce one volatility level.

    Returns
    -------
    tuple[dict, pandas.DataFrame]
        The summary row (see ``SWEEP_COLUMNS``) and one row per proposed block with
        ``builder_id``, ``gas_share``, ``flagged_volume`` and ``leadup_volatility``.
    """
    scaled = scale_volatility(scenario, level)
    paths = build_price_paths(scaled)
    result = simulate(build_world(scaled), scaled.slot_range, paths)
    blocks = [block for block in result.blocks if not block.missed]
    flags = flags_to_frame(blocks, detect_blocks(blocks, scaled.detector))

    metrics = block_metrics(flags, tidy_blocks(blocks))
    volatility = leadup_volatility(metrics["slot"].tolist(), paths, scaled.genesis)
    frame = metrics.set_index("slot").join(volatility).reset_index()
    frame = frame[["slot", "builder_id", "gas_share", "flagged_volume", "leadup_volatility"]]
    frame.insert(0, "level", float(level))

    integrated = {b.builder_id for b in scaled.builders if b.integrated_searchers}
    win_rate = float(frame["builder_id"].isin(integrated).mean()) if len(frame) else np.nan
    known = frame.dropna(subset=["leadup_volatility"])
    try:
        r, p, _ = pearson_with_p(known["leadup_volatility"], known["flagged_volume"])
    except UndefinedCorrelationError:
        r, p = np.nan, np.nan
    logger.info(
        f"level {level}: {len(frame)} blocks, integrated win rate {win_rate:.3f}, r={r:.3f}"
    )
    row = {
        "level": float(level),
        "n_blocks": len(frame),
        "n_flagged": int(flags["flagged"].sum()) if len(flags) else 0,
        "integrated_win_rate": win_rate,
        "r": r,
        "p": p,
    }
    return row, frame


def volatility_sweep(
    scenario: ScenarioConfig,
    levels: Sequence[float] = DEFAULT_LEVELS,
    top_quantile: float = 0.999,
    n_jobs: int = 1,
) -> SweepResult:
    """Run ``scenario`` once per volatility level, always with its own seed.

    Parameters
    ----------
    scenario : ScenarioConfig
        Base scenario; its seed and slot range are used unchanged at every level.
    levels : Sequence[float]
        Multipliers applied to ``vol_per_step`` and ``jump_scale`` of every price path.
    top_quantile : float, default=0.999
        Lead-up volatility quantile for the conditional gas-share CDF.
    n_jobs : int, default=1
        joblib workers, one level per task.
    """
    if not levels:
        raise DomainError("a sweep needs at least one level")
    if not 0 < top_quantile < 1:
        raise DomainError(f"top_quantile must be in (0, 1), got {top_quantile}")
    tasks = (delayed(run_level)(scenario, level) for level in sorted(levels))
    outcomes = Parallel(n_jobs=n_jobs)(tasks)
    table = pd.DataFrame([row for row, _ in outcomes], columns=SWEEP_COLUMNS)
    blocks = pd.concat([frame for _, frame in outcomes], ignore_index=True)
    blocks = blocks.dropna(subset=["leadup_volatility"]).reset_index(drop=True)
    return SweepResult(table=table, blocks=blocks, top_quantile=top_quantile)
