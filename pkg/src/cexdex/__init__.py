# __all__: list[str] = []

"""cexdex package for simulating and detecting non-atomic CEX-DEX arbitrage on Ethereum."""

from .amm import Pool, arb_profit, breakeven_delta, optimal_arb_size, swap_exact_in
from .config import load_scenario
from .detect import DetectorConfig, detect_block
from .io import load_and_validate

__all__ = [
    "DetectorConfig",
    "Pool",
    "arb_profit",
    "breakeven_delta",
    "detect_block",
    "load_and_validate",
    "load_scenario",
    "optimal_arb_size",
    "swap_exact_in",
]
