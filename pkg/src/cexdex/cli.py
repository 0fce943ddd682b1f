"""Command-line interface: simulate datasets, detect arbitrage swaps, analyze and report."""

import logging
from pathlib import Path

import pandas as pd
import typer

from .amm import breakeven_delta, profit_curve
from .analytics import run_analysis
from .config import (
    build_price_paths,
    build_world,
    dump_yaml,
    load_analysis_config,
    load_detector_config,
    load_scenario,
)
from .detect import detect_blocks, flags_to_frame
from .errors import ScenarioError
from .io import (
    Dataset,
    cross_check_relay_bids,
    load_and_validate,
    load_flags,
    write_dataset,
    write_flags,
    write_table,
)
from .pbs import simulate as run_simulation
from .plot import render_figures

app = typer.Typer(
    help="CEX-DEX arbitrage CLI",
    no_args_is_help=True,
)

logging.getLogger().setLevel(logging.INFO)
logging.basicConfig(
    format="%(asctime)s,%(msecs)d %(levelname)s %(message)s",
    datefmt="%Y-%m-%dT%H:%M:%S",
    level=logging.INFO,
)

EXIT_SCENARIO = 2
EXIT_VALIDATION = 3
EXIT_MISSING = 4

QuietOption = typer.Option(False, "--quiet", help="Only log warnings and errors.")


def _configure(quiet: bool) -> None:
    logging.getLogger().setLevel(logging.WARNING if quiet else logging.INFO)


def _fail(message: str, code: int) -> typer.Exit:
    typer.echo(f"error: {message}", err=True)
    return typer.Exit(code=code)


def _load_dataset(dataset: Path) -> Dataset:
    try:
        data = load_and_validate(dataset)
    except FileNotFoundError as exc:
        raise _fail(str(exc), EXIT_MISSING) from exc
    if not data.ok:
        for issue in data.issues[:20]:
            typer.echo(str(issue), err=True)
        raise _fail(f"{len(data.issues)} validation issue(s) in {dataset}", EXIT_VALIDATION)
    return data


@app.command("simulate")
def simulate(
    scenario: str = typer.Argument("default", help="Bundled scenario name or scenario file."),
    seed: int | None = typer.Option(None, "--seed", help="Override the scenario seed."),
    out: Path | None = typer.Option(None, "--out", help="Dataset directory."),
    quiet: bool = QuietOption,
) -> None:
    """Simulate a scenario and write the dataset.

    Parameters
    ----------
    scenario : str, default="default"
        Name of a bundled scenario (``default``, ``fig3``, ``subsidy``, ``volatility``) or
        the path of a scenario YAML file.
    seed : int, optional
        Replaces the scenario's seed.
    out : pathlib.Path, optional
        Output directory; defaults to the scenario's ``output_dir`` or ``runs/<name>``.
    quiet : bool, default=False
        Log warnings only.

    Returns
    -------
    None
        Writes the dataset files, ``manifest.yaml``, ``resolved_config.yaml`` and, for
        scenarios with a ``profit_curve`` section, ``profit_curve.csv``.
    """
    _configure(quiet)
    try:
        config = load_scenario(scenario)
    except ScenarioError as exc:
        raise _fail(str(exc), EXIT_SCENARIO) from exc
    except FileNotFoundError as exc:
        raise _fail(str(exc), EXIT_MISSING) from exc
    if seed is not None:
        config = config.with_seed(seed)
    out_dir = out or Path(config.output_dir or f"runs/{config.name}")

    try:
        world = build_world(config)
    except ScenarioError as exc:
        raise _fail(str(exc), EXIT_SCENARIO) from exc
    paths = build_price_paths(config)

    logging.info(
        f"Simulating {config.slots} slot(s) of scenario {config.name} (seed {config.seed})..."
    )
    result = run_simulation(world, config.slot_range, paths)
    write_dataset(
        out_dir,
        result,
        paths,
        first_slot=config.first_slot,
        last_slot=config.first_slot + config.slots - 1,
        genesis=config.genesis,
        source=config.name,
    )
    dump_yaml(config.to_dict(), out_dir / "resolved_config.yaml")
    n_missed = sum(block.missed for block in result.blocks)
    logging.info(
        f"{len(result.blocks)} block(s), {n_missed} missed, "
        f"{len(result.arbitrages)} arbitrage(s) included"
    )

    if config.profit_curve is not None:
        spec = config.profit_curve
        curve = profit_curve(spec.liquidity, spec.p_on, spec.fee, spec.offchain_fee, spec.deltas())
        write_table(curve, out_dir / "profit_curve.csv")
        logging.info(
            "Break-even price difference "
            f"{breakeven_delta(spec.p_on, spec.fee, spec.offchain_fee):.7f}"
        )
    logging.info(f"Wrote {out_dir}")


@app.command("detect")
def detect(
    dataset: Path = typer.Argument(..., help="Dataset directory."),
    config: Path | None = typer.Option(
        None, "--config", help="Detector YAML (or a scenario file)."
    ),
    out: Path | None = typer.Option(
        None, "--out", help="Flags file; defaults to <dataset>/flags.csv."
    ),
    threads: int = typer.Option(1, "--threads", help="Parallel workers."),
    quiet: bool = QuietOption,
) -> None:
    """Flag non-atomic arbitrage swaps in a dataset.

    Writes one record per swap and the detector settings used
    (``detector_config.yaml``) next to the flags file, then prints a summary line.
    """
    _configure(quiet)
    data = _load_dataset(dataset)
    try:
        detector = load_detector_config(config)
    except ScenarioError as exc:
        raise _fail(str(exc), EXIT_SCENARIO) from exc
    except FileNotFoundError as exc:
        raise _fail(str(exc), EXIT_MISSING) from exc

    results = detect_blocks(data.blocks, detector, n_jobs=threads)
    flags = flags_to_frame(data.blocks, results)
    flags_path = out or dataset / "flags.csv"
    flags_path.parent.mkdir(parents=True, exist_ok=True)
    write_flags(flags, flags_path)
    dump_yaml(detector.to_dict(), flags_path.parent / "detector_config.yaml")
    logging.info(f"Wrote {flags_path}")

    n_flagged = int(flags["flagged"].sum())
    volume = float(flags.loc[flags["flagged"], "amount_usd"].sum())
    typer.echo(
        f"{len(data.blocks)} blocks, {len(flags)} swaps, {n_flagged} flagged "
        f"({volume:,.2f} USD flagged volume)"
    )


def _analyze(
    dataset: Path, flags_path: Path | None, config: Path | None, out: Path | None
) -> tuple[dict[str, pd.DataFrame], Path]:
    flags_path = flags_path or dataset / "flags.csv"
    if not flags_path.is_file():
        raise _fail(f"flags file {flags_path} not found", EXIT_MISSING)
    data = _load_dataset(dataset)
    try:
        analysis = load_analysis_config(config)
    except ScenarioError as exc:
        raise _fail(str(exc), EXIT_SCENARIO) from exc
    except FileNotFoundError as exc:
        raise _fail(str(exc), EXIT_MISSING) from exc
    try:
        flags = load_flags(flags_path)
    except ValueError as exc:
        raise _fail(str(exc), EXIT_VALIDATION) from exc

    bids, discarded = cross_check_relay_bids(data.blocks, data.bids)
    if discarded:
        logging.warning(
            f"Relay bids of slot(s) {discarded[:10]} disagree with payments and were dropped"
        )

    tables = run_analysis(
        flags,
        data.blocks,
        data.candles,
        data.manifest.genesis,
        bids=bids,
        ground_truth=data.ground_truth,
        config=analysis,
    )
    out_dir = out or dataset / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    for stem, table in tables.items():
        write_table(table, out_dir / f"{stem}.csv")
    dump_yaml(analysis.to_dict(), out_dir / "analysis_config.yaml")
    windows = tables["subsidy_windows"]
    logging.info(f"Wrote {len(tables)} table(s) to {out_dir}; {len(windows)} subsidy window(s)")
    return tables, out_dir


@app.command("analyze")
def analyze(
    dataset: Path = typer.Argument(..., help="Dataset directory."),
    flags: Path | None = typer.Option(
        None, "--flags", help="Flags file; defaults to <dataset>/flags.csv."
    ),
    config: Path | None = typer.Option(
        None, "--config", help="Analysis YAML (or a scenario file)."
    ),
    out: Path | None = typer.Option(
        None, "--out", help="Report directory; defaults to <dataset>/report."
    ),
    quiet: bool = QuietOption,
) -> None:
    """Compute aggregates, matrices, CDFs, correlations and the subsidy report."""
    _configure(quiet)
    _analyze(dataset, flags, config, out)


@app.command("report")
def report(
    dataset: Path = typer.Argument(..., help="Dataset directory."),
    flags: Path | None = typer.Option(
        None, "--flags", help="Flags file; defaults to <dataset>/flags.csv."
    ),
    config: Path | None = typer.Option(
        None, "--config", help="Analysis YAML (or a scenario file)."
    ),
    out: Path | None = typer.Option(
        None, "--out", help="Report directory; defaults to <dataset>/report."
    ),
    figures: bool = typer.Option(False, "--figures", help="Also render PNG figures."),
    quiet: bool = QuietOption,
) -> None:
    """Analyze, carry over the profit curve when the dataset has one, and optionally plot."""
    _configure(quiet)
    tables, out_dir = _analyze(dataset, flags, config, out)
    curve_path = dataset / "profit_curve.csv"
    if curve_path.is_file():
        tables["profit_curve"] = pd.read_csv(curve_path)
        write_table(tables["profit_curve"], out_dir / "profit_curve.csv")
    if figures:
        for path in render_figures(tables, out_dir):
            logging.info(f"Wrote {path}")


if __name__ == "__main__":
    app()
