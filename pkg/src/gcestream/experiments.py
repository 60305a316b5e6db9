"""Experiment orchestration: configs, the estimation suite, report emission.

A JSON config describes scenarios (one generating model each, with grids of
multicollinearity levels and batch fractions, plus block sizes to sweep).
``run_experiment`` expands scenarios into (scenario, eta, replication) cells,
runs the whole method suite on each cell's dataset, and writes the tabular
reports plus plot-ready figure data. Every method's rmse is computed over all
n observations with that method's final coefficients, so columns are directly
comparable.

Replication seeds are derived from (seed_base, scenario name, eta index,
replication index) through a seed sequence, so runs are reproducible cell by
cell and independent across cells. Cells can execute in a process pool; the
emitted files are byte-identical regardless of worker count because rows are
sorted and timing values are withheld unless explicitly requested.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .metrics import (
    MethodResult,
    RunReport,
    relative_gap,
    rmse,
    summary_rows,
    write_report_csv,
    write_report_json,
    write_summary_csv,
    write_summary_json,
)
from .simulation import (
    DEFAULT_BETA_SUPPORT,
    SimulationConfig,
    build_error_support,
    generate_dataset,
    load_dataset_csv,
    standardize_columns,
)
from .solver import GceProblem, GceSolution, SolverSettings, solve_gce
from .streaming import UpdateSettings, run_stream
from .core import SupportGrid

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "ExperimentConfig",
    "ExperimentOutcome",
    "CellOutcome",
    "SolveOutcome",
    "parse_experiment_config",
    "run_cell",
    "run_experiment",
    "solve_file",
    "REPORT_FILES",
]

#: Files run_experiment writes into the output directory.
REPORT_FILES = (
    "report.csv",
    "report.json",
    "summary.csv",
    "summary.json",
    "fig_rmse_vs_n.csv",
    "fig_rmse_vs_eta.csv",
    "fig_gap_vs_batch.csv",
)

_STREAMING_METHODS = ("stre_gce", "stre_gce_block", "stre_gce_std")


class ConfigError(ValueError):
    """Configuration content is malformed; the message names the field."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One generating model plus the grids swept on top of it."""

    name: str
    simulation: SimulationConfig
    eta_grid: tuple[float, ...] = (0.0,)
    batch_fractions: tuple[float, ...] = (0.25, 0.5, 0.75)
    block_sizes: tuple[int, ...] = (1,)
    run_std: bool = False
    gamma: float = 0.5
    error_points: int = 3
    error_scale: str = "batch"
    estimate_intercept: bool = True

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("scenario name must be nonempty")
        etas = tuple(float(e) for e in self.eta_grid)
        if not etas or any(not 0.0 <= e <= 1.0 for e in etas):
            raise ConfigError("eta_grid entries must lie in [0, 1]")
        fractions = tuple(float(f) for f in self.batch_fractions)
        if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
            raise ConfigError("batch_fractions must lie in (0, 1]")
        for f in fractions:
            m = int(round(f * self.simulation.n))
            if not 2 <= m <= self.simulation.n:
                raise ConfigError(
                    f"batch fraction {f} of n={self.simulation.n} gives batch size {m}; "
                    "need at least 2"
                )
        blocks = tuple(int(g) for g in self.block_sizes)
        if any(g < 1 for g in blocks) or len(set(blocks)) != len(blocks):
            raise ConfigError("block_sizes must be distinct positive integers")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie strictly in (0, 1)")
        if self.error_points < 2:
            raise ConfigError("error_points must be at least 2")
        if self.error_scale not in ("batch", "cumulative", "full"):
            raise ConfigError(
                f"error_scale must be 'batch', 'cumulative', or 'full', got {self.error_scale!r}"
            )
        if self.run_std and not self.estimate_intercept:
            raise ConfigError("run_std requires estimate_intercept (it absorbs column means)")
        object.__setattr__(self, "eta_grid", etas)
        object.__setattr__(self, "batch_fractions", fractions)
        object.__setattr__(self, "block_sizes", blocks)


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[ScenarioConfig, ...]
    replications: int
    seed_base: int
    solver: SolverSettings = field(default_factory=SolverSettings)
    out_dir: str | None = None
    jobs: int = 1
    include_timings: bool = False

    def __post_init__(self) -> None:
        scenarios = tuple(self.scenarios)
        if not scenarios:
            raise ConfigError("config needs at least one scenario")
        names = [s.name for s in scenarios]
        if len(set(names)) != len(names):
            raise ConfigError("scenario names must be unique")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.seed_base < 0:
            raise ConfigError("seed_base must be nonnegative")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        object.__setattr__(self, "scenarios", scenarios)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_SIMULATION_KEYS = {
    "n",
    "n_regressors",
    "true_beta",
    "intercept",
    "x_low",
    "x_high",
    "noise_sd",
    "collinear_columns",
    "beta_support",
}
_SCENARIO_KEYS = _SIMULATION_KEYS | {
    "name",
    "eta_grid",
    "batch_fractions",
    "block_sizes",
    "run_std",
    "gamma",
    "error_points",
    "error_scale",
    "estimate_intercept",
}
_TOP_KEYS = {
    "scenarios",
    "replications",
    "seed_base",
    "solver",
    "out_dir",
    "jobs",
    "include_timings",
}
_SOLVER_KEYS = {"constraint_tolerance", "max_iterations"}


def _reject_unknown(mapping: Mapping[str, Any], known: set[str], where: str) -> None:
    if not isinstance(mapping, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}")


def _parse_scenario(raw: Mapping[str, Any], where: str) -> ScenarioConfig:
    _reject_unknown(raw, _SCENARIO_KEYS, where)
    if "name" not in raw or "n" not in raw:
        raise ConfigError(f"{where}: 'name' and 'n' are required")
    sim_kwargs = {k: raw[k] for k in _SIMULATION_KEYS if k in raw}
    for key in ("true_beta", "beta_support", "collinear_columns"):
        if sim_kwargs.get(key) is not None and key in sim_kwargs:
            sim_kwargs[key] = tuple(sim_kwargs[key])
    if "true_beta" in sim_kwargs and "n_regressors" not in sim_kwargs:
        sim_kwargs["n_regressors"] = len(sim_kwargs["true_beta"])
    try:
        simulation = SimulationConfig(**sim_kwargs)
        return ScenarioConfig(
            name=str(raw["name"]),
            simulation=simulation,
            **{
                k: (tuple(raw[k]) if isinstance(raw[k], list) else raw[k])
                for k in (
                    "eta_grid",
                    "batch_fractions",
                    "block_sizes",
                    "run_std",
                    "gamma",
                    "error_points",
                    "error_scale",
                    "estimate_intercept",
                )
                if k in raw
            },
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_experiment_config(source) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON file path or an in-memory dict.

    Unknown keys at any level are errors, as are malformed values; messages
    name the offending field (and JSON syntax errors keep their line/column).
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON: {exc}") from None
    else:
        raw = source

    _reject_unknown(raw, _TOP_KEYS, "config")
    for key in ("scenarios", "replications", "seed_base"):
        if key not in raw:
            raise ConfigError(f"config: {key!r} is required")
    if not isinstance(raw["scenarios"], list) or not raw["scenarios"]:
        raise ConfigError("config: 'scenarios' must be a nonempty list")

    solver = SolverSettings()
    if "solver" in raw:
        _reject_unknown(raw["solver"], _SOLVER_KEYS, "config.solver")
        try:
            solver = SolverSettings(**raw["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config.solver: {exc}") from None

    scenarios = tuple(
        _parse_scenario(s, f"scenarios[{i}]") for i, s in enumerate(raw["scenarios"])
    )
    try:
        return ExperimentConfig(
            scenarios=scenarios,
            replications=int(raw["replications"]),
            seed_base=int(raw["seed_base"]),
            solver=solver,
            out_dir=raw.get("out_dir"),
            jobs=int(raw.get("jobs", 1)),
            include_timings=bool(raw.get("include_timings", False)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config: {exc}") from None


# ---------------------------------------------------------------------------
# Method suite on one cell
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellOutcome:
    """Reports for one (scenario, eta, replication) cell plus timing accounts.

    ``method_seconds`` holds one entry per distinct estimation run (methods
    shared across batch fractions appear once); their sum accounts for
    ``estimation_seconds``, the wall time of the whole estimation section.
    """

    reports: tuple[RunReport, ...]
    method_seconds: Mapping[str, float]
    estimation_seconds: float


def _derive_seed(seed_base: int, scenario_name: str, eta_index: int, replication: int) -> int:
    """Deterministic per-cell seed, keyed by scenario name so removing one
    scenario never shifts the seeds (hence the outputs) of the others."""
    digest = hashlib.sha256(scenario_name.encode("utf-8")).digest()
    name_key = int.from_bytes(digest[:8], "big")
    seq = np.random.SeedSequence((seed_base, name_key, eta_index, replication))
    return int(seq.generate_state(1, np.uint64)[0])


def _fit_plain(y, design, support_row, error_row, solver: SolverSettings) -> GceSolution:
    grid = SupportGrid.tiled(support_row, design.shape[1], error_row, len(y))
    return solve_gce(GceProblem(y, design, grid), solver)


def run_cell(
    scenario: ScenarioConfig, eta: float, seed: int, solver: SolverSettings | None = None
) -> CellOutcome:
    """Run every configured method on one generated dataset.

    Produces one RunReport per batch fraction. The dataset-level fit does not
    depend on the fraction and is computed once, then reported in every
    fraction's table row for side-by-side reading.
    """
    solver = solver if solver is not None else SolverSettings()
    sim = replace(scenario.simulation, eta=float(eta), seed=seed, standardize=False)
    ds = generate_dataset(sim)
    est_int = scenario.estimate_intercept
    y_fit = ds.y if est_int else ds.y - ds.intercept
    design = np.column_stack([np.ones(ds.n), ds.x]) if est_int else ds.x
    support_row = np.asarray(sim.beta_support)
    update_settings = UpdateSettings(gamma=scenario.gamma, solver=solver)

    def _score(x_eval, beta_hat) -> float:
        return rmse(y_fit, x_eval, beta_hat, include_intercept=est_int)

    method_seconds: dict[str, float] = {}
    t_start = time.perf_counter()

    full_row = build_error_support(y_fit, scenario.error_points)
    t0 = time.perf_counter()
    full_fit = _fit_plain(y_fit, design, support_row, full_row, solver)
    method_seconds["gce_dataset"] = time.perf_counter() - t0
    full_result = MethodResult(
        "gce_dataset",
        _score(ds.x, full_fit.beta_hat),
        None,
        full_fit.diagnostics.converged,
        method_seconds["gce_dataset"] * 1e3,
    )

    x_std = None
    if scenario.run_std:
        x_std, _, _ = standardize_columns(ds.x)

    reports = []
    for fraction in scenario.batch_fractions:
        m = int(round(fraction * ds.n))
        batch_row = (
            full_row
            if scenario.error_scale == "full"
            else build_error_support(y_fit[:m], scenario.error_points)
        )
        stream_error_kwargs = (
            {"error_scale": "cumulative", "error_points": scenario.error_points}
            if scenario.error_scale == "cumulative"
            else {"error_support": batch_row}
        )
        results = [full_result]

        t0 = time.perf_counter()
        batch_fit = _fit_plain(y_fit[:m], design[:m], support_row, batch_row, solver)
        dt = time.perf_counter() - t0
        method_seconds[f"gce_batch@{fraction}"] = dt
        results.append(
            MethodResult(
                "gce_batch",
                _score(ds.x, batch_fit.beta_hat),
                None,
                batch_fit.diagnostics.converged,
                dt * 1e3,
            )
        )

        for g in sorted(set(scenario.block_sizes) | {1}):
            t0 = time.perf_counter()
            stream = run_stream(
                y_fit,
                design,
                batch_size=m,
                block_size=g,
                settings=update_settings,
                beta_support=support_row,
                **stream_error_kwargs,
            )
            dt = time.perf_counter() - t0
            name = "stre_gce" if g == 1 else "stre_gce_block"
            method_seconds[f"{name}@{fraction}@g{g}"] = dt
            results.append(
                MethodResult(
                    name,
                    _score(ds.x, stream.beta_hat),
                    g,
                    stream.all_converged and not stream.skipped,
                    dt * 1e3,
                )
            )

        if scenario.run_std:
            design_std = np.column_stack([np.ones(ds.n), x_std])
            t0 = time.perf_counter()
            stream_std = run_stream(
                y_fit,
                design_std,
                batch_size=m,
                block_size=1,
                settings=update_settings,
                beta_support=support_row,
                **stream_error_kwargs,
            )
            dt = time.perf_counter() - t0
            method_seconds[f"stre_gce_std@{fraction}"] = dt
            results.append(
                MethodResult(
                    "stre_gce_std",
                    _score(x_std, stream_std.beta_hat),
                    1,
                    stream_std.all_converged and not stream_std.skipped,
                    dt * 1e3,
                )
            )

        reports.append(
            RunReport(
                n=ds.n,
                batch_fraction=float(fraction),
                eta=float(eta),
                seed=seed,
                results=tuple(results),
            )
        )

    return CellOutcome(
        reports=tuple(reports),
        method_seconds=method_seconds,
        estimation_seconds=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# Whole experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentOutcome:
    reports: tuple[RunReport, ...]
    failures: tuple[str, ...]
    written: tuple[str, ...]
    exit_code: int


def _cell_task(args):
    scenario, eta, seed, solver = args
    return run_cell(scenario, eta, seed, solver)


def _figure_rows(reports) -> tuple[list[dict], list[dict], list[dict]]:
    summaries = summary_rows(reports)
    rmse_vs_n = sorted(
        (
            {k: row[k] for k in ("method", "eta", "batch_fraction", "g", "n", "rmse_mean")}
            for row in summaries
        ),
        key=lambda r: (r["method"], r["eta"], r["batch_fraction"], r["g"] or -1, r["n"]),
    )
    rmse_vs_eta = sorted(
        (
            {k: row[k] for k in ("n", "method", "batch_fraction", "g", "eta", "rmse_mean")}
            for row in summaries
        ),
        key=lambda r: (r["n"], r["method"], r["batch_fraction"], r["g"] or -1, r["eta"]),
    )

    gaps: dict[tuple, list[float]] = {}
    for report in reports:
        try:
            reference = report.rmse_of("gce_dataset")
        except KeyError:
            continue
        for result in report.results:
            if result.method in _STREAMING_METHODS:
                key = (report.n, report.eta, result.method, result.g, report.batch_fraction)
                gaps.setdefault(key, []).append(relative_gap(result.rmse, reference))
    gap_rows = [
        {
            "n": n,
            "eta": eta,
            "method": method,
            "g": g,
            "batch_fraction": fraction,
            "relative_gap_mean": sum(values) / len(values),
            "replications": len(values),
        }
        for (n, eta, method, g, fraction), values in sorted(
            gaps.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3] or -1, kv[0][4])
        )
    ]
    return rmse_vs_n, rmse_vs_eta, gap_rows


def _write_rows_csv(path, columns, rows) -> None:
    def cell(value):
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    lines = [",".join(columns)]
    lines.extend(",".join(cell(row[c]) for c in columns) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_experiment(
    config: ExperimentConfig, out_dir=None, jobs: int | None = None
) -> ExperimentOutcome:
    """Execute all cells, write the report and figure files, and summarize.

    Failed cells are recorded and skipped rather than aborting the rest; any
    failure yields exit code 2 with whatever partial results completed.
    """
    out = Path(out_dir if out_dir is not None else (config.out_dir or "out"))
    out.mkdir(parents=True, exist_ok=True)
    workers = jobs if jobs is not None else config.jobs

    tasks = []
    for scenario in config.scenarios:
        for ei, eta in enumerate(scenario.eta_grid):
            for rep in range(config.replications):
                seed = _derive_seed(config.seed_base, scenario.name, ei, rep)
                label = f"{scenario.name}[eta={eta}, rep={rep}, seed={seed}]"
                tasks.append((label, (scenario, eta, seed, config.solver)))

    outcomes: list[CellOutcome] = []
    failures: list[str] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(label, pool.submit(_cell_task, args)) for label, args in tasks]
            for label, future in futures:
                try:
                    outcomes.append(future.result())
                except Exception as exc:
                    failures.append(f"{label}: {exc}")
    else:
        for label, args in tasks:
            try:
                outcomes.append(_cell_task(args))
            except Exception as exc:
                failures.append(f"{label}: {exc}")

    reports = tuple(r for outcome in outcomes for r in outcome.reports)
    written = []
    if reports:
        write_report_csv(reports, out / "report.csv", config.include_timings)
        write_report_json(reports, out / "report.json", config.include_timings)
        write_summary_csv(reports, out / "summary.csv")
        write_summary_json(reports, out / "summary.json")
        rmse_vs_n, rmse_vs_eta, gap_rows = _figure_rows(reports)
        _write_rows_csv(
            out / "fig_rmse_vs_n.csv",
            ("method", "eta", "batch_fraction", "g", "n", "rmse_mean"),
            rmse_vs_n,
        )
        _write_rows_csv(
            out / "fig_rmse_vs_eta.csv",
            ("n", "method", "batch_fraction", "g", "eta", "rmse_mean"),
            rmse_vs_eta,
        )
        _write_rows_csv(
            out / "fig_gap_vs_batch.csv",
            ("n", "eta", "method", "g", "batch_fraction", "relative_gap_mean", "replications"),
            gap_rows,
        )
        written = [str(out / name) for name in REPORT_FILES]

    return ExperimentOutcome(
        reports=reports,
        failures=tuple(failures),
        written=tuple(written),
        exit_code=2 if failures else 0,
    )


# ---------------------------------------------------------------------------
# Single-file solving
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolveOutcome:
    """Result of fitting one CSV dataset with one method."""

    mode: str
    beta_hat: np.ndarray  # intercept estimate first, slopes after
    rmse: float
    entropy_ledger: np.ndarray
    converged: bool
    skipped: tuple[int, ...]
    n: int
    batch_size: int
    block_size: int


def _file_error_row(values, n_points: int) -> np.ndarray:
    """Three-sigma support row, with a fixed-width fallback when the sample
    cannot yield a spread (fewer than two values, or all values equal)."""
    values = np.asarray(values, dtype=float)
    if values.size >= 2 and np.ptp(values) > 0.0:
        return build_error_support(values, n_points)
    half = 3.0 * max(1.0, float(np.max(np.abs(values))))
    return np.linspace(-half, half, n_points)


def solve_file(
    path,
    mode: str = "gce",
    *,
    batch_fraction: float = 0.25,
    block_size: int = 1,
    standardize: bool = False,
    gamma: float = 0.5,
    beta_support=DEFAULT_BETA_SUPPORT,
    error_points: int = 3,
    error_scale: str = "batch",
    solver: SolverSettings | None = None,
) -> SolveOutcome:
    """Fit a ``y, x1..xJ`` CSV file with the chosen method.

    ``mode`` is one of ``gce`` (one solve over the whole file), ``stre``
    (batch then one-by-one updates), or ``block`` (batch then blocks of
    ``block_size``). An intercept is always estimated as a leading constant
    column. ``standardize`` fits on standardized regressors; reported rmse
    stays in response units either way. Files too small or too flat for the
    three-sigma rule get a fixed-width error support instead (documented in
    ``_file_error_row``), so one-row files remain solvable.
    """
    solver = solver if solver is not None else SolverSettings()
    y, x = load_dataset_csv(path)
    if standardize:
        x, _, _ = standardize_columns(x)
    design = np.column_stack([np.ones(y.size), x])
    support_row = np.asarray(beta_support, dtype=float)

    if mode == "gce":
        error_row = _file_error_row(y, error_points)
        fit = _fit_plain(y, design, support_row, error_row, solver)
        return SolveOutcome(
            mode=mode,
            beta_hat=fit.beta_hat,
            rmse=rmse(y, x, fit.beta_hat, include_intercept=True),
            entropy_ledger=np.array([]),
            converged=fit.diagnostics.converged,
            skipped=(),
            n=int(y.size),
            batch_size=int(y.size),
            block_size=int(y.size),
        )
    if mode not in ("stre", "block"):
        raise ValueError(f"mode must be one of 'gce', 'stre', 'block', got {mode!r}")

    if not 0.0 < batch_fraction <= 1.0:
        raise ValueError(f"batch_fraction must lie in (0, 1], got {batch_fraction!r}")
    if error_scale not in ("batch", "cumulative", "full"):
        raise ValueError(
            f"error_scale must be 'batch', 'cumulative', or 'full', got {error_scale!r}"
        )
    m = min(int(y.size), max(1, int(round(batch_fraction * y.size))))
    g = 1 if mode == "stre" else int(block_size)

    batch_values = y if error_scale == "full" else y[:m]
    if error_scale == "cumulative" and m >= 2 and np.ptp(y[:m]) > 0.0:
        error_kwargs = {"error_scale": "cumulative", "error_points": error_points}
    else:
        error_kwargs = {"error_support": _file_error_row(batch_values, error_points)}
    stream = run_stream(
        y,
        design,
        batch_size=m,
        block_size=g,
        settings=UpdateSettings(gamma=gamma, solver=solver),
        beta_support=support_row,
        **error_kwargs,
    )
    return SolveOutcome(
        mode=mode,
        beta_hat=stream.beta_hat,
        rmse=rmse(y, x, stream.beta_hat, include_intercept=True),
        entropy_ledger=stream.entropy_ledger,
        converged=stream.all_converged,
        skipped=stream.skipped,
        n=int(y.size),
        batch_size=m,
        block_size=g,
    )
