"""Experiment orchestration: replicated scenario sweeps, result tables,
fragment-file ingestion and scree reports.

Replications are deterministic given the master seed: each replication
derives independent child streams per pipeline stage, so parallel
scheduling cannot change any result.
"""

from __future__ import annotations

import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Grid, band_mask, relative_error
from .kernels import kernel_from_id, evaluate_on_grid
from .simulate import (
    STAGE_GRID,
    STAGE_INTERVALS,
    STAGE_NOISE,
    STAGE_PATHS,
    STAGE_SOLVER,
    FragmentLaw,
    FragmentSample,
    add_noise,
    fragment,
    fragment_irregular,
    sample_gp,
    stage_rng,
)
from .patch import effective_mask, patched_binned, patched_regular
from .complete import SolveConfig, estimate_covariance

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "run_cell",
    "run_table",
    "table_cells",
    "ingest_fragments",
    "scree_report",
    "empirical_relative_error",
    "five_number_summary",
    "results_to_csv",
    "format_table",
    "TABLE_IDS",
]

TABLE_IDS = ("T2", "T4", "T5", "T6", "T7")


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation cell: kernel, sampling regime and solver policy."""

    kernel: str
    n: int = 200
    K: int | None = 50
    base_resolution: int = 50
    delta: tuple = (0.5, 0.5)
    grid_type: str = "common"
    noise_sd: float = 0.0
    delta_prime: float | None = None
    rank_policy: str = "elbow"
    replications: int = 100
    seed: int = 0
    midpoint_grid: bool = False
    placement: str = "clipped_center"
    # Table protocol: a dense quasi-Newton with a conventional iteration
    # budget; the library-level SolveConfig default runs much deeper.
    solve: SolveConfig = field(
        default_factory=lambda: SolveConfig(method="bfgs", max_iter=100, grad_tol=1e-8)
    )

    def law(self) -> FragmentLaw:
        return FragmentLaw(float(self.delta[0]), float(self.delta[1]), self.placement)

    def resolved_delta_prime(self) -> float:
        if self.delta_prime is not None:
            return self.delta_prime
        lo, hi = float(self.delta[0]), float(self.delta[1])
        return lo - 0.1 if lo == hi else lo

    def to_json(self) -> str:
        payload = asdict(self)
        payload["delta"] = list(self.delta)
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        payload = json.loads(text)
        if "delta" in payload:
            payload["delta"] = tuple(payload["delta"])
        solve = payload.pop("solve", None)
        cfg = cls(**payload)
        if solve:
            cfg = replace(cfg, solve=SolveConfig(**solve))
        return cfg


@dataclass(frozen=True)
class ExperimentResult:
    """Per-replication relative errors (percent) and their quartile summary."""

    errors: np.ndarray
    failures: tuple
    median: float
    q1: float
    q3: float
    config: ExperimentConfig
    realized_K: int
    wall_time: float


def _mid_median(sorted_vals: np.ndarray) -> float:
    m = len(sorted_vals)
    if m == 0:
        return float("nan")
    if m % 2:
        return float(sorted_vals[m // 2])
    return 0.5 * float(sorted_vals[m // 2 - 1] + sorted_vals[m // 2])


def five_number_summary(values) -> tuple[float, float, float]:
    """(median, q1, q3) by the midpoint rule on the sorted values and on the
    lower/upper halves (middle element excluded when the count is odd)."""
    v = np.sort(np.asarray(values, dtype=float))
    med = _mid_median(v)
    h = len(v) // 2
    if h == 0:
        return med, med, med
    return med, _mid_median(v[:h]), _mid_median(v[len(v) - h :])


def _replicate(config: ExperimentConfig, rep: int) -> tuple[float, int]:
    """One replication: simulate, patch, complete, score. Returns (re, K)."""
    kernel = kernel_from_id(config.kernel)
    rep_seed = np.random.SeedSequence(config.seed, spawn_key=(rep,))
    law = config.law()
    solve_rng = stage_rng(rep_seed, STAGE_SOLVER)
    solve_cfg = config.solve

    if config.grid_type == "common":
        K = config.K or 50
        grid = Grid.regular(K) if config.midpoint_grid else Grid.perturbed(K, stage_rng(rep_seed, STAGE_GRID))
        truth = evaluate_on_grid(kernel, grid)
        paths = sample_gp(truth, config.n, stage_rng(rep_seed, STAGE_PATHS))
        sample = fragment(paths, grid, law, stage_rng(rep_seed, STAGE_INTERVALS))
        if config.noise_sd > 0:
            sample = add_noise(sample, config.noise_sd, stage_rng(rep_seed, STAGE_NOISE))
        patched = patched_regular(sample)
    elif config.grid_type in ("type1", "type2"):
        sample = fragment_irregular(
            kernel, config.n, law, config.grid_type, base_resolution=config.base_resolution, seed=rep_seed
        )
        if config.noise_sd > 0:
            sample = add_noise(sample, config.noise_sd, stage_rng(rep_seed, STAGE_NOISE))
        if config.grid_type == "type1":
            K = config.K or config.base_resolution
            truth = evaluate_on_grid(kernel, sample.grid)
        else:
            if config.K is not None:
                K = config.K
            else:
                quotas = np.array([t.size for t in sample.times])
                K = max(2, int(round(4.0 * quotas.sum() / (5.0 * config.n))))
            truth = evaluate_on_grid(kernel, (np.arange(K) + 0.5) / K)
        patched = patched_binned(sample, K)
    else:
        raise ValueError(f"unknown grid type {config.grid_type!r}")

    # The solver mask is the delta' band itself, not intersected with the
    # data support: corner pairs can be unobserved under random grids and
    # uniform starts, and the zero-filled target handles them.
    mask = band_mask(K, config.resolved_delta_prime(), exclude_diagonal=patched.noise_flag)
    estimate = estimate_covariance(patched, replace(solve_cfg, rank_policy=config.rank_policy), mask=mask, rng=solve_rng)
    return relative_error(estimate.matrix, truth), K


def _replicate_worker(args):
    config, rep = args
    try:
        err, K = _replicate(config, rep)
        return rep, err, K, None
    except Exception as exc:  # noqa: BLE001 - failures are per-replication data
        return rep, None, 0, f"{type(exc).__name__}: {exc}"


def _worker_count() -> int:
    env = os.environ.get("FRAGCOV_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_cell(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run all replications of one cell and summarize the relative errors.

    Failed replications are recorded and excluded from the quartiles.
    """
    t0 = time.perf_counter()
    tasks = [(config, rep) for rep in range(config.replications)]
    workers = _worker_count() if workers is None else max(1, workers)
    if workers == 1 or len(tasks) == 1:
        outcomes = [_replicate_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            outcomes = list(pool.map(_replicate_worker, tasks, chunksize=1))
    outcomes.sort(key=lambda o: o[0])
    errors = np.array([o[1] for o in outcomes if o[1] is not None])
    failures = tuple((o[0], o[3]) for o in outcomes if o[3] is not None)
    ks = [o[2] for o in outcomes if o[1] is not None]
    med, q1, q3 = five_number_summary(errors) if errors.size else (float("nan"),) * 3
    return ExperimentResult(
        errors=errors,
        failures=failures,
        median=med,
        q1=q1,
        q3=q3,
        config=config,
        realized_K=int(np.median(ks)) if ks else 0,
        wall_time=time.perf_counter() - t0,
    )


def _fixed(q: int) -> str:
    return f"fixed:{q}"


def table_cells(table: str, seed: int = 0, replications: int = 100) -> list[ExperimentConfig]:
    """Enumerate the cell grid of a built-in benchmark table (stable order)."""
    table = table.upper()
    deltas5 = (0.5, 0.6, 0.7, 0.8, 0.9)
    pairs4 = ((0.4, 0.6), (0.5, 0.7), (0.6, 0.8), (0.7, 0.9))
    cells: list[ExperimentConfig] = []
    if table == "T2":
        for scenario in ("A", "B"):
            for q in (1, 2, 3):
                for d in deltas5:
                    cells.append(
                        ExperimentConfig(
                            kernel=f"scenario{scenario}:{q}",
                            delta=(d, d),
                            rank_policy=_fixed(q),
                            replications=replications,
                            seed=seed,
                        )
                    )
    elif table == "T4":
        for base in ("matern", "matern+A2"):
            for nu in (1.5, 2.5):
                for rho in (0.5, 0.8):
                    for d in deltas5:
                        kid = f"{base}:{nu},{rho}" if base == "matern+A2" else f"matern:{nu},{rho},1.0"
                        cells.append(
                            ExperimentConfig(
                                kernel=kid,
                                delta=(d, d),
                                rank_policy=_fixed(2),
                                replications=replications,
                                seed=seed,
                            )
                        )
    elif table in ("T5", "T6"):
        grid_type = "type1" if table == "T5" else "type2"
        for noise in (0.0, 1.0):
            for n in (200, 400):
                for q in (1, 2, 3):
                    for d in pairs4:
                        cells.append(
                            ExperimentConfig(
                                kernel=f"scenarioA:{q}",
                                n=n,
                                K=50 if grid_type == "type1" else None,
                                delta=d,
                                grid_type=grid_type,
                                noise_sd=noise,
                                rank_policy=_fixed(q),
                                replications=replications,
                                seed=seed,
                            )
                        )
    elif table == "T7":
        for K in (25, 100):
            for q in (1, 2, 3):
                for d in deltas5:
                    cells.append(
                        ExperimentConfig(
                            kernel=f"scenarioA:{q}",
                            K=K,
                            delta=(d, d),
                            rank_policy=_fixed(q),
                            replications=replications,
                            seed=seed,
                        )
                    )
    else:
        raise ValueError(f"unknown table {table!r}; expected one of {TABLE_IDS}")
    return cells


def run_table(
    table: str,
    seed: int = 0,
    replications: int = 100,
    cells: list[int] | None = None,
    workers: int | None = None,
) -> list[ExperimentResult]:
    """Run one built-in table (optionally restricted to given cell indices)."""
    configs = table_cells(table, seed=seed, replications=replications)
    if cells is not None:
        configs = [configs[i] for i in cells]
    return [run_cell(cfg, workers=workers) for cfg in configs]


CSV_COLUMNS = "scenario,rank,delta1,delta2,n,K,grid_type,noise,median,q1,q3,failures,seed"


def results_to_csv(results: list[ExperimentResult]) -> str:
    lines = [CSV_COLUMNS]
    for r in results:
        c = r.config
        lines.append(
            ",".join(
                [
                    c.kernel,
                    c.rank_policy,
                    repr(float(c.delta[0])),
                    repr(float(c.delta[1])),
                    str(c.n),
                    str(c.K if c.K is not None else r.realized_K),
                    c.grid_type,
                    repr(float(c.noise_sd)),
                    repr(float(r.median)),
                    repr(float(r.q1)),
                    repr(float(r.q3)),
                    str(len(r.failures)),
                    str(c.seed),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def format_table(results: list[ExperimentResult]) -> str:
    """Aligned text table, one row per cell."""
    header = f"{'kernel':<18}{'rank':<10}{'delta':<14}{'n':<6}{'K':<5}{'grid':<8}{'noise':<7}{'median (q1, q3)':<22}{'fail'}"
    lines = [header, "-" * len(header)]
    for r in results:
        c = r.config
        d = f"({c.delta[0]:g}, {c.delta[1]:g})"
        cell = f"{r.median:.0f} ({r.q1:.0f}, {r.q3:.0f})"
        lines.append(
            f"{c.kernel:<18}{c.rank_policy:<10}{d:<14}{c.n:<6}{str(c.K or r.realized_K):<5}"
            f"{c.grid_type:<8}{c.noise_sd:<7g}{cell:<22}{len(r.failures)}"
        )
    return "\n".join(lines) + "\n"


def empirical_relative_error(estimate, reference) -> float:
    """Relative Frobenius error (percent) against an empirical reference.

    Same formula as relative_error, for workflows where the truth is unknown
    and the fully observed empirical covariance serves as the benchmark.
    """
    return relative_error(estimate, reference)


def ingest_fragments(path, sidecar=None) -> FragmentSample:
    """Read a fragment CSV (header curve_id,t,value) into a FragmentSample.

    Intervals come from the JSON sidecar when present (default: same path
    with .json suffix), else are inferred as [min t, max t] per curve.
    Curves with fewer than two points are dropped with a warning.
    """
    path = Path(path)
    by_curve: dict[str, list[tuple[float, float]]] = {}
    with path.open() as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "curve_id,t,value":
            raise ValueError(f"{path}: expected header 'curve_id,t,value', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}")
            cid, t_str, v_str = parts
            try:
                t, v = float(t_str), float(v_str)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from exc
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"{path}:{lineno}: t={t} outside [0, 1]")
            by_curve.setdefault(cid, []).append((t, v))

    meta = None
    sidecar_path = Path(sidecar) if sidecar else path.with_suffix(".json")
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text())

    ids, times, values = [], [], []
    for cid, rows in by_curve.items():
        if len(rows) < 2:
            warnings.warn(f"curve {cid!r} has fewer than 2 points; dropped")
            continue
        rows.sort(key=lambda r: r[0])
        ids.append(cid)
        times.append(np.array([r[0] for r in rows]))
        values.append(np.array([r[1] for r in rows]))

    if meta and len(meta.get("intervals", ())) == len(by_curve):
        kept = [i for i, cid in enumerate(by_curve) if cid in set(ids)]
        intervals = np.array(
            [[meta["intervals"][i]["start"], meta["intervals"][i]["delta"]] for i in kept]
        )
        grid_type = meta.get("grid_type", "type2")
        noise_sd = float(meta.get("noise_sd", 0.0))
    else:
        intervals = np.array([[t.min(), t.max() - t.min()] for t in times])
        grid_type = "type2"
        noise_sd = 0.0
    return FragmentSample(
        times=tuple(times),
        values=tuple(values),
        intervals=intervals,
        grid_type=grid_type,
        noise_sd=noise_sd,
        curve_ids=tuple(ids),
    )


def scree_report(patched, config: SolveConfig | None = None, delta_prime: float | None = None):
    """Rank-sweep fits behind a scree plot: rows of (rank, fit, normalized fit)."""
    from .complete import rank_sweep

    mask = effective_mask(patched, delta_prime)
    sweep = rank_sweep(patched, mask, config)
    return [
        (i + 1, float(sweep.fits[i]), float(sweep.normalized_fits[i]))
        for i in range(sweep.max_rank)
    ]
