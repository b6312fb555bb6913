"""Command-line interface: simulate, patch, complete, run, scree."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .complete import CompletionError, SolveConfig, estimate_covariance, rank_sweep
from .core import Grid, SymMatrix
from .harness import ExperimentConfig, ingest_fragments
from .kernels import evaluate_on_grid, kernel_from_id
from .patch import PatchedCovariance, effective_mask, patched_binned
from .simulate import (
    STAGE_GRID,
    STAGE_INTERVALS,
    STAGE_NOISE,
    STAGE_PATHS,
    FragmentLaw,
    add_noise,
    fragment,
    fragment_irregular,
    sample_gp,
    stage_rng,
    write_fragments,
)


def _write_matrix(path, matrix: np.ndarray) -> None:
    lines = [",".join(repr(float(v)) for v in row) for row in np.asarray(matrix)]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_matrix(path) -> np.ndarray:
    rows = [
        [float(v) for v in line.split(",")]
        for line in Path(path).read_text().strip().splitlines()
    ]
    return np.array(rows)


def _cmd_simulate(args) -> int:
    law = FragmentLaw(args.delta[0], args.delta[-1])
    kernel = kernel_from_id(args.kernel)
    if args.grid_type == "common":
        grid = Grid.perturbed(args.k, stage_rng(args.seed, STAGE_GRID))
        paths = sample_gp(evaluate_on_grid(kernel, grid), args.n, stage_rng(args.seed, STAGE_PATHS))
        sample = fragment(paths, grid, law, stage_rng(args.seed, STAGE_INTERVALS))
    else:
        sample = fragment_irregular(
            kernel, args.n, law, args.grid_type, base_resolution=args.k, seed=args.seed
        )
    if args.noise_sd > 0:
        sample = add_noise(sample, args.noise_sd, stage_rng(args.seed, STAGE_NOISE))
    write_fragments(sample, args.out)
    print(f"wrote {sample.n} curves to {args.out}")
    return 0


def _cmd_patch(args) -> int:
    sample = ingest_fragments(args.input)
    patched = patched_binned(sample, args.k)
    _write_matrix(args.out, patched.values)
    _write_matrix(args.counts_out, patched.counts)
    meta = {
        "K": patched.K,
        "delta_effective": patched.delta_effective,
        "noise_flag": patched.noise_flag,
    }
    Path(args.out).with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")
    print(f"patched {patched.K}x{patched.K} matrix -> {args.out}")
    return 0


def _load_patched(args) -> PatchedCovariance:
    values = _read_matrix(args.input)
    counts = _read_matrix(args.counts).astype(int) if args.counts else None
    meta_path = Path(args.input).with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return PatchedCovariance(
        matrix=SymMatrix(values, counts),
        delta_effective=args.delta_prime or meta.get("delta_effective"),
        noise_flag=bool(meta.get("noise_flag", False)),
    )


def _cmd_complete(args) -> int:
    patched = _load_patched(args)
    cfg = SolveConfig(
        max_rank_sweep=args.max_rank,
        rank_policy="elbow" if args.rank == "auto" else f"fixed:{int(args.rank)}",
        elbow_threshold=args.elbow_eps,
        tau=args.tau,
        seed=args.seed,
    )
    if args.rank == "auto" and args.tau is not None:
        cfg = SolveConfig(
            max_rank_sweep=args.max_rank,
            rank_policy=f"penalty:{args.tau}",
            tau=args.tau,
            seed=args.seed,
        )
    estimate = estimate_covariance(patched, cfg)
    _write_matrix(args.out, estimate.matrix.values)
    if args.scree_out:
        sweep = estimate.sweep
        if sweep is None:
            mask = effective_mask(patched, args.delta_prime)
            sweep = rank_sweep(patched, mask, cfg)
        lines = ["rank,fit,normalized_fit"]
        for i in range(sweep.max_rank):
            lines.append(f"{i + 1},{sweep.fits[i]!r},{sweep.normalized_fits[i]!r}")
        Path(args.scree_out).write_text("\n".join(lines) + "\n")
    print(f"completed at rank {estimate.rank} (fit {estimate.fit:.3e}) -> {args.out}")
    return 0


def _cmd_scree(args) -> int:
    patched = _load_patched(args)
    rows = harness.scree_report(
        patched, SolveConfig(max_rank_sweep=args.max_rank, seed=args.seed), args.delta_prime
    )
    lines = ["rank,fit,normalized_fit"]
    for rank, fit, norm in rows:
        lines.append(f"{rank},{fit!r},{norm!r}")
    out = Path(args.out) if args.out else None
    if out:
        out.write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def _cmd_run(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.reps is not None:
            cfg = replace(cfg, replications=args.reps)
        results = [harness.run_cell(cfg)]
    else:
        cells = [int(c) for c in args.cells.split(",")] if args.cells else None
        results = harness.run_table(
            args.table,
            seed=args.seed if args.seed is not None else 0,
            replications=args.reps if args.reps is not None else 100,
            cells=cells,
        )
    print(harness.format_table(results), end="")
    if args.out:
        Path(args.out).write_text(harness.results_to_csv(results))
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragcov", description="Covariance recovery from functional fragments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a fragment sample and write it as CSV")
    p.add_argument("--kernel", required=True, help="kernel id, e.g. scenarioA:2 or matern:1.5,0.5,1.0")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--k", type=int, default=50, help="grid resolution (base resolution for type2)")
    p.add_argument("--delta", type=lambda s: [float(v) for v in s.split(",")], default=[0.5])
    p.add_argument("--grid-type", choices=("common", "type1", "type2"), default="common")
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("patch", help="build the binned patched covariance from a fragment CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--counts-out", required=True)
    p.set_defaults(func=_cmd_patch)

    p = sub.add_parser("complete", help="complete a patched covariance matrix")
    p.add_argument("--input", required=True, help="patched matrix CSV")
    p.add_argument("--counts", default=None, help="counts CSV")
    p.add_argument("--delta-prime", type=float, default=None)
    p.add_argument("--rank", default="auto", help="'auto' or an explicit rank")
    p.add_argument("--elbow-eps", type=float, default=0.01)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--scree-out", default=None)
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("scree", help="emit the rank-sweep fits for a patched matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--counts", default=None)
    p.add_argument("--delta-prime", type=float, default=None)
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_scree)

    p = sub.add_parser("run", help="run a benchmark table or a JSON experiment config")
    p.add_argument("--table", choices=harness.TABLE_IDS, default=None)
    p.add_argument("--config", default=None, help="JSON file mirroring ExperimentConfig")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--cells", default=None, help="comma-separated cell indices to run")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run" and not (args.table or args.config):
        print("error: run needs --table or --config", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CompletionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
