"""Gaussian-process sampling, censoring into fragments, and observation regimes.

Three regimes are produced: a common (shared, possibly perturbed) grid with
each curve keeping the grid points inside its interval; type-1 mildly
irregular grids, where every curve observes a subset of one shared grid;
and type-2 highly irregular grids, where observation times are drawn
uniformly inside each fragment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Grid, SeedLike, as_generator, matrix_values
from .kernels import Kernel, evaluate_on_grid

__all__ = [
    "FragmentLaw",
    "FragmentSample",
    "sample_gp",
    "fragment",
    "fragment_irregular",
    "add_noise",
    "write_fragments",
]

# Fixed spawn order of per-replication child streams, so that toggling one
# stage (e.g. noise) cannot perturb the draws of the others.
STAGE_PATHS, STAGE_INTERVALS, STAGE_GRID, STAGE_TIMES, STAGE_NOISE, STAGE_SOLVER = range(6)


def stage_rng(seed: SeedLike, stage: int) -> np.random.Generator:
    """Independent generator for one pipeline stage of one replication.

    Children are derived by spawn key, not by stateful spawning, so the
    stream of one stage never depends on which other stages were used.
    """
    if isinstance(seed, np.random.Generator):
        raise TypeError("stage_rng needs an int or SeedSequence, not a Generator")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    child = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (stage,))
    return np.random.default_rng(child)


@dataclass(frozen=True)
class FragmentLaw:
    """Law of the censoring intervals.

    Lengths are uniform in [delta_min, delta_max]. Placement of an interval
    of length d:

    - "clipped_center" (default): the center is uniform on [0, 1] and the
      interval is shifted back inside the domain, so a d/2-fraction of the
      fragments hug each boundary; every domain point is covered with
      probability bounded away from zero.
    - "uniform": the start is uniform on [0, 1 - d]; coverage decays to
      zero toward the boundary.
    """

    delta_min: float
    delta_max: float
    placement: str = "clipped_center"

    def __post_init__(self):
        if not 0.0 < self.delta_min <= self.delta_max < 1.0:
            raise ValueError("need 0 < delta_min <= delta_max < 1")
        if self.placement not in ("clipped_center", "uniform"):
            raise ValueError("placement must be 'clipped_center' or 'uniform'")

    @classmethod
    def fixed(cls, delta: float, placement: str = "clipped_center") -> "FragmentLaw":
        return cls(delta, delta, placement)

    @property
    def is_fixed(self) -> bool:
        return self.delta_min == self.delta_max

    def draw_lengths(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.delta_min, self.delta_max, size=n)

    def place(self, deltas, rng: np.random.Generator) -> np.ndarray:
        """Starts for intervals of the given lengths."""
        deltas = np.asarray(deltas, dtype=float)
        if self.placement == "uniform":
            return rng.uniform(0.0, 1.0 - deltas)
        centers = rng.uniform(0.0, 1.0, size=deltas.shape)
        return np.clip(centers - deltas / 2.0, 0.0, 1.0 - deltas)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """(n, 2) array of (start, length) rows."""
        deltas = self.draw_lengths(n, rng)
        starts = self.place(deltas, rng)
        return np.column_stack([starts, deltas])


@dataclass(frozen=True)
class FragmentSample:
    """Discretely observed fragments of n curves.

    times[i] holds the sorted observation times of curve i, all inside the
    interval [intervals[i, 0], intervals[i, 0] + intervals[i, 1]].
    """

    times: tuple
    values: tuple
    intervals: np.ndarray
    grid_type: str = "common"
    noise_sd: float = 0.0
    grid: Grid | None = None
    grid_indices: tuple | None = None
    curve_ids: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(np.asarray(t, dtype=float) for t in self.times))
        object.__setattr__(self, "values", tuple(np.asarray(v, dtype=float) for v in self.values))
        iv = np.asarray(self.intervals, dtype=float)
        object.__setattr__(self, "intervals", iv)
        if not self.curve_ids:
            object.__setattr__(self, "curve_ids", tuple(range(len(self.times))))
        if len(self.times) != len(self.values) or len(self.times) != iv.shape[0]:
            raise ValueError("times, values and intervals must align")
        for t, v, (s, d) in zip(self.times, self.values, iv):
            if t.shape != v.shape:
                raise ValueError("per-curve times and values must align")
            if t.size and (t.min() < s - 1e-12 or t.max() > s + d + 1e-12):
                raise ValueError("observation outside its declared interval")

    @property
    def n(self) -> int:
        return len(self.times)


def sample_gp(truth, n: int, seed: SeedLike = None) -> np.ndarray:
    """Draw n centered Gaussian vectors with the given covariance matrix.

    Uses a symmetric eigendecomposition square root; eigenvalues in
    [-1e-6 * max, 0) are clipped to zero, anything lower is rejected.
    """
    cov = matrix_values(truth)
    vals, vecs = np.linalg.eigh(cov)
    top = max(vals.max(), 0.0)
    if vals.min() < -1e-6 * top:
        raise ValueError("covariance is not PSD")
    vals = np.clip(vals, 0.0, None)
    root = vecs * np.sqrt(vals)
    rng = as_generator(seed)
    z = rng.standard_normal((n, cov.shape[0]))
    return z @ root.T


def fragment(values: np.ndarray, grid: Grid, law: FragmentLaw, seed: SeedLike = None) -> FragmentSample:
    """Censor fully observed curves on a common grid into fragments.

    Each curve keeps exactly the grid points falling inside its interval.
    """
    values = np.asarray(values, dtype=float)
    n, K = values.shape
    if K != grid.resolution:
        raise ValueError("value columns must match the grid resolution")
    rng = as_generator(seed)
    intervals = law.draw(n, rng)
    times, vals, indices = [], [], []
    for i in range(n):
        s, d = intervals[i]
        idx = np.nonzero((grid.points >= s) & (grid.points <= s + d))[0]
        times.append(grid.points[idx])
        vals.append(values[i, idx])
        indices.append(idx)
    return FragmentSample(
        times=tuple(times),
        values=tuple(vals),
        intervals=intervals,
        grid_type="common",
        grid=grid,
        grid_indices=tuple(indices),
    )


def _sample_curve_values(kernel: Kernel, pts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cov = evaluate_on_grid(kernel, pts).values
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return root @ rng.standard_normal(pts.size)


def fragment_irregular(
    kernel: Kernel,
    n: int,
    law: FragmentLaw,
    grid_type: str,
    base_resolution: int = 50,
    seed: SeedLike = None,
) -> FragmentSample:
    """Simulate fragments observed on irregular grids.

    type1: every curve observes Q_i = ceil(K * delta_i) points of one shared
    perturbed K-grid, all inside its interval (interval starts are redrawn
    until the interval holds at least Q_i grid points, then a uniform subset
    of size Q_i is kept). type2: Q_i = ceil(base_resolution * delta_i) times
    drawn i.i.d. uniform inside the interval.
    """
    if grid_type not in ("type1", "type2"):
        raise ValueError("grid_type must be 'type1' or 'type2'")
    if isinstance(seed, np.random.Generator):
        raise TypeError("fragment_irregular needs an int or SeedSequence seed")
    rng_paths = stage_rng(seed, STAGE_PATHS)
    rng_intervals = stage_rng(seed, STAGE_INTERVALS)
    rng_grid = stage_rng(seed, STAGE_GRID)
    rng_times = stage_rng(seed, STAGE_TIMES)

    K = base_resolution
    deltas = law.draw_lengths(n, rng_intervals)
    quotas = np.ceil(K * deltas).astype(int)
    if np.any(quotas < 2):
        raise ValueError("fragment too sparse: fewer than 2 observation points")

    times, vals, intervals = [], [], np.empty((n, 2))

    if grid_type == "type1":
        shared = Grid.perturbed(K, rng_grid)
        paths = sample_gp(evaluate_on_grid(kernel, shared), n, rng_paths)
        indices = []
        for i in range(n):
            d, q = deltas[i], quotas[i]
            for _ in range(1000):
                s = float(law.place(d, rng_intervals))
                idx = np.nonzero((shared.points >= s) & (shared.points <= s + d))[0]
                if idx.size >= q:
                    break
            else:
                raise RuntimeError("could not place an interval holding enough grid points")
            keep = np.sort(rng_times.choice(idx, size=q, replace=False))
            times.append(shared.points[keep])
            vals.append(paths[i, keep])
            indices.append(keep)
            intervals[i] = (s, d)
        return FragmentSample(
            times=tuple(times),
            values=tuple(vals),
            intervals=intervals,
            grid_type="type1",
            grid=shared,
            grid_indices=tuple(indices),
        )

    starts = law.place(deltas, rng_intervals)
    for i in range(n):
        s, d, q = starts[i], deltas[i], quotas[i]
        t = np.sort(rng_times.uniform(s, s + d, size=q))
        times.append(t)
        vals.append(_sample_curve_values(kernel, t, rng_paths))
        intervals[i] = (s, d)
    return FragmentSample(
        times=tuple(times),
        values=tuple(vals),
        intervals=intervals,
        grid_type="type2",
    )


def add_noise(sample: FragmentSample, noise_sd: float, seed: SeedLike = None) -> FragmentSample:
    """Add i.i.d. centered Gaussian measurement error to every observation."""
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    if noise_sd == 0:
        return sample
    rng = as_generator(seed)
    noisy = tuple(v + rng.normal(0.0, noise_sd, size=v.size) for v in sample.values)
    return replace(sample, values=noisy, noise_sd=float(noise_sd))


def write_fragments(sample: FragmentSample, path) -> None:
    """Write a sample as CSV rows curve_id,t,value plus a JSON sidecar."""
    path = Path(path)
    lines = ["curve_id,t,value"]
    for cid, t, v in zip(sample.curve_ids, sample.times, sample.values):
        for tj, vj in zip(t, v):
            lines.append(f"{cid},{float(tj)!r},{float(vj)!r}")
    path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "n": sample.n,
        "grid_type": sample.grid_type,
        "noise_sd": sample.noise_sd,
        "intervals": [{"start": float(s), "delta": float(d)} for s, d in sample.intervals],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1) + "\n")
