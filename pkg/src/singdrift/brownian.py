"""Reproducible Brownian paths on (possibly graded) time grids.

Every Gaussian draw comes from a Philox counter-based stream whose key is
derived from ``(seed, stream_id, component, level)`` and consumed in grid
order.  Draws are therefore a pure function of their coordinates: paths
regenerate bit-identically regardless of evaluation order, chunking, or
worker scheduling.  Midpoint refinement draws bump the ``level`` key, so
refining never perturbs coarse-level values.

Gaussians are produced by inverse-CDF transform of the raw uniform
stream (one 53-bit uniform per draw), keeping stream consumption exactly
one word per node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, stream_id: int, component: int, level: int) -> np.ndarray:
    """Fold the four stream coordinates into a 128-bit Philox key."""
    z = seed & _MASK64
    for word in (stream_id, component, level):
        z = _splitmix64(z ^ (word & _MASK64))
    k0 = _splitmix64(z)
    k1 = _splitmix64(k0)
    return np.array([k0, k1], dtype=np.uint64)


def _uniforms(key: np.ndarray, count: int) -> np.ndarray:
    """Counter-ordered uniforms in (0, 1); draw i belongs to counter slot i."""
    raw = Philox(key=key).random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed: int, stream_id: int, component: int, level: int,
                     count: int) -> np.ndarray:
    """Deterministic N(0,1) draws for one stream, via inverse CDF."""
    if count == 0:
        return np.empty(0)
    return ndtri(_uniforms(derive_key(seed, stream_id, component, level), count))


class GridError(ValueError):
    """Raised for malformed time grids or off-grid time lookups."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing nodes on [0, t_end], first node exactly 0."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 2:
            raise GridError("grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise GridError(f"grid must start at 0, got {nodes[0]!r}")
        if not np.all(np.diff(nodes) > 0):
            raise GridError("grid nodes must be strictly increasing")
        nodes = nodes.copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def index_of(self, t: float) -> int:
        """Index of an exact grid node; off-grid times are rejected."""
        i = int(np.searchsorted(self.nodes, t))
        if i >= self.nodes.size or self.nodes[i] != t:
            raise GridError(f"time {t!r} is not a grid node")
        return i

    def nearest_index(self, t: float) -> int:
        i = int(np.searchsorted(self.nodes, t))
        if i == 0:
            return 0
        if i >= self.nodes.size:
            return self.nodes.size - 1
        return i if self.nodes[i] - t < t - self.nodes[i - 1] else i - 1

    def refined(self) -> "TimeGrid":
        """Insert the midpoint of every interval."""
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        out = np.empty(2 * self.nodes.size - 1)
        out[0::2] = self.nodes
        out[1::2] = mids
        return TimeGrid(out)


@lru_cache(maxsize=64)
def _graded_nodes(t_end: float, h: float, gamma: float, end_offset: float,
                  pole: float) -> tuple:
    """Nodes on [0, t_end], uniform step h but graded so that the step never
    exceeds gamma * (pole - t) when approaching the pole; the approach stops
    at exactly pole - end_offset, the node at the pole itself is inserted
    exactly, and the remainder (pole, t_end] is uniform again."""
    if not 0 < gamma <= 1:
        raise GridError("grading factor must be in (0, 1]")
    if h <= 0 or end_offset <= 0:
        raise GridError("step and end offset must be positive")
    nodes = [0.0]
    stop = pole - end_offset
    t = 0.0
    while True:
        step = min(h, gamma * (pole - t))
        if t + step >= stop - 1e-15 * pole:
            break
        t = t + step
        nodes.append(t)
    if nodes[-1] < stop:
        nodes.append(stop)
    nodes.append(pole)
    if t_end > pole:
        n_after = int(round((t_end - pole) / h))
        n_after = max(n_after, 1)
        tail = pole + h * np.arange(1, n_after + 1)
        tail[-1] = t_end
        nodes.extend(tail.tolist())
    return tuple(nodes)


def uniform_grid(t_end: float, h: float) -> TimeGrid:
    n = int(round(t_end / h))
    if n < 1:
        raise GridError("step larger than the interval")
    nodes = h * np.arange(n + 1)
    nodes[-1] = t_end
    return TimeGrid(nodes)


def bridge_grid(t_end: float, h: float, gamma: float, end_offset: float,
                pole: float = 1.0) -> TimeGrid:
    """Grid graded toward ``pole`` (bridge pull blow-up time)."""
    if pole > t_end:
        raise GridError("pole must lie inside the time domain")
    return TimeGrid(np.array(_graded_nodes(t_end, h, gamma, end_offset, pole)))


@dataclass(frozen=True)
class BrownianPath:
    """Grid-indexed multi-component Brownian trajectory.

    ``values`` has shape (dim, n_nodes), one row per component, and every
    component starts at 0.  ``lineage`` records whether the object came
    straight from :func:`generate` or was derived (refined / restricted),
    since only generated paths carry the regeneration guarantee.
    """

    grid: TimeGrid
    values: np.ndarray
    seed: int
    stream_id: int
    level: int = 0
    lineage: str = "generated"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.grid.n_nodes:
            raise GridError("values shape does not match the grid")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def generate(dim: int, grid: TimeGrid, seed: int, stream_id: int = 0) -> BrownianPath:
    """Brownian path with independent N(0, dt) increments per interval.

    Increment i of component c is draw i of the stream keyed by
    (seed, stream_id, c, level=0); values are the ascending cumulative sum.
    """
    if dim < 1:
        raise GridError("dimension must be >= 1")
    sqrt_dt = np.sqrt(grid.steps)
    values = np.zeros((dim, grid.n_nodes))
    for c in range(dim):
        z = standard_normals(seed, stream_id, c, 0, grid.n_nodes - 1)
        np.cumsum(z * sqrt_dt, out=values[c, 1:])
    return BrownianPath(grid, values, seed, stream_id)


def generate_values_batch(dim: int, grid: TimeGrid, seeds: np.ndarray,
                          stream_id: int = 0) -> np.ndarray:
    """Batch of path values, shape (n_seeds, n_nodes, dim).

    Row k is bit-identical to ``generate(dim, grid, seeds[k], stream_id)``.
    """
    seeds = np.asarray(seeds)
    n_steps = grid.n_nodes - 1
    raw = np.empty((seeds.size, n_steps, dim), dtype=np.uint64)
    for k, seed in enumerate(seeds):
        for c in range(dim):
            key = derive_key(int(seed), stream_id, c, 0)
            raw[k, :, c] = Philox(key=key).random_raw(n_steps)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    z = ndtri(u)
    z *= np.sqrt(grid.steps)[None, :, None]
    values = np.zeros((seeds.size, grid.n_nodes, dim))
    np.cumsum(z, axis=1, out=values[:, 1:, :])
    return values


def refine_midpoints(path: BrownianPath) -> BrownianPath:
    """Insert Brownian-bridge midpoints into every interval.

    The midpoint of interval i at the new level is the neighbor average
    plus an N(0, h_i/4) draw, taken from the stream keyed by
    (seed, stream_id, component, level+1) at counter slot i.  Coarse nodes
    keep their exact values.
    """
    grid = path.grid
    new_grid = grid.refined()
    n_int = grid.n_nodes - 1
    half_sd = 0.5 * np.sqrt(grid.steps)
    values = np.empty((path.dim, new_grid.n_nodes))
    for c in range(path.dim):
        z = standard_normals(path.seed, path.stream_id, c, path.level + 1, n_int)
        values[c, 0::2] = path.values[c]
        values[c, 1::2] = 0.5 * (path.values[c, :-1] + path.values[c, 1:]) + half_sd * z
    return BrownianPath(new_grid, values, path.seed, path.stream_id,
                        level=path.level + 1, lineage="refined")


def restrict(path: BrownianPath, nodes: np.ndarray) -> BrownianPath:
    """Exact restriction to a subset of the path's grid nodes."""
    nodes = np.asarray(nodes, dtype=np.float64)
    idx = np.searchsorted(path.grid.nodes, nodes)
    if np.any(idx >= path.grid.n_nodes) or np.any(path.grid.nodes[idx] != nodes):
        raise GridError("restriction nodes must be existing grid nodes")
    return BrownianPath(TimeGrid(nodes), path.values[:, idx], path.seed,
                        path.stream_id, level=path.level, lineage="restricted")


def increment(path: BrownianPath, component: int, s: float, t: float) -> float:
    """values[component](t) - values[component](s) for exact grid nodes."""
    i, j = path.grid.index_of(s), path.grid.index_of(t)
    if j < i:
        raise GridError("increment requires s <= t")
    return float(path.values[component, j] - path.values[component, i])


def path_to_csv(path: BrownianPath, fname) -> None:
    """CSV export: header t,W1,...,Wd; full double precision."""
    header = "t," + ",".join(f"W{c + 1}" for c in range(path.dim))
    data = np.column_stack([path.grid.nodes, path.values.T])
    np.savetxt(fname, data, fmt="%.17g", delimiter=",", header=header, comments="")
