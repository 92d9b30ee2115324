"""Named solution constructions on a shared Brownian path.

Constructions are assembled component-by-component from two scalar
integrations: a sign-selected bridge on [0, 1] (pinned to +-1 at 1) and a
repelling 1/x continuation on [1, 2] that keeps the sign it starts with.
The branch of every selected component is fixed up front -- where a sign
condition identifies the unique continuation, selection *is* the
construction -- and every sign statistic is recomputed from the stored
path afterwards, never from the selection that produced it.

``nonadapted``-tagged constructions couple the second component's bridge
sign to the *future* value of the first driving component at time 1; the
``strong`` construction keeps the third component negative so the
coupled drifts stay switched off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brownian import BrownianPath, TimeGrid
from .drifts import helper_field, inverse_field
from .integrator import SchemeOptions, SolutionPath, integrate_values


class TieError(RuntimeError):
    """The driving value whose sign selects a branch is exactly zero."""


_CONTINUE = inverse_field(c=1.0, t_end=1.0, field_id="inverse_continue")


def split_index(grid: TimeGrid, t: float = 1.0) -> int:
    return grid.index_of(t)


def _subgrid_before(grid: TimeGrid, i_split: int) -> TimeGrid:
    return TimeGrid(grid.nodes[:i_split + 1])


def _subgrid_after(grid: TimeGrid, i_split: int) -> TimeGrid:
    # continuation drifts are time-invariant, so the shifted origin is exact
    return TimeGrid(grid.nodes[i_split:] - grid.nodes[i_split])


def _bridge_then_continue(grid: TimeGrid, w: np.ndarray, branch,
                          opts: SchemeOptions, target: float = 1.0,
                          pole: float = 1.0) -> np.ndarray:
    """One component: sign-selected bridge to +-target on [0, pole], then
    a 1/x continuation on [pole, t_end].  w: (batch, n_nodes); branch
    scalar or (batch,)."""
    i1 = split_index(grid, pole)
    g01, g12 = _subgrid_before(grid, i1), _subgrid_after(grid, i1)
    bridge = helper_field(target=target, pole_time=pole)
    sel = np.broadcast_to(np.asarray(branch, dtype=float), (w.shape[0],))
    v01, _ = integrate_values(bridge, g01, w[:, :i1 + 1, None], 0.0, opts,
                              sign_selection=sel)
    if grid.n_nodes == i1 + 1:
        return v01[:, :, 0]
    x1 = v01[:, -1, 0]
    v12, _ = integrate_values(_CONTINUE, g12, w[:, i1:, None], x1[:, None], opts,
                              sign_selection=sel)
    return np.concatenate([v01[:, :, 0], v12[:, 1:, 0]], axis=1)


def _continue_from(grid: TimeGrid, w: np.ndarray, x_start, branch,
                   opts: SchemeOptions, pole: float = 1.0) -> np.ndarray:
    """1/x continuation on [pole, t_end] only; returns (batch, n12_nodes)."""
    i1 = split_index(grid, pole)
    g12 = _subgrid_after(grid, i1)
    v12, _ = integrate_values(_CONTINUE, g12, w[:, i1:, None],
                              np.asarray(x_start, dtype=float)[:, None], opts,
                              sign_selection=np.broadcast_to(
                                  np.asarray(branch, dtype=float), (w.shape[0],)))
    return v12[:, :, 0]


def strong_3d_values(grid: TimeGrid, w: np.ndarray,
                     opts: SchemeOptions) -> np.ndarray:
    """Adapted solution: X1 = W1, X2 = W2 (coupling gated off by X3 < 0),
    X3 = negative bridge then negative 1/x continuation."""
    out = np.empty_like(w)
    out[:, :, 0] = w[:, :, 0]
    out[:, :, 1] = w[:, :, 1]
    out[:, :, 2] = _bridge_then_continue(grid, w[:, :, 2], -1.0, opts)
    return out


def nonadapted_branches(grid: TimeGrid, w: np.ndarray, pole: float = 1.0):
    """Branch labels dictated by the first component's future value at the
    selection time.

    Returns (sgn_w1, accepted): rejected rows have sgn exactly 0, a
    probability-zero tie that would corrupt the sign statistics if it
    were silently broken.
    """
    i1 = split_index(grid, pole)
    sgn = np.sign(w[:, i1, 0])
    return sgn, sgn != 0.0


def nonadapted_3d_values(grid: TimeGrid, w: np.ndarray, opts: SchemeOptions,
                         sgn_w1_at_1=None) -> np.ndarray:
    """Non-adapted solution: X3 positive bridge/continuation switches the
    coupling on; X1 = W1 then 1/x continuation keeping sign(W1(1)); X2 is
    the bridge with the *opposite* sign, continued on [1, 2]."""
    if sgn_w1_at_1 is None:
        sgn_w1_at_1, accepted = nonadapted_branches(grid, w)
        if not np.all(accepted):
            raise TieError("driving value at the branch-selection time is "
                           "exactly zero")
    i1 = split_index(grid)
    out = np.empty_like(w)
    out[:, :, 0] = w[:, :, 0]
    out[:, i1:, 0] = _continue_from(grid, w[:, :, 0], w[:, i1, 0],
                                    sgn_w1_at_1, opts)
    out[:, :, 1] = _bridge_then_continue(grid, w[:, :, 1], -sgn_w1_at_1, opts)
    out[:, :, 2] = _bridge_then_continue(grid, w[:, :, 2], 1.0, opts)
    return out


def pbp_2d_values(grid: TimeGrid, w: np.ndarray, opts: SchemeOptions,
                  sgn_w1_at_1=None, bridge_target: float = 1.0,
                  bridge_pole: float = 1.0) -> np.ndarray:
    """The (X1, X2) sub-construction on the two-component field.

    ``bridge_target`` / ``bridge_pole`` select the Brownian-rescaled block
    variant (target sqrt(lam), pole lam); the defaults give the unscaled
    construction.
    """
    if sgn_w1_at_1 is None:
        sgn_w1_at_1, accepted = nonadapted_branches(grid, w, bridge_pole)
        if not np.all(accepted):
            raise TieError("driving value at the branch-selection time is "
                           "exactly zero")
    i1 = split_index(grid, bridge_pole)
    out = np.empty_like(w)
    out[:, :, 0] = w[:, :, 0]
    out[:, i1:, 0] = _continue_from(grid, w[:, :, 0], w[:, i1, 0],
                                    sgn_w1_at_1, opts, bridge_pole)
    out[:, :, 1] = _bridge_then_continue(grid, w[:, :, 1], -sgn_w1_at_1, opts,
                                         bridge_target, bridge_pole)
    return out


_PINNED_COMPONENTS = {"strong3d": (2,), "nonadapted3d": (1, 2), "pbp2d": (1,)}


def _as_solution(grid, values, tag, opts, sign_selection=None) -> SolutionPath:
    i1 = split_index(grid)
    pins = tuple((float(grid.nodes[i1]), j, float(values[i1, j]))
                 for j in _PINNED_COMPONENTS[tag])
    return SolutionPath(grid, values.T, tag, opts,
                        sign_selection=sign_selection,
                        pinned_nodes=pins,
                        diagnostics={"min_abs_after_departure": [
                            float(np.min(np.abs(values[1:, j])))
                            for j in range(values.shape[1])]})


def build_strong_3d(path: BrownianPath, opts: SchemeOptions) -> SolutionPath:
    if path.dim != 3:
        raise ValueError("need a three-component driving path")
    w = path.values.T[None]
    values = strong_3d_values(path.grid, w, opts)[0]
    return _as_solution(path.grid, values, "strong3d", opts,
                        sign_selection=(0.0, 0.0, -1.0))


def build_nonadapted_3d(path: BrownianPath, opts: SchemeOptions) -> SolutionPath:
    if path.dim != 3:
        raise ValueError("need a three-component driving path")
    w = path.values.T[None]
    sgn, accepted = nonadapted_branches(path.grid, w)
    if not accepted[0]:
        raise TieError("driving value at the branch-selection time is "
                       "exactly zero")
    values = nonadapted_3d_values(path.grid, w, opts, sgn)[0]
    return _as_solution(path.grid, values, "nonadapted3d", opts,
                        sign_selection=(float(sgn[0]), float(-sgn[0]), 1.0))


def build_2d_pathbypath(path: BrownianPath, opts: SchemeOptions) -> SolutionPath:
    if path.dim != 2:
        raise ValueError("need a two-component driving path")
    w = path.values.T[None]
    sgn, accepted = nonadapted_branches(path.grid, w)
    if not accepted[0]:
        raise TieError("driving value at the branch-selection time is "
                       "exactly zero")
    values = pbp_2d_values(path.grid, w, opts, sgn)[0]
    return _as_solution(path.grid, values, "pbp2d", opts,
                        sign_selection=(float(sgn[0]), float(-sgn[0])))


@dataclass
class ConstructionOutput:
    """One or more solutions on the same driving path, plus extracted
    scalars recomputed from the stored paths on demand."""

    solutions: dict
    shared_path_ref: tuple          # (seed, stream_id)
    grid: TimeGrid

    def features(self) -> dict:
        out = {}
        for tag, sol in self.solutions.items():
            i_half = sol.grid.nearest_index(0.5)
            i1 = split_index(sol.grid)
            out[tag] = {
                "x2_at_half": float(sol.values[1, i_half]),
                "x2_at_1": float(sol.values[1, i1]),
            }
        tags = sorted(self.solutions)
        if len(tags) == 2:
            a, b = (self.solutions[t] for t in tags)
            out["sup_distance"] = float(
                np.max(np.abs(a.values - b.values)))
        return out


def duplicate_pair(path: BrownianPath, opts: SchemeOptions) -> ConstructionOutput:
    """The adapted solution and the non-adapted one on the same path."""
    return ConstructionOutput(
        {"strong3d": build_strong_3d(path, opts),
         "nonadapted3d": build_nonadapted_3d(path, opts)},
        (path.seed, path.stream_id), path.grid)


def duplicate_distance(path: BrownianPath, opts: SchemeOptions) -> float:
    """Sup over grid nodes of the max-norm distance between the pair."""
    pair = duplicate_pair(path, opts)
    return pair.features()["sup_distance"]


def probe_values(dt: float, w: np.ndarray, eps: float,
                 coefficient: float = -0.5):
    """Explicit integration of the regularized drift coefficient/x gated to
    |x| > eps, from 0.  w: driving values, shape (batch, n_nodes).  The
    state is carried as W plus the drift displacement, so a never-active
    gate reproduces the driving path bit-exactly.  Returns the per-path
    signatures:

    * drift_integral: accumulated sum h * |b(X_k)|,
    * near_fraction: fraction of nodes with |X_k| <= 2 eps,
    * sign_changes: count of strict sign flips between consecutive nodes.
    """
    batch, n_nodes = w.shape
    x = np.zeros(batch)
    disp = np.zeros(batch)
    integral = np.zeros(batch)
    near = np.zeros(batch)
    flips = np.zeros(batch)
    prev_sign = np.zeros(batch)
    for k in range(n_nodes - 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(np.abs(x) > eps,
                         coefficient / np.where(x != 0, x, 1.0), 0.0)
        integral += dt * np.abs(b)
        near += np.abs(x) <= 2 * eps
        disp = disp + dt * b
        x = w[:, k + 1] + disp
        sign = np.sign(x)
        flips += (sign * prev_sign) < 0
        prev_sign = np.where(sign != 0, sign, prev_sign)
    near += np.abs(x) <= 2 * eps
    return {"drift_integral": integral,
            "near_fraction": near / n_nodes,
            "sign_changes": flips,
            "final": x}


def probe_nosolution(path: BrownianPath, cutoffs, opts: SchemeOptions,
                     coefficient: float = -0.5) -> list:
    """Regularization ladder on one path; one diagnostics row per cutoff.

    With the confining coefficient (-1/2) the accumulated |drift| integral
    must grow as the cutoff shrinks -- the numerical signature that no
    solution exists at cutoff zero.  The dispersing control (+1/2) stays
    bounded across the same ladder.
    """
    if path.dim != 1:
        raise ValueError("the probe drives a scalar path")
    cutoffs = list(cutoffs)
    if any(e2 >= e1 for e1, e2 in zip(cutoffs, cutoffs[1:])):
        raise ValueError("cutoffs must be strictly decreasing")
    dt = float(path.grid.steps[0])
    if not np.allclose(path.grid.steps, dt):
        raise ValueError("the probe expects a uniform grid")
    w = path.values[0][None, :]
    rows = []
    for eps in cutoffs:
        r = probe_values(dt, w, eps, coefficient)
        rows.append({"eps": float(eps),
                     "drift_integral": float(r["drift_integral"][0]),
                     "near_fraction": float(r["near_fraction"][0]),
                     "sign_changes": int(r["sign_changes"][0])})
    return rows
