"""Fixed-path integration of X_t = x0 + int b(s, X_s) ds + W_t.

The driving path is given; the only randomness is in it.  Each step is
explicit in the regular part of the drift and implicit in any active pole
term c/(x - a) with c > 0, using the closed-form positivity-preserving
root (see :func:`bessel_implicit_step`).  Pole terms with c < 0 admit no
sign-preserving implicit step and are evaluated explicitly behind a
distance guard.  Steps approaching a bridge pull's time pole are graded
by the grid; the value at the pole itself is assigned exactly (endpoint
pinning) instead of integrated across the blow-up.

State is carried in the decomposition X = (x0 + W) + D with D the
accumulated drift displacement, so drift-free components reproduce
x0 + W bit-exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .brownian import BrownianPath, TimeGrid, bridge_grid, uniform_grid
from .drifts import DriftField


class IntegrationError(RuntimeError):
    """Integration aborted; carries the first offending node index."""

    def __init__(self, message, node_index=None):
        super().__init__(message)
        self.node_index = node_index


@dataclass(frozen=True)
class SchemeOptions:
    """Step-size and singularity-handling knobs.

    h            base step
    gamma        grading factor for steps approaching the bridge time pole
    end_offset   integration of bridge pieces stops at pole - end_offset
    implicit_singular  advance c/x terms (c > 0) by the implicit root
    explicit_guard     refuse explicit evaluation of a pole term closer
                       than this to its pole
    """

    h: float = 1e-4
    gamma: float = 0.5
    end_offset: float = 1e-4
    implicit_singular: bool = True
    explicit_guard: float = 1e-6

    def __post_init__(self):
        if self.h <= 0 or self.end_offset <= 0 or self.explicit_guard <= 0:
            raise ValueError("h, end_offset, explicit_guard must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")

    def with_h(self, h: float) -> "SchemeOptions":
        return dataclasses.replace(self, h=h)


def grid_for(field_: DriftField, opts: SchemeOptions) -> TimeGrid:
    """The scheme grid for a field: graded toward its time pole if any."""
    if field_.time_pole is None:
        return uniform_grid(field_.t_end, opts.h)
    return bridge_grid(field_.t_end, opts.h, opts.gamma, opts.end_offset,
                       pole=field_.time_pole)


@dataclass
class SolutionPath:
    """Candidate solution values on a grid plus construction metadata."""

    grid: TimeGrid
    values: np.ndarray              # (dim, n_nodes)
    construction: str
    scheme: SchemeOptions
    sign_selection: tuple | None = None
    pinned_nodes: tuple = ()        # of (time, component, value)
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def at_time(self, t: float) -> np.ndarray:
        return self.values[:, self.grid.index_of(t)]


def bessel_implicit_step(a, h, c, branch):
    """Root of x = a + c*h/x with the sign of ``branch`` (c, h > 0).

    Closed form branch*(branch*a + sqrt(a^2 + 4ch))/2, evaluated in the
    cancellation-free arrangement on each side.  The discriminant is
    strictly positive, so the output always carries the requested sign.
    """
    a = np.asarray(a, dtype=np.float64)
    s = np.sqrt(a * a + 4.0 * c * h)
    ch2 = 2.0 * c * h
    with np.errstate(divide="ignore", invalid="ignore"):
        plus = np.where(a >= 0, 0.5 * (a + s), ch2 / (s - a))
        minus = np.where(a <= 0, 0.5 * (a - s), -ch2 / (s + a))
    return np.where(np.asarray(branch) >= 0, plus, minus)


def _as_selection(sign_selection, batch, dim):
    """Normalize a sign selection to floats in {-1, 0, +1}, shape (batch, dim);
    0 means no selection (dynamic branch)."""
    if sign_selection is None:
        return np.zeros((batch, dim))
    sel = np.asarray(sign_selection, dtype=np.float64)
    if sel.ndim == 0:
        sel = np.full((batch, dim), float(sel))
    elif sel.ndim == 1 and sel.size == dim:
        sel = np.broadcast_to(sel, (batch, dim)).copy()
    elif sel.shape == (batch,) and dim == 1:
        sel = sel[:, None].copy()
    elif sel.shape != (batch, dim):
        raise ValueError("sign selection must be scalar, per-component, "
                         "or (batch, dim)")
    return np.sign(sel)


def step_eval_times(field_: DriftField, grid: TimeGrid) -> np.ndarray:
    """Per-interval drift evaluation times: the left node, except the
    interval midpoint when the left node sits on a declared time break
    (the formulas on the far side of a break do not depend on t)."""
    t = grid.nodes[:-1].copy()
    for brk in field_.time_breaks:
        on_break = t == brk
        t[on_break] = 0.5 * (grid.nodes[:-1][on_break] + grid.nodes[1:][on_break])
    return t


def integrate_values(field_: DriftField, grid: TimeGrid, w_values: np.ndarray,
                     x0, opts: SchemeOptions, sign_selection=None,
                     pin: bool = True):
    """Batched forward integration.

    w_values: driving-path values, shape (batch, n_nodes, dim).
    Returns (values, diagnostics): values (batch, n_nodes, dim);
    diagnostics holds per-path minimum pole distances and pin records.
    """
    batch, n_nodes, dim = w_values.shape
    if dim != field_.dim:
        raise ValueError(f"field dimension {field_.dim} != path dimension {dim}")
    nodes = grid.nodes
    steps = grid.steps
    sel = _as_selection(sign_selection, batch, dim)
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), (batch, dim))

    pin_at = {}
    if pin:
        for rule in field_.pins:
            try:
                pin_at.setdefault(grid.index_of(rule.time), []).append(rule)
            except Exception:
                pass  # pin time not on this grid: nothing to pin

    base_xw = x0[:, None, :] + w_values            # x0 + W at every node
    values = np.empty_like(w_values)
    values[:, 0, :] = x0
    x = x0.copy()
    drift_disp = np.zeros((batch, dim))
    min_pole_dist = np.full((batch, dim), np.inf)
    eval_t = step_eval_times(field_, grid)

    for k in range(n_nodes - 1):
        h = steps[k]
        reg, c, a = field_.split(eval_t[k], x)
        dw = w_values[:, k + 1, :] - w_values[:, k, :]
        base = x + h * reg + dw

        implicit = (c > 0) & opts.implicit_singular
        explicit_pole = (c != 0) & ~implicit
        if np.any(explicit_pole):
            d = x - a
            bad = explicit_pole & (np.abs(d) < opts.explicit_guard)
            if np.any(bad):
                raise IntegrationError(
                    "explicit evaluation of a pole term inside the guard "
                    f"distance at node {k} (t = {nodes[k]:.6g})",
                    node_index=k)

        # drift-displacement update for the non-implicit components
        with np.errstate(divide="ignore", invalid="ignore"):
            pole_term = np.where(explicit_pole,
                                 c / np.where(x - a != 0, x - a, 1.0), 0.0)
        drift_disp = drift_disp + h * (reg + pole_term)
        x_next = base_xw[:, k + 1, :] + drift_disp
        overridden = np.zeros((batch, dim), dtype=bool)

        if np.any(implicit):
            branch = np.where(sel != 0, sel, np.sign(base - a))
            branch = np.where(branch == 0, 1.0, branch)
            root = a + bessel_implicit_step(base - a, h, np.where(implicit, c, 1.0),
                                            branch)
            x_next = np.where(implicit, root, x_next)
            overridden |= implicit

        if k + 1 in pin_at:
            for rule in pin_at[k + 1]:
                j = rule.component
                branch_j = np.where(sel[:, j] != 0, sel[:, j], np.sign(x[:, j]))
                branch_j = np.where(branch_j == 0, 1.0, branch_j)
                pinned = branch_j * rule.magnitude
                if rule.gate_component is None:
                    x_next[:, j] = pinned
                    overridden[:, j] = True
                else:
                    gate = x[:, rule.gate_component] > 0
                    x_next[:, j] = np.where(gate, pinned, x_next[:, j])
                    overridden[:, j] |= gate

        active = c != 0
        if np.any(active):
            dist = np.where(active, np.abs(x_next - a), np.inf)
            np.minimum(min_pole_dist, dist, out=min_pole_dist)

        # keep the pure left-fold displacement wherever the Euler update
        # survived, so drift-free components stay bit-exactly x0 + W
        drift_disp = np.where(overridden, x_next - base_xw[:, k + 1, :],
                              drift_disp)
        values[:, k + 1, :] = x_next
        x = x_next

    if not np.all(np.isfinite(values)):
        bad_nodes = np.where(~np.isfinite(values).all(axis=(0, 2)))[0]
        raise IntegrationError(
            f"non-finite state first reached at node {bad_nodes[0]}",
            node_index=int(bad_nodes[0]))

    diagnostics = {"min_pole_distance": min_pole_dist,
                   "pinned": sorted((nodes[i], r.component, r.magnitude)
                                    for i, rules in pin_at.items() for r in rules)}
    return values, diagnostics


def integrate(field_: DriftField, path: BrownianPath, x0, opts: SchemeOptions,
              sign_selection=None, pin: bool = True) -> SolutionPath:
    """Single-path integration; see :func:`integrate_values`."""
    w = path.values.T[None, :, :]
    values, diag = integrate_values(field_, path.grid, w, x0, opts,
                                    sign_selection, pin)
    sel = None
    if sign_selection is not None:
        sel = tuple(np.atleast_1d(np.asarray(sign_selection, dtype=float)).tolist())
    pinned = tuple((t, comp, float(values[0, path.grid.index_of(t), comp]))
                   for t, comp, _mag in diag.pop("pinned"))
    diag = {"min_pole_distance": diag["min_pole_distance"][0]}
    return SolutionPath(path.grid, values[0].T, f"integrate:{field_.id}",
                        opts, sign_selection=sel, pinned_nodes=pinned,
                        diagnostics=diag)


def _exclusion_mask(field_: DriftField, nodes: np.ndarray, end_offset: float):
    """True on nodes inside the declared blow-up window (pole-end_offset, pole]."""
    if field_.time_pole is None:
        return np.zeros(nodes.size, dtype=bool)
    pole = field_.time_pole
    return (nodes > pole - end_offset) & (nodes <= pole)


def residual(sol: SolutionPath, field_: DriftField, path: BrownianPath,
             eval_path: BrownianPath) -> float:
    """Self-consistency defect of a solution against the integral equation.

    The solution is linearly interpolated onto the evaluation path's grid
    (a midpoint refinement of the solution grid, or that grid itself); the
    Brownian values at refined nodes are exact.  The defect at node t is
    X(t) - X(anchor) - sum h_i b(t_i, X_i) - (W(t) - W(anchor)) with a
    left-endpoint sum, accumulated in ascending order.  Nodes inside the
    blow-up window (pole - end_offset, pole] are excluded, and the segment
    after the pole is re-anchored at the pole node, so the reported value
    is the maximum defect off the singular time.
    """
    coarse = sol.grid.nodes
    fine = eval_path.grid.nodes
    if fine.size == coarse.size:
        if not np.array_equal(fine, coarse):
            raise ValueError("evaluation grid does not match the solution grid")
    elif fine.size == 2 * coarse.size - 1:
        if not np.array_equal(fine[0::2], coarse):
            raise ValueError("evaluation grid is not a midpoint refinement")
    else:
        raise ValueError("evaluation grid is not a midpoint refinement")
    if not np.array_equal(path.grid.nodes, coarse):
        raise ValueError("solution and driving path grids differ")

    dim = sol.dim
    x_fine = np.empty((fine.size, dim))
    for j in range(dim):
        x_fine[:, j] = np.interp(fine, coarse, sol.values[j])
    w_fine = eval_path.values.T

    eval_t = step_eval_times(field_, eval_path.grid)
    b = field_.evaluate(eval_t, x_fine[:-1])
    if b.shape != (fine.size - 1, dim):
        b = np.broadcast_to(b, (fine.size - 1, dim))

    excluded = _exclusion_mask(field_, fine, sol.scheme.end_offset)
    # segment boundaries: re-anchor after an interior time pole
    anchors = [0]
    if field_.time_pole is not None and field_.time_pole < fine[-1]:
        anchors.append(int(np.searchsorted(fine, field_.time_pole)))
    anchors.append(fine.size - 1)

    worst = 0.0
    h_fine = np.diff(fine)
    for s_lo, s_hi in zip(anchors[:-1], anchors[1:]):
        if s_hi <= s_lo:
            continue
        incr = h_fine[s_lo:s_hi, None] * b[s_lo:s_hi]
        # left-endpoint terms inside the window are untrustworthy: skip them
        incr[excluded[s_lo:s_hi]] = 0.0
        riemann = np.zeros((s_hi - s_lo + 1, dim))
        np.cumsum(incr, axis=0, out=riemann[1:])
        defect = (x_fine[s_lo:s_hi + 1] - x_fine[s_lo]) - riemann \
            - (w_fine[s_lo:s_hi + 1] - w_fine[s_lo])
        keep = ~excluded[s_lo:s_hi + 1]
        if np.any(keep):
            worst = max(worst, float(np.max(np.abs(defect[keep]))))
    return worst


def write_solution_csv(sol: SolutionPath, fname, brownian: BrownianPath | None = None):
    """CSV export ``t,X1,...,Xd[,W1,...,Wd]`` at full double precision."""
    cols = [sol.grid.nodes] + [sol.values[j] for j in range(sol.dim)]
    header = ["t"] + [f"X{j + 1}" for j in range(sol.dim)]
    if brownian is not None:
        if not np.array_equal(brownian.grid.nodes, sol.grid.nodes):
            raise ValueError("driving path grid does not match the solution")
        cols += [brownian.values[j] for j in range(brownian.dim)]
        header += [f"W{j + 1}" for j in range(brownian.dim)]
    np.savetxt(fname, np.column_stack(cols), fmt="%.17g", delimiter=",",
               header=",".join(header), comments="")


def solution_metadata(sol: SolutionPath, path: BrownianPath | None = None) -> dict:
    """JSON-ready sidecar describing how a solution was built."""
    meta = {
        "construction": sol.construction,
        "sign_selection": sol.sign_selection,
        "pinned_nodes": [list(p) for p in sol.pinned_nodes],
        "scheme": dataclasses.asdict(sol.scheme),
        "n_nodes": int(sol.grid.n_nodes),
        "t_end": sol.grid.t_end,
        "diagnostics": {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                        for k, v in sol.diagnostics.items()},
    }
    if path is not None:
        meta["driving_path"] = {"seed": path.seed, "stream_id": path.stream_id,
                                "level": path.level, "lineage": path.lineage}
    return meta
