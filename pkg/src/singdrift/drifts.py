"""Catalog of the singular drift fields driven by the simulation.

Every field is a piecewise-in-time closed form built from two bricks:

* a *bridge pull* ``(m - x)/(T - t)`` (mirrored for x < 0) that forces the
  component to hit ``sign * m`` at time ``T``, and
* an *inverse pole* ``c/(x - a)`` that repels from (c > 0) or confines
  toward (c < 0) the level ``a``.

Indicator convention: a gated term evaluates to exactly 0 at its own pole
(including the shifted poles at x = +-1), so fields are finite everywhere
off the time pole.  The integrator, not the field, owns singularity
treatment; to support that, each field also exposes ``split`` returning
the regular part plus the active pole structure ``(c, a)`` per component.

All evaluators broadcast over both t and x; x carries the component axis
last, shape (..., dim).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def _inv(x):
    """1/x off zero, exactly 0 at x = 0 (odd)."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x != 0.0, 1.0 / np.where(x != 0.0, x, 1.0), 0.0)
    return out


def _shifted_confine(x, a):
    """-1/(2(x - a)) off the pole, exactly 0 at x = a."""
    x = np.asarray(x, dtype=np.float64)
    d = x - a
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d != 0.0, -0.5 / np.where(d != 0.0, d, 1.0), 0.0)
    return out


def bridge_pull(t, x, target: float = 1.0, pole_time: float = 1.0):
    """Sign-gated pull toward +-target at pole_time.

    (target - x)/(pole_time - t) for x > 0, -(target + x)/(pole_time - t)
    for x < 0, 0 at x = 0.  At t = pole_time the expression is the t-limit
    where that limit is finite (zero numerator) and +-inf otherwise.
    """
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    num = np.where(x > 0, target - x, np.where(x < 0, -(target + x), 0.0))
    den = pole_time - t
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(num == 0.0, 0.0, num / den)
    return out


def eval_helper_f(t, x):
    """Scalar bridge-selector drift on [0, 1).

    f(t, x) = 1_{x>0} ((1-x)/(1-t) + 1/x) - 1_{x<0} ((1+x)/(1-t) + 1/(-x));
    odd in x, 0 at x = 0.  Rejects t >= 1 (time pole).
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t >= 1.0):
        raise ValueError("helper drift has a time pole at t = 1; need t < 1")
    return bridge_pull(t, x) + _inv(x)


def eval_bessel(delta: float, x):
    """(delta - 1)/(2x) off zero, 0 at zero; requires delta > 1."""
    if delta <= 1.0:
        raise ValueError("dimension parameter must exceed 1")
    return 0.5 * (delta - 1.0) * _inv(x)


def eval_nosol(x):
    """-1/(2x) off zero, 0 at zero: the confining drift with no solution."""
    return -0.5 * _inv(x)


def _sys2d_late(x1, x2):
    """The four sign-gated branches active on (1, 2]."""
    b1 = _inv(x1)
    pp = (x1 > 0) & (x2 > 0)
    nn = (x1 < 0) & (x2 < 0)
    mixed = ((x1 > 0) & (x2 < 0)) | ((x1 < 0) & (x2 > 0))
    b2 = np.where(pp, _shifted_confine(x2, 1.0),
                  np.where(nn, _shifted_confine(x2, -1.0),
                           np.where(mixed, _inv(x2), 0.0)))
    return b1, b2


def eval_sys2d(t, x):
    """Two-component field on [0, 2]: (0, f(t, x2)) for t <= 1, the
    sign-filtered inverse/confining branches for t > 1."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    x1, x2 = x[..., 0], x[..., 1]
    early = t <= 1.0
    b1_late, b2_late = _sys2d_late(x1, x2)
    b1 = np.where(early, 0.0, b1_late)
    b2 = np.where(early, bridge_pull(t, x2) + _inv(x2), b2_late)
    return np.stack(np.broadcast_arrays(b1, b2), axis=-1)


def eval_sys3d(t, x):
    """Three-component field on [0, 2]: components 1-2 are the sys2d
    formulas gated by x3 > 0; component 3 is the scalar bridge drift on
    [0, 1] and 1/x3 on (1, 2]."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    early = t <= 1.0
    gate = x3 > 0
    b1_late, b2_late = _sys2d_late(x1, x2)
    b1 = np.where(early, 0.0, np.where(gate, b1_late, 0.0))
    b2_early = np.where(gate, bridge_pull(t, x2) + _inv(x2), 0.0)
    b2 = np.where(early, b2_early, np.where(gate, b2_late, 0.0))
    b3 = np.where(early, bridge_pull(t, x3) + _inv(x3), _inv(x3))
    return np.stack(np.broadcast_arrays(b1, b2, b3), axis=-1)


@dataclass(frozen=True)
class PinRule:
    """Exact endpoint assignment for a bridge component at its pull time.

    ``gate_component``, when set, activates the pin only where that
    component is positive at the node just before the pin time.
    """

    component: int
    time: float
    magnitude: float = 1.0
    gate_component: Optional[int] = None


@dataclass(frozen=True)
class DriftField:
    """Catalog entry: evaluator plus the structure the integrator needs.

    ``split(t, x) -> (regular, c, a)`` decomposes each component as
    regular + c/(x_j - a) with c = 0 where no pole term is active.  The
    self-pole indicator does not zero c: the implicit step needs the pole
    structure precisely when the state sits at the pole.
    ``time_pole`` marks an interior time at which a bridge pull blows up.
    """

    id: str
    dim: int
    t_end: float
    evaluate: Callable
    split: Callable
    time_breaks: tuple = ()
    time_pole: Optional[float] = None
    pins: tuple = ()


def _split_scalar_bridge(target, pole_time):
    def split(t, x):
        x = np.asarray(x, dtype=np.float64)
        reg = bridge_pull(t, x[..., 0], target, pole_time)[..., None]
        c = np.ones_like(reg)
        a = np.zeros_like(reg)
        return np.broadcast_to(reg, x.shape), np.broadcast_to(c, x.shape), a
    return split


def helper_field(target: float = 1.0, pole_time: float = 1.0,
                 field_id: str = "helper_f") -> DriftField:
    """Scalar bridge-selector field on [0, pole_time]."""
    def evaluate(t, x):
        x = np.asarray(x, dtype=np.float64)
        out = bridge_pull(t, x[..., 0], target, pole_time) + _inv(x[..., 0])
        return out[..., None]

    return DriftField(field_id, 1, pole_time, evaluate,
                      _split_scalar_bridge(target, pole_time),
                      time_pole=pole_time,
                      pins=(PinRule(0, pole_time, target),))


def inverse_field(c: float = 1.0, t_end: float = 1.0,
                  field_id: str = "inverse") -> DriftField:
    """Scalar field c/x (0 at 0); c = 1 is the repelling continuation drift."""
    def evaluate(t, x):
        x = np.asarray(x, dtype=np.float64)
        return c * _inv(x[..., 0])[..., None]

    def split(t, x):
        x = np.asarray(x, dtype=np.float64)
        cc = np.full_like(x, c)
        return np.zeros_like(x), cc, np.zeros_like(x)

    return DriftField(field_id, 1, t_end, evaluate, split)


def bessel_field(delta: float, t_end: float = 1.0) -> DriftField:
    return inverse_field(0.5 * (delta - 1.0), t_end, f"bessel({delta:g})")


def nosol_field(t_end: float = 1.0) -> DriftField:
    """Confining -1/(2x): c < 0, so no positivity-preserving implicit step
    exists and the integrator falls back to guarded explicit evaluation."""
    return inverse_field(-0.5, t_end, "nosol")


def regularized_inverse_field(c: float, eps: float, t_end: float = 1.0) -> DriftField:
    """c/x gated to |x| > eps: bounded, treated as a regular field."""
    def evaluate(t, x):
        x = np.asarray(x, dtype=np.float64)
        xx = x[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.abs(xx) > eps, c / np.where(xx != 0, xx, 1.0), 0.0)
        return out[..., None]

    def split(t, x):
        x = np.asarray(x, dtype=np.float64)
        return evaluate(t, x), np.zeros_like(x), np.zeros_like(x)

    return DriftField(f"reg_inverse({c:g},{eps:g})", 1, t_end, evaluate, split)


def zero_field(dim: int = 1, t_end: float = 1.0) -> DriftField:
    def evaluate(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.zeros_like(x)

    def split(t, x):
        x = np.asarray(x, dtype=np.float64)
        z = np.zeros_like(x)
        return z, z.copy(), z.copy()

    return DriftField("zero", dim, t_end, evaluate, split)


def _sys2d_split_late(x1, x2):
    pp = (x1 > 0) & (x2 > 0)
    nn = (x1 < 0) & (x2 < 0)
    mixed = ((x1 > 0) & (x2 < 0)) | ((x1 < 0) & (x2 > 0))
    c2 = np.where(pp | nn, -0.5, np.where(mixed, 1.0, 0.0))
    a2 = np.where(pp, 1.0, np.where(nn, -1.0, 0.0))
    c1 = np.ones_like(c2)
    return c1, c2, a2


def sys2d_field() -> DriftField:
    def split(t, x):
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        early = np.asarray(t, dtype=np.float64) <= 1.0
        c1_l, c2_l, a2_l = _sys2d_split_late(x1, x2)
        reg2 = np.where(early, bridge_pull(t, x2), 0.0)
        c1 = np.where(early, 0.0, c1_l)
        c2 = np.where(early, 1.0, c2_l)
        a2 = np.where(early, 0.0, a2_l)
        zero = np.zeros(np.broadcast_shapes(c1.shape, x1.shape))
        reg = np.stack(np.broadcast_arrays(zero, reg2), axis=-1)
        c = np.stack(np.broadcast_arrays(c1, c2), axis=-1)
        a = np.stack(np.broadcast_arrays(zero, a2), axis=-1)
        return reg, c, a

    return DriftField("sys2d", 2, 2.0, eval_sys2d, split,
                      time_breaks=(1.0,), time_pole=1.0,
                      pins=(PinRule(1, 1.0),))


def sys3d_field() -> DriftField:
    def split(t, x):
        x = np.asarray(x, dtype=np.float64)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        early = np.asarray(t, dtype=np.float64) <= 1.0
        gate = x3 > 0
        c1_l, c2_l, a2_l = _sys2d_split_late(x1, x2)
        reg2 = np.where(early & gate, bridge_pull(t, x2), 0.0)
        c1 = np.where(early, 0.0, np.where(gate, c1_l, 0.0))
        c2 = np.where(early, np.where(gate, 1.0, 0.0),
                      np.where(gate, c2_l, 0.0))
        a2 = np.where(early, 0.0, np.where(gate, a2_l, 0.0))
        reg3 = np.where(early, bridge_pull(t, x3), 0.0)
        c3 = np.ones_like(reg3)
        zero = np.zeros(np.broadcast_shapes(c1.shape, x1.shape))
        reg = np.stack(np.broadcast_arrays(zero, reg2, reg3), axis=-1)
        c = np.stack(np.broadcast_arrays(c1, c2, c3), axis=-1)
        a = np.stack(np.broadcast_arrays(zero, a2, zero), axis=-1)
        return reg, c, a

    return DriftField("sys3d", 3, 2.0, eval_sys3d, split,
                      time_breaks=(1.0,), time_pole=1.0,
                      pins=(PinRule(1, 1.0, gate_component=2), PinRule(2, 1.0)))


def scaled_sys2d(lam: float) -> DriftField:
    """Brownian rescaling of the two-component field onto [0, 2*lam]:
    b~(t, x) = lam**-0.5 * b(t/lam, x * lam**-0.5).  If X solves the
    original system driven by B, then sqrt(lam) * X_{t/lam} solves this one
    driven by the correspondingly rescaled Brownian motion."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    root = np.sqrt(lam)
    base = sys2d_field()

    def evaluate(t, x):
        return base.evaluate(np.asarray(t) / lam, np.asarray(x) / root) / root

    def split(t, x):
        reg, c, a = base.split(np.asarray(t) / lam, np.asarray(x) / root)
        # c/(x/root - a) / root = c/(x - root*a): pole coefficient invariant
        return reg / root, c, a * root

    return DriftField(f"product_block(lam={lam:g})", 2, 2.0 * lam, evaluate,
                      split, time_breaks=(lam,), time_pole=lam,
                      pins=(PinRule(1, lam, magnitude=root),))


def rescaled_block(n: int) -> DriftField:
    """Block living on [0, 1/n]: the lam = 1/(2n) rescaling."""
    if n < 1:
        raise ValueError("block index must be >= 1")
    return scaled_sys2d(1.0 / (2 * n))


CATALOG = {
    "helper_f": helper_field,
    "bessel": bessel_field,
    "nosol": nosol_field,
    "sys2d": sys2d_field,
    "sys3d": sys3d_field,
    "product_block": rescaled_block,
}
