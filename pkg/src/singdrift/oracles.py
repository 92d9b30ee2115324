"""Independently derived reference quantities for the verification suite.

Each oracle is built from a closed form or quadrature that never touches
the SDE integrator, so oracle and integrator form genuinely independent
routes to the same number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import erf as _erf

from .brownian import BrownianPath, standard_normals


@dataclass(frozen=True)
class MarginalLaw:
    """A one-dimensional law given by its cdf, pdf (optional), and a
    seeded sampler drawing from the same representation."""

    description: str
    cdf: Callable
    pdf: Callable
    sampler: Callable
    mean: Callable


def bes3_bridge_marginal(t: float) -> MarginalLaw:
    """Time-t marginal of the positive bridge pinned to 1 at time 1.

    Representation: the norm of a 3-D Gaussian vector with mean t*v
    (|v| = 1) and covariance t(1-t) I -- the time-t marginal of a 3-D
    Brownian bridge from 0 to a unit vector.  The radial density is

        f(r) = r / (mu sig sqrt(2 pi)) *
               (exp(-(r-mu)^2/(2 sig^2)) - exp(-(r+mu)^2/(2 sig^2)))

    with mu = t, sig^2 = t(1-t); the cdf is its quadrature (absolute
    tolerance 1e-9) and the sampler draws the Gaussian vector directly.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("the marginal law is defined for t in (0, 1)")
    mu = t
    sig = math.sqrt(t * (1.0 - t))
    norm = 1.0 / (mu * sig * math.sqrt(2.0 * math.pi))

    def pdf(r):
        r = np.asarray(r, dtype=np.float64)
        out = norm * r * (np.exp(-((r - mu) ** 2) / (2 * sig * sig))
                          - np.exp(-((r + mu) ** 2) / (2 * sig * sig)))
        return np.where(r > 0, out, 0.0)

    def cdf_scalar(r):
        if r <= 0:
            return 0.0
        hi = mu + 12 * sig
        if r >= hi:
            return 1.0
        val, _err = quad(pdf, 0.0, r, epsabs=1e-9, epsrel=1e-9, limit=200)
        return min(max(val, 0.0), 1.0)

    cdf = np.vectorize(cdf_scalar, otypes=[np.float64])

    def sampler(n, seed, stream_id=0):
        z = standard_normals(seed, stream_id, 0, 0, 3 * n).reshape(n, 3)
        z *= sig
        z[:, 0] += mu
        return np.sqrt(np.sum(z * z, axis=1))

    def mean():
        val, _err = quad(lambda r: r * pdf(r), 0.0, mu + 12 * sig,
                         epsabs=1e-9, epsrel=1e-9, limit=200)
        return val

    return MarginalLaw(f"bridge-to-1 marginal at t={t:g}", cdf, pdf, sampler, mean)


def heat_sgn(x):
    """E[sgn(x + Z)] with Z ~ N(0, 1/2): the half-time heat smoothing of
    the sign function.  Equals erf(x); strictly inside (-1, 1) off 0."""
    return _erf(x)


def heat_sgn_quadrature(x: float, t: float = 0.5) -> float:
    """The same smoothing by direct Gaussian quadrature (independent route)."""
    def integrand(y):
        return math.copysign(1.0, y) * math.exp(-(x - y) ** 2 / (2 * t)) \
            / math.sqrt(2 * math.pi * t)
    lo, hi = x - 14 * math.sqrt(t), x + 14 * math.sqrt(t)
    val, _err = quad(integrand, lo, hi, points=[0.0] if lo < 0 < hi else None,
                     epsabs=1e-12, limit=200)
    return val


def bridge_drift_rate(t):
    """The deterministic pull rate 1/(1-t) whose removal turns the drifted
    path back into a Brownian motion under the reweighted measure."""
    t = np.asarray(t, dtype=np.float64)
    return 1.0 / (1.0 - t)


def girsanov_log_weights(nodes: np.ndarray, T: float):
    """Left-endpoint discretization pieces for the exponential-martingale
    weight on [0, T]: returns (theta at left nodes, dt), T < 1 a node."""
    if T >= 1.0:
        raise ValueError("the reweighting kernel has a pole at t = 1")
    i = int(np.searchsorted(nodes, T))
    if i >= nodes.size or nodes[i] != T:
        raise ValueError("T must be a grid node")
    t = nodes[:i]
    return bridge_drift_rate(t), np.diff(nodes[:i + 1])


def girsanov_density(path: BrownianPath, T: float, component: int = 0) -> float:
    """exp(-sum theta_k dB_k - 1/2 sum theta_k^2 dt_k), theta = 1/(1-t).

    The left-endpoint product form has unit expectation exactly (each
    factor has conditional mean 1), which is the testable normalization.
    Strictly positive by construction.
    """
    theta, dt = girsanov_log_weights(path.grid.nodes, T)
    db = np.diff(path.values[component, :theta.size + 1])
    log_rho = -np.sum(theta * db) - 0.5 * np.sum(theta * theta * dt)
    return float(np.exp(log_rho))


def girsanov_density_batch(nodes: np.ndarray, increments: np.ndarray,
                           T: float) -> np.ndarray:
    """Vectorized density over (batch, n_steps) increments on [0, T]."""
    theta, dt = girsanov_log_weights(nodes, T)
    if increments.shape[1] != theta.size:
        raise ValueError("increments do not match the grid on [0, T]")
    log_rho = -(increments @ theta) - 0.5 * np.sum(theta * theta * dt)
    return np.exp(log_rho)


def gaussian_sign_correlation(rho: float) -> float:
    """E[sgn(U) sgn(V)] for jointly Gaussian (U, V) with correlation rho:
    (2/pi) arcsin(rho)."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    return (2.0 / math.pi) * math.asin(rho)


def sign_corr_constant() -> float:
    """(2/pi) arcsin(sqrt(1/2)): the sign correlation between a Brownian
    endpoint B(1) and its future increment B(1) - B(1/2).  Equals 1/2
    exactly in exact arithmetic."""
    return gaussian_sign_correlation(math.sqrt(0.5))
