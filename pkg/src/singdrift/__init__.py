"""singdrift: constructing and verifying solutions of singular-drift SDEs.

The library builds, on one shared Brownian trajectory, both the unique
adapted solution of a coupled singular-drift system and its provably
non-adapted path-by-path companions, and verifies every checkable
property by seeded Monte Carlo: sign preservation, pinned endpoints,
future-sign identities, distributional laws, change-of-measure
normalization, and non-existence signatures.
"""

from ._version import __version__
from .brownian import (BrownianPath, TimeGrid, bridge_grid, generate,
                       increment, path_to_csv, refine_midpoints, restrict,
                       uniform_grid)
from .constructors import (ConstructionOutput, TieError, build_2d_pathbypath,
                           build_nonadapted_3d, build_strong_3d,
                           duplicate_distance, duplicate_pair,
                           probe_nosolution)
from .drifts import (DriftField, eval_bessel, eval_helper_f, eval_nosol,
                     eval_sys2d, eval_sys3d, bessel_field, helper_field,
                     nosol_field, rescaled_block, scaled_sys2d, sys2d_field,
                     sys3d_field, zero_field)
from .integrator import (IntegrationError, SchemeOptions, SolutionPath,
                         bessel_implicit_step, integrate, residual,
                         write_solution_csv)
from .oracles import (MarginalLaw, bes3_bridge_marginal,
                      gaussian_sign_correlation, girsanov_density, heat_sgn,
                      sign_corr_constant)
from .scenarios import ScenarioConfig, ScenarioReport, run, sweep
from .stats import TestResult, binned_conditional_mean, ks_test, mean_ci

__all__ = [
    "__version__",
    "BrownianPath", "TimeGrid", "bridge_grid", "generate", "increment",
    "path_to_csv", "refine_midpoints", "restrict", "uniform_grid",
    "ConstructionOutput", "TieError", "build_2d_pathbypath",
    "build_nonadapted_3d", "build_strong_3d", "duplicate_distance",
    "duplicate_pair", "probe_nosolution",
    "DriftField", "eval_bessel", "eval_helper_f", "eval_nosol", "eval_sys2d",
    "eval_sys3d", "bessel_field", "helper_field", "nosol_field",
    "rescaled_block", "scaled_sys2d", "sys2d_field", "sys3d_field",
    "zero_field",
    "IntegrationError", "SchemeOptions", "SolutionPath",
    "bessel_implicit_step", "integrate", "residual", "write_solution_csv",
    "MarginalLaw", "bes3_bridge_marginal", "gaussian_sign_correlation",
    "girsanov_density", "heat_sgn", "sign_corr_constant",
    "ScenarioConfig", "ScenarioReport", "run", "sweep",
    "TestResult", "binned_conditional_mean", "ks_test", "mean_ci",
]
