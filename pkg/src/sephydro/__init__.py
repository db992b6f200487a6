"""Open symmetric exclusion process on lattice ball exteriors, with its
hydrodynamic density limit cross-validated through duality, Bessel
first-passage distributions, and radial heat-equation solvers."""

from ._backend import USE_NUMBA, backend_name
from .domain import DomainSpec, OuterMode, SiteClass, build_domain, classify
from .duality import (GeneratorKind, LatticeGraph, StateSpaceTooLarge,
                      build_generator, check_duality, dual_absorption_prob,
                      duality_fn, expectation)
from .harness import (ComparisonReport, ExperimentConfig, NonIdentifiable,
                      convergence_study, fit_time_scale, run_experiment)
from .hitting import (BoundRegime, HittingSpec, InversionNotConverged,
                      hitting_cdf, hitting_cdf_laplace, hitting_cdf_profile,
                      hitting_density_bound, tail_value)
from .hydro import (RadialField, big_n, neumann_constant, pde_residual, phi,
                    phi_profile, solve_height_pde, solve_radial_heat)
from .process import (BoundaryKind, Configuration, DensityEstimate, Frozen,
                      ProcessParams, density_profile, height_function,
                      jump_rate, map_time, run_replica, step)
from .specfun import Underflow, bessel_k, bessel_k_prime, erfc, gamma

__version__ = "0.1.0"
