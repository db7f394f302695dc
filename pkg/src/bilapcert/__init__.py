"""Exact-arithmetic certification of singular extremal solutions of the radial
bilaplacian Gelfand problem, with enclosures of the extremal parameter."""

from .bounds import (
    EnclosureRefused,
    LambdaStarEnclosure,
    beta0,
    gate_explicit_subsolution,
    gate_smooth_dim,
    lambda_star_enclosure,
)
from .builder import Grid, PiecewisePoly, build_psi, build_w, check_c3, read_profile, write_profile
from .certificate import Certificate, read_certificate, write_certificate
from .exact import DomainError, exp_enclosure, poly_sup_bound
from .params import DimensionParams, coarse_params, fine_params
from .pipeline import RunConfig, certify_dimension
from .solver import OperatorL, solve_branch, solve_eigen_profile
from .verifier import CheckResult, run_all_checks

__version__ = "0.1.0"
