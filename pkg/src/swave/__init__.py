"""Spectral Galerkin / implicit exponential Euler solver for the stochastic
wave equation with nonlinear damping on (0,1)^d, d = 1, 2."""
from ._kernels import BACKEND
from .harness import ExperimentPlan, RateReport, fit_rate, spatial_study, temporal_study
from .integrator import SchemeConfig, StepDiagnostics, StepFailure, integrate, solve_implicit, step
from .noise import NoisePath, NoiseSpec, build_noise, coarsen_increments, restrict_to_grid, sample_path
from .nonlinearity import (
    CollocationPlan,
    NonlinearitySpec,
    apply_F,
    apply_F_jacobian,
    check_assumptions,
    make_cubic,
    make_plan,
    sine_analysis,
    sine_synthesis,
)
from .semigroup import apply_cosine, apply_semigroup, apply_sine
from .spectral import (
    Field,
    PairState,
    SpectralGrid,
    build_grid,
    embed,
    lambda_pow_apply,
    product_norm,
    project,
    random_initial_state,
    sobolev_norm,
)

__version__ = "0.1.0"
