"""Nonlocal Fokker-Planck equations for SDEs driven by tempered stable Levy noise."""

__version__ = "0.1.0"

from .levy import (
    TemperedStableParams,
    default_c_alpha,
    levy_density,
    second_moment_rate,
)
from .montecarlo import McConfig, empirical_density, l1_distance, sample_increment, simulate_paths
from .solver import (
    DensityField,
    DomainTransform,
    DriftSpec,
    Grid1D,
    GridMode,
    InstabilityError,
    SolverConfig,
    flux_split,
    gaussian_initial,
    max_stable_dt,
    rhs_bounded,
    rhs_unbounded,
    solve,
    step_euler,
    total_mass,
    transform_to_standard,
)
from .special import riemann_zeta, tempered_tail_weight, upper_incomplete_gamma
from .zakai import (
    ObservationModel,
    ObservationPath,
    run_filter,
    simulate_signal_observation,
    zakai_step,
)

__all__ = [
    "__version__",
    "TemperedStableParams",
    "default_c_alpha",
    "levy_density",
    "second_moment_rate",
    "McConfig",
    "empirical_density",
    "l1_distance",
    "sample_increment",
    "simulate_paths",
    "DensityField",
    "DomainTransform",
    "DriftSpec",
    "Grid1D",
    "GridMode",
    "InstabilityError",
    "SolverConfig",
    "flux_split",
    "gaussian_initial",
    "max_stable_dt",
    "rhs_bounded",
    "rhs_unbounded",
    "solve",
    "step_euler",
    "total_mass",
    "transform_to_standard",
    "riemann_zeta",
    "tempered_tail_weight",
    "upper_incomplete_gamma",
    "ObservationModel",
    "ObservationPath",
    "run_filter",
    "simulate_signal_observation",
    "zakai_step",
]
