"""Backstepping synthesis and incremental-stability verification for
stochastic Hamiltonian systems with jumps."""

__version__ = "0.1.0"

from .backstepping import (
    BacksteppingGains,
    ComparisonFunctions,
    Controller,
    comparison_functions,
    derive_constants,
    gain_lower_bound,
    gains_for_system,
    inverse_transform,
    metric,
    metric_equivalence_bounds,
    synthesize,
    transform,
)
from .errors import (
    ConfigError,
    ContractError,
    DivergenceError,
    DomainError,
    GainBoundError,
    SingularMatrixError,
    UnsupportedOrderError,
)
from .integrator import NoisePath, Trajectory, sample_noise, simulate, simulate_pair, step
from .lyapunov import (
    GeneratorBreakdown,
    generator_evaluate,
    lyapunov_value,
    sample_dissipation,
    young_bound,
)
from .model import (
    DriftNoiseConstants,
    HamiltonianSystem,
    JumpDiffusionSystem,
    LipschitzConstants,
    ValidityBox,
    estimate_lipschitz,
    eval_eta,
    mass_derivative,
    to_jump_diffusion,
)
from .montecarlo import BoundReport, EnsembleStats, child_seeds, estimate_moment, verify_bound
from .pendulum import PendulumParams, build_pendulum, default_box, paper_controller

__all__ = [
    "__version__",
    "BacksteppingGains", "ComparisonFunctions", "Controller",
    "comparison_functions", "derive_constants", "gain_lower_bound",
    "gains_for_system", "inverse_transform", "metric",
    "metric_equivalence_bounds", "synthesize", "transform",
    "ConfigError", "ContractError", "DivergenceError", "DomainError",
    "GainBoundError", "SingularMatrixError", "UnsupportedOrderError",
    "NoisePath", "Trajectory", "sample_noise", "simulate", "simulate_pair", "step",
    "GeneratorBreakdown", "generator_evaluate", "lyapunov_value",
    "sample_dissipation", "young_bound",
    "DriftNoiseConstants", "HamiltonianSystem", "JumpDiffusionSystem",
    "LipschitzConstants", "ValidityBox", "estimate_lipschitz", "eval_eta",
    "mass_derivative", "to_jump_diffusion",
    "BoundReport", "EnsembleStats", "child_seeds", "estimate_moment", "verify_bound",
    "PendulumParams", "build_pendulum", "default_box", "paper_controller",
]
