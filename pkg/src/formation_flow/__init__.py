"""Distance-based gradient formation control with a virtual out-of-plane coordinate."""
from .analysis import (
    BasinStats,
    Classification,
    EquilibriumReport,
    InitSampler,
    classify,
    monte_carlo_basin,
    refine_equilibrium,
    sampler_fixed,
    sampler_uniform_box,
    verify_lift_correspondence,
)
from .config import PRESETS, Scenario
from .dynamics import IntegratorConfig, Method, TerminalReason, Trajectory, integrate, locked_initial
from .energy import EdgeError, EnergySystem, Mode, edge_errors, gradient, hessian, potential
from .estimator import FormationFlow
from .exceptions import (
    ConfigError,
    FormationError,
    InfeasibleEmbeddingError,
    InvalidArgumentError,
    NumericalError,
    RefinementFailedError,
)
from .geometry import (
    DistanceSpec,
    FormationGraph,
    LockedState,
    Realizability,
    Realization,
    are_congruent,
    cayley_menger_det,
    classify_realizability,
    complete_graph,
    embed_k4_planar,
    lift_distances,
    lift_locked_to_3d,
    triangle_feasible,
)

__version__ = "0.1.0"
