"""Multi-day needs-based activity demand model."""
from .errors import ConfigError, DomainError, HorizonCapError, InfeasibleError
from .model import (
    ActivityPattern,
    CobbDouglas,
    FeasibilityReport,
    Horizon,
    InventoryTrajectory,
    Linear,
    ModelParams,
    Piecewise,
    ScenarioInputs,
    SolveResult,
    check_feasibility,
    consumption_vector,
    evaluate_objective,
    production,
    reconstruct_trajectory,
)
from .pwl import PwlFitConfig, fit_pwl, fit_pwl_path
from .solver import (
    ConditionedProblem,
    reformed_objective,
    slopes,
    solve_conditioned,
    solve_full,
    solve_multiweek,
)
from .oracle import oracle_full_tiny, oracle_gradient, oracle_grid
from .zones import ZoneScenario
from .empirical import (
    FixedParams,
    Observations,
    PopulationParams,
    RandomParams,
    SimulatedLikelihood,
    sample_choice_set,
    simulated_loglik,
)
from .estimate import loglik_surface, maximize
from .synth import ecommerce_preset, generate_population, generate_scenario, grocery_preset, simulate_patterns

__version__ = "0.1.0"
