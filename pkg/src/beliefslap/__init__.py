"""Particle-based belief-space planning with receding-horizon control."""
from .barrier import ObfParams, ObstacleField, obf_gradient, obf_value, obstacle_cost
from .belief import (ParticleBelief, StoppingRule, effective_sample_size, goal_probability,
                     map_estimate, predict, resample, update)
from .errors import (DegenerateGeometryError, DegenerateObservationError, DimensionError,
                     DiscretizationError, FilterDivergenceError, InfeasibleSeedError,
                     NoPathError, ScenarioError, SlapError)
from .geometry import Ellipsoid, ObstacleTrack, Polygon, inflate, mvee, predict_obstacle
from .homotopy import (InitialTrajectory, PathSignature, build_visibility_graph, discretize,
                       enumerate_paths, signature)
from .models import HolonomicModel, RangeBearingModel, single_integrator, youbot
from .objective import PlanningProblem, total_objective
from .plot import render_plot
from .planner import (PlanResult, PolicyConfig, RhcPolicy, SolverConfig, best_over_homotopy,
                      rhc_policy, solve_open_loop)
from .scenario import Scenario, load_scenario
from .sim import RunLog, plan_first_step, run_comparison, run_simulation

__version__ = "0.1.0"

__all__ = [
    "DegenerateGeometryError",
    "DegenerateObservationError",
    "DimensionError",
    "DiscretizationError",
    "Ellipsoid",
    "FilterDivergenceError",
    "HolonomicModel",
    "InfeasibleSeedError",
    "InitialTrajectory",
    "NoPathError",
    "ObfParams",
    "ObstacleField",
    "ObstacleTrack",
    "ParticleBelief",
    "PathSignature",
    "PlanResult",
    "PlanningProblem",
    "PolicyConfig",
    "Polygon",
    "RangeBearingModel",
    "RhcPolicy",
    "RunLog",
    "Scenario",
    "ScenarioError",
    "SlapError",
    "SolverConfig",
    "StoppingRule",
    "best_over_homotopy",
    "build_visibility_graph",
    "discretize",
    "effective_sample_size",
    "enumerate_paths",
    "goal_probability",
    "inflate",
    "load_scenario",
    "map_estimate",
    "mvee",
    "obf_gradient",
    "obf_value",
    "obstacle_cost",
    "plan_first_step",
    "predict",
    "predict_obstacle",
    "render_plot",
    "resample",
    "rhc_policy",
    "run_comparison",
    "run_simulation",
    "signature",
    "single_integrator",
    "solve_open_loop",
    "total_objective",
    "update",
    "youbot",
]

