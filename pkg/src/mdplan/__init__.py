"""Minimum-displacement planning among movable obstacles.

Two phases: a receding-horizon trajectory optimizer that treats obstacle
overlaps as soft penalties and reports how far each obstacle must move
(`planner`), then a sampling refinement that grows those displacements in
fixed increments until the world is collision-free again (`refinement`).
Scenarios, solution documents, and the bundled example domains live in
`scenario`; `cli` wraps the whole pipeline.
"""

from .dynamics import ControlBounds, DownCrossTurn, DynamicsModel, PlanarHolonomic, dynamics_residual, rollout
from .geometry import BoundingModel, OverlapRecord, Pose, Rect, Sphere, interpolate_pose, wrap_angle
from .planner import (
    GoalNotReached,
    InfeasibleStart,
    PlannerConfig,
    PlanningError,
    PlanResult,
    RequiredDisplacement,
    SolverConfig,
    Weights,
    plan,
    sum_planning_cost,
)
from .refinement import (
    DisplacementSpec,
    RefinementConfig,
    RefinementExhausted,
    RefinementResult,
    ValidationReport,
    refine,
    sample_displacement,
    validate,
)
from .scenario import (
    BUILTIN_NAMES,
    Obstacle,
    RobotSpec,
    Scenario,
    SchemaError,
    SolutionDocument,
    build_solution_document,
    builtin,
    load_scenario,
    load_scenario_file,
    parse_solution_document,
    save_scenario,
    save_scenario_file,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingModel", "BUILTIN_NAMES", "ControlBounds", "DisplacementSpec",
    "DownCrossTurn", "DynamicsModel", "GoalNotReached", "InfeasibleStart",
    "Obstacle", "OverlapRecord", "PlanarHolonomic", "PlannerConfig",
    "PlanningError", "PlanResult", "Pose", "Rect", "RefinementConfig",
    "RefinementExhausted", "RefinementResult", "RequiredDisplacement",
    "RobotSpec", "Scenario", "SchemaError", "SolutionDocument", "SolverConfig",
    "Sphere", "ValidationReport", "Weights", "build_solution_document",
    "builtin", "dynamics_residual", "interpolate_pose", "load_scenario",
    "load_scenario_file", "parse_solution_document", "plan", "refine",
    "rollout", "sample_displacement", "save_scenario", "save_scenario_file",
    "sum_planning_cost", "validate", "wrap_angle", "__version__",
]
