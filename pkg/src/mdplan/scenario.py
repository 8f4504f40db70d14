"""Scenario data model, JSON (de)serialization, and the bundled domains.

A scenario file is a plain JSON object with top-level keys `name, robot,
start, goal, obstacles, weights, planner, refinement, world_bounds`.
Angles are radians, lengths meters, all numbers 64-bit floats. Loading is
strict: unknown keys anywhere are rejected, and errors carry the path of
the offending field. `load_scenario(save_scenario(s))` reproduces `s`
bit-exactly.

Solution documents mirror the scenario file: the full scenario is
embedded (so a solution validates standalone), followed by `trajectory`,
`controls`, `overlaps`, `displacements`, and a recomputable `summary`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .dynamics import MODEL_KINDS, ControlBounds, DownCrossTurn, DynamicsModel, PlanarHolonomic
from .geometry import BoundingModel, OverlapRecord, Pose, Rect, Sphere, place_body, sphere_overlap
from .planner import (
    MOBILITY_MODES,
    PlannerConfig,
    PlanResult,
    RequiredDisplacement,
    SolverConfig,
    Weights,
    executed_stage_costs,
    sum_planning_cost,
    terminal_cost,
)
from .refinement import DisplacementSpec, RefinementConfig, RefinementResult

BUILTIN_NAMES = ("ias", "l_corridor", "rotation_blocks", "sofa")

_ENCLOSE_TOL = 1e-9


class SchemaError(ValueError):
    """A malformed document; `path` points at the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Obstacle:
    """One world body: display shape, sphere bounding model, and mobility.

    `weight` is the planner's per-obstacle overlap penalty;
    `displacement_cost` prices each meter (or radian) of realized
    displacement in the final total. Fixed obstacles can never be
    displaced, so they carry no displacement cost.
    """

    id: str
    pose: Pose
    bounding: BoundingModel
    mobility: str = "translate"
    weight: float = 1.0
    shape: Rect | Sphere | None = None
    displacement_cost: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("obstacle id must be non-empty")
        if self.mobility not in MOBILITY_MODES:
            raise ValueError(f"unknown mobility {self.mobility!r}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"weight must be positive, got {self.weight}")
        cost = self.displacement_cost
        if cost is None:
            cost = 0.0 if self.mobility == "fixed" else 1.0
            object.__setattr__(self, "displacement_cost", cost)
        if self.mobility == "fixed" and cost != 0.0:
            raise ValueError("fixed obstacles carry no displacement cost")
        if cost < 0 or not math.isfinite(cost):
            raise ValueError(f"displacement_cost must be >= 0, got {cost}")
        if self.shape is not None:
            _check_enclosure(self.shape, self.bounding, what=f"obstacle {self.id!r}")


def _check_enclosure(shape, bounding: BoundingModel, what: str) -> None:
    """Every shape vertex (or the whole circle) must sit inside some sphere."""
    if isinstance(shape, Rect):
        for corner in shape.corners():
            if not any(
                math.hypot(corner[0] - s.center[0], corner[1] - s.center[1])
                <= s.radius + _ENCLOSE_TOL
                for s in bounding.spheres
            ):
                raise ValueError(
                    f"{what}: bounding model does not enclose shape "
                    f"(corner ({corner[0]:.4f}, {corner[1]:.4f}) uncovered)"
                )
    elif isinstance(shape, Sphere):
        if not any(
            math.hypot(shape.center[0] - s.center[0], shape.center[1] - s.center[1])
            + shape.radius
            <= s.radius + _ENCLOSE_TOL
            for s in bounding.spheres
        ):
            raise ValueError(f"{what}: bounding model does not enclose circle shape")
    else:
        raise ValueError(f"{what}: shape must be Rect or Sphere, got {type(shape).__name__}")


@dataclass(frozen=True)
class RobotSpec:
    """Robot motion model, bounding spheres, and optional display parts."""

    model: DynamicsModel
    bounding: BoundingModel
    shape: tuple = ()

    def __post_init__(self) -> None:
        parts = tuple(self.shape)
        object.__setattr__(self, "shape", parts)
        for i, part in enumerate(parts):
            _check_enclosure(part, self.bounding, what=f"robot shape part {i}")


@dataclass(frozen=True)
class Scenario:
    name: str
    robot: RobotSpec
    start: Pose
    goal: Pose
    obstacles: tuple[Obstacle, ...] = ()
    weights: Weights = field(default_factory=Weights)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    world_bounds: tuple[float, float, float, float] = (-10.0, -10.0, 10.0, 10.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        xmin, ymin, xmax, ymax = self.world_bounds
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate world_bounds {self.world_bounds}")
        for label, pose in (("start", self.start), ("goal", self.goal)):
            if not (xmin <= pose.x <= xmax and ymin <= pose.y <= ymax):
                raise ValueError(f"{label} pose outside world_bounds")
        seen = set()
        for ob in self.obstacles:
            if ob.id in seen:
                raise ValueError(f"duplicate obstacle id {ob.id!r}")
            seen.add(ob.id)
        for ob in self.obstacles:
            if ob.mobility != "fixed":
                continue
            if _bodies_overlap(self.start, self.robot.bounding, ob.pose, ob.bounding):
                raise ValueError(f"start pose collides with fixed obstacle {ob.id!r}")

    def movable(self) -> tuple[Obstacle, ...]:
        return tuple(ob for ob in self.obstacles if ob.mobility != "fixed")

    def without_obstacles(self) -> "Scenario":
        return replace(self, obstacles=())


def _bodies_overlap(pose_a, model_a, pose_b, model_b) -> bool:
    for sa in place_body(pose_a, model_a):
        for sb in place_body(pose_b, model_b):
            if sphere_overlap(sa, sb) < -_ENCLOSE_TOL:
                return True
    return False


# ---------------------------------------------------------------------------
# strict JSON parsing helpers


def _as_mapping(value, path: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected object, got {type(value).__name__}")
    return value

def _take(doc: Mapping[str, Any], path: str, required: Sequence[str], optional: Sequence[str] = ()):
    for key in doc:
        if key not in required and key not in optional:
            raise SchemaError(path, f"unknown key {key!r}")
    for key in required:
        if key not in doc:
            raise SchemaError(path, f"missing key {key!r}")


def _float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected number, got {type(value).__name__}")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected integer, got {type(value).__name__}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(path, f"expected string, got {type(value).__name__}")
    return value


def _bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(path, f"expected boolean, got {type(value).__name__}")
    return value


def _vec(value, path: str, n: int) -> tuple[float, ...]:
    if not isinstance(value, list) or len(value) != n:
        raise SchemaError(path, f"expected array of {n} numbers")
    return tuple(_float(v, f"{path}[{i}]") for i, v in enumerate(value))


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(path, f"expected array, got {type(value).__name__}")
    return value


def _build(ctor, path: str, *args, **kwargs):
    """Run a domain constructor, converting its ValueError into a SchemaError."""
    try:
        return ctor(*args, **kwargs)
    except SchemaError:
        raise
    except ValueError as e:
        raise SchemaError(path, str(e)) from e


def _parse_pose(value, path: str) -> Pose:
    return _build(Pose, path, *_vec(value, path, 3))


def _pose_doc(pose: Pose) -> list[float]:
    return [pose.x, pose.y, pose.theta]


def _parse_sphere(value, path: str) -> Sphere:
    doc = _as_mapping(value, path)
    _take(doc, path, required=("center", "radius"))
    center = _vec(doc["center"], f"{path}.center", 2)
    radius = _float(doc["radius"], f"{path}.radius")
    return _build(Sphere, path, center, radius)


def _sphere_doc(s: Sphere) -> dict:
    return {"center": [s.center[0], s.center[1]], "radius": s.radius}


def _parse_bounding(value, path: str) -> BoundingModel:
    items = _list(value, path)
    spheres = tuple(_parse_sphere(v, f"{path}[{i}]") for i, v in enumerate(items))
    return _build(BoundingModel, path, spheres)


def _bounding_doc(model: BoundingModel) -> list:
    return [_sphere_doc(s) for s in model.spheres]


def _parse_shape(value, path: str):
    doc = _as_mapping(value, path)
    kind = _string(doc.get("kind"), f"{path}.kind") if "kind" in doc else None
    if kind == "rect":
        _take(doc, path, required=("kind", "center", "half_extents", "theta"))
        return _build(
            Rect,
            path,
            _vec(doc["center"], f"{path}.center", 2),
            _vec(doc["half_extents"], f"{path}.half_extents", 2),
            _float(doc["theta"], f"{path}.theta"),
        )
    if kind == "circle":
        _take(doc, path, required=("kind", "center", "radius"))
        return _build(
            Sphere,
            path,
            _vec(doc["center"], f"{path}.center", 2),
            _float(doc["radius"], f"{path}.radius"),
        )
    raise SchemaError(f"{path}.kind", "expected 'rect' or 'circle'")


def _shape_doc(shape) -> dict:
    if isinstance(shape, Rect):
        return {
            "kind": "rect",
            "center": [shape.center[0], shape.center[1]],
            "half_extents": [shape.half_extents[0], shape.half_extents[1]],
            "theta": shape.theta,
        }
    return {"kind": "circle", "center": [shape.center[0], shape.center[1]], "radius": shape.radius}


def _parse_model(value, path: str) -> DynamicsModel:
    doc = _as_mapping(value, path)
    kind = _string(doc.get("kind", ""), f"{path}.kind")
    if kind not in MODEL_KINDS:
        raise SchemaError(f"{path}.kind", f"unknown model kind {kind!r}")
    bounds_doc = _as_mapping(doc.get("control_bounds", {}), f"{path}.control_bounds")
    _take(bounds_doc, f"{path}.control_bounds", required=("lower", "upper"))
    lower = _list(bounds_doc["lower"], f"{path}.control_bounds.lower")
    upper = _list(bounds_doc["upper"], f"{path}.control_bounds.upper")
    bounds = _build(
        ControlBounds,
        f"{path}.control_bounds",
        tuple(_float(v, f"{path}.control_bounds.lower[{i}]") for i, v in enumerate(lower)),
        tuple(_float(v, f"{path}.control_bounds.upper[{i}]") for i, v in enumerate(upper)),
    )
    if kind == "planar_holonomic":
        _take(doc, path, required=("kind", "dt", "control_bounds"))
        return _build(PlanarHolonomic, path, dt=_float(doc["dt"], f"{path}.dt"), bounds=bounds)
    _take(doc, path, required=("kind", "control_bounds"))
    return _build(DownCrossTurn, path, bounds=bounds)


def _model_doc(model: DynamicsModel) -> dict:
    doc: dict[str, Any] = {"kind": model.kind}
    if isinstance(model, PlanarHolonomic):
        doc["dt"] = model.dt
    doc["control_bounds"] = {
        "lower": list(model.bounds.lower),
        "upper": list(model.bounds.upper),
    }
    return doc


def _parse_weights(value, path: str) -> Weights:
    doc = _as_mapping(value, path)
    _take(doc, path, required=(), optional=("m_x", "m_g", "m_fixed", "m_i_scale", "w_x", "w_d"))
    kwargs: dict[str, Any] = {}
    if "m_x" in doc:
        kwargs["m_x"] = _vec(doc["m_x"], f"{path}.m_x", 3)
    if "m_g" in doc:
        kwargs["m_g"] = _vec(doc["m_g"], f"{path}.m_g", 3)
    for key in ("m_fixed", "m_i_scale", "w_x", "w_d"):
        if key in doc:
            kwargs[key] = _float(doc[key], f"{path}.{key}")
    return _build(Weights, path, **kwargs)


def _weights_doc(w: Weights) -> dict:
    return {
        "m_x": list(w.m_x),
        "m_g": list(w.m_g),
        "m_fixed": w.m_fixed,
        "m_i_scale": w.m_i_scale,
        "w_x": w.w_x,
        "w_d": w.w_d,
    }


_SOLVER_FLOATS = ("gradient_tolerance", "alpha0", "alpha_shrink", "alpha_grow", "armijo")
_SOLVER_INTS = ("max_iterations", "max_line_search")


def _parse_solver(value, path: str) -> SolverConfig:
    doc = _as_mapping(value, path)
    _take(doc, path, required=(), optional=_SOLVER_FLOATS + _SOLVER_INTS)
    kwargs: dict[str, Any] = {}
    for key in _SOLVER_FLOATS:
        if key in doc:
            kwargs[key] = _float(doc[key], f"{path}.{key}")
    for key in _SOLVER_INTS:
        if key in doc:
            kwargs[key] = _int(doc[key], f"{path}.{key}")
    return _build(SolverConfig, path, **kwargs)


_PLANNER_FLOATS = ("goal_tol_pos", "goal_tol_ang", "smoothing_eps", "fixed_standoff")
_PLANNER_INTS = ("lookahead", "max_steps", "time_substeps")
_PLANNER_STRS = ("cost_mode", "overlap_model")


def _parse_planner(value, path: str) -> PlannerConfig:
    doc = _as_mapping(value, path)
    _take(doc, path, required=(), optional=_PLANNER_FLOATS + _PLANNER_INTS + _PLANNER_STRS + ("solver",))
    kwargs: dict[str, Any] = {}
    for key in _PLANNER_FLOATS:
        if key in doc:
            kwargs[key] = _float(doc[key], f"{path}.{key}")
    for key in _PLANNER_INTS:
        if key in doc:
            kwargs[key] = _int(doc[key], f"{path}.{key}")
    for key in _PLANNER_STRS:
        if key in doc:
            kwargs[key] = _string(doc[key], f"{path}.{key}")
    if "solver" in doc:
        kwargs["solver"] = _parse_solver(doc["solver"], f"{path}.solver")
    return _build(PlannerConfig, path, **kwargs)


def _planner_doc(c: PlannerConfig) -> dict:
    return {
        "lookahead": c.lookahead,
        "max_steps": c.max_steps,
        "goal_tol_pos": c.goal_tol_pos,
        "goal_tol_ang": c.goal_tol_ang,
        "smoothing_eps": c.smoothing_eps,
        "time_substeps": c.time_substeps,
        "cost_mode": c.cost_mode,
        "overlap_model": c.overlap_model,
        "fixed_standoff": c.fixed_standoff,
        "solver": {
            "max_iterations": c.solver.max_iterations,
            "gradient_tolerance": c.solver.gradient_tolerance,
            "alpha0": c.solver.alpha0,
            "alpha_shrink": c.solver.alpha_shrink,
            "alpha_grow": c.solver.alpha_grow,
            "armijo": c.solver.armijo,
            "max_line_search": c.solver.max_line_search,
        },
    }


def _parse_refinement(value, path: str) -> RefinementConfig:
    doc = _as_mapping(value, path)
    _take(
        doc,
        path,
        required=(),
        optional=("delta", "ring_samples", "max_increments", "validation_substeps", "tolerance"),
    )
    kwargs: dict[str, Any] = {}
    for key in ("delta", "tolerance"):
        if key in doc:
            kwargs[key] = _float(doc[key], f"{path}.{key}")
    for key in ("ring_samples", "max_increments", "validation_substeps"):
        if key in doc:
            kwargs[key] = _int(doc[key], f"{path}.{key}")
    return _build(RefinementConfig, path, **kwargs)


def _refinement_doc(c: RefinementConfig) -> dict:
    return {
        "delta": c.delta,
        "ring_samples": c.ring_samples,
        "max_increments": c.max_increments,
        "validation_substeps": c.validation_substeps,
        "tolerance": c.tolerance,
    }


def _parse_obstacle(value, path: str) -> Obstacle:
    doc = _as_mapping(value, path)
    _take(
        doc,
        path,
        required=("id", "pose", "bounding", "mobility", "weight"),
        optional=("shape", "displacement_cost"),
    )
    shape = _parse_shape(doc["shape"], f"{path}.shape") if "shape" in doc else None
    cost = (
        _float(doc["displacement_cost"], f"{path}.displacement_cost")
        if "displacement_cost" in doc
        else None
    )
    return _build(
        Obstacle,
        path,
        id=_string(doc["id"], f"{path}.id"),
        pose=_parse_pose(doc["pose"], f"{path}.pose"),
        bounding=_parse_bounding(doc["bounding"], f"{path}.bounding"),
        mobility=_string(doc["mobility"], f"{path}.mobility"),
        weight=_float(doc["weight"], f"{path}.weight"),
        shape=shape,
        displacement_cost=cost,
    )


def _obstacle_doc(ob: Obstacle) -> dict:
    doc: dict[str, Any] = {
        "id": ob.id,
        "pose": _pose_doc(ob.pose),
        "bounding": _bounding_doc(ob.bounding),
        "mobility": ob.mobility,
        "weight": ob.weight,
        "displacement_cost": ob.displacement_cost,
    }
    if ob.shape is not None:
        doc["shape"] = _shape_doc(ob.shape)
    return doc


def _parse_robot(value, path: str) -> RobotSpec:
    doc = _as_mapping(value, path)
    _take(doc, path, required=("model", "bounding"), optional=("shape",))
    parts = ()
    if "shape" in doc:
        items = _list(doc["shape"], f"{path}.shape")
        parts = tuple(_parse_shape(v, f"{path}.shape[{i}]") for i, v in enumerate(items))
    return _build(
        RobotSpec,
        path,
        model=_parse_model(doc["model"], f"{path}.model"),
        bounding=_parse_bounding(doc["bounding"], f"{path}.bounding"),
        shape=parts,
    )


def _robot_doc(robot: RobotSpec) -> dict:
    doc: dict[str, Any] = {
        "model": _model_doc(robot.model),
        "bounding": _bounding_doc(robot.bounding),
    }
    if robot.shape:
        doc["shape"] = [_shape_doc(p) for p in robot.shape]
    return doc


def load_scenario(document: Mapping[str, Any]) -> Scenario:
    """Parse a scenario document; raise SchemaError naming the bad field."""
    doc = _as_mapping(document, "scenario")
    _take(
        doc,
        "scenario",
        required=("name", "robot", "start", "goal", "obstacles", "world_bounds"),
        optional=("weights", "planner", "refinement"),
    )
    obstacles = tuple(
        _parse_obstacle(v, f"scenario.obstacles[{i}]")
        for i, v in enumerate(_list(doc["obstacles"], "scenario.obstacles"))
    )
    return _build(
        Scenario,
        "scenario",
        name=_string(doc["name"], "scenario.name"),
        robot=_parse_robot(doc["robot"], "scenario.robot"),
        start=_parse_pose(doc["start"], "scenario.start"),
        goal=_parse_pose(doc["goal"], "scenario.goal"),
        obstacles=obstacles,
        weights=_parse_weights(doc.get("weights", {}), "scenario.weights"),
        planner=_parse_planner(doc.get("planner", {}), "scenario.planner"),
        refinement=_parse_refinement(doc.get("refinement", {}), "scenario.refinement"),
        world_bounds=_vec(doc["world_bounds"], "scenario.world_bounds", 4),
    )


def save_scenario(scenario: Scenario) -> dict:
    return {
        "name": scenario.name,
        "robot": _robot_doc(scenario.robot),
        "start": _pose_doc(scenario.start),
        "goal": _pose_doc(scenario.goal),
        "obstacles": [_obstacle_doc(ob) for ob in scenario.obstacles],
        "weights": _weights_doc(scenario.weights),
        "planner": _planner_doc(scenario.planner),
        "refinement": _refinement_doc(scenario.refinement),
        "world_bounds": list(scenario.world_bounds),
    }


def canonical_json(document: Mapping[str, Any]) -> str:
    """Stable byte-for-byte rendering used for every document on disk."""
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def load_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError(str(path), f"invalid JSON: {e}") from e
    return load_scenario(document)


def save_scenario_file(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(save_scenario(scenario)))


# ---------------------------------------------------------------------------
# solution documents


@dataclass
class SolutionDocument:
    """A finished run: the scenario, the trajectory, and both phase outputs."""

    scenario: Scenario
    trajectory: list[Pose]
    controls: np.ndarray
    overlaps: tuple[OverlapRecord, ...]
    required: dict[str, RequiredDisplacement]
    displacements: dict[str, DisplacementSpec]
    summary: dict


def solution_summary(
    scenario: Scenario,
    plan: PlanResult,
    refinement: RefinementResult,
) -> dict:
    """Totals the reporting layer quotes; every number derives from the parts."""
    required = {r.obstacle_id: r for r in plan.required.values()}
    sum_required = sum(r.magnitude for r in required.values())
    sum_displacement = sum(d.magnitude for d in refinement.displacements.values())
    cost_by_id = {ob.id: ob.displacement_cost for ob in scenario.obstacles}
    planning_cost = sum_planning_cost(plan)
    extra = 0.0
    for oid, spec in refinement.displacements.items():
        y = required[oid].magnitude if oid in required else 0.0
        extra += cost_by_id.get(oid, 1.0) * (spec.magnitude - y)
    displaced = sum(1 for d in refinement.displacements.values() if d.magnitude > 0)
    return {
        "planning_cost": planning_cost,
        "sum_required": sum_required,
        "sum_displacement": sum_displacement,
        "displaced_count": displaced,
        "total_cost": planning_cost + extra,
        "converged": plan.converged,
    }


def recompute_summary(doc: SolutionDocument) -> dict:
    """Re-derive a parsed solution's summary from its own parts.

    Planning cost is re-evaluated along the stored trajectory, the totals
    from the displacement entries. `converged` is solver history and passes
    through untouched. An honest document reproduces its summary exactly.
    """
    sc = doc.scenario
    stage = executed_stage_costs(
        doc.trajectory, sc.robot.bounding, sc.obstacles, sc.weights, sc.planner
    )
    planning_cost = float(
        sum(stage) + terminal_cost(doc.trajectory[-1], sc.goal, sc.weights.m_g)
    )
    cost_by_id = {ob.id: ob.displacement_cost for ob in sc.obstacles}
    sum_required = sum(r.magnitude for r in doc.required.values())
    sum_displacement = sum(d.magnitude for d in doc.displacements.values())
    extra = 0.0
    for oid, spec in doc.displacements.items():
        y = doc.required[oid].magnitude if oid in doc.required else 0.0
        extra += cost_by_id.get(oid, 1.0) * (spec.magnitude - y)
    return {
        "planning_cost": planning_cost,
        "sum_required": sum_required,
        "sum_displacement": sum_displacement,
        "displaced_count": sum(1 for d in doc.displacements.values() if d.magnitude > 0),
        "total_cost": planning_cost + extra,
        "converged": doc.summary["converged"],
    }


def _overlap_doc(rec: OverlapRecord) -> dict:
    return {
        "obstacle_id": rec.obstacle_id,
        "md": rec.md,
        "direction": [rec.direction[0], rec.direction[1]],
        "time_index": rec.time_index,
        "fraction": rec.fraction,
        "robot_sphere": rec.robot_sphere,
        "obstacle_sphere": rec.obstacle_sphere,
    }


def _parse_overlap(value, path: str) -> OverlapRecord:
    doc = _as_mapping(value, path)
    _take(
        doc,
        path,
        required=(
            "obstacle_id", "md", "direction", "time_index",
            "fraction", "robot_sphere", "obstacle_sphere",
        ),
    )
    return _build(
        OverlapRecord,
        path,
        md=_float(doc["md"], f"{path}.md"),
        direction=_vec(doc["direction"], f"{path}.direction", 2),
        time_index=_int(doc["time_index"], f"{path}.time_index"),
        robot_sphere=_int(doc["robot_sphere"], f"{path}.robot_sphere"),
        obstacle_sphere=_int(doc["obstacle_sphere"], f"{path}.obstacle_sphere"),
        obstacle_id=_string(doc["obstacle_id"], f"{path}.obstacle_id"),
        fraction=_float(doc["fraction"], f"{path}.fraction"),
    )


def _displacement_doc(
    spec: DisplacementSpec, req: RequiredDisplacement | None, delta: float
) -> dict:
    required = req.magnitude if req is not None else 0.0
    if req is None:
        direction = None
    elif req.mode == "rotation":
        direction = req.direction
    else:
        direction = [req.direction[0], req.direction[1]]
    return {
        "obstacle_id": spec.obstacle_id,
        "mode": spec.mode,
        "required": required,
        "direction": direction,
        "final": spec.magnitude,
        "increments": int(round((spec.magnitude - required) / delta)),
        "pose": _pose_doc(spec.realized_pose),
    }


def _parse_displacement(value, path: str):
    doc = _as_mapping(value, path)
    _take(
        doc,
        path,
        required=("obstacle_id", "mode", "required", "direction", "final", "increments", "pose"),
    )
    oid = _string(doc["obstacle_id"], f"{path}.obstacle_id")
    mode = _string(doc["mode"], f"{path}.mode")
    required = _float(doc["required"], f"{path}.required")
    raw_dir = doc["direction"]
    if raw_dir is None:
        direction = None
    elif mode == "rotation":
        direction = _float(raw_dir, f"{path}.direction")
    else:
        direction = _vec(raw_dir, f"{path}.direction", 2)
    spec = _build(
        DisplacementSpec,
        path,
        oid,
        mode,
        _float(doc["final"], f"{path}.final"),
        _parse_pose(doc["pose"], f"{path}.pose"),
    )
    req = None
    if direction is not None or required > 0:
        req = _build(
            RequiredDisplacement, path, oid, mode, required,
            direction if direction is not None else (1.0, 0.0),
        )
    return spec, req


def build_solution_document(
    scenario: Scenario, plan: PlanResult, refinement: RefinementResult
) -> dict:
    required = dict(plan.required)
    delta = scenario.refinement.delta
    displacements = [
        _displacement_doc(spec, required.get(oid), delta)
        for oid, spec in sorted(refinement.displacements.items())
    ]
    return {
        "scenario": save_scenario(scenario),
        "trajectory": [
            [p.x, p.y, p.theta, k] for k, p in enumerate(plan.trajectory)
        ],
        "controls": [list(map(float, u)) for u in np.asarray(plan.controls)],
        "overlaps": [_overlap_doc(r) for r in plan.overlaps],
        "displacements": displacements,
        "summary": solution_summary(scenario, plan, refinement),
    }


def parse_solution_document(document: Mapping[str, Any]) -> SolutionDocument:
    doc = _as_mapping(document, "solution")
    _take(
        doc,
        "solution",
        required=("scenario", "trajectory", "controls", "overlaps", "displacements", "summary"),
    )
    scenario = load_scenario(doc["scenario"])
    trajectory = []
    for i, item in enumerate(_list(doc["trajectory"], "solution.trajectory")):
        path = f"solution.trajectory[{i}]"
        if not isinstance(item, list) or len(item) != 4:
            raise SchemaError(path, "expected [x, y, theta, k]")
        if _int(item[3], f"{path}[3]") != i:
            raise SchemaError(path, f"step index {item[3]} out of order")
        trajectory.append(_build(Pose, path, *(_float(v, f"{path}[{j}]") for j, v in enumerate(item[:3]))))
    if not trajectory:
        raise SchemaError("solution.trajectory", "must be non-empty")
    controls_raw = _list(doc["controls"], "solution.controls")
    dim = scenario.robot.model.control_dim
    controls = np.array(
        [
            _vec(u, f"solution.controls[{i}]", dim)
            for i, u in enumerate(controls_raw)
        ]
    ).reshape(len(controls_raw), dim)
    overlaps = tuple(
        _parse_overlap(v, f"solution.overlaps[{i}]")
        for i, v in enumerate(_list(doc["overlaps"], "solution.overlaps"))
    )
    required: dict[str, RequiredDisplacement] = {}
    displacements: dict[str, DisplacementSpec] = {}
    for i, v in enumerate(_list(doc["displacements"], "solution.displacements")):
        spec, req = _parse_displacement(v, f"solution.displacements[{i}]")
        if spec.obstacle_id in displacements:
            raise SchemaError(
                f"solution.displacements[{i}]", f"duplicate obstacle {spec.obstacle_id!r}"
            )
        displacements[spec.obstacle_id] = spec
        if req is not None:
            required[spec.obstacle_id] = req
    summary_doc = _as_mapping(doc["summary"], "solution.summary")
    _take(
        summary_doc,
        "solution.summary",
        required=(
            "planning_cost", "sum_required", "sum_displacement",
            "displaced_count", "total_cost", "converged",
        ),
    )
    summary = {
        "planning_cost": _float(summary_doc["planning_cost"], "solution.summary.planning_cost"),
        "sum_required": _float(summary_doc["sum_required"], "solution.summary.sum_required"),
        "sum_displacement": _float(
            summary_doc["sum_displacement"], "solution.summary.sum_displacement"
        ),
        "displaced_count": _int(summary_doc["displaced_count"], "solution.summary.displaced_count"),
        "total_cost": _float(summary_doc["total_cost"], "solution.summary.total_cost"),
        "converged": _bool(summary_doc["converged"], "solution.summary.converged"),
    }
    return SolutionDocument(
        scenario=scenario,
        trajectory=trajectory,
        controls=controls,
        overlaps=overlaps,
        required=required,
        displacements=displacements,
        summary=summary,
    )


# ---------------------------------------------------------------------------
# bundled domains


def _disc_obstacle(oid: str, x: float, y: float, r: float, mobility="translate", weight=1.0) -> Obstacle:
    return Obstacle(
        id=oid,
        pose=Pose(x, y, 0.0),
        bounding=BoundingModel((Sphere((0.0, 0.0), r),)),
        mobility=mobility,
        weight=weight,
        shape=Sphere((0.0, 0.0), r),
    )


def covering_spheres(half_extents: tuple[float, float], segments: int | None = None) -> BoundingModel:
    """Chain of equal spheres along a rectangle's long axis, corners covered.

    With k segments each sphere covers a slab of length 2L/k and has radius
    hypot(short_half, L/k). The default k keeps segment half-length at or
    below the short half-extent; passing a larger `segments` trades sphere
    count for a tighter hull (less bleed past the long faces).
    """
    hx, hy = half_extents
    along_x = hx >= hy
    long_half, short_half = (hx, hy) if along_x else (hy, hx)
    k = segments if segments is not None else max(1, math.ceil(long_half / short_half))
    seg = long_half / k
    radius = math.hypot(short_half, seg)
    centers = [(-long_half + (2 * i + 1) * seg) for i in range(k)]
    spheres = tuple(
        Sphere((c, 0.0) if along_x else (0.0, c), radius) for c in centers
    )
    return BoundingModel(spheres)


def _rect_obstacle(
    oid: str, x: float, y: float, theta: float, hx: float, hy: float,
    mobility="translate", weight=1.0, segments: int | None = None,
) -> Obstacle:
    return Obstacle(
        id=oid,
        pose=Pose(x, y, theta),
        bounding=covering_spheres((hx, hy), segments),
        mobility=mobility,
        weight=weight,
        shape=Rect((0.0, 0.0), (hx, hy), 0.0),
    )


def _ias(seed: int | None) -> Scenario:
    rng = np.random.default_rng(0 if seed is None else seed)
    obstacles: list[Obstacle] = []
    # Corridor walls: tangent discs, impassable but not mutually overlapping.
    for i in range(11):
        x = -0.5 + 1.0 * i
        obstacles.append(_disc_obstacle(f"wall_n_{i:02d}", x, 1.9, 0.5, mobility="fixed"))
        obstacles.append(_disc_obstacle(f"wall_s_{i:02d}", x, -1.9, 0.5, mobility="fixed"))
    # 35 movable discs on a jittered 7x5 grid filling the corridor.
    jitter = rng.uniform(-0.05, 0.05, size=(35, 2))
    idx = 0
    for col in range(7):
        for row in range(5):
            x = 1.8 + 0.85 * col + jitter[idx, 0]
            y = -1.1 + 0.55 * row + jitter[idx, 1]
            obstacles.append(_disc_obstacle(f"disc_{idx:02d}", x, y, 0.22))
            idx += 1
    robot = RobotSpec(
        model=PlanarHolonomic(dt=0.1, bounds=ControlBounds.symmetric((1.0, 1.0, 1.0))),
        bounding=BoundingModel((Sphere((0.0, 0.0), 0.3),)),
        shape=(Sphere((0.0, 0.0), 0.3),),
    )
    return Scenario(
        name="ias",
        robot=robot,
        start=Pose(0.3, 0.0, 0.0),
        goal=Pose(8.2, 0.0, 0.0),
        obstacles=tuple(obstacles),
        weights=Weights(m_g=(4.0, 4.0, 0.2), m_fixed=400.0),
        planner=PlannerConfig(fixed_standoff=0.06),
        refinement=RefinementConfig(max_increments=12000),
        world_bounds=(-1.5, -2.6, 10.5, 2.6),
    )


def _l_corridor(seed: int | None) -> Scenario:
    obstacles = [
        _rect_obstacle("wall_n", 3.5, 1.2, 0.0, 4.0, 0.2, mobility="fixed"),
        _rect_obstacle("wall_s", 3.5, -1.2, 0.0, 4.0, 0.2, mobility="fixed"),
        _disc_obstacle("crate_a", 2.2, 0.0, 0.62),
        _disc_obstacle("crate_b", 3.6, 0.18, 0.62),
        _disc_obstacle("crate_c", 5.0, -0.18, 0.62),
    ]
    # L-shaped body: vertical leg plus a foot pointing along +x.
    leg = Rect((0.0, 0.2), (0.1, 0.3), 0.0)
    foot = Rect((0.15, 0.0), (0.25, 0.1), 0.0)
    bounding = BoundingModel(
        (
            Sphere((0.0, 0.32), 0.206),
            Sphere((0.0, 0.0), 0.1415),
            Sphere((0.25, 0.0), 0.1805),
        )
    )
    robot = RobotSpec(
        model=PlanarHolonomic(dt=0.1, bounds=ControlBounds.symmetric((1.0, 1.0, 1.0))),
        bounding=bounding,
        shape=(leg, foot),
    )
    return Scenario(
        name="l_corridor",
        robot=robot,
        start=Pose(0.4, 0.0, 0.0),
        goal=Pose(6.6, 0.0, 0.0),
        obstacles=tuple(obstacles),
        weights=Weights(m_g=(4.0, 4.0, 0.5), m_fixed=400.0),
        planner=PlannerConfig(fixed_standoff=0.06),
        refinement=RefinementConfig(max_increments=8600),
        world_bounds=(-0.6, -1.6, 7.6, 1.6),
    )


def _rotation_blocks(seed: int | None) -> Scenario:
    obstacles = [
        _rect_obstacle("band_n", 2.0, 1.05, 0.0, 3.0, 0.25, mobility="fixed", segments=24),
        _rect_obstacle("band_s", 2.0, -1.05, 0.0, 3.0, 0.25, mobility="fixed", segments=24),
        # Double doors sealing the band, wedged into the walls and each
        # other; only rotation about their centers opens a passage.
        _rect_obstacle("block_n", 2.0, 0.44, 0.0, 0.11, 0.46, mobility="rotate"),
        _rect_obstacle("block_s", 2.0, -0.44, 0.0, 0.11, 0.46, mobility="rotate"),
    ]
    robot = RobotSpec(
        model=DownCrossTurn(bounds=ControlBounds.symmetric((0.15, 0.15, 0.3))),
        bounding=BoundingModel((Sphere((0.0, 0.0), 0.08),)),
        shape=(Sphere((0.0, 0.0), 0.08),),
    )
    return Scenario(
        name="rotation_blocks",
        robot=robot,
        start=Pose(-0.5, 0.0, 0.0),
        goal=Pose(4.5, 0.0, 0.0),
        obstacles=tuple(obstacles),
        weights=Weights(m_g=(4.0, 4.0, 0.2), m_fixed=400.0),
        planner=PlannerConfig(fixed_standoff=0.06),
        refinement=RefinementConfig(max_increments=8300),
        world_bounds=(-1.5, -1.8, 6.0, 1.8),
    )


def _sofa(seed: int | None) -> Scenario:
    obstacles = [
        _rect_obstacle("wall_s", 4.0, -0.2, 0.0, 4.2, 0.2, mobility="fixed"),
        _rect_obstacle("wall_n", 4.0, 6.2, 0.0, 4.2, 0.2, mobility="fixed"),
        _rect_obstacle("wall_w", -0.2, 3.0, 0.0, 0.2, 3.2, mobility="fixed"),
        _rect_obstacle("wall_e", 8.2, 3.0, 0.0, 0.2, 3.2, mobility="fixed"),
    ]
    # A sofa barrier across the room, too tight for the robot to thread.
    for i, y in enumerate((0.82, 2.16, 3.50, 4.84)):
        obstacles.append(
            _rect_obstacle(f"sofa_{i}", 4.0, y, math.pi / 2.0, 0.55, 0.22)
        )
    robot = RobotSpec(
        model=PlanarHolonomic(dt=0.1, bounds=ControlBounds.symmetric((1.0, 1.0, 1.0))),
        bounding=BoundingModel((Sphere((0.0, 0.0), 0.35),)),
        shape=(Sphere((0.0, 0.0), 0.35),),
    )
    return Scenario(
        name="sofa",
        robot=robot,
        start=Pose(1.2, 1.0, 0.0),
        goal=Pose(6.8, 5.0, 0.0),
        obstacles=tuple(obstacles),
        weights=Weights(m_g=(4.0, 4.0, 0.2), m_fixed=400.0),
        planner=PlannerConfig(fixed_standoff=0.06),
        refinement=RefinementConfig(max_increments=11700),
        world_bounds=(-0.6, -0.6, 8.6, 6.6),
    )


_BUILTINS = {
    "ias": _ias,
    "l_corridor": _l_corridor,
    "rotation_blocks": _rotation_blocks,
    "sofa": _sofa,
}


def builtin(name: str, seed: int | None = None) -> Scenario:
    """One of the bundled domains; `seed` re-jitters layouts that use it."""
    if name not in _BUILTINS:
        raise ValueError(f"unknown builtin scenario {name!r} (have {', '.join(BUILTIN_NAMES)})")
    return _BUILTINS[name](seed)
