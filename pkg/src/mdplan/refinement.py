"""Displacement sampling: turn required displacements into a feasible layout.

Phase two. The planner hands over, per obstacle, the deepest overlap it
left behind. This module samples displaced obstacle poses on rings around
each obstacle's original location (or rotations about its center), grows
the magnitudes in fixed increments whenever no candidate clears, and stops
once the whole configuration validates: obstacles mutually disjoint and
the swept trajectory collision-free.

The validator here is the single source of truth for feasibility. The
refinement loop, the solution checker in the CLI, and the test suite all
call the same sweep, so a configuration accepted here is exactly what
later checks will accept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    BoundingModel,
    Pose,
    Rect,
    Sphere,
    interpolate_pose,
    place_offsets,
    place_shape,
    point_rect_overlap,
    wrap_angle,
)
from .planner import ObstacleLike, RequiredDisplacement


class RefinementExhausted(Exception):
    """The increment cap was hit: the scenario is geometrically jammed."""

    def __init__(self, obstacle_id: str, magnitude: float):
        self.obstacle_id = obstacle_id
        self.magnitude = magnitude
        super().__init__(
            f"no feasible displacement for obstacle {obstacle_id!r} up to magnitude {magnitude:.3f}"
        )


@dataclass(frozen=True)
class RefinementConfig:
    """Sampling resolution and safety caps for the refinement loop."""

    delta: float = 0.01
    ring_samples: int = 32
    max_increments: int = 3000
    # Trajectory sub-sampling used for every feasibility check; finer than
    # the planner's overlap sweep so accepted layouts stay accepted.
    validation_substeps: int = 10
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.ring_samples < 4:
            raise ValueError("ring_samples must be >= 4")
        if self.max_increments < 1:
            raise ValueError("max_increments must be >= 1")
        if self.validation_substeps < 1:
            raise ValueError("validation_substeps must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class DisplacementSpec:
    """Final displacement of one obstacle: magnitude plus realized pose."""

    obstacle_id: str
    mode: str  # "translation" | "rotation"
    magnitude: float
    realized_pose: Pose

    def __post_init__(self) -> None:
        if self.mode not in ("translation", "rotation"):
            raise ValueError(f"unknown displacement mode {self.mode!r}")
        if self.magnitude < 0:
            raise ValueError("magnitude must be >= 0")


@dataclass(frozen=True)
class Violation:
    """One colliding pair found by the validator; a is "robot" for sweep hits."""

    kind: str  # "obstacle_obstacle" | "robot_obstacle"
    a: str
    b: str
    depth: float
    time_index: int | None = None
    point_a: tuple[float, float] = (0.0, 0.0)
    point_b: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...]


@dataclass(frozen=True)
class TraceEvent:
    obstacle_id: str
    event: str  # "accept" | "increment" | "reenter"
    magnitude: float
    detail: str = ""


@dataclass(frozen=True)
class RefinementResult:
    displacements: Mapping[str, DisplacementSpec]
    iterations: Mapping[str, int]
    total_displacement: float
    total_cost: float
    trace: tuple[TraceEvent, ...]

    def displaced_count(self) -> int:
        return sum(1 for d in self.displacements.values() if d.magnitude > 0)


def sample_displacement(
    obstacle: ObstacleLike,
    y: float,
    mode: str,
    n: int,
    preferred_direction,
) -> list[Pose]:
    """Candidate displaced poses at exact magnitude y from the original pose.

    Translation candidates lie on the circle of radius y about the
    obstacle's original position (orientation untouched), ordered by
    angular distance from preferred_direction with ties breaking toward
    the lower sample index. Rotation candidates spin in place by +-y,
    preferred sign first. y = 0 returns just the original pose.
    """
    if y < 0:
        raise ValueError("magnitude must be >= 0")
    if n < 1:
        raise ValueError("need at least one sample")
    pose = obstacle.pose
    if y == 0.0:
        return [pose]
    if mode == "rotation":
        sign = 1.0 if preferred_direction is None else (1.0 if float(preferred_direction) >= 0 else -1.0)
        first = Pose(pose.x, pose.y, pose.theta + sign * y)
        second = Pose(pose.x, pose.y, pose.theta - sign * y)
        # +-pi (and any full-turn alias) collapse to one pose.
        if abs(wrap_angle(first.theta - second.theta)) < 1e-12 or n == 1:
            return [first]
        return [first, second]
    if mode != "translation":
        raise ValueError(f"unknown displacement mode {mode!r}")
    if preferred_direction is None:
        base = 0.0
    else:
        dx, dy = float(preferred_direction[0]), float(preferred_direction[1])
        base = math.atan2(dy, dx) if math.hypot(dx, dy) > 1e-12 else 0.0
    order = sorted(range(n), key=lambda k: (abs(wrap_angle(2.0 * math.pi * k / n)), k))
    out = []
    for k in order:
        a = base + 2.0 * math.pi * k / n
        out.append(Pose(pose.x + y * math.cos(a), pose.y + y * math.sin(a), pose.theta))
    return out


class _SweptTrajectory:
    """Trajectory samples with robot geometry, reused across many checks."""

    def __init__(self, trajectory: Sequence[Pose], robot: BoundingModel, substeps: int, overlap_model: str):
        if not trajectory:
            raise ValueError("trajectory must be non-empty")
        self.model = overlap_model
        samples: list[tuple[int, Pose]] = []
        for k in range(len(trajectory) - 1):
            for j in range(substeps):
                samples.append((k, interpolate_pose(trajectory[k], trajectory[k + 1], j / substeps)))
        samples.append((len(trajectory) - 1, trajectory[-1]))
        self.time_index = np.array([k for k, _ in samples])
        if overlap_model == "point_rect":
            off0 = robot.offsets()[0]
            self.points = np.array([p.apply(off0) for _, p in samples])
        else:
            offsets = robot.offsets()
            self.radii = robot.radii()
            self.points = np.stack([place_offsets(p, offsets) for _, p in samples])

    def clearance_spheres(self, centers: np.ndarray, radii: np.ndarray):
        """Min signed distance of robot spheres vs the given spheres, with its sample index."""
        diff = self.points[:, :, None, :] - centers[None, None, :, :]
        dist = np.linalg.norm(diff, axis=3)
        sd = dist - (self.radii[None, :, None] + radii[None, None, :])
        flat = sd.reshape(sd.shape[0], -1)
        per_sample = flat.min(axis=1)
        at = int(per_sample.argmin())
        j, m = np.unravel_index(int(flat[at].argmin()), sd.shape[1:])
        return float(per_sample[at]), at, self.points[at, j], centers[m]

    def clearance_point_shape(self, world_shape):
        if isinstance(world_shape, Rect):
            sd = np.array([point_rect_overlap(p, world_shape) for p in self.points])
            at = int(sd.argmin())
            return float(sd[at]), at, self.points[at], np.asarray(world_shape.center)
        diff = self.points - np.asarray(world_shape.center)
        sd = np.linalg.norm(diff, axis=1) - world_shape.radius
        at = int(sd.argmin())
        return float(sd[at]), at, self.points[at], np.asarray(world_shape.center)


def _obstacle_pair_clearance(ob_a, pose_a, ob_b, pose_b):
    """Min signed sphere distance between two placed obstacles, with closest centers."""
    ca = place_offsets(pose_a, ob_a.bounding.offsets())
    cb = place_offsets(pose_b, ob_b.bounding.offsets())
    diff = ca[:, None, :] - cb[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    sd = dist - (ob_a.bounding.radii()[:, None] + ob_b.bounding.radii()[None, :])
    i, j = np.unravel_index(int(sd.argmin()), sd.shape)
    return float(sd[i, j]), ca[i], cb[j]


def _robot_obstacle_clearance(swept: _SweptTrajectory, ob, pose):
    if swept.model == "point_rect":
        shape = getattr(ob, "shape", None)
        if isinstance(shape, (Rect, Sphere)):
            return swept.clearance_point_shape(place_shape(pose, shape))
        raise ValueError(f"obstacle {ob.id!r} has no rectangle or circle shape")
    return swept.clearance_spheres(
        place_offsets(pose, ob.bounding.offsets()), ob.bounding.radii()
    )


def validate(
    obstacles: Sequence[ObstacleLike],
    poses: Mapping[str, Pose],
    trajectory: Sequence[Pose],
    robot: BoundingModel,
    time_substeps: int = 10,
    tol: float = 1e-6,
    overlap_model: str = "spheres",
) -> ValidationReport:
    """Check a full configuration against both feasibility conditions.

    Obstacles take their pose from `poses` when present, otherwise their
    own. Every obstacle pair with a movable member must be disjoint
    (fixed-fixed pairs are static scenery, e.g. wall segments that
    deliberately overlap), and the trajectory, swept at sub-step
    resolution, must clear every obstacle. Overlaps no deeper than tol
    count as contact.
    """
    if not trajectory:
        raise ValueError("trajectory must be non-empty")
    placed = [(ob, poses.get(ob.id, ob.pose)) for ob in obstacles]
    violations: list[Violation] = []
    for i in range(len(placed)):
        ob_a, pose_a = placed[i]
        for j in range(i + 1, len(placed)):
            ob_b, pose_b = placed[j]
            if ob_a.mobility == "fixed" and ob_b.mobility == "fixed":
                continue
            sd, pa, pb = _obstacle_pair_clearance(ob_a, pose_a, ob_b, pose_b)
            if sd < -tol:
                violations.append(
                    Violation(
                        kind="obstacle_obstacle",
                        a=ob_a.id,
                        b=ob_b.id,
                        depth=-sd,
                        point_a=(float(pa[0]), float(pa[1])),
                        point_b=(float(pb[0]), float(pb[1])),
                    )
                )
    swept = _SweptTrajectory(trajectory, robot, time_substeps, overlap_model)
    for ob, pose in placed:
        sd, at, pr, po = _robot_obstacle_clearance(swept, ob, pose)
        if sd < -tol:
            violations.append(
                Violation(
                    kind="robot_obstacle",
                    a="robot",
                    b=ob.id,
                    depth=-sd,
                    time_index=int(swept.time_index[at]),
                    point_a=(float(pr[0]), float(pr[1])),
                    point_b=(float(po[0]), float(po[1])),
                )
            )
    return ValidationReport(ok=not violations, violations=tuple(violations))


def total_cost(
    planning_cost: float,
    required: Mapping[str, RequiredDisplacement],
    displacements: Mapping[str, DisplacementSpec],
) -> float:
    """Combined cost: planning cost plus the refinement increments (d - y)."""
    extra = 0.0
    for oid, spec in displacements.items():
        y = required[oid].magnitude if oid in required else 0.0
        if spec.magnitude < y - 1e-12:
            raise ValueError(
                f"displacement for {oid!r} ({spec.magnitude}) below its required {y}"
            )
        extra += spec.magnitude - y
    return planning_cost + extra


def _push_direction(violation: Violation, obstacle_id: str):
    """Unit direction that separates obstacle_id from its violation partner."""
    pa = np.asarray(violation.point_a)
    pb = np.asarray(violation.point_b)
    v = pb - pa if violation.b == obstacle_id else pa - pb
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        return (1.0, 0.0)
    return (float(v[0] / norm), float(v[1] / norm))


def refine(
    trajectory: Sequence[Pose],
    obstacles: Sequence[ObstacleLike],
    required: Mapping[str, RequiredDisplacement],
    config: RefinementConfig,
    robot: BoundingModel,
    overlap_model: str = "spheres",
    planning_cost: float = 0.0,
) -> RefinementResult:
    """Grow displacements until the whole configuration validates.

    Obstacles are processed hardest-first (largest current magnitude). A
    candidate pose must clear the swept trajectory and every settled
    obstacle; when a whole ring fails, the magnitude grows by delta and
    the ring is re-sampled from the original pose. After each pass a joint
    validation runs and any violating movable obstacle re-enters. Raises
    RefinementExhausted when an obstacle exceeds the increment cap, or
    when a violation involves only immovable parties.
    """
    by_id = {ob.id: ob for ob in obstacles}
    for oid in required:
        if oid not in by_id:
            raise ValueError(f"required displacement for unknown obstacle {oid!r}")
    movable = {ob.id for ob in obstacles if ob.mobility != "fixed"}
    poses: dict[str, Pose] = {ob.id: ob.pose for ob in obstacles}
    level: dict[str, float] = {}
    increments: dict[str, int] = {oid: 0 for oid in movable}
    prefer: dict[str, object] = {}
    trace: list[TraceEvent] = []

    pending: set[str] = set()
    for oid, req in required.items():
        if oid not in movable:
            continue
        pending.add(oid)
        level[oid] = req.magnitude
        prefer[oid] = req.direction

    swept = _SweptTrajectory(trajectory, robot, config.validation_substeps, overlap_model)
    tol = config.tolerance

    def candidate_ok(oid: str, pose: Pose, skip: set[str]) -> bool:
        ob = by_id[oid]
        sd, _, _, _ = _robot_obstacle_clearance(swept, ob, pose)
        if sd < -tol:
            return False
        for other_id, other_pose in poses.items():
            if other_id == oid or other_id in skip:
                continue
            osd, _, _ = _obstacle_pair_clearance(ob, pose, by_id[other_id], other_pose)
            if osd < -tol:
                return False
        return True

    max_passes = 60
    for _ in range(max_passes):
        # Hardest constraints first; id breaks ties so runs are repeatable.
        order = sorted(pending, key=lambda oid: (-level.get(oid, 0.0), oid))
        not_yet = set(order)
        for oid in order:
            not_yet.discard(oid)
            ob = by_id[oid]
            mode = "rotation" if ob.mobility == "rotate" else "translation"
            while True:
                y = level.get(oid, 0.0)
                accepted = None
                for cand in sample_displacement(ob, y, mode, config.ring_samples, prefer.get(oid)):
                    if candidate_ok(oid, cand, skip=not_yet):
                        accepted = cand
                        break
                if accepted is not None:
                    poses[oid] = accepted
                    trace.append(TraceEvent(oid, "accept", y))
                    break
                if increments[oid] >= config.max_increments:
                    raise RefinementExhausted(oid, y)
                increments[oid] += 1
                level[oid] = y + config.delta
                trace.append(TraceEvent(oid, "increment", level[oid]))
        report = validate(
            obstacles, poses, trajectory, robot,
            time_substeps=config.validation_substeps, tol=tol, overlap_model=overlap_model,
        )
        if report.ok:
            break
        pending = set()
        for v in report.violations:
            involved = [x for x in (v.a, v.b) if x in movable]
            if not involved:
                jammed = v.b if v.a == "robot" else v.a
                raise RefinementExhausted(jammed, level.get(jammed, 0.0))
            for oid in involved:
                if oid not in pending:
                    pending.add(oid)
                    level.setdefault(oid, 0.0)
                    trace.append(TraceEvent(oid, "reenter", level[oid], detail=f"vs {v.a}/{v.b}"))
                if oid not in prefer:
                    ob = by_id[oid]
                    if ob.mobility == "rotate":
                        push = _push_direction(v, oid)
                        contact = np.asarray(v.point_b if v.b == oid else v.point_a)
                        arm = contact - ob.pose.position
                        cross = arm[0] * push[1] - arm[1] * push[0]
                        prefer[oid] = 1.0 if cross >= 0 else -1.0
                    else:
                        prefer[oid] = _push_direction(v, oid)
    else:
        worst = max(pending, key=lambda oid: level.get(oid, 0.0))
        raise RefinementExhausted(worst, level.get(worst, 0.0))

    displacements: dict[str, DisplacementSpec] = {}
    total = 0.0
    for oid in sorted(movable):
        ob = by_id[oid]
        mode = "rotation" if ob.mobility == "rotate" else "translation"
        final = poses[oid]
        if mode == "rotation":
            magnitude = abs(wrap_angle(final.theta - ob.pose.theta))
            # The ring magnitude is authoritative; wrap only collapses aliases.
            if oid in level and level[oid] > 0 and poses[oid] != ob.pose:
                magnitude = level[oid]
        else:
            magnitude = math.hypot(final.x - ob.pose.x, final.y - ob.pose.y)
        if final == ob.pose:
            magnitude = 0.0
        displacements[oid] = DisplacementSpec(oid, mode, magnitude, final)
        total += magnitude
    cost = total_cost(planning_cost, required, displacements)
    return RefinementResult(
        displacements=displacements,
        iterations=increments,
        total_displacement=total,
        total_cost=cost,
        trace=tuple(trace),
    )
