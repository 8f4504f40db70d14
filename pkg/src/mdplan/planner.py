"""Receding-horizon trajectory optimization with overlap penalties.

Phase one of the pipeline. At every step a lookahead window of controls is
optimized against a smooth objective: weighted state magnitude (or step
length), squared smooth overlap penalties against every obstacle, and a
terminal pull toward the goal. The first control is applied, the window
shifts, and the loop repeats until the goal tolerance is met.

The optimizer is a projected gradient method: gradients come from an
adjoint sweep over the rollout using the models' analytic Jacobians,
controls are clipped to their box bounds after each trial step, and a
backtracking line search enforces monotone descent. With roughly sixty
decision variables per window this is plenty, and it keeps the package
dependency-free.

After the loop, the executed trajectory is re-simulated at sub-step
resolution to collect every robot-obstacle overlap; the deepest overlap
per movable obstacle becomes its required displacement for refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .dynamics import DynamicsModel, rollout_array
from .geometry import (
    TOL_CONTACT,
    BoundingModel,
    OverlapRecord,
    Pose,
    Rect,
    Sphere,
    interpolate_pose,
    place_offsets,
    place_shape,
    point_rect_overlap,
    point_rect_overlap_grad,
    softmin_zero,
    softmin_zero_grad,
    wrap_angle,
)

MOBILITY_MODES = ("translate", "rotate", "fixed")
OVERLAP_MODELS = ("spheres", "point_rect")
COST_MODES = ("state", "step_length")


class ObstacleLike(Protocol):
    """What the planner needs to know about an obstacle."""

    id: str
    pose: Pose
    bounding: BoundingModel
    mobility: str
    weight: float
    shape: object


class PlanningError(Exception):
    """Base class for planning failures."""


class GoalNotReached(PlanningError):
    def __init__(self, best_distance: float, steps: int):
        self.best_distance = best_distance
        self.steps = steps
        super().__init__(
            f"goal not reached after {steps} steps; closest approach {best_distance:.4f} m"
        )


class InfeasibleStart(PlanningError):
    def __init__(self, obstacle_id: str, depth: float):
        self.obstacle_id = obstacle_id
        self.depth = depth
        super().__init__(
            f"start pose overlaps fixed obstacle {obstacle_id!r} by {depth:.4f} m"
        )


@dataclass(frozen=True)
class Weights:
    """Cost weights shared by both phases.

    m_x and m_g are diagonal weights over (x, y, theta). Movable obstacles
    carry their own overlap weight; m_i_scale multiplies all of them at
    once (the knob the sweep command turns). Fixed obstacles always use
    m_fixed. w_x and w_d scale the two halves of the final reported cost.
    """

    m_x: tuple[float, float, float] = (0.0, 0.0, 0.0)
    m_g: tuple[float, float, float] = (1.0, 1.0, 0.1)
    m_fixed: float = 400.0
    m_i_scale: float = 1.0
    w_x: float = 1.0
    w_d: float = 1.0

    def __post_init__(self) -> None:
        m_x = tuple(float(v) for v in self.m_x)
        m_g = tuple(float(v) for v in self.m_g)
        if len(m_x) != 3 or len(m_g) != 3:
            raise ValueError("m_x and m_g must have 3 diagonal entries")
        if any(v < 0 for v in m_x):
            raise ValueError(f"m_x must be nonnegative, got {m_x}")
        if any(v <= 0 for v in m_g):
            raise ValueError(f"m_g must be positive definite, got {m_g}")
        if self.m_fixed <= 0:
            raise ValueError("m_fixed must be > 0")
        if self.m_i_scale < 0:
            raise ValueError("m_i_scale must be >= 0")
        if self.w_x < 0 or self.w_d < 0:
            raise ValueError("w_x and w_d must be >= 0")
        object.__setattr__(self, "m_x", m_x)
        object.__setattr__(self, "m_g", m_g)

    def overlap_weight(self, obstacle: ObstacleLike) -> float:
        if obstacle.mobility == "fixed":
            return self.m_fixed
        return float(obstacle.weight) * self.m_i_scale


@dataclass(frozen=True)
class SolverConfig:
    """Projected-gradient settings for one horizon solve."""

    max_iterations: int = 80
    gradient_tolerance: float = 1e-6
    alpha0: float = 1.0
    alpha_shrink: float = 0.5
    alpha_grow: float = 1.5
    armijo: float = 1e-3
    max_line_search: int = 30

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be > 0")
        if not (0 < self.alpha_shrink < 1 < self.alpha_grow):
            raise ValueError("need 0 < alpha_shrink < 1 < alpha_grow")


@dataclass(frozen=True)
class PlannerConfig:
    lookahead: int = 21
    max_steps: int = 400
    goal_tol_pos: float = 0.1
    # wrap_angle keeps |dtheta| <= pi, so the default leaves heading free.
    goal_tol_ang: float = math.pi
    smoothing_eps: float = 1e-4
    time_substeps: int = 5
    cost_mode: str = "state"
    overlap_model: str = "spheres"
    # Penalty standoff applied to fixed obstacles only, inside the solver:
    # keeps optimized paths robustly clear of walls, which can never be
    # displaced to recover a grazing trajectory. Reported costs and overlap
    # records use the raw unshifted metric.
    fixed_standoff: float = 0.02
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        if self.lookahead < 2:
            raise ValueError("lookahead must be >= 2")
        if self.max_steps < self.lookahead:
            raise ValueError("max_steps must be >= lookahead")
        if self.goal_tol_pos <= 0 or self.goal_tol_ang <= 0:
            raise ValueError("goal tolerances must be > 0")
        if self.smoothing_eps <= 0:
            raise ValueError("smoothing_eps must be > 0")
        if self.time_substeps < 1:
            raise ValueError("time_substeps must be >= 1")
        if self.cost_mode not in COST_MODES:
            raise ValueError(f"cost_mode must be one of {COST_MODES}")
        if self.overlap_model not in OVERLAP_MODELS:
            raise ValueError(f"overlap_model must be one of {OVERLAP_MODELS}")
        if self.fixed_standoff < 0:
            raise ValueError("fixed_standoff must be >= 0")


@dataclass(frozen=True)
class RequiredDisplacement:
    """How far an obstacle must move to clear the planned trajectory.

    direction is a unit 2D vector for translation-mode obstacles; for
    rotation-mode obstacles it is a bare sign (+1.0 or -1.0) suggesting
    the rotation sense, and the magnitude starts at zero because overlap
    depth in meters does not convert to an angle (refinement grows it).
    """

    obstacle_id: str
    mode: str  # "translation" | "rotation"
    magnitude: float
    direction: tuple[float, float] | float
    source: OverlapRecord | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("translation", "rotation"):
            raise ValueError(f"unknown displacement mode {self.mode!r}")
        if self.magnitude < 0:
            raise ValueError("magnitude must be >= 0")


@dataclass(frozen=True)
class HorizonInfo:
    converged: bool
    iterations: int
    objective: float
    objective_initial: float


@dataclass(frozen=True)
class PlanResult:
    trajectory: tuple[Pose, ...]
    controls: tuple[tuple[float, ...], ...]
    stage_costs: tuple[float, ...]
    terminal_cost: float
    overlaps: tuple[OverlapRecord, ...]
    required: Mapping[str, RequiredDisplacement]
    converged: bool
    goal_error: float


def terminal_cost(x: Pose, goal: Pose, m_g: Sequence[float]) -> float:
    """Weighted squared distance to the goal, heading wrapped to [-pi, pi)."""
    d = np.array([x.x - goal.x, x.y - goal.y, wrap_angle(x.theta - goal.theta)])
    return float(np.sum(np.asarray(m_g) * d * d))


def terminal_cost_gradient(x: Pose, goal: Pose, m_g: Sequence[float]) -> np.ndarray:
    d = np.array([x.x - goal.x, x.y - goal.y, wrap_angle(x.theta - goal.theta)])
    return 2.0 * np.asarray(m_g, dtype=float) * d


def stage_cost(
    x: Pose,
    robot: BoundingModel,
    obstacles: Sequence[ObstacleLike],
    weights: Weights,
    eps: float,
    overlap_model: str = "spheres",
) -> float:
    """One stage of the planning objective at state x.

    Weighted squared state magnitude plus, per obstacle, its overlap
    weight times the squared smooth overlap. The overlap for an obstacle
    is the most negative smooth overlap over all robot-sphere /
    obstacle-sphere pairs, so penalty size does not grow with bounding
    model granularity.
    """
    field_ = _PenaltyField(robot, obstacles, weights, eps, overlap_model, 0.0)
    arr = x.as_array()
    pen = float(field_.values(arr[None, :])[0])
    m_x = np.asarray(weights.m_x)
    return float(np.sum(m_x * arr * arr)) + pen


def stage_cost_gradient(
    x: Pose,
    robot: BoundingModel,
    obstacles: Sequence[ObstacleLike],
    weights: Weights,
    eps: float,
    overlap_model: str = "spheres",
) -> np.ndarray:
    """Exact gradient of stage_cost with respect to (x, y, theta)."""
    field_ = _PenaltyField(robot, obstacles, weights, eps, overlap_model, 0.0)
    arr = x.as_array()
    _, grads = field_.values_and_grads(arr[None, :])
    return 2.0 * np.asarray(weights.m_x) * arr + grads[0]


class _PenaltyField:
    """Precomputed world-frame obstacle arrays for fast penalty evaluation.

    Obstacles do not move during the planning phase, so their placed
    spheres (or rectangles) are computed once and every stage evaluation
    reduces to vectorized distance arithmetic over all states at once.
    """

    def __init__(
        self,
        robot: BoundingModel,
        obstacles: Sequence[ObstacleLike],
        weights: Weights,
        eps: float,
        overlap_model: str,
        fixed_standoff: float,
    ):
        self.eps = eps
        self.model = overlap_model
        self.r_off = robot.offsets()
        self.r_rad = robot.radii()
        if overlap_model == "spheres":
            self._build_spheres(obstacles, weights, fixed_standoff)
        else:
            self._build_point_shapes(obstacles, weights, fixed_standoff)

    def _build_spheres(self, obstacles, weights, fixed_standoff):
        centers, radii, seg_starts, obs_weights, standoffs = [], [], [], [], []
        at = 0
        for ob in obstacles:
            w = weights.overlap_weight(ob)
            if w == 0.0:
                continue
            world = place_offsets(ob.pose, ob.bounding.offsets())
            seg_starts.append(at)
            obs_weights.append(w)
            off = fixed_standoff if ob.mobility == "fixed" else 0.0
            for c, r in zip(world, ob.bounding.radii()):
                centers.append(c)
                radii.append(r)
                standoffs.append(off)
                at += 1
        self.n_spheres = at
        if at:
            self.centers = np.asarray(centers)
            self.radii = np.asarray(radii)
            self.standoff = np.asarray(standoffs)
            self.seg_starts = np.asarray(seg_starts)
            self.seg_bounds = list(zip(seg_starts, list(seg_starts[1:]) + [at]))
            self.obs_weights = np.asarray(obs_weights)
            # (m1, S) pairwise radius sums, hoisted out of the hot loop.
            self.rsum = self.r_rad[:, None] + self.radii[None, :]

    def _build_point_shapes(self, obstacles, weights, fixed_standoff):
        # Robot reduced to a single point: the world position of its first
        # bounding sphere center, radius ignored.
        self.point_off = self.r_off[0]
        self.shapes = []
        for ob in obstacles:
            w = weights.overlap_weight(ob)
            if w == 0.0:
                continue
            off = fixed_standoff if ob.mobility == "fixed" else 0.0
            shape = getattr(ob, "shape", None)
            if isinstance(shape, Rect):
                world = place_shape(ob.pose, shape)
                wt = world.theta
                axes = np.array(
                    [[math.cos(wt), -math.sin(wt)], [math.sin(wt), math.cos(wt)]]
                )
                self.shapes.append(
                    ("rect", w, off, np.asarray(world.center), axes, np.asarray(world.half_extents))
                )
            elif isinstance(shape, Sphere):
                world = place_shape(ob.pose, shape)
                self.shapes.append(("circle", w, off, np.asarray(world.center), None, world.radius))
            else:
                raise ValueError(
                    f"obstacle {ob.id!r} has no rectangle or circle shape for point overlap"
                )

    # -- sphere model -----------------------------------------------------

    def _sphere_geometry(self, X):
        pos = X[:, :2]
        c, s = np.cos(X[:, 2]), np.sin(X[:, 2])
        ox, oy = self.r_off[:, 0], self.r_off[:, 1]
        px = pos[:, 0:1] + np.outer(c, ox) - np.outer(s, oy)
        py = pos[:, 1:2] + np.outer(s, ox) + np.outer(c, oy)
        dx = px[:, :, None] - self.centers[None, None, :, 0]
        dy = py[:, :, None] - self.centers[None, None, :, 1]
        dist = np.sqrt(dx * dx + dy * dy)
        sdist = dist - self.rsum[None, :, :] - self.standoff[None, None, :]
        return dx, dy, dist, sdist, c, s

    def values(self, X: np.ndarray) -> np.ndarray:
        """Summed weighted squared penalties per state; X is (n, 3)."""
        n = X.shape[0]
        if self.model == "point_rect":
            return self._point_values(X, want_grads=False)[0]
        if self.n_spheres == 0:
            return np.zeros(n)
        _, _, _, sdist, _, _ = self._sphere_geometry(X)
        per_pair = sdist.min(axis=1)
        per_obs = np.minimum.reduceat(per_pair, self.seg_starts, axis=1)
        v = softmin_zero(per_obs, self.eps)
        return (v * v) @ self.obs_weights

    def values_and_grads(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Penalty values plus their gradients with respect to each state."""
        n = X.shape[0]
        if self.model == "point_rect":
            return self._point_values(X, want_grads=True)
        vals = np.zeros(n)
        grads = np.zeros((n, 3))
        if self.n_spheres == 0:
            return vals, grads
        dx, dy, dist, sdist, c, s = self._sphere_geometry(X)
        ox, oy = self.r_off[:, 0], self.r_off[:, 1]
        rows = np.arange(n)
        for (a, b), w in zip(self.seg_bounds, self.obs_weights):
            width = b - a
            block = sdist[:, :, a:b].reshape(n, -1)
            idx = block.argmin(axis=1)
            smin = block[rows, idx]
            v = softmin_zero(smin, self.eps)
            vals += w * v * v
            coeff = 2.0 * w * v * softmin_zero_grad(smin, self.eps)
            j = idx // width
            m = a + idx % width
            d = np.maximum(dist[rows, j, m], 1e-12)
            ux = dx[rows, j, m] / d
            uy = dy[rows, j, m] / d
            # Robot sphere center moves with theta through the body offset.
            dpx = -s * ox[j] - c * oy[j]
            dpy = c * ox[j] - s * oy[j]
            grads[:, 0] += coeff * ux
            grads[:, 1] += coeff * uy
            grads[:, 2] += coeff * (ux * dpx + uy * dpy)
        return vals, grads

    # -- point model ------------------------------------------------------

    def _point_values(self, X, want_grads):
        n = X.shape[0]
        vals = np.zeros(n)
        grads = np.zeros((n, 3))
        c, s = np.cos(X[:, 2]), np.sin(X[:, 2])
        ox, oy = self.point_off
        px = X[:, 0] + c * ox - s * oy
        py = X[:, 1] + s * ox + c * oy
        p = np.stack([px, py], axis=1)
        dpx = -s * ox - c * oy
        dpy = c * ox - s * oy
        for kind, w, off, center, axes, extra in self.shapes:
            if kind == "rect":
                sval, g = _rect_signed_distance(p, center, axes, extra, want_grads)
            else:
                diff = p - center
                d = np.linalg.norm(diff, axis=1)
                sval = d - extra
                g = diff / np.maximum(d, 1e-12)[:, None] if want_grads else None
            sval = sval - off
            v = softmin_zero(sval, self.eps)
            vals += w * v * v
            if want_grads:
                coeff = 2.0 * w * v * softmin_zero_grad(sval, self.eps)
                grads[:, 0] += coeff * g[:, 0]
                grads[:, 1] += coeff * g[:, 1]
                grads[:, 2] += coeff * (g[:, 0] * dpx + g[:, 1] * dpy)
        return vals, grads


def _rect_signed_distance(p, center, axes, half_extents, want_grads):
    """Vectorized point-to-oriented-rectangle signed distance (+ gradient)."""
    local = (p - center) @ axes
    d = np.abs(local) - half_extents
    pos_part = np.maximum(d, 0.0)
    dist_out = np.linalg.norm(pos_part, axis=1)
    inside = (d <= 0.0).all(axis=1)
    sval = np.where(inside, d.max(axis=1), dist_out)
    if not want_grads:
        return sval, None
    sign = np.where(local >= 0.0, 1.0, -1.0)
    g_local = sign * pos_part / np.maximum(dist_out, 1e-12)[:, None]
    # Inside: push toward the nearest face.
    face = (d[:, 0] >= d[:, 1]).astype(float)
    g_inside = np.stack([sign[:, 0] * face, sign[:, 1] * (1.0 - face)], axis=1)
    g_local[inside] = g_inside[inside]
    return sval, g_local @ axes.T


class _HorizonCost:
    """Objective over one lookahead window of controls."""

    def __init__(self, model: DynamicsModel, goal: np.ndarray, penalty: _PenaltyField, weights: Weights, cfg: PlannerConfig):
        self.model = model
        self.goal = goal
        self.penalty = penalty
        self.m_x = np.asarray(weights.m_x)
        self.m_g = np.asarray(weights.m_g)
        self.step_mode = cfg.cost_mode == "step_length"

    def _terminal_diff(self, xL):
        d = xL - self.goal
        d[2] = wrap_angle(d[2])
        return d

    def value(self, x0: np.ndarray, U: np.ndarray) -> float:
        X = rollout_array(self.model, x0, U)
        L = U.shape[0]
        total = float(self.penalty.values(X[:L]).sum())
        if self.step_mode:
            diffs = X[1:] - X[:-1]
            total += float(np.sum(self.m_x * diffs * diffs))
        else:
            total += float(np.sum(self.m_x * X[:L] * X[:L]))
        d = self._terminal_diff(X[L].copy())
        return total + float(np.sum(self.m_g * d * d))

    def value_and_grad(self, x0: np.ndarray, U: np.ndarray) -> tuple[float, np.ndarray]:
        X = rollout_array(self.model, x0, U)
        L = U.shape[0]
        pen_vals, pen_grads = self.penalty.values_and_grads(X[:L])
        total = float(pen_vals.sum())
        Gx = np.zeros((L + 1, 3))
        Gx[:L] = pen_grads
        if self.step_mode:
            diffs = X[1:] - X[:-1]
            total += float(np.sum(self.m_x * diffs * diffs))
            dterm = 2.0 * self.m_x * diffs
            Gx[1:] += dterm
            Gx[:-1] -= dterm
        else:
            total += float(np.sum(self.m_x * X[:L] * X[:L]))
            Gx[:L] += 2.0 * self.m_x * X[:L]
        d = self._terminal_diff(X[L].copy())
        total += float(np.sum(self.m_g * d * d))
        Gx[L] += 2.0 * self.m_g * d
        # Adjoint sweep: accumulate dJ/dU backwards through the rollout.
        G = np.empty_like(U)
        lam = Gx[L]
        for l in range(L - 1, -1, -1):
            A, B = self.model.jacobians(X[l], U[l])
            G[l] = B.T @ lam
            lam = Gx[l] + A.T @ lam
        return total, G


def _projected_gradient(cost: _HorizonCost, x0: np.ndarray, U0: np.ndarray, bounds, scfg: SolverConfig):
    lo = np.asarray(bounds.lower)
    hi = np.asarray(bounds.upper)
    U = np.clip(U0, lo, hi)
    J = cost.value(x0, U)
    J_init = J
    alpha = scfg.alpha0
    converged = False
    iterations = 0
    for _ in range(scfg.max_iterations):
        iterations += 1
        J_now, G = cost.value_and_grad(x0, U)
        # Projected-gradient stationarity at unit step.
        if np.linalg.norm(U - np.clip(U - G, lo, hi)) <= scfg.gradient_tolerance:
            converged = True
            break
        accepted = False
        a = alpha
        for _ in range(scfg.max_line_search):
            U_try = np.clip(U - a * G, lo, hi)
            delta = U - U_try
            move = float(np.sum(delta * delta))
            if move == 0.0:
                break
            J_try = cost.value(x0, U_try)
            if J_try <= J - scfg.armijo / a * move:
                U, J = U_try, J_try
                alpha = min(a * scfg.alpha_grow, 1e3)
                accepted = True
                break
            a *= scfg.alpha_shrink
        if not accepted:
            # No descent step exists at line-search resolution: stationary.
            converged = True
            break
    return U, HorizonInfo(converged, iterations, J, J_init)


def solve_horizon(
    x_k: Pose,
    goal: Pose,
    obstacles: Sequence[ObstacleLike],
    model: DynamicsModel,
    robot: BoundingModel,
    weights: Weights,
    config: PlannerConfig,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, HorizonInfo]:
    """Optimize one lookahead window; returns (L, m) controls and solve info.

    Never raises on non-convergence: the best iterate comes back with
    info.converged False. The returned objective is always <= the warm
    start's objective.
    """
    penalty = _PenaltyField(
        robot, obstacles, weights, config.smoothing_eps, config.overlap_model, config.fixed_standoff
    )
    cost = _HorizonCost(model, goal.as_array(), penalty, weights, config)
    if warm_start is None:
        warm_start = np.zeros((config.lookahead, model.control_dim))
    else:
        warm_start = np.asarray(warm_start, dtype=float)
        if warm_start.shape != (config.lookahead, model.control_dim):
            raise ValueError(f"warm start shape {warm_start.shape} does not match horizon")
    return _projected_gradient(cost, x_k.as_array(), warm_start, model.bounds, config.solver)


def _at_goal(x: Pose, goal: Pose, cfg: PlannerConfig) -> bool:
    if math.hypot(x.x - goal.x, x.y - goal.y) > cfg.goal_tol_pos:
        return False
    return abs(wrap_angle(x.theta - goal.theta)) <= cfg.goal_tol_ang


def _sample_times(n_states: int, substeps: int):
    """(step k, fraction) pairs covering the trajectory, endpoint included."""
    for k in range(n_states - 1):
        for j in range(substeps):
            yield k, j / substeps
    yield n_states - 1, 0.0


def collect_overlaps(
    trajectory: Sequence[Pose],
    robot: BoundingModel,
    obstacles: Sequence[ObstacleLike],
    substeps: int,
    overlap_model: str = "spheres",
) -> list[OverlapRecord]:
    """Sweep the trajectory at sub-step resolution, recording every overlap.

    Records carry the raw signed metric (no smoothing, no standoff);
    contacts shallower than the contact tolerance are skipped so tangent
    grazes produce nothing.
    """
    records: list[OverlapRecord] = []
    if overlap_model == "point_rect":
        return _collect_point_overlaps(trajectory, robot, obstacles, substeps)
    placed = []
    for ob in obstacles:
        world = place_offsets(ob.pose, ob.bounding.offsets())
        placed.append((ob, world, ob.bounding.radii()))
    r_off = robot.offsets()
    r_rad = robot.radii()
    for k, frac in _sample_times(len(trajectory), substeps):
        pose = trajectory[k] if frac == 0.0 else interpolate_pose(trajectory[k], trajectory[k + 1], frac)
        pts = place_offsets(pose, r_off)
        for ob, world, radii in placed:
            diff = world[None, :, :] - pts[:, None, :]
            dist = np.linalg.norm(diff, axis=2)
            sd = dist - (r_rad[:, None] + radii[None, :])
            hit_j, hit_m = np.nonzero(sd < -TOL_CONTACT)
            for j, m in zip(hit_j, hit_m):
                d = dist[j, m]
                if d < 1e-12:
                    direction = (1.0, 0.0)
                else:
                    direction = (float(diff[j, m, 0] / d), float(diff[j, m, 1] / d))
                records.append(
                    OverlapRecord(
                        md=float(sd[j, m]),
                        direction=direction,
                        time_index=k,
                        robot_sphere=int(j),
                        obstacle_sphere=int(m),
                        obstacle_id=ob.id,
                        fraction=frac,
                    )
                )
    return records


def _collect_point_overlaps(trajectory, robot, obstacles, substeps):
    records = []
    off0 = robot.offsets()[0]
    shapes = []
    for ob in obstacles:
        shape = getattr(ob, "shape", None)
        if not isinstance(shape, (Rect, Sphere)):
            raise ValueError(f"obstacle {ob.id!r} has no rectangle or circle shape")
        shapes.append((ob, place_shape(ob.pose, shape)))
    for k, frac in _sample_times(len(trajectory), substeps):
        pose = trajectory[k] if frac == 0.0 else interpolate_pose(trajectory[k], trajectory[k + 1], frac)
        p = pose.apply(off0)
        for ob, world_shape in shapes:
            if isinstance(world_shape, Rect):
                sd = point_rect_overlap(p, world_shape)
                if sd >= -TOL_CONTACT:
                    continue
                g = point_rect_overlap_grad(p, world_shape)
                direction = (-float(g[0]), -float(g[1]))
            else:
                diff = np.asarray(world_shape.center) - p
                d = float(np.linalg.norm(diff))
                sd = d - world_shape.radius
                if sd >= -TOL_CONTACT:
                    continue
                direction = (1.0, 0.0) if d < 1e-12 else (float(diff[0] / d), float(diff[1] / d))
            records.append(
                OverlapRecord(
                    md=float(sd),
                    direction=direction,
                    time_index=k,
                    robot_sphere=0,
                    obstacle_sphere=0,
                    obstacle_id=ob.id,
                    fraction=frac,
                )
            )
    return records


def required_displacements(
    records: Sequence[OverlapRecord], obstacles: Sequence[ObstacleLike]
) -> dict[str, RequiredDisplacement]:
    """Deepest overlap per movable obstacle, as a displacement demand.

    Translation obstacles get the overlap depth along the recorded
    direction. Rotation obstacles get magnitude zero with a suggested
    spin sign (depth in meters has no angle equivalent); the refinement
    loop grows the angle from there.
    """
    by_ob = {ob.id: ob for ob in obstacles}
    best: dict[str, OverlapRecord] = {}
    for rec in records:
        ob = by_ob[rec.obstacle_id]
        if ob.mobility == "fixed":
            continue
        cur = best.get(rec.obstacle_id)
        if cur is None or rec.md < cur.md:
            best[rec.obstacle_id] = rec
    out: dict[str, RequiredDisplacement] = {}
    for oid, rec in best.items():
        ob = by_ob[oid]
        if ob.mobility == "translate":
            out[oid] = RequiredDisplacement(
                obstacle_id=oid,
                mode="translation",
                magnitude=abs(rec.md),
                direction=rec.direction,
                source=rec,
            )
        else:
            # Lever arm from the obstacle center to the contacted sphere;
            # pushing that sphere along the record direction suggests a
            # rotation sense via the 2D cross product.
            world = place_offsets(ob.pose, ob.bounding.offsets())
            arm = world[rec.obstacle_sphere] - ob.pose.position
            cross = arm[0] * rec.direction[1] - arm[1] * rec.direction[0]
            sign = 1.0 if cross >= 0 else -1.0
            out[oid] = RequiredDisplacement(
                obstacle_id=oid, mode="rotation", magnitude=0.0, direction=sign, source=rec
            )
    return out


def plan(scenario, config: PlannerConfig | None = None) -> PlanResult:
    """Receding-horizon planning over a scenario.

    Solves the lookahead problem, applies the first control, advances,
    and repeats until the goal tolerance is met, then sweeps the executed
    trajectory for overlap records and distills required displacements.
    Raises GoalNotReached when the step cap runs out and InfeasibleStart
    when the start pose already overlaps a fixed obstacle.
    """
    cfg = config if config is not None else scenario.planner
    weights: Weights = scenario.weights
    model: DynamicsModel = scenario.robot.model
    robot: BoundingModel = scenario.robot.bounding
    obstacles = list(scenario.obstacles)
    start: Pose = scenario.start
    goal: Pose = scenario.goal

    for ob in obstacles:
        if ob.mobility != "fixed":
            continue
        world = place_offsets(ob.pose, ob.bounding.offsets())
        pts = place_offsets(start, robot.offsets())
        dist = np.linalg.norm(world[None, :, :] - pts[:, None, :], axis=2)
        sd = dist - (robot.radii()[:, None] + ob.bounding.radii()[None, :])
        depth = float(sd.min())
        if depth < -TOL_CONTACT:
            raise InfeasibleStart(ob.id, -depth)

    penalty = _PenaltyField(
        robot, obstacles, weights, cfg.smoothing_eps, cfg.overlap_model, cfg.fixed_standoff
    )
    cost = _HorizonCost(model, goal.as_array(), penalty, weights, cfg)

    states = [start]
    controls: list[tuple[float, ...]] = []
    infos: list[HorizonInfo] = []
    U = np.zeros((cfg.lookahead, model.control_dim))
    reached = _at_goal(start, goal, cfg)
    while not reached:
        if len(controls) >= cfg.max_steps:
            best = min(math.hypot(s.x - goal.x, s.y - goal.y) for s in states)
            raise GoalNotReached(best, len(controls))
        U, info = _projected_gradient(cost, states[-1].as_array(), U, model.bounds, cfg.solver)
        infos.append(info)
        u0 = tuple(float(v) for v in U[0])
        states.append(model.step(states[-1], u0))
        controls.append(u0)
        U = np.vstack([U[1:], U[-1:]])
        reached = _at_goal(states[-1], goal, cfg)

    records = collect_overlaps(states, robot, obstacles, cfg.time_substeps, cfg.overlap_model)
    required = required_displacements(records, obstacles)
    stage_costs = executed_stage_costs(states, robot, obstacles, weights, cfg)

    goal_err = math.hypot(states[-1].x - goal.x, states[-1].y - goal.y)
    return PlanResult(
        trajectory=tuple(states),
        controls=tuple(controls),
        stage_costs=tuple(stage_costs),
        terminal_cost=terminal_cost(states[-1], goal, weights.m_g),
        overlaps=tuple(records),
        required=required,
        converged=all(i.converged for i in infos) if infos else True,
        goal_error=goal_err,
    )


def executed_stage_costs(
    states: Sequence[Pose],
    robot: BoundingModel,
    obstacles: Sequence[ObstacleLike],
    weights: Weights,
    cfg: PlannerConfig,
) -> tuple[float, ...]:
    """Realized stage costs along an executed trajectory (one per control)."""
    costs = []
    for k in range(len(states) - 1):
        pen = stage_cost(states[k], robot, obstacles, weights, cfg.smoothing_eps, cfg.overlap_model)
        if cfg.cost_mode == "step_length":
            # Swap the state-magnitude term for the executed step length.
            arr = states[k].as_array()
            pen -= float(np.sum(np.asarray(weights.m_x) * arr * arr))
            d = states[k + 1].as_array() - arr
            d[2] = wrap_angle(d[2])
            pen += float(np.sum(np.asarray(weights.m_x) * d * d))
        costs.append(pen)
    return tuple(costs)


def sum_planning_cost(result: PlanResult) -> float:
    """Total realized planning cost: executed stage costs plus the terminal term."""
    return float(sum(result.stage_costs) + result.terminal_cost)
