"""Planar poses, sphere bounding volumes, and the overlap metric.

Everything downstream (cost penalties, displacement extraction, the
independent feasibility validator) measures against the signed
sphere-to-sphere distance computed here: negative values are overlap
depths, and the magnitude of a negative value is exactly how far the
obstacle sphere must move along the center line to remove the overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Overlaps shallower than this count as contact-free, so exact tangency
# is feasible and refinement never chases floating-point dust.
TOL_CONTACT = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped >= math.pi:
        wrapped -= 2.0 * math.pi
    elif wrapped < -math.pi:
        wrapped += 2.0 * math.pi
    # remainder() maps pi -> -pi already; the branches catch boundary dust.
    return wrapped


@dataclass(frozen=True)
class Pose:
    """Planar pose (x, y in meters, theta in radians, wrapped to [-pi, pi))."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"pose components must be finite, got {self}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @staticmethod
    def from_array(arr: Sequence[float]) -> "Pose":
        return Pose(float(arr[0]), float(arr[1]), float(arr[2]))

    def apply(self, point: Sequence[float]) -> np.ndarray:
        """Map a body-frame point into the world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        px, py = float(point[0]), float(point[1])
        return np.array([self.x + c * px - s * py, self.y + s * px + c * py])


def interpolate_pose(a: Pose, b: Pose, t: float) -> Pose:
    """Linear interpolation in position, shortest-arc in heading."""
    dtheta = wrap_angle(b.theta - a.theta)
    return Pose(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.theta + t * dtheta)


@dataclass(frozen=True)
class Sphere:
    """A disc in 2D: center in meters, radius > 0."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError(f"sphere radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class BoundingModel:
    """Union of spheres rigidly attached to a body frame.

    Conservatively encloses the body's display shape; all collision
    reasoning happens on these spheres.
    """

    spheres: tuple[Sphere, ...]

    def __post_init__(self) -> None:
        spheres = tuple(self.spheres)
        if not spheres:
            raise ValueError("bounding model needs at least one sphere")
        object.__setattr__(self, "spheres", spheres)

    def offsets(self) -> np.ndarray:
        """Body-frame centers, shape (m, 2)."""
        return np.array([s.center for s in self.spheres])

    def radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.spheres])


@dataclass(frozen=True)
class Rect:
    """Oriented rectangle: center, half extents (> 0), rotation theta."""

    center: tuple[float, float]
    half_extents: tuple[float, float]
    theta: float = 0.0

    def __post_init__(self) -> None:
        hx, hy = float(self.half_extents[0]), float(self.half_extents[1])
        if hx <= 0 or hy <= 0:
            raise ValueError(f"rect half extents must be > 0, got {self.half_extents}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "half_extents", (hx, hy))

    def corners(self) -> np.ndarray:
        """World-frame corner points, shape (4, 2)."""
        hx, hy = self.half_extents
        local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center)


@dataclass(frozen=True)
class OverlapRecord:
    """One robot-sphere / obstacle-sphere intersection event.

    md is the signed sphere distance (< 0 for stored records); direction
    is the unit vector from the robot sphere center toward the obstacle
    sphere center, i.e. the direction in which moving the obstacle by
    |md| removes the overlap.
    """

    md: float
    direction: tuple[float, float]
    time_index: int
    robot_sphere: int
    obstacle_sphere: int
    obstacle_id: str
    # Fraction through the step at which the sample was taken; used only
    # for diagnostics, the contract keys on time_index.
    fraction: float = 0.0

    def __post_init__(self) -> None:
        dx, dy = self.direction
        norm = math.hypot(dx, dy)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"overlap direction must be unit length, got norm {norm}")
        object.__setattr__(self, "direction", (float(dx), float(dy)))


def sphere_overlap(a: Sphere, b: Sphere) -> float:
    """Signed distance between two spheres: ||ca - cb|| - (ra + rb).

    Negative iff the spheres overlap, and |value| is then the minimum
    center-line displacement of either sphere that restores tangency.
    """
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    return math.hypot(dx, dy) - (a.radius + b.radius)


def softmin_zero(s, eps):
    """Smooth stand-in for min(s, 0): always <= 0, within eps/2 of the min.

    Elementwise on arrays, plain float math on scalars.
    """
    return 0.5 * (s - np.sqrt(s * s + eps * eps))


def softmin_zero_grad(s, eps):
    """Derivative of softmin_zero with respect to s."""
    return 0.5 * (1.0 - s / np.sqrt(s * s + eps * eps))


def smooth_overlap(a: Sphere, b: Sphere, eps: float) -> float:
    """Continuously differentiable overlap penalty value.

    Agrees with min(sphere_overlap(a, b), 0) to within eps/2 everywhere,
    which lets the planner's objective stay smooth at the contact kink.
    """
    if eps <= 0:
        raise ValueError(f"smoothing eps must be > 0, got {eps}")
    return float(softmin_zero(sphere_overlap(a, b), eps))


def place_body(pose: Pose, model: BoundingModel) -> list[Sphere]:
    """Realize a bounding model in the world frame at the given pose."""
    placed = []
    for s in model.spheres:
        cx, cy = pose.apply(s.center)
        placed.append(Sphere((float(cx), float(cy)), s.radius))
    return placed


def place_offsets(pose: Pose, offsets: np.ndarray) -> np.ndarray:
    """Vectorized body-to-world transform for an (m, 2) offset array."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    rot = np.array([[c, -s], [s, c]])
    return offsets @ rot.T + np.array([pose.x, pose.y])


def point_rect_overlap(p: Sequence[float], r: Rect) -> float:
    """Signed distance from a point to an oriented rectangle.

    Positive outside (Euclidean distance), zero on the boundary,
    negative inside (distance to the nearest face, sign flipped).
    """
    local = _point_in_rect_frame(p, r)
    d = np.abs(local) - np.asarray(r.half_extents)
    if d[0] > 0 or d[1] > 0:
        return float(np.linalg.norm(np.maximum(d, 0.0)))
    return float(max(d[0], d[1]))


def point_rect_overlap_grad(p: Sequence[float], r: Rect) -> np.ndarray:
    """World-frame gradient of point_rect_overlap with respect to p.

    Unit vector pointing in the direction of increasing signed distance;
    zero only at the rectangle's medial-axis ties (measure zero).
    """
    local = _point_in_rect_frame(p, r)
    d = np.abs(local) - np.asarray(r.half_extents)
    sign = np.where(local >= 0.0, 1.0, -1.0)
    if d[0] > 0 or d[1] > 0:
        outward = np.maximum(d, 0.0)
        norm = float(np.linalg.norm(outward))
        g_local = sign * outward / norm
    elif d[0] >= d[1]:
        g_local = np.array([sign[0], 0.0])
    else:
        g_local = np.array([0.0, sign[1]])
    c, s = math.cos(r.theta), math.sin(r.theta)
    rot = np.array([[c, -s], [s, c]])
    return rot @ g_local


def _point_in_rect_frame(p: Sequence[float], r: Rect) -> np.ndarray:
    rel = np.asarray(p, dtype=float) - np.asarray(r.center)
    c, s = math.cos(r.theta), math.sin(r.theta)
    # Inverse rotation: world -> rect frame.
    return np.array([c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1]])


def place_shape(pose: Pose, shape):
    """Realize a body-frame display shape (Rect or Sphere) in the world frame."""
    if isinstance(shape, Rect):
        cx, cy = pose.apply(shape.center)
        return Rect((float(cx), float(cy)), shape.half_extents, pose.theta + shape.theta)
    if isinstance(shape, Sphere):
        cx, cy = pose.apply(shape.center)
        return Sphere((float(cx), float(cy)), shape.radius)
    raise TypeError(f"cannot place shape of type {type(shape).__name__}")


def bodies_collide(
    a: tuple[Pose, BoundingModel],
    b: tuple[Pose, BoundingModel],
    tol: float = TOL_CONTACT,
) -> bool:
    """True iff any sphere pair of the two placed bodies overlaps deeper than tol."""
    spheres_a = place_body(*a)
    spheres_b = place_body(*b)
    for sa in spheres_a:
        for sb in spheres_b:
            if sphere_overlap(sa, sb) < -tol:
                return True
    return False
