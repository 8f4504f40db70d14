"""Robot motion models: a holonomic planar body and a down/cross/turn stepper.

Both models share a small interface: bounded controls, a single discrete
step, and analytic Jacobians of the step map. The planar model integrates
body-frame velocities with explicit Euler at a fixed dt; the down/cross/turn
model is already a discrete update (its controls are per-step displacements,
no timestep involved).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Pose, wrap_angle

DEFAULT_DT = 0.1
_BOUNDS_TOL = 1e-9


@dataclass(frozen=True)
class ControlBounds:
    """Per-component box constraints on the control vector."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError(f"bounds dimension mismatch: {len(lo)} vs {len(hi)}")
        if any(l > h for l, h in zip(lo, hi)):
            raise ValueError(f"lower bound exceeds upper: {lo} vs {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lower, self.upper)

    def contains(self, u: Sequence[float], tol: float = _BOUNDS_TOL) -> bool:
        arr = np.asarray(u, dtype=float)
        if arr.shape != (self.dim,):
            return False
        return bool(
            np.all(arr >= np.asarray(self.lower) - tol)
            and np.all(arr <= np.asarray(self.upper) + tol)
        )

    @staticmethod
    def symmetric(limits: Sequence[float]) -> "ControlBounds":
        lim = tuple(abs(float(v)) for v in limits)
        return ControlBounds(tuple(-v for v in lim), lim)


def _unit_box(dim: int) -> ControlBounds:
    return ControlBounds.symmetric((1.0,) * dim)


class DynamicsModel:
    """Shared behavior: control validation, the public step, rollouts."""

    kind: str
    bounds: ControlBounds

    @property
    def control_dim(self) -> int:
        return self.bounds.dim

    def step(self, x: Pose, u: Sequence[float]) -> Pose:
        """Advance one step; control must be in bounds and of the right dimension."""
        arr = np.asarray(u, dtype=float)
        if arr.shape != (self.control_dim,):
            raise ValueError(
                f"{self.kind} expects a {self.control_dim}-dim control, got shape {arr.shape}"
            )
        if not self.bounds.contains(arr):
            raise ValueError(f"control {arr.tolist()} outside bounds for {self.kind}")
        nxt = self.step_array(x.as_array(), arr)
        return Pose(float(nxt[0]), float(nxt[1]), wrap_angle(float(nxt[2])))

    def step_array(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Raw step on (3,) arrays; no wrapping, no validation. Solver hot path."""
        raise NotImplementedError

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(A, B) = (d step / d x, d step / d u) at (x, u), both exact."""
        raise NotImplementedError


@dataclass(frozen=True)
class PlanarHolonomic(DynamicsModel):
    """Holonomic planar body: body-frame velocities (u, v) and turn rate omega.

    Continuous dynamics xdot = (u cos t - v sin t, u sin t + v cos t, w),
    integrated with explicit Euler at timestep dt.
    """

    dt: float = DEFAULT_DT
    bounds: ControlBounds = field(default_factory=lambda: _unit_box(3))
    kind: str = field(default="planar_holonomic", init=False)

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.bounds.dim != 3:
            raise ValueError("planar_holonomic needs 3-dim bounds (u, v, omega)")

    def step_array(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        c, s = math.cos(x[2]), math.sin(x[2])
        return np.array(
            [
                x[0] + self.dt * (u[0] * c - u[1] * s),
                x[1] + self.dt * (u[0] * s + u[1] * c),
                x[2] + self.dt * u[2],
            ]
        )

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(x[2]), math.sin(x[2])
        dt = self.dt
        A = np.array(
            [
                [1.0, 0.0, dt * (-u[0] * s - u[1] * c)],
                [0.0, 1.0, dt * (u[0] * c - u[1] * s)],
                [0.0, 0.0, 1.0],
            ]
        )
        B = np.array(
            [
                [dt * c, -dt * s, 0.0],
                [dt * s, dt * c, 0.0],
                [0.0, 0.0, dt],
            ]
        )
        return A, B


@dataclass(frozen=True)
class DownCrossTurn(DynamicsModel):
    """Discrete displacement stepper with down-range, cross-range, turn controls.

    x+ = x + D cos(t + T/2) + C cos(t + (T+pi)/2)
    y+ = y + D sin(t + T/2) + C sin(t + (T+pi)/2)
    t+ = t + T

    The second column collapses to (-sin, cos) of the same mid-turn heading,
    so D pushes along it and C pushes perpendicular to it.
    """

    bounds: ControlBounds = field(default_factory=lambda: _unit_box(3))
    kind: str = field(default="down_cross_turn", init=False)

    def __post_init__(self) -> None:
        if self.bounds.dim != 3:
            raise ValueError("down_cross_turn needs 3-dim bounds (D, C, T)")

    def step_array(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        phi = x[2] + 0.5 * u[2]
        c, s = math.cos(phi), math.sin(phi)
        return np.array(
            [
                x[0] + u[0] * c - u[1] * s,
                x[1] + u[0] * s + u[1] * c,
                x[2] + u[2],
            ]
        )

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        phi = x[2] + 0.5 * u[2]
        c, s = math.cos(phi), math.sin(phi)
        dx_dphi = -u[0] * s - u[1] * c
        dy_dphi = u[0] * c - u[1] * s
        A = np.array(
            [
                [1.0, 0.0, dx_dphi],
                [0.0, 1.0, dy_dphi],
                [0.0, 0.0, 1.0],
            ]
        )
        B = np.array(
            [
                [c, -s, 0.5 * dx_dphi],
                [s, c, 0.5 * dy_dphi],
                [0.0, 0.0, 1.0],
            ]
        )
        return A, B


MODEL_KINDS = {
    "planar_holonomic": PlanarHolonomic,
    "down_cross_turn": DownCrossTurn,
}


def rollout(model: DynamicsModel, x0: Pose, controls: Sequence[Sequence[float]]) -> list[Pose]:
    """Apply controls in sequence; returns len(controls)+1 poses starting at x0."""
    states = [x0]
    for u in controls:
        states.append(model.step(states[-1], u))
    return states


def rollout_array(model: DynamicsModel, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Unwrapped rollout on raw arrays: (L, m) controls -> (L+1, 3) states."""
    L = U.shape[0]
    X = np.empty((L + 1, 3))
    X[0] = x0
    for k in range(L):
        X[k + 1] = model.step_array(X[k], U[k])
    return X


def dynamics_residual(model: DynamicsModel, states: Sequence[Pose], controls: Sequence[Sequence[float]]) -> float:
    """Worst-case defect ||state[k+1] - step(state[k], u[k])|| over the trajectory."""
    if len(states) != len(controls) + 1:
        raise ValueError(f"{len(states)} states vs {len(controls)} controls")
    worst = 0.0
    for k, u in enumerate(controls):
        predicted = model.step(states[k], u)
        err = math.hypot(
            states[k + 1].x - predicted.x,
            states[k + 1].y - predicted.y,
        )
        err = max(err, abs(wrap_angle(states[k + 1].theta - predicted.theta)))
        worst = max(worst, err)
    return worst
