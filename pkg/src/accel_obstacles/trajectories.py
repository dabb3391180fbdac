"""Obstacle trajectory models c(tau).

All time arguments are elapsed time tau >= 0 since the trajectory's own
origin. Each model evaluates position, velocity and acceleration
analytically and accepts either a scalar tau or an array of taus; array
inputs return arrays of shape ``tau.shape + (2,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import Vec2


class TrajectoryDomainError(ValueError):
    """Raised when a trajectory is evaluated outside its time domain."""


@dataclass(frozen=True)
class TrajQuery:
    position: Vec2
    velocity: Vec2
    acceleration: Vec2


def _check_tau(tau, domain: float) -> np.ndarray:
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise TrajectoryDomainError(f"tau must be >= 0, got {t.min()}")
    if np.any(t > domain):
        raise TrajectoryDomainError(f"tau={t.max()} beyond trajectory domain {domain}")
    return t


def _stack(x, y) -> np.ndarray:
    return np.stack(np.broadcast_arrays(x, y), axis=-1)


class Trajectory:
    """Common interface; concrete models are frozen dataclasses below."""

    domain: float = math.inf

    def position(self, tau) -> np.ndarray:
        raise NotImplementedError

    def velocity(self, tau) -> np.ndarray:
        raise NotImplementedError

    def acceleration(self, tau) -> np.ndarray:
        raise NotImplementedError

    def shifted(self, dt: float) -> "Trajectory":
        """Same motion with the time origin moved ``dt`` seconds later."""
        raise NotImplementedError

    def translated(self, offset: Vec2) -> "Trajectory":
        """Same motion expressed in a frame whose origin sits at ``-offset``."""
        raise NotImplementedError

    def eval(self, tau: float) -> TrajQuery:
        return evaluate(self, tau)


@dataclass(frozen=True)
class Linear(Trajectory):
    c0: Vec2
    v: Vec2

    def position(self, tau):
        t = _check_tau(tau, self.domain)
        return _stack(self.c0.x + self.v.x * t, self.c0.y + self.v.y * t)

    def velocity(self, tau):
        t = _check_tau(tau, self.domain)
        return _stack(np.full_like(t, self.v.x), np.full_like(t, self.v.y))

    def acceleration(self, tau):
        t = _check_tau(tau, self.domain)
        return _stack(np.zeros_like(t), np.zeros_like(t))

    def shifted(self, dt):
        return Linear(self.c0 + self.v * dt, self.v)

    def translated(self, offset):
        return Linear(self.c0 + offset, self.v)


@dataclass(frozen=True)
class ConstAccel(Trajectory):
    c0: Vec2
    v: Vec2
    a: Vec2

    def position(self, tau):
        t = _check_tau(tau, self.domain)
        return _stack(
            self.c0.x + self.v.x * t + 0.5 * self.a.x * t * t,
            self.c0.y + self.v.y * t + 0.5 * self.a.y * t * t,
        )

    def velocity(self, tau):
        t = _check_tau(tau, self.domain)
        return _stack(self.v.x + self.a.x * t, self.v.y + self.a.y * t)

    def acceleration(self, tau):
        t = _check_tau(tau, self.domain)
        return _stack(np.full_like(t, self.a.x), np.full_like(t, self.a.y))

    def shifted(self, dt):
        q = evaluate(self, dt)
        return ConstAccel(q.position, q.velocity, self.a)

    def translated(self, offset):
        return ConstAccel(self.c0 + offset, self.v, self.a)


@dataclass(frozen=True)
class Circular(Trajectory):
    """Constant-speed motion on a circle; counter-clockwise for positive rate."""

    center: Vec2
    path_radius: float
    angular_rate: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.path_radius > 0:
            raise ValueError(f"path_radius must be > 0, got {self.path_radius}")

    def _angle(self, tau):
        t = _check_tau(tau, self.domain)
        return self.angular_rate * t + self.phase

    def position(self, tau):
        th = self._angle(tau)
        r = self.path_radius
        return _stack(self.center.x + r * np.cos(th), self.center.y + r * np.sin(th))

    def velocity(self, tau):
        th = self._angle(tau)
        s = self.path_radius * self.angular_rate
        return _stack(-s * np.sin(th), s * np.cos(th))

    def acceleration(self, tau):
        th = self._angle(tau)
        k = -self.path_radius * self.angular_rate**2
        return _stack(k * np.cos(th), k * np.sin(th))

    @property
    def speed(self) -> float:
        return abs(self.angular_rate) * self.path_radius

    def shifted(self, dt):
        return Circular(self.center, self.path_radius, self.angular_rate,
                        self.phase + self.angular_rate * dt)

    def translated(self, offset):
        return Circular(self.center + offset, self.path_radius, self.angular_rate, self.phase)


@dataclass(frozen=True)
class Piecewise(Trajectory):
    """Natural cubic spline through timed position samples.

    ``samples`` is a sequence of ``(tau, Vec2)`` with strictly increasing
    taus starting at 0. ``t_offset`` and ``offset`` are set by
    :meth:`shifted` and :meth:`translated`; the original sample times are kept.
    """

    samples: tuple
    t_offset: float = 0.0
    offset: Vec2 = Vec2(0.0, 0.0)
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        samples = tuple((float(t), Vec2.of(p)) for t, p in self.samples)
        object.__setattr__(self, "samples", samples)
        if len(samples) < 2:
            raise ValueError("Piecewise trajectory needs at least two samples")
        taus = np.array([t for t, _ in samples])
        if taus[0] != 0.0:
            raise ValueError(f"Piecewise samples must start at tau=0, got {taus[0]}")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("Piecewise sample times must be strictly increasing")
        pts = np.array([[p.x, p.y] for _, p in samples])
        object.__setattr__(self, "_spline", CubicSpline(taus, pts, bc_type="natural"))

    @property
    def domain(self) -> float:
        return self.samples[-1][0] - self.t_offset

    def _eval(self, tau, nu):
        t = _check_tau(tau, self.domain) + self.t_offset
        out = self._spline(t, nu)
        if nu == 0:
            out = out + np.array([self.offset.x, self.offset.y])
        return out

    def position(self, tau):
        return self._eval(tau, 0)

    def velocity(self, tau):
        return self._eval(tau, 1)

    def acceleration(self, tau):
        return self._eval(tau, 2)

    def shifted(self, dt):
        if dt > self.domain:
            raise TrajectoryDomainError(f"cannot shift by {dt}, domain is {self.domain}")
        return Piecewise(self.samples, self.t_offset + dt, self.offset)

    def translated(self, offset):
        return Piecewise(self.samples, self.t_offset, self.offset + offset)


def evaluate(traj: Trajectory, tau: float) -> TrajQuery:
    """Position, velocity and acceleration at elapsed time ``tau``."""
    tau = float(tau)
    return TrajQuery(
        Vec2.of(traj.position(tau)),
        Vec2.of(traj.velocity(tau)),
        Vec2.of(traj.acceleration(tau)),
    )


def predict_from_state(position, velocity, acceleration) -> ConstAccel:
    """Constant-acceleration extrapolation of an observed state."""
    return ConstAccel(Vec2.of(position), Vec2.of(velocity), Vec2.of(acceleration))
