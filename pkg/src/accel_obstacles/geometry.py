"""Planar primitives shared by every obstacle-map construction.

Everything here is immutable and double precision. Obstacles live in the
grown configuration space, so the only shape needed is a disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absolute geometric tolerance in metres (scenes are 1-100 m across).
GEOM_EPS = 1e-9


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    @classmethod
    def of(cls, v) -> "Vec2":
        """Coerce a Vec2, tuple, list or length-2 array."""
        if isinstance(v, Vec2):
            return v
        x, y = v
        return cls(float(x), float(y))

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def __mul__(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __truediv__(self, k: float) -> "Vec2":
        return Vec2(self.x / k, self.y / k)

    def __iter__(self):
        yield self.x
        yield self.y

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def angle(self) -> float:
        return math.atan2(self.y, self.x)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


ORIGIN = Vec2(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Disk:
    center: Vec2
    radius: float

    def __post_init__(self):
        if not math.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"Disk radius must be finite and >= 0, got {self.radius}")

    def contains(self, p: Vec2, eps: float = GEOM_EPS) -> bool:
        return (p - self.center).norm() <= self.radius + eps


def grow(obstacle: Disk, robot_radius: float) -> Disk:
    """Inflate an obstacle by the robot radius so the robot becomes a point."""
    if robot_radius < 0:
        raise ValueError(f"robot_radius must be >= 0, got {robot_radius}")
    return Disk(obstacle.center, obstacle.radius + robot_radius)


def homothety(center: Vec2, ratio: float, p: Vec2) -> Vec2:
    if not math.isfinite(ratio):
        raise ValueError("homothety ratio must be finite")
    return center + ratio * (p - center)


def homothety_disk(center: Vec2, ratio: float, d: Disk) -> Disk:
    if not ratio > 0:
        raise ValueError(f"homothety_disk needs a positive ratio, got {ratio}")
    return Disk(homothety(center, ratio, d.center), ratio * d.radius)
