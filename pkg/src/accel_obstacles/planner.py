"""Safe constant-acceleration selection against AO/NAO maps.

The desired acceleration is kept whenever it lies outside every map.
Otherwise a fixed polar grid over the admissible acceleration disk is
scored and the best safe candidate is returned. The grid is laid out
relative to the robot's heading, so mirrored situations get mirrored
answers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import GEOM_EPS, Vec2
from .obstacle_maps import DEFAULT_HORIZON, MEMBER_EPS, TAU_MIN, ObstacleMap, margins

# Scores closer than this are ties, left to the next sort key.
_TIE_QUANTUM = 1e-9


class Heuristic(enum.Enum):
    MIN_DEVIATION = "min_deviation"
    MAX_CLEARANCE = "max_clearance"
    GOAL_GREEDY = "goal_greedy"

    @classmethod
    def parse(cls, s) -> "Heuristic":
        if isinstance(s, cls):
            return s
        key = str(s).lower().replace("-", "_")
        aliases = {"mindeviation": "min_deviation", "maxclearance": "max_clearance",
                   "goalgreedy": "goal_greedy"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class ControlConstraint:
    a_max: float = 4.0

    def __post_init__(self):
        if not self.a_max > 0:
            raise ValueError(f"a_max must be > 0, got {self.a_max}")


@dataclass(frozen=True)
class PlannerConfig:
    horizon: float = DEFAULT_HORIZON
    n_radial: int = 12
    n_angular: int = 36
    safety_margin: float = 0.05
    kp: float = 1.0
    kd: float = 2.0
    heuristic: Heuristic = Heuristic.MIN_DEVIATION
    # look-ahead used by GOAL_GREEDY to score closing speed
    goal_lookahead: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "heuristic", Heuristic.parse(self.heuristic))
        if self.n_radial < 1:
            raise ValueError("n_radial must be >= 1")
        if self.n_angular < 4:
            raise ValueError("n_angular must be >= 4")
        if not self.horizon > TAU_MIN:
            raise ValueError(f"horizon must exceed {TAU_MIN}")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be >= 0")


@dataclass(frozen=True)
class PlanResult:
    acceleration: Vec2
    safe: bool
    candidates_evaluated: int
    min_margin: float


def clamp(a: Vec2, a_max: float) -> Vec2:
    n = a.norm()
    return a if n <= a_max else a * (a_max / n)


def desired_acceleration(position, velocity, goal, cfg: PlannerConfig,
                         constraint: ControlConstraint) -> Vec2:
    """PD pull toward ``goal``, clamped to the admissible disk."""
    position, velocity, goal = Vec2.of(position), Vec2.of(velocity), Vec2.of(goal)
    return clamp(cfg.kp * (goal - position) - cfg.kd * velocity, constraint.a_max)


def nominal_acceleration(state, cfg: PlannerConfig, constraint: ControlConstraint) -> Vec2:
    """Goal-seeking agents use the PD law; agents without a goal hold their acceleration."""
    if state.goal is not None:
        return desired_acceleration(state.position, state.velocity, state.goal, cfg, constraint)
    return clamp(Vec2.of(state.acceleration), constraint.a_max)


def _heading(state, a_des: Vec2) -> float:
    v = Vec2.of(state.velocity)
    if v.norm() > GEOM_EPS:
        return v.angle()
    if a_des.norm() > GEOM_EPS:
        return a_des.angle()
    return 0.0


def candidate_grid(a_max: float, n_radial: int, n_angular: int, heading: float = 0.0):
    """Polar grid over the admissible disk.

    Returns ``(points, rel_angle, magnitude)``; angles are measured
    counter-clockwise from ``heading`` in [0, 2 pi).
    """
    if n_radial == 1:
        mags = np.array([a_max])
    else:
        mags = np.geomspace(a_max / 16.0, a_max, n_radial)
    rel = 2.0 * math.pi * np.arange(n_angular) / n_angular
    M, R = np.meshgrid(mags, rel, indexing="ij")
    M, R = M.ravel(), R.ravel()
    th = R + heading
    pts = np.column_stack([M * np.cos(th), M * np.sin(th)])
    return pts, R, M


def _safe_mask_and_margin(maps, cands):
    if not maps:
        return np.ones(len(cands), bool), np.full(len(cands), math.inf)
    worst = np.full(len(cands), math.inf)
    for m in maps:
        worst = np.minimum(worst, margins(m, cands))
    return worst > MEMBER_EPS, worst


def _q(x):
    return np.round(np.asarray(x) / _TIE_QUANTUM) * _TIE_QUANTUM


def select_acceleration(state, maps: list[ObstacleMap], constraint: ControlConstraint,
                        cfg: PlannerConfig) -> PlanResult:
    """Pick a constant acceleration outside every map, within ``a_max``.

    ``maps`` must be acceleration-space maps built for this robot's current
    velocity. When nothing on the grid is safe the candidate with the
    largest margin is returned with ``safe=False``.
    """
    a_des = nominal_acceleration(state, cfg, constraint)
    des = np.array([[a_des.x, a_des.y]])
    safe, margin = _safe_mask_and_margin(maps, des)
    if safe[0]:
        return PlanResult(a_des, True, 1, float(margin[0]))

    heading = _heading(state, a_des)
    grid, rel, mag = candidate_grid(constraint.a_max, cfg.n_radial, cfg.n_angular, heading)
    extra = np.array([[a_des.x, a_des.y], [0.0, 0.0]])
    extra_rel = np.mod(np.arctan2(extra[:, 1], extra[:, 0]) - heading, 2.0 * math.pi)
    extra_rel[1] = 0.0
    cands = np.vstack([grid, extra])
    rel = np.concatenate([rel, extra_rel])
    mag = np.concatenate([mag, np.hypot(extra[:, 0], extra[:, 1])])

    safe, margin = _safe_mask_and_margin(maps, cands)
    dev = np.hypot(cands[:, 0] - a_des.x, cands[:, 1] - a_des.y)
    n = len(cands) + 1

    if not safe.any():
        # survival first: largest margin, then closest to the desired acceleration
        order = np.lexsort((mag, rel, _q(dev), _q(-margin)))
        k = int(order[0])
        return PlanResult(Vec2.of(cands[k]), False, n, float(margin[k]))

    h = cfg.heuristic
    if h is Heuristic.MAX_CLEARANCE:
        primary = -np.minimum(margin, 1e6)
    elif h is Heuristic.GOAL_GREEDY and state.goal is not None:
        to_goal = Vec2.of(state.goal) - Vec2.of(state.position)
        dist = to_goal.norm()
        u = to_goal.as_array() / dist if dist > GEOM_EPS else np.zeros(2)
        v_next = np.asarray(tuple(Vec2.of(state.velocity))) + cands * cfg.goal_lookahead
        primary = -(v_next @ u)
    else:
        primary = dev
    keys = (mag, rel, _q(-np.minimum(margin, 1e6)), _q(dev), _q(primary))
    order = np.lexsort(keys)
    order = order[safe[order]]
    k = int(order[0])
    return PlanResult(Vec2.of(cands[k]), True, n, float(margin[k]))
