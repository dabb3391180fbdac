"""Scenario files, built-in scenario generators and world construction.

Scenario JSON layout (every key except ``agents`` is optional)::

    {
      "name": "demo",
      "mode": "nao",                      # vo | nlvo | ao | nao
      "seed": 0,
      "world": {"dt": 0.02, "replan_interval": 0.1, "duration": 20.0},
      "planner": {"horizon": 10.0, "n_radial": 12, "n_angular": 36,
                  "safety_margin": 0.05, "kp": 1.0, "kd": 2.0,
                  "heuristic": "min_deviation", "goal_lookahead": 0.1},
      "constraint": {"a_max": 4.0},
      "guides": [[cx, cy, r], ...],       # drawn as lane circles only
      "agents": [
        {"id": "A", "role": "controlled", "radius": 1.0,
         "position": [x, y], "velocity": [vx, vy], "acceleration": [ax, ay],
         "goal": [gx, gy]},
        {"id": "B", "role": "scripted", "radius": 1.0,
         "trajectory": {"type": "circular", "center": [0, 0], "path_radius": 10,
                        "angular_rate": 0.6, "phase": 0.0}}
      ]
    }

Trajectory types: ``linear`` (c0, v), ``const_accel`` (c0, v, a),
``circular`` (center, path_radius, angular_rate, phase) and ``piecewise``
(samples: [[tau, x, y], ...], natural cubic spline). A controlled agent
without ``goal`` holds its acceleration until it becomes unsafe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .geometry import Vec2
from .obstacle_maps import MapKind
from .planner import ControlConstraint, Heuristic, PlannerConfig
from .simulator import AgentState, SimConfig, World
from .trajectories import Circular, ConstAccel, Linear, Piecewise, Trajectory


class ScenarioError(ValueError):
    """Scenario could not be parsed or failed validation."""


WORLD_DEFAULTS = {"dt": 0.02, "replan_interval": 0.1, "duration": 20.0}


@dataclass(frozen=True)
class Scenario:
    name: str
    agents: tuple
    dt: float = WORLD_DEFAULTS["dt"]
    replan_interval: float = WORLD_DEFAULTS["replan_interval"]
    duration: float = WORLD_DEFAULTS["duration"]
    planner: PlannerConfig = PlannerConfig()
    constraint: ControlConstraint = ControlConstraint()
    mode: MapKind = MapKind.NAO
    seed: int = 0
    guides: tuple = ()

    def world(self) -> World:
        return World(self.agents, 0.0, self.dt, self.replan_interval)

    def sim_config(self, mode=None) -> SimConfig:
        return SimConfig(MapKind.parse(mode or self.mode), self.planner, self.constraint)

    def with_mode(self, mode) -> "Scenario":
        return replace(self, mode=MapKind.parse(mode))


# ---------------------------------------------------------------- (de)serialisation

def _vec(v, where):
    try:
        x, y = v
        return Vec2(float(x), float(y))
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{where}: expected a finite [x, y] pair, got {v!r}") from e


def _num(d, key, where, default=None):
    if key not in d:
        if default is None:
            raise ScenarioError(f"{where}.{key}: required")
        return default
    try:
        x = float(d[key])
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{where}.{key}: expected a number, got {d[key]!r}") from e
    if not math.isfinite(x):
        raise ScenarioError(f"{where}.{key}: must be finite")
    return x


def trajectory_from_dict(d: dict, where: str = "trajectory") -> Trajectory:
    kind = d.get("type")
    try:
        if kind == "linear":
            return Linear(_vec(d["c0"], f"{where}.c0"), _vec(d["v"], f"{where}.v"))
        if kind == "const_accel":
            return ConstAccel(_vec(d["c0"], f"{where}.c0"), _vec(d["v"], f"{where}.v"),
                              _vec(d["a"], f"{where}.a"))
        if kind == "circular":
            return Circular(_vec(d["center"], f"{where}.center"), _num(d, "path_radius", where),
                            _num(d, "angular_rate", where), _num(d, "phase", where, 0.0))
        if kind == "piecewise":
            samples = tuple((float(s[0]), Vec2(float(s[1]), float(s[2]))) for s in d["samples"])
            return Piecewise(samples)
    except KeyError as e:
        raise ScenarioError(f"{where}.{e.args[0]}: required") from e
    except ScenarioError:
        raise
    except (TypeError, ValueError, IndexError) as e:
        raise ScenarioError(f"{where}: {e}") from e
    raise ScenarioError(f"{where}.type: unknown trajectory type {kind!r}")


def trajectory_to_dict(t: Trajectory) -> dict:
    if isinstance(t, Linear):
        return {"type": "linear", "c0": list(t.c0), "v": list(t.v)}
    if isinstance(t, ConstAccel):
        return {"type": "const_accel", "c0": list(t.c0), "v": list(t.v), "a": list(t.a)}
    if isinstance(t, Circular):
        return {"type": "circular", "center": list(t.center), "path_radius": t.path_radius,
                "angular_rate": t.angular_rate, "phase": t.phase}
    if isinstance(t, Piecewise):
        if t.t_offset or t.offset.norm():
            raise ValueError("only unshifted piecewise trajectories can be serialised")
        return {"type": "piecewise", "samples": [[tau, p.x, p.y] for tau, p in t.samples]}
    raise TypeError(f"cannot serialise {type(t).__name__}")


def _agent_from_dict(d: dict, i: int) -> AgentState:
    where = f"agents[{i}]"
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected an object")
    if "id" not in d:
        raise ScenarioError(f"{where}.id: required")
    aid = str(d["id"])
    where = f"agent {aid!r}"
    role = d.get("role", "controlled")
    radius = _num(d, "radius", where, 1.0)
    if radius <= 0:
        raise ScenarioError(f"{where}.radius: must be > 0")
    if role == "scripted":
        if "trajectory" not in d:
            raise ScenarioError(f"{where}.trajectory: required for scripted agents")
        traj = trajectory_from_dict(d["trajectory"], f"{where}.trajectory")
        return AgentState.scripted(aid, traj, radius)
    if role != "controlled":
        raise ScenarioError(f"{where}.role: expected 'controlled' or 'scripted', got {role!r}")
    goal = d.get("goal")
    return AgentState(
        aid,
        _vec(d.get("position", [0, 0]), f"{where}.position"),
        _vec(d.get("velocity", [0, 0]), f"{where}.velocity"),
        _vec(d.get("acceleration", [0, 0]), f"{where}.acceleration"),
        radius,
        goal=None if goal is None else _vec(goal, f"{where}.goal"),
    )


def _agent_to_dict(a: AgentState) -> dict:
    if a.trajectory is not None:
        return {"id": a.id, "role": "scripted", "radius": a.radius,
                "trajectory": trajectory_to_dict(a.trajectory)}
    d = {"id": a.id, "role": "controlled", "radius": a.radius, "position": list(a.position),
         "velocity": list(a.velocity), "acceleration": list(a.acceleration)}
    if a.goal is not None:
        d["goal"] = list(a.goal)
    return d


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("top level: expected an object")
    world = d.get("world", {})
    agents_raw = d.get("agents")
    if not agents_raw:
        raise ScenarioError("agents: at least one agent is required")
    agents = tuple(_agent_from_dict(a, i) for i, a in enumerate(agents_raw))
    seen = set()
    for a in agents:
        if a.id in seen:
            raise ScenarioError(f"agent {a.id!r}: duplicate agent id")
        seen.add(a.id)

    pl = dict(d.get("planner", {}))
    known = {f.name for f in fields(PlannerConfig)}
    unknown = set(pl) - known
    if unknown:
        raise ScenarioError(f"planner: unknown keys {sorted(unknown)}")
    try:
        if "heuristic" in pl:
            pl["heuristic"] = Heuristic.parse(pl["heuristic"])
        planner = PlannerConfig(**pl)
        constraint = ControlConstraint(**d.get("constraint", {}))
        mode = MapKind.parse(d.get("mode", "nao"))
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"configuration: {e}") from e

    dt = _num(world, "dt", "world", WORLD_DEFAULTS["dt"])
    replan = _num(world, "replan_interval", "world", WORLD_DEFAULTS["replan_interval"])
    duration = _num(world, "duration", "world", WORLD_DEFAULTS["duration"])
    if dt <= 0 or duration <= 0:
        raise ScenarioError("world: dt and duration must be > 0")
    ratio = replan / dt
    if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
        raise ScenarioError("world.replan_interval: must be an integer multiple of dt")
    for a in agents:
        if a.trajectory is not None and a.trajectory.domain < duration:
            raise ScenarioError(f"agent {a.id!r}: trajectory ends at {a.trajectory.domain} s, "
                                f"before the scenario duration {duration} s")
    guides = tuple(tuple(float(x) for x in g) for g in d.get("guides", ()))
    return Scenario(str(d.get("name", "scenario")), agents, dt, replan, duration, planner,
                    constraint, mode, int(d.get("seed", 0)), guides)


def scenario_to_dict(sc: Scenario) -> dict:
    pl = {f.name: getattr(sc.planner, f.name) for f in fields(PlannerConfig)}
    pl["heuristic"] = sc.planner.heuristic.value
    return {
        "name": sc.name,
        "mode": sc.mode.value,
        "seed": sc.seed,
        "world": {"dt": sc.dt, "replan_interval": sc.replan_interval, "duration": sc.duration},
        "planner": pl,
        "constraint": {"a_max": sc.constraint.a_max},
        "guides": [list(g) for g in sc.guides],
        "agents": [_agent_to_dict(a) for a in sc.agents],
    }


def dumps(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2) + "\n"


def loads(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"line {e.lineno} column {e.colno}: {e.msg}") from e
    return scenario_from_dict(d)


def load_scenario(source) -> Scenario:
    """Load a scenario from a JSON path or a built-in name."""
    name = str(source)
    if name in BUILTINS and not Path(name).exists():
        return BUILTINS[name]()
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror or e}") from e
    try:
        return loads(text)
    except ScenarioError as e:
        raise ScenarioError(f"{path}: {e}") from e


# ---------------------------------------------------------------- generators

LANE_RADII = (10.0, 14.0, 18.0)
LANE_SPEEDS = (6.0, 7.0, 8.0)
VEHICLE_RADIUS = 0.8
ROUNDABOUT_SEED = 0
CROSSING_SEED = 7


def gen_roundabout(n_per_lane: int = 10, lane_radii=LANE_RADII, lane_speeds=LANE_SPEEDS,
                   seed: int | None = None, crossing: bool = False) -> Scenario:
    """Three counter-clockwise lanes of scripted vehicles plus one robot from the left.

    Vehicles in a lane are evenly spaced; the seed only rotates each lane
    as a whole. By default the robot heads for the top exit and replans
    every second. With ``crossing=True`` it has no goal and keeps one
    horizontal acceleration for the whole run, chosen at t = 0 as the one
    with the largest clearance on its NAO maps.
    """
    if seed is None:
        seed = CROSSING_SEED if crossing else ROUNDABOUT_SEED
    if n_per_lane < 1:
        raise ValueError("n_per_lane must be >= 1")
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(0.0, 2.0 * math.pi, len(lane_radii))
    agents = []
    for k, (R, s) in enumerate(zip(lane_radii, lane_speeds)):
        for i in range(n_per_lane):
            phase = float(offsets[k] + 2.0 * math.pi * i / n_per_lane)
            traj = Circular(Vec2(0.0, 0.0), float(R), float(s) / float(R), phase)
            agents.append(AgentState.scripted(f"L{k}V{i}", traj, VEHICLE_RADIUS))
    outer = max(lane_radii)
    if crossing:
        robot = AgentState("robot", Vec2(-outer - 6.0, 0.0), Vec2(4.0, 0.0), Vec2(0.0, 0.0),
                           VEHICLE_RADIUS)
        duration, replan = 16.0, 16.0
    else:
        robot = AgentState("robot", Vec2(-outer - 6.0, 0.0), Vec2(3.0, 0.0), Vec2(0.0, 0.0),
                           VEHICLE_RADIUS, goal=Vec2(0.0, outer + 6.0))
        duration, replan = 30.0, 1.0
    agents.append(robot)
    sc = Scenario(
        "roundabout_crossing" if crossing else "roundabout",
        tuple(agents), dt=0.02, replan_interval=replan, duration=duration,
        planner=PlannerConfig(kp=0.3, kd=1.0),
        constraint=ControlConstraint(4.0), mode=MapKind.NAO, seed=seed,
        guides=tuple((0.0, 0.0, float(R)) for R in lane_radii),
    )
    if crossing:
        a = _best_horizontal_acceleration(sc, "robot")
        if a is not None:
            agents[-1] = replace(robot, acceleration=Vec2(a, 0.0))
            sc = replace(sc, agents=tuple(agents))
    return sc


def _best_horizontal_acceleration(sc: Scenario, agent_id: str, n: int = 400):
    """Forward horizontal acceleration with the largest NAO clearance, or None."""
    from .obstacle_maps import MEMBER_EPS, margins
    from .simulator import agent_maps

    maps = agent_maps(sc.world(), agent_id, sc.sim_config(MapKind.NAO))
    ax = sc.constraint.a_max * np.arange(1, n + 1) / n
    cands = np.column_stack([ax, np.zeros_like(ax)])
    worst = np.min([margins(m, cands) for m in maps], axis=0)
    k = int(np.argmax(worst))
    return float(ax[k]) if worst[k] > MEMBER_EPS else None


CURVE_RADII = (46.0, 50.0, 54.0)


def gen_curved_road(lane_radii=CURVE_RADII, speed_a: float = 10.0, speed_b: float = 13.0,
                    speed_c: float = 10.0, speed_d: float = 11.0, radius: float = 1.0) -> Scenario:
    """Robot A on the outer lane of a left-hand bend with three scripted cars.

    A sits at angle 0 heading straight up. B drives faster on the middle
    lane behind A, placed so that B's tangent line crosses A's straight
    path at the moment A gets there: a linear prediction of B hits A while
    B's actual lane never comes within a lane width. C (inner lane) and D
    (outer lane) are ahead of A.
    """
    from scipy.optimize import brentq

    r_in, r_mid, r_out = lane_radii

    def miss(phi):
        t = (r_out - r_mid * math.cos(phi)) / (speed_b * math.sin(phi))
        return -r_mid * math.sin(phi) + speed_b * math.cos(phi) * t - speed_a * t

    phi_b = brentq(miss, 0.05, 1.2)
    road = Vec2(0.0, 0.0)

    def lane_car(cid, R, angle, speed):
        return AgentState.scripted(cid, Circular(road, R, speed / R, angle), radius)

    a = AgentState("A", Vec2(r_out, 0.0), Vec2(0.0, speed_a), Vec2(0.0, 0.0), radius,
                   goal=Vec2(r_out * math.cos(0.4), r_out * math.sin(0.4)))
    agents = (a, lane_car("B", r_mid, -phi_b, speed_b), lane_car("C", r_in, 0.25, speed_c),
              lane_car("D", r_out, 0.3, speed_d))
    return Scenario("curved_road", agents, dt=0.02, replan_interval=0.1, duration=3.0,
                    planner=PlannerConfig(kp=0.3, kd=0.5), constraint=ControlConstraint(4.0),
                    mode=MapKind.NLVO, guides=tuple((0.0, 0.0, R) for R in lane_radii))


def gen_head_on(distance: float = 20.0, speed: float = 2.0, radius: float = 0.5) -> Scenario:
    """Two identical controlled robots swapping places along the x axis."""
    h = distance / 2.0
    a = AgentState("A", Vec2(-h, 0.0), Vec2(speed, 0.0), Vec2(0.0, 0.0), radius, goal=Vec2(h, 0.0))
    b = AgentState("B", Vec2(h, 0.0), Vec2(-speed, 0.0), Vec2(0.0, 0.0), radius, goal=Vec2(-h, 0.0))
    return Scenario("head_on", (a, b), duration=15.0, planner=PlannerConfig(kp=0.5, kd=1.0),
                    constraint=ControlConstraint(2.0), mode=MapKind.NAO)


BUILTINS = {
    "roundabout": gen_roundabout,
    "roundabout_crossing": lambda: gen_roundabout(crossing=True),
    "curved_road": gen_curved_road,
    "head_on": gen_head_on,
}
