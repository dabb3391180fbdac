"""Deterministic multi-agent stepping with per-agent obstacle maps.

Every controlled agent runs the same planner against a frozen snapshot of
the world; all agents then advance together. Controlled agents integrate
exactly under the commanded constant acceleration and scripted agents are
re-evaluated on their trajectory, so neither accumulates drift.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Vec2
from .obstacle_maps import MapKind, RelativeDynamics, SamplingPolicy, build_map, membership
from .planner import ControlConstraint, PlannerConfig, nominal_acceleration, select_acceleration
from .trajectories import Trajectory, evaluate, predict_from_state

# Commanded-acceleration change (m/s^2) that counts as an adjustment.
ADJUST_EPS = 1e-3

CSV_COLUMNS = ["time", "id", "px", "py", "vx", "vy", "ax", "ay", "min_dist", "flags"]

# Obstacle maps in the simulator are never rendered; keep the sample tiny.
_NO_RENDER = SamplingPolicy(n_samples=2)


@dataclass(frozen=True)
class AgentState:
    id: str
    position: Vec2
    velocity: Vec2
    acceleration: Vec2
    radius: float
    goal: Vec2 | None = None
    trajectory: Trajectory | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"agent {self.id}: radius must be > 0")
        for name in ("position", "velocity", "acceleration"):
            object.__setattr__(self, name, Vec2.of(getattr(self, name)))
        if self.goal is not None:
            object.__setattr__(self, "goal", Vec2.of(self.goal))

    @property
    def controlled(self) -> bool:
        return self.trajectory is None

    @property
    def role(self) -> str:
        return "controlled" if self.controlled else "scripted"

    @classmethod
    def scripted(cls, id, trajectory: Trajectory, radius: float, t: float = 0.0) -> "AgentState":
        q = evaluate(trajectory, t)
        return cls(id, q.position, q.velocity, q.acceleration, radius, trajectory=trajectory)


@dataclass(frozen=True)
class World:
    agents: tuple
    time: float = 0.0
    dt: float = 0.02
    replan_interval: float = 0.1
    step_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        ratio = self.replan_interval / self.dt
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("replan_interval must be an integer multiple of dt")

    @property
    def replan_every(self) -> int:
        return int(round(self.replan_interval / self.dt))

    def agent(self, agent_id) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)


@dataclass(frozen=True)
class SimConfig:
    mode: MapKind = MapKind.NAO
    planner: PlannerConfig = PlannerConfig()
    constraint: ControlConstraint = ControlConstraint()
    use_declared_trajectories: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", MapKind.parse(self.mode))
        if self.use_declared_trajectories is None:
            object.__setattr__(self, "use_declared_trajectories",
                               self.mode in (MapKind.NAO, MapKind.NLVO))

    @property
    def plans(self) -> bool:
        return self.mode.space == "acceleration"


@dataclass(frozen=True)
class CollisionEvent:
    a: str
    b: str
    time: float
    depth: float


@dataclass
class SimLog:
    """Everything recorded over a run; rows follow ``CSV_COLUMNS``."""

    rows: list = field(default_factory=list)
    collisions: list = field(default_factory=list)
    adjustments: dict = field(default_factory=dict)
    min_distance: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    final: World | None = None
    dt: float = 0.0

    def collision_episodes(self) -> list:
        """Collision events that start a new overlap for their pair."""
        episodes, prev_step = [], {}
        for e in self.collisions:
            k = int(round(e.time / self.dt)) if self.dt else 0
            if prev_step.get((e.a, e.b)) != k - 1:
                episodes.append(e)
            prev_step[(e.a, e.b)] = k
        return episodes

    @property
    def collision_count(self) -> int:
        return len(self.collision_episodes())

    def membership_flips(self, agent_id: str, other_id: str, kind: MapKind) -> int:
        seq = [c for (t, a, k, o, c) in self.diagnostics
               if a == agent_id and o == other_id and k is kind]
        return sum(1 for x, y in zip(seq, seq[1:]) if x != y)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _gaps(agents) -> np.ndarray:
    """Surface clearance between every pair (inf on the diagonal)."""
    pos = np.array([(a.position.x, a.position.y) for a in agents], dtype=float).reshape(-1, 2)
    rad = np.array([a.radius for a in agents], dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    gap = np.hypot(diff[..., 0], diff[..., 1]) - (rad[:, None] + rad[None, :])
    np.fill_diagonal(gap, np.inf)
    return gap


def detect_collisions(agents) -> list:
    """Pairs whose centre distance is below the summed radii, with penetration depth."""
    agents = list(agents)
    if len(agents) < 2:
        return []
    gap = _gaps(agents)
    ii, jj = np.nonzero(np.triu(gap < 0, k=1))
    return [(agents[i].id, agents[j].id, float(-gap[i, j])) for i, j in zip(ii, jj)]


def _prediction(me: AgentState, other: AgentState, t: float, cfg: SimConfig):
    """Other agent's motion relative to ``me`` from time ``t`` on."""
    if other.trajectory is not None and cfg.use_declared_trajectories:
        return other.trajectory.shifted(t).translated(-me.position)
    return predict_from_state(other.position - me.position, other.velocity, other.acceleration)


def agent_maps(world: World, agent_id, cfg: SimConfig, kind: MapKind | None = None,
               sampling: SamplingPolicy | None = None) -> list:
    """Obstacle maps of every other agent as seen by ``agent_id`` at ``world.time``."""
    kind = MapKind.parse(kind or cfg.mode)
    sampling = sampling or _NO_RENDER
    me = world.agent(agent_id)
    horizon = cfg.planner.horizon
    maps = []
    for other in world.agents:
        if other.id == me.id:
            continue
        radius = me.radius + other.radius + cfg.planner.safety_margin
        c0 = other.position - me.position
        if kind is MapKind.VO:
            m = build_map(kind, c0=c0, v_b=other.velocity, radius=radius, horizon=horizon,
                          sampling=sampling, source_id=other.id)
        elif kind is MapKind.AO:
            rd = RelativeDynamics(c0, me.velocity - other.velocity, other.acceleration, radius)
            m = build_map(kind, rd=rd, horizon=horizon, sampling=sampling, source_id=other.id)
        else:
            traj = _prediction(me, other, world.time, cfg)
            if traj.domain <= 1e-3:
                continue
            extra = {"v_a": me.velocity} if kind is MapKind.NAO else {}
            m = build_map(kind, traj=traj, radius=radius, horizon=horizon, sampling=sampling,
                          source_id=other.id, **extra)
        maps.append(m)
    return maps


def _advance(agent: AgentState, t_next: float, dt: float) -> AgentState:
    if agent.trajectory is not None:
        q = evaluate(agent.trajectory, t_next)
        return replace(agent, position=q.position, velocity=q.velocity, acceleration=q.acceleration)
    p, v, a = agent.position, agent.velocity, agent.acceleration
    return replace(agent, position=p + v * dt + 0.5 * dt * dt * a, velocity=v + a * dt)


def _clearances(agents) -> dict:
    if len(agents) < 2:
        return {a.id: math.inf for a in agents}
    worst = _gaps(agents).min(axis=1)
    return {a.id: float(g) for a, g in zip(agents, worst)}


def step(world: World, cfg: SimConfig, log: SimLog | None = None) -> World:
    """Plan on the current snapshot, then advance every agent by one ``dt``."""
    t = world.time
    replan = world.step_index % world.replan_every == 0
    flags = {a.id: [] for a in world.agents}
    commanded = {}

    for a in world.agents:
        if not a.controlled:
            continue
        if not replan:
            commanded[a.id] = a.acceleration
            continue
        flags[a.id].append("replan")
        if cfg.plans:
            maps = agent_maps(world, a.id, cfg)
            res = select_acceleration(a, maps, cfg.constraint, cfg.planner)
            if not res.safe:
                flags[a.id].append("unsafe")
            if log is not None:
                log.plans.append((t, a.id, res))
            commanded[a.id] = res.acceleration
        else:
            for kind in (MapKind.VO, MapKind.NLVO):
                for m in agent_maps(world, a.id, cfg, kind):
                    hit = membership(m, a.velocity).colliding
                    if log is not None:
                        log.diagnostics.append((t, a.id, kind, m.source_id, hit))
                    if hit:
                        flags[a.id].append(f"{kind.value}:{m.source_id}")
            commanded[a.id] = nominal_acceleration(a, cfg.planner, cfg.constraint)
        if (commanded[a.id] - a.acceleration).norm() > ADJUST_EPS:
            flags[a.id].append("adjust")
            if log is not None:
                log.adjustments[a.id] = log.adjustments.get(a.id, 0) + 1

    snapshot = tuple(replace(a, acceleration=commanded[a.id]) if a.id in commanded else a
                     for a in world.agents)
    if log is not None:
        _record(log, t, snapshot, flags)

    k = world.step_index + 1
    t_next = k * world.dt
    agents = tuple(_advance(a, t_next, world.dt) for a in snapshot)
    new = replace(world, agents=agents, time=t_next, step_index=k)
    if log is not None:
        for i, j, depth in detect_collisions(agents):
            log.collisions.append(CollisionEvent(i, j, t_next, depth))
    return new


def _record(log: SimLog, t: float, agents, flags) -> None:
    clear = _clearances(list(agents))
    finite = [g for g in clear.values() if math.isfinite(g)]
    log.min_distance.append((t, min(finite) if finite else math.inf))
    for a in agents:
        log.rows.append((t, a.id, a.position.x, a.position.y, a.velocity.x, a.velocity.y,
                         a.acceleration.x, a.acceleration.y, clear[a.id], ";".join(flags[a.id])))


def run(world: World, duration: float, cfg: SimConfig, on_step=None) -> SimLog:
    """Step for ``ceil(duration / dt)`` steps and return the full log.

    ``on_step(world)`` is called with the initial world and after every step.
    """
    if not duration > 0:
        raise ValueError("duration must be > 0")
    log = SimLog(dt=world.dt)
    for a in world.agents:
        if a.controlled:
            log.adjustments.setdefault(a.id, 0)
    for i, j, depth in detect_collisions(world.agents):
        log.collisions.append(CollisionEvent(i, j, world.time, depth))
    n = int(math.ceil(duration / world.dt - 1e-9))
    if on_step is not None:
        on_step(world)
    for _ in range(n):
        world = step(world, cfg, log)
        if on_step is not None:
            on_step(world)
    _record(log, world.time, world.agents, {a.id: [] for a in world.agents})
    log.final = world
    return log
