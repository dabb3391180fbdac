"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary."""

import functools
import io
import time

import numpy as np

from accel_obstacles import cli
from accel_obstacles.geometry import Vec2
from accel_obstacles.obstacle_maps import (MEMBER_EPS, MapKind, RelativeDynamics, ao_temporal,
                                           build_map, membership, nao_temporal, nlvo_temporal,
                                           vo_temporal)
from accel_obstacles.planner import ControlConstraint, PlannerConfig, select_acceleration
from accel_obstacles.scenario_io import gen_curved_road, load_scenario
from accel_obstacles.simulator import AgentState, agent_maps, run
from accel_obstacles.trajectories import ConstAccel, Linear
from conftest import ACCEPTANCE
from oracles import min_gap, random_trajectory, random_vec


def criterion(n, title):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kw):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kw) or ""
            except AssertionError as e:
                msg = str(e).splitlines()[0] if str(e) else "assertion failed"
                ACCEPTANCE.append((n, title, False, msg))
                raise
            ACCEPTANCE.append((n, title, True, f"{detail} ({time.perf_counter() - t0:.2f} s)"))
        return inner
    return wrap


def rel_err(u, v):
    u, v = np.asarray(tuple(u), float), np.asarray(tuple(v), float)
    return np.abs(u - v).max() / max(np.abs(v).max(), 1e-300)


@criterion(1, "reduction identities")
def test_reduction_identities():
    rng = np.random.default_rng(101)
    cases = []
    for _ in range(1000):
        cases.append((random_vec(rng, 50), random_vec(rng, 15), random_vec(rng, 5),
                      random_vec(rng, 15), rng.uniform(0.5, 3), 10 ** rng.uniform(-3, 1)))
    t0 = time.perf_counter()
    worst = 0.0
    for c0, vb, ab, va, r, tau in cases:
        a, b = nlvo_temporal(Linear(c0, vb), r, tau), vo_temporal(c0, r, vb, tau)
        # componentwise relative error, scaled by the element size so a
        # component that cancels to ~0 is not divided by itself
        scale = max(b.center.norm(), b.radius)
        worst = max(worst, (a.center - b.center).norm() / scale, abs(a.radius - b.radius) / b.radius)
        a = nao_temporal(ConstAccel(c0, vb, ab), r, va, tau)
        b = ao_temporal(RelativeDynamics(c0, va - vb, ab, r), tau)
        scale = max(b.center.norm(), b.radius)
        worst = max(worst, (a.center - b.center).norm() / scale, abs(a.radius - b.radius) / b.radius)
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-12, f"worst relative difference {worst:.3g}"
    assert elapsed < 1.0, f"took {elapsed:.2f} s"
    return f"worst relative difference {worst:.2g} over 2000 pairs"


@criterion(2, "straight-cone AO")
def test_straight_cone():
    rng = np.random.default_rng(102)
    worst_cross, worst_ratio = 0.0, 0.0
    for _ in range(50):
        c0 = random_vec(rng, 50)
        r = rng.uniform(0.5, 3)
        if c0.norm() <= r:
            continue
        m = build_map("ao", rd=RelativeDynamics(c0, Vec2(0, 0), Vec2(0, 0), r))
        arr = m.disk_array()
        u = np.array(tuple(c0)) / c0.norm()
        cross = np.abs(arr[:, 1] * u[1] - arr[:, 2] * u[0]) / np.hypot(arr[:, 1], arr[:, 2])
        assert np.all(arr[:, 1:3] @ u > 0), "centre not a positive multiple of c0"
        ratio = arr[:, 3] / np.hypot(arr[:, 1], arr[:, 2])
        worst_cross = max(worst_cross, cross.max())
        worst_ratio = max(worst_ratio, np.abs(ratio / (r / c0.norm()) - 1).max())
    assert worst_cross < 1e-9, f"cross residual {worst_cross:.3g}"
    assert worst_ratio < 1e-12, f"ratio spread {worst_ratio:.3g}"
    return f"cross residual {worst_cross:.2g}, ratio spread {worst_ratio:.2g}"


@criterion(3, "membership vs dense oracle")
def test_membership_oracle():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    disagree, banded = 0, 0
    for i in range(1000):
        kind = ("ao", "const_accel", "circular", "piecewise")[i % 4]
        r, va, a = rng.uniform(0.5, 3), random_vec(rng, 15), random_vec(rng, 5)
        if kind == "ao":
            traj = random_trajectory(rng, "const_accel")
            m = build_map("ao", rd=RelativeDynamics(traj.c0, va - traj.v, traj.a, r))
        else:
            traj = random_trajectory(rng, kind)
            m = build_map("nao", traj=traj, radius=r, v_a=va)
        res = membership(m, a)
        gap, *_ = min_gap(tuple(va), tuple(a), traj, r, m.horizon, step=1e-4)
        if abs(res.margin) < 10 * MEMBER_EPS:
            banded += 1
            continue
        if res.colliding != (gap <= MEMBER_EPS):
            disagree += 1
    elapsed = time.perf_counter() - t0
    assert disagree == 0, f"{disagree} disagreements outside the band"
    assert elapsed < 30.0, f"took {elapsed:.1f} s"
    return f"0 disagreements, {banded} in the boundary band"


@criterion(4, "planner safety soundness")
def test_planner_soundness():
    rng = np.random.default_rng(104)
    cfg, cons = PlannerConfig(), ControlConstraint(4.0)
    n_safe, n_scenes, n_grid = 0, 0, 0
    while n_scenes < 500:
        va = random_vec(rng, 10)
        state = AgentState("r", Vec2(0, 0), va, random_vec(rng, 2), 0.5,
                           goal=Vec2(*rng.uniform(-40, 40, 2)))
        obstacles = []
        for _ in range(int(rng.integers(1, 5))):
            traj = random_trajectory(rng, rng.choice(["const_accel", "circular", "piecewise"]))
            r = rng.uniform(0.5, 3)
            # move the obstacle into a 3-20 m ring so most scenes are contested
            start = traj.position(np.array([0.0]))[0]
            dist, ang = rng.uniform(3, 20), rng.uniform(0, 2 * np.pi)
            traj = traj.translated(Vec2(dist * np.cos(ang), dist * np.sin(ang)) - Vec2.of(start))
            if dist <= r + 0.5 + 0.5:
                continue
            obstacles.append((traj, r))
        if not obstacles:
            continue
        n_scenes += 1
        maps = []
        for traj, r in obstacles:
            if isinstance(traj, ConstAccel) and rng.random() < 0.5:
                maps.append(build_map("ao", rd=RelativeDynamics(traj.c0, va - traj.v, traj.a, r)))
            else:
                maps.append(build_map("nao", traj=traj, radius=r, v_a=va))
        res = select_acceleration(state, maps, cons, cfg)
        if not res.safe:
            continue
        n_safe += 1
        n_grid += res.candidates_evaluated > 1
        for (traj, r), m in zip(obstacles, maps):
            gap, tau, *_ = min_gap(tuple(va), tuple(res.acceleration), traj, r, m.horizon, step=1e-3)
            assert gap > 0, f"scene {n_scenes}: gap {gap:.3g} at tau {tau:.3f}"
    assert n_safe > 250, f"only {n_safe} safe plans"
    return (f"{n_safe}/500 scenes planned safe ({n_grid} needed the grid search), "
            "all verified collision-free")


@criterion(5, "curved-road memberships at t=0")
def test_curved_road():
    t0 = time.perf_counter()
    sc = gen_curved_road()
    w, cfg = sc.world(), sc.sim_config()
    v = w.agent("A").velocity
    hit = {k: {m.source_id: membership(m, v).colliding for m in agent_maps(w, "A", cfg, k)}
           for k in (MapKind.VO, MapKind.NLVO)}
    elapsed = time.perf_counter() - t0
    assert hit[MapKind.VO]["B"], "v_A not in VO(B)"
    assert not hit[MapKind.NLVO]["B"], "v_A in NLVO(B)"
    for o in "CD":
        assert not hit[MapKind.VO][o] and not hit[MapKind.NLVO][o], f"v_A inside a map of {o}"
    assert elapsed < 1.0, f"took {elapsed:.2f} s"
    return "VO(B) hit, NLVO(B) clear, C and D clear"


@criterion(6, "NAO roundabout crossing")
def test_roundabout_nao():
    t0 = time.perf_counter()
    sc = load_scenario("roundabout")
    assert len([a for a in sc.agents if not a.controlled]) == 30
    log = run(sc.world(), sc.duration, sc.sim_config(MapKind.NAO))
    elapsed = time.perf_counter() - t0
    robot = next(a for a in sc.agents if a.controlled)
    miss = (log.final.agent(robot.id).position - robot.goal).norm()
    assert log.collision_count == 0, f"{log.collision_count} collisions"
    assert miss < 1.0, f"ended {miss:.2f} m from the exit goal"
    assert elapsed < 60.0, f"took {elapsed:.1f} s"
    return f"0 collisions, goal reached within {miss:.2g} m"


@criterion(7, "AO vs NAO contrast on the roundabout")
def test_compare(capsys):
    assert cli.main(["compare", "roundabout"]) == 0
    lines = capsys.readouterr().out.splitlines()
    head = lines[0].split("\t")
    rows = {r[0]: dict(zip(head, r)) for r in (l.split("\t") for l in lines[1:])}
    nao, ao = rows["nao"], rows["ao"]
    assert int(nao["collisions"]) == 0, f"NAO collisions {nao['collisions']}"
    assert int(ao["collisions"]) >= 1, f"AO collisions {ao['collisions']}"
    assert int(nao["adjustments"]) <= int(ao["adjustments"]), "NAO adjusted more often"
    return (f"collisions NAO {nao['collisions']} / AO {ao['collisions']}, "
            f"adjustments NAO {nao['adjustments']} / AO {ao['adjustments']}")


@criterion(8, "trajectory calculus")
def test_trajectory_calculus():
    rng = np.random.default_rng(108)
    h = 1e-5
    worst_v, worst_a = 0.0, 0.0
    for kind in ("linear", "const_accel", "circular", "piecewise"):
        traj = random_trajectory(rng, kind)
        hi = min(getattr(traj, "domain", 20.0), 20.0) - 2 * h
        taus = rng.uniform(2 * h, hi, 100)
        fd_v = (traj.position(taus + h) - traj.position(taus - h)) / (2 * h)
        fd_a = (traj.velocity(taus + h) - traj.velocity(taus - h)) / (2 * h)
        v, a = traj.velocity(taus), traj.acceleration(taus)
        ev = np.linalg.norm(fd_v - v, axis=1) / np.maximum(np.linalg.norm(v, axis=1), 1.0)
        ea = np.linalg.norm(fd_a - a, axis=1) / np.maximum(np.linalg.norm(a, axis=1), 1.0)
        assert ev.max() < 1e-6, f"{kind} velocity error {ev.max():.3g}"
        assert ea.max() < 1e-5, f"{kind} acceleration error {ea.max():.3g}"
        worst_v, worst_a = max(worst_v, ev.max()), max(worst_a, ea.max())
    return f"worst velocity {worst_v:.2g}, acceleration {worst_a:.2g}"


@criterion(9, "determinism of run logs")
def test_determinism(tmp_path, capsys):
    logs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["run", "roundabout", "--out", str(out)]) == 0
        logs.append((out / "log.csv").read_bytes())
    capsys.readouterr()
    assert logs[0] == logs[1], "CSV logs differ"
    return f"{len(logs[0])} identical bytes"
