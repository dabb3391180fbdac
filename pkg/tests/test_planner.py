import math

import numpy as np
import pytest

from accel_obstacles.geometry import GEOM_EPS, Vec2
from accel_obstacles.obstacle_maps import MEMBER_EPS, RelativeDynamics, build_map, margins, membership
from accel_obstacles.planner import (ControlConstraint, Heuristic, PlannerConfig, candidate_grid,
                                     desired_acceleration, select_acceleration)
from accel_obstacles.simulator import AgentState
from accel_obstacles.trajectories import Circular, ConstAccel

CFG = PlannerConfig()


def robot(v=(0, 0), a=(0, 0), goal=None, p=(0, 0)):
    return AgentState("r", Vec2(*p), Vec2(*v), Vec2(*a), 0.5, goal=None if goal is None else Vec2(*goal))


def test_pd_examples():
    cfg = PlannerConfig(kp=1, kd=2)
    assert desired_acceleration(Vec2(3, 3), Vec2(0, 0), Vec2(3, 3), cfg, ControlConstraint(5)) == Vec2(0, 0)
    assert desired_acceleration(Vec2(0, 0), Vec2(0, 0), Vec2(10, 0), cfg, ControlConstraint(5)) == Vec2(5, 0)
    assert desired_acceleration(Vec2(0, 0), Vec2(3, 0), Vec2(0, 0), cfg, ControlConstraint(10)) == Vec2(-6, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(n_angular=3)
    with pytest.raises(ValueError):
        PlannerConfig(n_radial=0)
    with pytest.raises(ValueError):
        ControlConstraint(0)
    assert PlannerConfig(heuristic="max_clearance").heuristic is Heuristic.MAX_CLEARANCE


def test_no_obstacles_returns_desired():
    st = robot(v=(1, 2), goal=(10, -4))
    res = select_acceleration(st, [], ControlConstraint(4), CFG)
    want = desired_acceleration(st.position, st.velocity, st.goal, CFG, ControlConstraint(4))
    assert res.safe and res.acceleration == want and res.candidates_evaluated == 1


def test_safe_desired_is_returned_bit_identically():
    st = robot(v=(0, 1), goal=(0.3, 7.1))
    far = build_map("ao", rd=RelativeDynamics(Vec2(40, 0), Vec2(0, 1), Vec2(0, 0), 1.0))
    res = select_acceleration(st, [far], ControlConstraint(4), CFG)
    want = desired_acceleration(st.position, st.velocity, st.goal, CFG, ControlConstraint(4))
    assert res.acceleration == want and res.safe


def test_head_on_min_deviation_matches_brute_force():
    st = robot(v=(1, 0), goal=None)
    m = build_map("ao", rd=RelativeDynamics(Vec2(10, 0), Vec2(1, 0), Vec2(0, 0), 1.0))
    cons = ControlConstraint(2.0)
    assert membership(m, Vec2(0, 0)).colliding
    res = select_acceleration(st, [m], cons, CFG)
    assert res.safe and not membership(m, res.acceleration).colliding
    assert res.acceleration.norm() <= cons.a_max + GEOM_EPS
    # brute force over the same grid (plus the desired and zero accelerations)
    pts, *_ = candidate_grid(cons.a_max, CFG.n_radial, CFG.n_angular, 0.0)
    pts = np.vstack([pts, [[0, 0], [0, 0]]])
    ok = margins(m, pts) > MEMBER_EPS
    best = np.hypot(pts[ok, 0], pts[ok, 1]).min()
    assert res.acceleration.norm() == pytest.approx(best, abs=1e-12)


def test_no_safe_candidate_returns_max_margin():
    st = robot(v=(5, 0))
    m = build_map("ao", rd=RelativeDynamics(Vec2(0.8, 0), Vec2(5, 0), Vec2(0, 0), 1.0))
    cons = ControlConstraint(0.001)
    res = select_acceleration(st, [m], cons, CFG)
    assert not res.safe
    assert res.acceleration.norm() <= cons.a_max + GEOM_EPS
    pts, *_ = candidate_grid(cons.a_max, CFG.n_radial, CFG.n_angular, 0.0)
    pts = np.vstack([pts, [[0, 0]]])
    mg = margins(m, pts)
    assert np.all(mg <= MEMBER_EPS)
    assert res.min_margin == pytest.approx(mg.max(), abs=1e-12)


@pytest.mark.parametrize("h", list(Heuristic))
def test_heuristics_return_safe_choices(h):
    cfg = PlannerConfig(heuristic=h)
    st = robot(v=(2, 0), goal=(30, 0))
    maps = [build_map("nao", traj=Circular(Vec2(12, -6), 6, 0.8), radius=1.5, v_a=st.velocity),
            build_map("ao", rd=RelativeDynamics(Vec2(9, 1), Vec2(2, 0), Vec2(0, 0), 1.2))]
    res = select_acceleration(st, maps, ControlConstraint(4), cfg)
    assert res.safe
    assert all(not membership(m, res.acceleration).colliding for m in maps)


def test_max_clearance_beats_min_deviation_on_margin():
    st = robot(v=(2, 0), goal=(30, 0))
    maps = [build_map("ao", rd=RelativeDynamics(Vec2(9, 1), Vec2(2, 0), Vec2(0, 0), 1.2))]
    a = select_acceleration(st, maps, ControlConstraint(4), PlannerConfig())
    b = select_acceleration(st, maps, ControlConstraint(4), PlannerConfig(heuristic="max_clearance"))
    assert b.min_margin >= a.min_margin


def test_determinism_and_constraint():
    rng = np.random.default_rng(2)
    for _ in range(30):
        st = robot(v=tuple(rng.uniform(-5, 5, 2)), goal=tuple(rng.uniform(-20, 20, 2)))
        maps = [build_map("nao", traj=ConstAccel(Vec2(*rng.uniform(-10, 10, 2)),
                                                 Vec2(*rng.uniform(-3, 3, 2)), Vec2(0, 0)),
                          radius=1.5, v_a=st.velocity) for _ in range(3)]
        r1 = select_acceleration(st, maps, ControlConstraint(3), CFG)
        r2 = select_acceleration(st, list(maps), ControlConstraint(3), CFG)
        assert r1 == r2 or (math.isnan(r1.min_margin) and r1.acceleration == r2.acceleration)
        assert r1.acceleration.norm() <= 3 + GEOM_EPS


def test_candidate_grid_shape():
    pts, rel, mag = candidate_grid(4.0, 12, 36, heading=1.0)
    assert pts.shape == (432, 2)
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), mag)
    assert mag.max() == pytest.approx(4.0) and mag.min() == pytest.approx(0.25)
    assert np.all((rel >= 0) & (rel < 2 * math.pi))
