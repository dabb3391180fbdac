import re
import xml.etree.ElementTree as ET

from accel_obstacles.geometry import Vec2
from accel_obstacles.obstacle_maps import RelativeDynamics, build_map
from accel_obstacles.plotting import plot_min_distance, render_frame, render_map
from accel_obstacles.scenario_io import gen_head_on, gen_roundabout
from accel_obstacles.simulator import World, run


def gids(path):
    return re.findall(r'id="([A-Za-z]+_[^"]*|selected)"', path.read_text())


def test_empty_world_svg(tmp_path):
    p = render_frame(World(()), tmp_path / "empty.svg")
    root = ET.parse(p).getroot()
    assert root.tag.endswith("svg")
    assert not [g for g in gids(p) if g.startswith("agent_")]


def test_roundabout_frame(tmp_path):
    sc = gen_roundabout()
    p = render_frame(sc.world(), tmp_path / "f.svg", guides=sc.guides)
    ids = gids(p)
    assert len([g for g in ids if g.startswith("agent_")]) == 31
    assert len([g for g in ids if g.startswith("lane_")]) == 3


def test_svg_is_byte_identical(tmp_path):
    sc = gen_roundabout()
    a = render_frame(sc.world(), tmp_path / "a.svg", guides=sc.guides).read_bytes()
    b = render_frame(sc.world(), tmp_path / "b.svg", guides=sc.guides).read_bytes()
    assert a == b


def test_straight_cone_envelope(tmp_path):
    m = build_map("ao", rd=RelativeDynamics(Vec2(10, 0), Vec2(0, 0), Vec2(0, 0), 2.0),
                  source_id="B")
    p = render_map([m], tmp_path / "cone.svg", highlight=(1.0, 0.5))
    ids = gids(p)
    assert "envelope_B_left" in ids and "envelope_B_right" in ids and "selected" in ids


def test_min_distance_plot(tmp_path):
    sc = gen_head_on()
    log = run(sc.world(), 2.0, sc.sim_config())
    p = plot_min_distance(log, tmp_path / "md.svg")
    ET.parse(p)
