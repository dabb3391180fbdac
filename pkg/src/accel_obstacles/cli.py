"""Command-line interface: run, map, compare, validate, export.

Scenarios are JSON paths or built-in names (roundabout, roundabout_crossing,
curved_road, head_on). Exit codes: 0 success, 2 scenario error, 3 when
collisions occurred and ``--strict`` was given.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .obstacle_maps import MapKind, SamplingPolicy, membership, write_map_csv
from .planner import Heuristic
from .plotting import plot_min_distance, render_frame, render_map
from .scenario_io import BUILTINS, ScenarioError, dumps, load_scenario
from .simulator import agent_maps, run, step

log = logging.getLogger("accel_obstacles")

EXIT_OK, EXIT_SCENARIO, EXIT_COLLISION = 0, 2, 3


def _load(args):
    sc = load_scenario(args.scenario)
    if getattr(args, "heuristic", None):
        sc = replace(sc, planner=replace(sc.planner, heuristic=Heuristic.parse(args.heuristic)))
    if getattr(args, "duration", None):
        sc = replace(sc, duration=args.duration)
    return sc


def _summary_rows(sc, mode, result):
    controlled = [a for a in sc.agents if a.controlled]
    final = result.final
    reached = []
    for a in controlled:
        if a.goal is not None:
            d = (final.agent(a.id).position - a.goal).norm()
            reached.append(f"{a.id}:{'yes' if d < 1.0 else 'no'}")
    unsafe = sum(1 for _, _, p in result.plans if not p.safe)
    return {
        "mode": mode.value,
        "collisions": result.collision_count,
        "adjustments": sum(result.adjustments.values()),
        "unsafe_plans": unsafe,
        "min_clearance": min((d for _, d in result.min_distance), default=float("inf")),
        "goal_reached": ",".join(reached) or "-",
    }


def _print_table(rows, out=None):
    out = out or sys.stdout
    keys = list(rows[0])
    print("\t".join(keys), file=out)
    for r in rows:
        print("\t".join(f"{r[k]:.3f}" if isinstance(r[k], float) else str(r[k]) for k in keys),
              file=out)


def cmd_run(args) -> int:
    sc = _load(args)
    mode = MapKind.parse(args.mode or sc.mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = []

    def on_step(world):
        if args.svg_every and world.step_index % args.svg_every == 0:
            frames.append(render_frame(world, out / "frames" / f"frame_{world.step_index:05d}.svg",
                                       guides=sc.guides))

    result = run(sc.world(), sc.duration, sc.sim_config(mode), on_step=on_step)
    with open(out / "log.csv", "w", newline="") as fh:
        result.write_csv(fh)
    plot_min_distance(result, out / "min_distance.svg", title=f"{sc.name} ({mode.value})")
    render_frame(result.final, out / "final.svg", guides=sc.guides)
    _print_table([_summary_rows(sc, mode, result)])
    log.info("wrote %s (%d frames)", out / "log.csv", len(frames))
    if args.strict and result.collision_count:
        return EXIT_COLLISION
    return EXIT_OK


def cmd_map(args) -> int:
    sc = _load(args)
    kind = MapKind.parse(args.kind)
    cfg = sc.sim_config()
    world = sc.world()
    try:
        world.agent(args.agent)
    except KeyError:
        raise ScenarioError(f"no agent with id {args.agent!r}")
    while world.time < args.time - 1e-9:
        world = step(world, cfg)
    me = world.agent(args.agent)
    maps = agent_maps(world, me.id, cfg, kind, sampling=SamplingPolicy(args.samples))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    probe = me.velocity if kind.space == "velocity" else me.acceleration
    rows = []
    for m in maps:
        with open(out / f"map_{kind.value}_{me.id}_{m.source_id}.csv", "w", newline="") as fh:
            write_map_csv(m, fh)
        r = membership(m, probe)
        rows.append({"obstacle": m.source_id, "colliding": r.colliding,
                     "first_collision_tau": "-" if r.first_collision_tau is None
                     else f"{r.first_collision_tau:.4f}", "margin": r.margin})
    render_map(maps, out / f"map_{kind.value}_{me.id}.svg", highlight=tuple(probe),
               title=f"{kind.name} of agent {me.id} at t = {world.time:.2f} s")
    if rows:
        _print_table(rows)
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = _load(args)
    rows = []
    for mode in (MapKind.AO, MapKind.NAO):
        result = run(sc.world(), sc.duration, sc.sim_config(mode))
        rows.append(_summary_rows(sc, mode, result))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / f"log_{mode.value}.csv", "w", newline="") as fh:
                result.write_csv(fh)
            plot_min_distance(result, out / f"min_distance_{mode.value}.svg",
                              title=f"{sc.name} ({mode.value})")
    _print_table(rows)
    if args.strict and any(r["collisions"] for r in rows if r["mode"] == "nao"):
        return EXIT_COLLISION
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = _load(args)
    n_ctrl = sum(1 for a in sc.agents if a.controlled)
    print(f"{sc.name}\tagents={len(sc.agents)}\tcontrolled={n_ctrl}\tmode={sc.mode.value}"
          f"\tdt={sc.dt}\treplan_interval={sc.replan_interval}\tduration={sc.duration}"
          f"\thorizon={sc.planner.horizon}\ta_max={sc.constraint.a_max}")
    return EXIT_OK


def cmd_export(args) -> int:
    text = dumps(_load(args))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aobs", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    names = ", ".join(sorted(BUILTINS))

    r = sub.add_parser("run", help="simulate a scenario and write log.csv plus SVG figures")
    r.add_argument("scenario", help=f"JSON file or built-in ({names})")
    r.add_argument("--mode", choices=[k.value for k in MapKind])
    r.add_argument("--out", default="out")
    r.add_argument("--svg-every", type=int, default=0, metavar="N",
                   help="write a workspace frame every N steps (0: none)")
    r.add_argument("--heuristic", choices=[h.value for h in Heuristic])
    r.add_argument("--duration", type=float)
    r.add_argument("--strict", action="store_true", help="exit 3 if any collision occurred")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("map", help="render one agent's obstacle maps at a given time")
    m.add_argument("scenario")
    m.add_argument("--agent", required=True)
    m.add_argument("--time", type=float, default=0.0)
    m.add_argument("--kind", choices=[k.value for k in MapKind], required=True)
    m.add_argument("--samples", type=int, default=200)
    m.add_argument("--out", default="out")
    m.set_defaults(func=cmd_map)

    c = sub.add_parser("compare", help="run AO and NAO modes side by side")
    c.add_argument("scenario")
    c.add_argument("--out")
    c.add_argument("--heuristic", choices=[h.value for h in Heuristic])
    c.add_argument("--duration", type=float)
    c.add_argument("--strict", action="store_true")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate", help="parse and check a scenario")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("export", help="write a scenario (e.g. a built-in) as JSON")
    e.add_argument("scenario")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
