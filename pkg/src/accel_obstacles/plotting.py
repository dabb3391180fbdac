"""SVG figures for worlds, obstacle maps and run summaries.

Uses the object-oriented matplotlib API (no pyplot state). Output is
byte-stable: the SVG hash salt is fixed and no date is written. Artists
carry ``gid`` attributes (``agent_<id>``, ``lane_<k>``, ``envelope_...``)
so figures can be inspected structurally.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Circle, FancyArrow

from .obstacle_maps import MapKind, boundary_polyline

_SVG_META = {"Date": None}
CONTROLLED = "#d62728"
SCRIPTED = "#1f77b4"
MAP_COLORS = {MapKind.VO: "#1f77b4", MapKind.NLVO: "#e6b800",
              MapKind.AO: "#2ca02c", MapKind.NAO: "#9467bd"}


@contextmanager
def _stable_svg():
    with matplotlib.rc_context({"svg.hashsalt": "accel-obstacles", "svg.fonttype": "path"}):
        yield


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with _stable_svg():
            fig.savefig(path, format="svg", metadata=_SVG_META)
    except OSError as e:
        raise OSError(f"cannot write figure to {path}: {e}") from e
    return path


def render_frame(world, path, maps=None, guides=(), preview: float = 3.0, title=None) -> Path:
    """Workspace snapshot: agents as circles, scripted paths ahead as curves.

    ``maps`` is accepted for symmetry with :func:`render_map` and ignored
    here; draw map space with that function instead.
    """
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    for k, (cx, cy, r) in enumerate(guides):
        ax.add_patch(Circle((cx, cy), r, fill=False, ls="--", lw=0.6, color="0.6", gid=f"lane_{k}"))
    extent = [1.0]
    for a in world.agents:
        color = CONTROLLED if a.controlled else SCRIPTED
        ax.add_patch(Circle((a.position.x, a.position.y), a.radius, color=color, alpha=0.8,
                            gid=f"agent_{a.id}"))
        extent.append(max(abs(a.position.x), abs(a.position.y)) + a.radius)
        if a.trajectory is not None and preview > 0:
            span = min(preview, a.trajectory.domain - world.time)
            if span > 0:
                ts = np.linspace(world.time, world.time + span, 30)
                p = a.trajectory.position(ts)
                ax.plot(p[:, 0], p[:, 1], color=color, lw=0.5, alpha=0.5, gid=f"path_{a.id}")
        if a.controlled and a.goal is not None:
            ax.plot([a.goal.x], [a.goal.y], marker="x", color=CONTROLLED, gid=f"goal_{a.id}")
            extent.append(max(abs(a.goal.x), abs(a.goal.y)))
        if a.controlled and a.acceleration.norm() > 0:
            ax.add_patch(FancyArrow(a.position.x, a.position.y, a.acceleration.x, a.acceleration.y,
                                    width=0.15, color=CONTROLLED, gid=f"accel_{a.id}"))
    for g in guides:
        extent.append(abs(g[0]) + g[2])
    lim = 1.1 * max(extent)
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_title(title or f"t = {world.time:.2f} s")
    return _save(fig, path)


def render_map(maps, path, highlight=None, title=None, show_disks: bool = True) -> Path:
    """Map-space snapshot: envelopes, sampled disks and an optional chosen vector."""
    if not isinstance(maps, (list, tuple)):
        maps = [maps]
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    ax.set_aspect("equal")
    unit = "m/s" if (maps and maps[0].kind.space == "velocity") else "m/s²"
    ax.set_xlabel(f"x [{unit}]")
    ax.set_ylabel(f"y [{unit}]")
    reach = [1.0]
    for m in maps:
        color = MAP_COLORS[m.kind]
        if show_disks:
            for i, (tau, cx, cy, r) in enumerate(m.disk_array()):
                if r < 50:
                    ax.add_patch(Circle((cx, cy), r, color=color, alpha=0.05, lw=0))
        if len(m.taus) >= 2:
            b = boundary_polyline(m)
            for side, pts in (("left", b.left), ("right", b.right)):
                if len(pts):
                    ax.plot(pts[:, 0], pts[:, 1], color=color, lw=1.0,
                            gid=f"envelope_{m.source_id}_{side}")
            for c in b.circles:
                if c.radius < 50:
                    ax.add_patch(Circle((c.center.x, c.center.y), c.radius, fill=False,
                                        color=color, lw=0.4))
            ax.plot([b.apex.x], [b.apex.y], marker=".", color=color, gid=f"apex_{m.source_id}")
        reach.append(np.percentile(np.abs(m.disk_array()[:, 1:3]), 60) if len(m.taus) else 1.0)
    if highlight is not None:
        hx, hy = highlight
        ax.add_patch(FancyArrow(0, 0, hx, hy, width=0.03 * max(1.0, math.hypot(hx, hy)),
                                length_includes_head=True, color=CONTROLLED, gid="selected"))
        reach.append(1.5 * math.hypot(hx, hy))
    lim = max(reach)
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.axhline(0, color="0.8", lw=0.5)
    ax.axvline(0, color="0.8", lw=0.5)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_min_distance(log, path, title="Minimum clearance") -> Path:
    """Minimum pairwise surface clearance over time; collisions fall below zero."""
    fig = Figure(figsize=(6, 3))
    ax = fig.add_subplot()
    if log.min_distance:
        t, d = np.array(log.min_distance, dtype=float).T
        ax.plot(t, d, lw=1.0, color=SCRIPTED, gid="min_distance")
    ax.axhline(0.0, color=CONTROLLED, lw=0.8, ls="--")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("clearance [m]")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
