"""VO, NLVO, AO and NAO obstacle maps as unions of temporal disks.

The robot sits at the origin at tau = 0. A temporal element is the disk of
robot velocities (VO/NLVO) or constant robot accelerations (AO/NAO) that
bring the robot onto the grown obstacle exactly at elapsed time tau.

Membership is not read off the sampled disks. Each map keeps the obstacle's
relative motion, and a candidate is tested against the workspace gap

    gap(tau) = |d(tau)| - radius,   d(tau) = obstacle centre - robot position

minimised over [TAU_MIN, horizon]. When d(tau) is polynomial (VO, AO, and
NLVO/NAO over linear or constant-acceleration trajectories) the minimum of
|d|^2 comes from the real roots of its derivative cubic. Otherwise the gap
is sampled on a fixed grid and every sampled local minimum near the
threshold is refined by golden-section search.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import brentq

from .geometry import ORIGIN, Disk, Vec2
from .trajectories import ConstAccel, Linear, Trajectory

TAU_MIN = 1e-3
MEMBER_EPS = 1e-6
DEFAULT_HORIZON = 10.0

# Grid for sampled membership: log-spaced up to 1 s, then uniform. Fixed
# points so a longer horizon only adds samples.
_GRID_LOG_POINTS = 64
_GRID_STEP = 0.025
# Grid intervals whose Lipschitz lower bound stays this far above the
# threshold are not refined; closer ones get golden-section search.
_REFINE_SLACK = 0.25
_GOLDEN_TOL = 1e-6


class MapKind(enum.Enum):
    VO = "vo"
    NLVO = "nlvo"
    AO = "ao"
    NAO = "nao"

    @property
    def space(self) -> str:
        return "velocity" if self in (MapKind.VO, MapKind.NLVO) else "acceleration"

    @classmethod
    def parse(cls, s) -> "MapKind":
        if isinstance(s, cls):
            return s
        return cls(str(s).lower())


@dataclass(frozen=True)
class TemporalDisk:
    tau: float
    disk: Disk


@dataclass(frozen=True)
class RelativeDynamics:
    """Obstacle state relative to the robot for an AO.

    ``v_rel`` is robot velocity minus obstacle velocity, ``a_obs`` the
    obstacle's constant acceleration, ``radius`` the grown radius.
    """

    c0: Vec2
    v_rel: Vec2
    a_obs: Vec2
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class SamplingPolicy:
    n_samples: int = 200
    spacing: str = "log"

    def taus(self, horizon: float) -> np.ndarray:
        if self.n_samples < 2:
            raise ValueError("need at least two samples")
        if self.spacing == "log":
            return np.geomspace(TAU_MIN, horizon, self.n_samples)
        if self.spacing == "linear":
            return np.linspace(TAU_MIN, horizon, self.n_samples)
        raise ValueError(f"unknown spacing {self.spacing!r}")


@dataclass(frozen=True)
class MembershipResult:
    colliding: bool
    first_collision_tau: float | None
    margin: float


def _check_tau(tau: float) -> float:
    if not tau >= TAU_MIN:
        raise ValueError(f"tau must be >= {TAU_MIN}, got {tau}")
    return float(tau)


# ---------------------------------------------------------------- temporal elements

def vo_temporal(c0: Vec2, radius: float, v_b: Vec2, tau: float) -> Disk:
    tau = _check_tau(tau)
    return Disk(v_b + c0 / tau, radius / tau)


def nlvo_temporal(traj: Trajectory, radius: float, tau: float) -> Disk:
    tau = _check_tau(tau)
    c = Vec2.of(traj.position(tau))
    return Disk(c / tau, radius / tau)


def ao_temporal(rd: RelativeDynamics, tau: float) -> Disk:
    tau = _check_tau(tau)
    center = 2.0 * rd.c0 / tau**2 - 2.0 * rd.v_rel / tau + rd.a_obs
    return Disk(center, 2.0 * rd.radius / tau**2)


def nao_temporal(traj: Trajectory, radius: float, v_a: Vec2, tau: float) -> Disk:
    tau = _check_tau(tau)
    c = Vec2.of(traj.position(tau))
    return Disk(2.0 * c / tau**2 - 2.0 * v_a / tau, 2.0 * radius / tau**2)


# ---------------------------------------------------------------- relative motion

def _cubic_real_roots(A, B, C, D, t_scale):
    """Real roots of A t^3 + B t^2 + C t + D, row-wise, NaN-padded to 3 columns.

    Rows whose cubic term is negligible over ``[0, t_scale]`` are solved as
    quadratics. For a single real root the real part of the complex pair is
    also returned, which covers near-double roots. All roots get three
    Newton steps on the full cubic.
    """
    A, B, C, D = (np.asarray(x, dtype=float) for x in (A, B, C, D))
    out = np.full(A.shape + (3,), np.nan)
    T = t_scale
    rest = np.abs(B) * T * T + np.abs(C) * T + np.abs(D)
    cubic = np.abs(A) * T**3 > 1e-9 * rest

    with np.errstate(all="ignore"):
        a = np.where(cubic, A, 1.0)
        b, c, d = B / a, C / a, D / a
        p = c - b * b / 3.0
        q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
        disc = (q / 2.0) ** 2 + (p / 3.0) ** 3

        one = cubic & (disc >= 0)
        s = np.sqrt(np.where(one, disc, 0.0))
        u = np.cbrt(-q / 2.0 + s)
        v = np.cbrt(-q / 2.0 - s)
        out[..., 0] = np.where(one, u + v - b / 3.0, out[..., 0])
        out[..., 1] = np.where(one, -(u + v) / 2.0 - b / 3.0, out[..., 1])

        three = cubic & (disc < 0)
        pn = np.where(three, p, -1.0)
        r = np.sqrt(-pn / 3.0)
        arg = np.clip(3.0 * q / (2.0 * pn) * np.sqrt(-3.0 / pn), -1.0, 1.0)
        phi = np.arccos(arg)
        for k in range(3):
            xk = 2.0 * r * np.cos(phi / 3.0 - 2.0 * math.pi * k / 3.0) - b / 3.0
            out[..., k] = np.where(three, xk, out[..., k])

        quad = ~cubic & (np.abs(B) * T * T > 1e-12 * (np.abs(C) * T + np.abs(D)))
        qd = C * C - 4.0 * B * D
        sq = np.sqrt(np.where(quad & (qd >= 0), qd, np.nan))
        qq = -0.5 * (C + np.copysign(sq, C))
        bb = np.where(quad, B, 1.0)
        out[..., 0] = np.where(quad, qq / bb, out[..., 0])
        out[..., 1] = np.where(quad, D / qq, out[..., 1])
        # vertex of the parabola as a fallback evaluation point
        out[..., 2] = np.where(quad, -C / (2.0 * bb), out[..., 2])

        lin = ~cubic & ~quad & (C != 0)
        out[..., 0] = np.where(lin, -D / np.where(lin, C, 1.0), out[..., 0])

        for _ in range(3):
            t = out
            F = ((A[..., None] * t + B[..., None]) * t + C[..., None]) * t + D[..., None]
            dF = (3.0 * A[..., None] * t + 2.0 * B[..., None]) * t + C[..., None]
            step = np.where(dF != 0, F / dF, 0.0)
            cand = t - step
            out = np.where(np.isfinite(cand), cand, t)
    return out


def _golden_min(fun, lo, hi, tol=_GOLDEN_TOL):
    """Vectorised golden-section minimisation of ``fun`` on brackets."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    width = float(np.max(hi - lo)) if lo.size else 0.0
    n_iter = max(1, int(math.ceil(math.log(max(width, tol) / tol) / -math.log(invphi))))
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(n_iter):
        left = f1 <= f2
        lo, hi = np.where(left, lo, x1), np.where(left, x2, hi)
        nx1 = np.where(left, hi - invphi * (hi - lo), x2)
        nx2 = np.where(left, x1, lo + invphi * (hi - lo))
        fe = fun(np.where(left, nx1, nx2))
        f1, f2 = np.where(left, fe, f2), np.where(left, f1, fe)
        x1, x2 = nx1, nx2
    xs = np.stack([lo, x1, x2, hi])
    fs = np.stack([fun(lo), f1, f2, fun(hi)])
    k = np.argmin(fs, axis=0)
    idx = np.arange(fs.shape[1])
    return xs[k, idx], fs[k, idx]


@lru_cache(maxsize=64)
def _membership_grid(horizon: float) -> np.ndarray:
    log_part = np.geomspace(TAU_MIN, 1.0, _GRID_LOG_POINTS)
    n_uni = int(math.floor((horizon - 1.0) / _GRID_STEP + 1e-9))
    uni = 1.0 + _GRID_STEP * np.arange(1, max(n_uni, 0) + 1)
    grid = np.concatenate([log_part, uni])
    grid = grid[grid < horizon]
    return np.append(grid, horizon)


@dataclass(frozen=True)
class _RelativeMotion:
    """Workspace offset from robot to obstacle centre as a function of tau.

    d(tau) = base(tau) - candidate * g(tau), with g(tau) = tau in velocity
    space and tau^2 / 2 in acceleration space. ``base`` is either the
    polynomial p0 + p1 tau + p2 tau^2 or ``traj(tau) + lin * tau``.
    """

    accel_space: bool
    poly: tuple | None = None
    traj: Trajectory | None = None
    lin: np.ndarray | None = None

    def _coeffs(self, cands):
        p0, p1, p2 = self.poly
        if self.accel_space:
            q1 = np.broadcast_to(p1, cands.shape)
            q2 = p2 - 0.5 * cands
        else:
            q1 = p1 - cands
            q2 = np.broadcast_to(p2, cands.shape)
        return np.broadcast_to(p0, cands.shape), q1, q2

    def offset(self, cands, taus):
        """d(tau) for every candidate (rows) at every tau (columns)."""
        cands = np.atleast_2d(cands)
        taus = np.asarray(taus, dtype=float)
        g = 0.5 * taus**2 if self.accel_space else taus
        if self.poly is not None:
            p0, p1, p2 = self.poly
            base = p0 + p1 * taus[..., None] + p2 * taus[..., None] ** 2
        else:
            base = self.traj.position(taus) + self.lin * taus[..., None]
        return base - cands[:, None, :] * g[..., None]

    def _sqdist_pointwise(self, cands, taus):
        """|d|^2 with one tau per candidate; both shaped (K, 2) and (K,)."""
        g = 0.5 * taus**2 if self.accel_space else taus
        if self.poly is not None:
            p0, p1, p2 = self.poly
            base = p0 + p1 * taus[:, None] + p2 * taus[:, None] ** 2
        else:
            base = self.traj.position(taus) + self.lin * taus[:, None]
        d = base - cands * g[:, None]
        return np.einsum("ij,ij->i", d, d)

    def _derivative_bounds(self, cands, taus):
        """|d'| at each tau and an upper bound on |d''|, both shaped (K, N)."""
        gd = taus if self.accel_space else np.ones_like(taus)
        vel = self.traj.velocity(taus) + self.lin
        dd = vel[None, :, :] - cands[:, None, :] * gd[None, :, None]
        acc = self.traj.acceleration(taus)
        curv = np.broadcast_to(np.hypot(acc[:, 0], acc[:, 1]), dd.shape[:2])
        if self.accel_space:
            # triangle bound: the obstacle's acceleration may rotate inside an interval
            curv = curv + np.hypot(cands[:, 0], cands[:, 1])[:, None]
        return np.hypot(dd[..., 0], dd[..., 1]), curv

    def min_sqdist(self, cands, t_lo, t_hi, threshold):
        """Minimum of |d|^2 over [t_lo, t_hi] and where it occurs, per candidate."""
        cands = np.atleast_2d(np.asarray(cands, dtype=float))
        if self.poly is not None:
            return self._min_poly(cands, t_lo, t_hi)
        return self._min_sampled(cands, t_lo, t_hi, threshold)

    def _min_poly(self, cands, t_lo, t_hi):
        q0, q1, q2 = self._coeffs(cands)
        dot = lambda u, v: np.einsum("ij,ij->i", u, v)
        roots = _cubic_real_roots(
            2.0 * dot(q2, q2), 3.0 * dot(q1, q2), dot(q1, q1) + 2.0 * dot(q0, q2), dot(q0, q1), t_hi
        )
        m = cands.shape[0]
        taus = np.concatenate([roots, np.full((m, 1), t_lo), np.full((m, 1), t_hi)], axis=1)
        taus = np.clip(np.nan_to_num(taus, nan=t_lo), t_lo, t_hi)
        d = q0[:, None, :] + q1[:, None, :] * taus[..., None] + q2[:, None, :] * taus[..., None] ** 2
        f = np.einsum("ijk,ijk->ij", d, d)
        k = np.argmin(f, axis=1)
        rows = np.arange(m)
        return f[rows, k], taus[rows, k]

    def _min_sampled(self, cands, t_lo, t_hi, threshold):
        grid = _membership_grid(t_hi)
        grid = grid[grid >= t_lo]
        if grid[0] > t_lo:
            grid = np.insert(grid, 0, t_lo)
        d = self.offset(cands, grid)
        f = np.einsum("ijk,ijk->ij", d, d)
        m, n = f.shape
        rows = np.arange(m)
        k = np.argmin(f, axis=1)
        best_f, best_t = f[rows, k], grid[k]
        if n < 2:
            return best_f, best_t

        # Lipschitz screen: between grid points |d| cannot drop below
        # mean(|d_j|, |d_j+1|) - L * h / 2, with L bounding |d'| on the interval
        dist = np.sqrt(f)
        speed, curv = self._derivative_bounds(cands, grid)
        h = np.diff(grid)
        lip = np.maximum(speed[:, :-1], speed[:, 1:]) + np.maximum(curv[:, :-1], curv[:, 1:]) * h
        bound = 0.5 * (dist[:, :-1] + dist[:, 1:]) - 0.5 * lip * h
        ci, cj = np.nonzero(bound < threshold + _REFINE_SLACK)
        if ci.size == 0:
            return best_f, best_t
        lo, hi = grid[cj], grid[cj + 1]
        sub = cands[ci]
        t_ref, f_ref = _golden_min(lambda t: self._sqdist_pointwise(sub, t), lo, hi)
        # per-candidate minimum over refined points
        order = np.lexsort((f_ref, ci))
        ci_s, f_s, t_s = ci[order], f_ref[order], t_ref[order]
        first = np.ones(ci_s.size, bool)
        first[1:] = ci_s[1:] != ci_s[:-1]
        ci_s, f_s, t_s = ci_s[first], f_s[first], t_s[first]
        better = f_s < best_f[ci_s]
        best_f[ci_s[better]] = f_s[better]
        best_t[ci_s[better]] = t_s[better]
        return best_f, best_t

    def first_contact(self, cand, t_lo, t_hi, thr):
        """Earliest tau in [t_lo, t_hi] with |d| <= thr, or None."""
        cand = np.atleast_2d(np.asarray(cand, dtype=float))
        thr2 = thr * thr
        fun = lambda t: float(self._sqdist_pointwise(cand, np.array([t]))[0]) - thr2
        if fun(t_lo) <= 0:
            return t_lo
        if self.poly is not None:
            q0, q1, q2 = self._coeffs(cand)
            dot = lambda u, v: float(np.dot(u[0], v[0]))
            roots = _cubic_real_roots(
                np.array([2.0 * dot(q2, q2)]), np.array([3.0 * dot(q1, q2)]),
                np.array([dot(q1, q1) + 2.0 * dot(q0, q2)]), np.array([dot(q0, q1)]), t_hi,
            )[0]
            crit = sorted(float(r) for r in roots if np.isfinite(r) and t_lo < r < t_hi)
            knots = [t_lo] + crit + [t_hi]
        else:
            grid = _membership_grid(t_hi)
            knots = [t_lo] + [float(t) for t in grid if t > t_lo]
            _, t_min = self._min_sampled(cand, t_lo, t_hi, thr)
            knots = sorted(set(knots) | {float(t_min[0])})
        for a, b in zip(knots[:-1], knots[1:]):
            if fun(b) <= 0:
                return brentq(fun, a, b, xtol=1e-12) if fun(a) > 0 else a
        if self.poly is None:
            # contact only inside a refined dip between grid points
            f_min, t_min = self._min_sampled(cand, t_lo, t_hi, thr)
            if f_min[0] <= thr2:
                tm = float(t_min[0])
                a = max(k for k in knots if k <= tm)
                return brentq(fun, a, tm, xtol=1e-12) if fun(a) > 0 else a
        return None


# ---------------------------------------------------------------- maps

@dataclass(frozen=True)
class ObstacleMap:
    """Sampled temporal disks plus the motion needed for exact queries.

    ``elements`` is computed on first access; planning only touches
    ``motion``.
    """

    kind: MapKind
    taus: np.ndarray = field(repr=False, compare=False)
    horizon: float
    source_id: str
    radius: float
    apex: Vec2 = ORIGIN
    motion: _RelativeMotion = field(default=None, repr=False, compare=False)
    _disks: object = field(default=None, repr=False, compare=False)

    @cached_property
    def _disk_arrays(self):
        centers, radii = self._disks(self.taus)
        return np.asarray(centers, dtype=float).reshape(-1, 2), np.asarray(radii, dtype=float)

    @cached_property
    def elements(self) -> tuple:
        centers, radii = self._disk_arrays
        return tuple(TemporalDisk(float(t), Disk(Vec2(float(c[0]), float(c[1])), float(r)))
                     for t, c, r in zip(self.taus, centers, radii))

    def disk_array(self) -> np.ndarray:
        """Rows of (tau, cx, cy, radius)."""
        centers, radii = self._disk_arrays
        return np.column_stack([self.taus, centers, radii])


def _poly_from_traj(traj, lin: Vec2):
    if isinstance(traj, Linear):
        return (traj.c0.as_array(), traj.v.as_array() + lin.as_array(), np.zeros(2))
    if isinstance(traj, ConstAccel):
        return (traj.c0.as_array(), traj.v.as_array() + lin.as_array(), 0.5 * traj.a.as_array())
    return None


def build_map(kind, *, horizon: float = DEFAULT_HORIZON, sampling: SamplingPolicy | None = None,
              source_id: str = "", radius: float | None = None, c0=None, v_b=None,
              traj: Trajectory | None = None, rd: RelativeDynamics | None = None,
              v_a=None) -> ObstacleMap:
    """Build one obstacle map.

    Required inputs per kind: VO ``c0, v_b, radius``; NLVO ``traj, radius``;
    AO ``rd``; NAO ``traj, radius, v_a``. ``traj`` must be expressed relative
    to the robot's position at tau = 0. The horizon is clamped to the
    trajectory domain.
    """
    kind = MapKind.parse(kind)
    sampling = sampling or SamplingPolicy()
    if traj is not None:
        horizon = min(horizon, traj.domain)
    if not horizon > TAU_MIN:
        raise ValueError(f"horizon must exceed {TAU_MIN}, got {horizon}")

    def need(**kw):
        missing = [k for k, v in kw.items() if v is None]
        if missing:
            raise ValueError(f"{kind.name} map needs {', '.join(missing)}")

    if kind is MapKind.VO:
        need(c0=c0, v_b=v_b, radius=radius)
        c0, v_b = Vec2.of(c0), Vec2.of(v_b)
        disks = lambda t: (v_b.as_array() + c0.as_array() / t[:, None], radius / t)
        motion = _RelativeMotion(False, poly=(c0.as_array(), v_b.as_array(), np.zeros(2)))
        apex = v_b
    elif kind is MapKind.NLVO:
        need(traj=traj, radius=radius)
        disks = lambda t: (traj.position(t) / t[:, None], radius / t)
        poly = _poly_from_traj(traj, ORIGIN)
        motion = _RelativeMotion(False, poly=poly, traj=traj, lin=np.zeros(2))
        apex = ORIGIN
    elif kind is MapKind.AO:
        need(rd=rd)
        radius = rd.radius
        disks = lambda t: (2.0 * rd.c0.as_array() / t[:, None] ** 2
                           - 2.0 * rd.v_rel.as_array() / t[:, None] + rd.a_obs.as_array(),
                           2.0 * rd.radius / t**2)
        motion = _RelativeMotion(True, poly=(rd.c0.as_array(), -rd.v_rel.as_array(),
                                             0.5 * rd.a_obs.as_array()))
        apex = rd.a_obs
    else:
        need(traj=traj, radius=radius, v_a=v_a)
        v_a = Vec2.of(v_a)
        disks = lambda t: (2.0 * traj.position(t) / t[:, None] ** 2 - 2.0 * v_a.as_array() / t[:, None],
                           2.0 * radius / t**2)
        poly = _poly_from_traj(traj, -v_a)
        motion = _RelativeMotion(True, poly=poly, traj=traj, lin=-v_a.as_array())
        apex = ORIGIN
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius}")

    return ObstacleMap(kind, sampling.taus(horizon), float(horizon), str(source_id),
                       float(radius), apex, motion, disks)


def margins(omap: ObstacleMap, candidates) -> np.ndarray:
    """Minimum workspace gap (m) over the horizon for each candidate row."""
    cands = np.atleast_2d(np.asarray(candidates, dtype=float))
    thr = omap.radius + MEMBER_EPS
    f, _ = omap.motion.min_sqdist(cands, TAU_MIN, omap.horizon, thr)
    return np.sqrt(np.maximum(f, 0.0)) - omap.radius


def membership(omap: ObstacleMap, candidate) -> MembershipResult:
    """Is ``candidate`` (velocity or acceleration per map kind) colliding?

    Boundary cases within MEMBER_EPS of grazing count as colliding.
    """
    cand = np.asarray(tuple(Vec2.of(candidate)), dtype=float)
    margin = float(margins(omap, cand)[0])
    colliding = margin <= MEMBER_EPS
    tau = None
    if colliding:
        tau = omap.motion.first_contact(cand, TAU_MIN, omap.horizon, omap.radius + MEMBER_EPS)
        if tau is None:
            _, t_min = omap.motion.min_sqdist(cand, TAU_MIN, omap.horizon, omap.radius)
            tau = float(t_min[0])
    return MembershipResult(colliding, tau, margin)


@dataclass(frozen=True)
class Boundary:
    left: np.ndarray
    right: np.ndarray
    apex: Vec2
    circles: tuple = ()


def boundary_polyline(omap: ObstacleMap) -> Boundary:
    """Tangent points of each temporal disk as seen from the map apex.

    Elements whose disk contains the apex are returned as whole circles.
    """
    if len(omap.elements) < 2:
        raise ValueError("boundary needs at least two elements")
    ax, ay = omap.apex.x, omap.apex.y
    left, right, circles = [], [], []
    for e in omap.elements:
        wx, wy = e.disk.center.x - ax, e.disk.center.y - ay
        d = math.hypot(wx, wy)
        r = e.disk.radius
        if d <= r:
            circles.append(e.disk)
            continue
        beta = math.asin(r / d)
        length = math.sqrt(d * d - r * r)
        base = math.atan2(wy, wx)
        left.append((ax + length * math.cos(base + beta), ay + length * math.sin(base + beta)))
        right.append((ax + length * math.cos(base - beta), ay + length * math.sin(base - beta)))
    return Boundary(np.array(left).reshape(-1, 2), np.array(right).reshape(-1, 2),
                    omap.apex, tuple(circles))


def write_map_csv(omap: ObstacleMap, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["tau", "cx", "cy", "radius"])
    for tau, cx, cy, r in omap.disk_array():
        w.writerow([repr(float(tau)), repr(float(cx)), repr(float(cy)), repr(float(r))])
