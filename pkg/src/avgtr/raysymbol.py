"""Broken geodesics in the metric ``c^-2 (dx^2 + dy^2)`` on the rectangle, and what they feed.

Rays follow the Hamiltonian flow of ``H = c(x)^2 |p|^2 / 2``, so ``dx/dt = c^2 p`` and
``dp/dt = -c grad(c) |p|^2``, started at ``p = xi / c`` (unit speed in the metric).
They are marched by RK4 with a fixed time step and reflected by flipping the normal
momentum; each wall hit is located by bisection on the sub-step length.

From the reflection times ``tau_k`` we get the principal symbol ``p = 1 - kappa`` of
the averaged reversal, the visibility census of a measurement set, the
uniqueness time ``T0`` (fast marching) and the longest chord time ``T(Omega)``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import skfmm
from scipy.stats import qmc

from .grid import GammaSpec, Grid2D, SubdomainSpec
from .phantoms import SpeedModel
from .timereversal import AveragingWeight

log = logging.getLogger(__name__)

EDGES = ("left", "right", "bottom", "top")
DEFAULT_GRID = Grid2D()


@dataclass
class RaySample:
    """A ray through ``x`` in unit direction ``xi`` and its wall hits in ``[-T, T]``.

    ``hits_pos``/``hits_neg`` hold one label per reflection: ``"on"``/``"off"`` for
    membership of the hit point in the measured set, ``"edge"`` inside the
    tolerance band around its relative boundary.  A hit within the band of a
    corner ends the ray and sets ``degenerate``.
    """

    x: tuple
    xi: tuple
    T: float
    tau_pos: list = field(default_factory=list)
    tau_neg: list = field(default_factory=list)
    hits_pos: list = field(default_factory=list)
    hits_neg: list = field(default_factory=list)
    points_pos: list = field(default_factory=list)
    points_neg: list = field(default_factory=list)
    corner: bool = False

    @property
    def degenerate(self) -> bool:
        return self.corner or "edge" in self.hits_pos or "edge" in self.hits_neg

    @property
    def n_reflections(self) -> int:
        return len(self.tau_pos) + len(self.tau_neg)

    def visible(self, T: Optional[float] = None) -> bool:
        T = self.T if T is None else T
        return any(lab == "on" and abs(t) < T for t, lab in zip(self.tau_pos + self.tau_neg,
                                                                 self.hits_pos + self.hits_neg))


@dataclass
class SymbolResult:
    l: dict
    kappa: float
    p: float
    degenerate: bool = False

    @classmethod
    def degenerate_result(cls) -> "SymbolResult":
        return cls({}, float("nan"), float("nan"), True)


def _bfun(x, y, box):
    x0, x1, y0, y1 = box
    return np.maximum(np.maximum(x0 - x, x - x1), np.maximum(y0 - y, y - y1))


def _rhs(x, y, px, py, speed: SpeedModel):
    c = speed(x, y)
    gx, gy = speed.grad(x, y)
    c2 = c * c
    pp = px * px + py * py
    return c2 * px, c2 * py, -c * gx * pp, -c * gy * pp


def _rk4(s, h, speed):
    x, y, px, py = s
    k1 = _rhs(x, y, px, py, speed)
    k2 = _rhs(*(a + 0.5 * h * k for a, k in zip(s, k1)), speed)
    k3 = _rhs(*(a + 0.5 * h * k for a, k in zip(s, k2)), speed)
    k4 = _rhs(*(a + h * k for a, k in zip(s, k3)), speed)
    return tuple(a + h / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4) for a, q1, q2, q3, q4 in zip(s, k1, k2, k3, k4))


def _take(s, idx):
    return tuple(a[idx] for a in s)


def _locate_hits(s, h, speed, box, tol):
    """Bisect each sub-step ``[0, h]`` for its first wall crossing; return (time inside, state there)."""
    n = s[0].size
    lo = np.zeros(n)
    hi = np.full(n, h)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        sm = _rk4(s, mid, speed)
        out = _bfun(sm[0], sm[1], box) > 0
        hi = np.where(out, mid, hi)
        lo = np.where(out, lo, mid)
    return lo, _rk4(s, lo, speed), _rk4(s, hi, speed)


def _march(x0, y0, xi_x, xi_y, speed: SpeedModel, T: float, grid: Grid2D, gamma: GammaSpec,
           tol: float, step: float, edge_tol: float):
    """March rays forward to time ``T``; returns per-ray lists of (t, label, point) and corner flags."""
    box = (grid.x_min, grid.x_max, grid.y_min, grid.y_max)
    c = speed(x0, y0)
    s = (x0.astype(float), y0.astype(float), xi_x / c, xi_y / c)
    n = x0.size
    t = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    hits = [[] for _ in range(n)]
    corner = np.zeros(n, dtype=bool)
    corners = [(a, b) for a in box[:2] for b in box[2:]]
    while alive.any():
        idx = np.flatnonzero(alive)
        cur = _take(s, idx)
        new = _rk4(cur, step, speed)
        crossed = _bfun(new[0], new[1], box) > 0
        if crossed.any():
            ci = np.flatnonzero(crossed)
            dt_in, inside, outside = _locate_hits(_take(cur, ci), step, speed, box, tol)
            th = t[idx[ci]] + dt_in
            ox, oy = outside[0], outside[1]
            terms = np.stack([box[0] - ox, ox - box[1], box[2] - oy, oy - box[3]])
            which = np.argmax(terms, axis=0)
            hx, hy = inside[0].copy(), inside[1].copy()
            px, py = inside[2].copy(), inside[3].copy()
            for j, r in enumerate(idx[ci]):
                if th[j] > T + tol:
                    alive[r] = False
                    continue
                edge = EDGES[which[j]]
                if edge in ("left", "right"):
                    hx[j] = box[0] if edge == "left" else box[1]
                    px[j] = -px[j]
                    frac = (hy[j] - box[2]) / (box[3] - box[2])
                else:
                    hy[j] = box[2] if edge == "bottom" else box[3]
                    py[j] = -py[j]
                    frac = (hx[j] - box[0]) / (box[1] - box[0])
                if min(math.hypot(hx[j] - a, hy[j] - b) for a, b in corners) <= edge_tol:
                    corner[r] = True
                    alive[r] = False
                    hits[r].append((th[j], _corner_label(grid, gamma, hx[j], hy[j], edge_tol), (hx[j], hy[j])))
                    continue
                hits[r].append((th[j], gamma.classify_point(grid, edge, frac, edge_tol), (hx[j], hy[j])))
            keep = ~crossed
            for a, b in zip(s, new):
                a[idx[keep]] = b[keep]
            t[idx[keep]] += step
            for a, b in zip(s, (hx, hy, px, py)):
                a[idx[ci]] = b
            t[idx[ci]] = th
        else:
            for a, b in zip(s, new):
                a[idx] = b
            t[idx] += step
        # one step of slack so a hit landing on t = T is not lost to rounding in t
        alive &= t <= T + step
    return hits, corner


def _corner_label(grid: Grid2D, gamma: GammaSpec, x: float, y: float, edge_tol: float) -> str:
    """Gamma membership of a corner: both adjacent edge ends measured, neither, or mixed."""
    vert = "left" if x < 0.5 * (grid.x_min + grid.x_max) else "right"
    horiz = "bottom" if y < 0.5 * (grid.y_min + grid.y_max) else "top"
    sv = 0.0 if horiz == "bottom" else 1.0
    sh = 0.0 if vert == "left" else 1.0
    labels = {gamma.classify_point(grid, vert, sv, edge_tol), gamma.classify_point(grid, horiz, sh, edge_tol)}
    return labels.pop() if len(labels) == 1 else "edge"


def trace_rays(points, directions, speed: SpeedModel, T: float, grid: Grid2D = DEFAULT_GRID,
               gamma: Optional[GammaSpec] = None, tol: float = 1e-10, step: Optional[float] = None,
               edge_tol: Optional[float] = None) -> list[RaySample]:
    """Trace many rays at once, both time directions, up to ``|t| = T``.

    ``step`` defaults to a quarter of the smallest grid spacing and ``edge_tol`` to one
    cell; ``grid`` only supplies the rectangle and those two lengths.
    """
    gamma = GammaSpec.full() if gamma is None else gamma
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if pts.shape != dirs.shape or pts.shape[1] != 2:
        raise ValueError("points and directions must both have shape (n, 2)")
    norms = np.hypot(dirs[:, 0], dirs[:, 1])
    if np.any(norms == 0):
        raise ValueError("zero direction")
    dirs = dirs / norms[:, None]
    box = (grid.x_min, grid.x_max, grid.y_min, grid.y_max)
    if np.any(_bfun(pts[:, 0], pts[:, 1], box) >= 0):
        raise ValueError("ray origins must lie strictly inside the domain")
    step = grid.h_min / 4 if step is None else step
    edge_tol = grid.h_min if edge_tol is None else edge_tol
    fwd, cf = _march(pts[:, 0], pts[:, 1], dirs[:, 0], dirs[:, 1], speed, T, grid, gamma, tol, step, edge_tol)
    bwd, cb = _march(pts[:, 0], pts[:, 1], -dirs[:, 0], -dirs[:, 1], speed, T, grid, gamma, tol, step, edge_tol)
    out = []
    for i in range(pts.shape[0]):
        r = RaySample((pts[i, 0], pts[i, 1]), (dirs[i, 0], dirs[i, 1]), T, corner=bool(cf[i] or cb[i]))
        for tt, lab, pt in fwd[i]:
            r.tau_pos.append(float(tt)); r.hits_pos.append(lab); r.points_pos.append(pt)
        for tt, lab, pt in bwd[i]:
            r.tau_neg.append(-float(tt)); r.hits_neg.append(lab); r.points_neg.append(pt)
        out.append(r)
    return out


def trace_ray(x, xi, speed: SpeedModel | float = 1.0, T: float = 5.0, grid: Grid2D = DEFAULT_GRID,
              gamma: Optional[GammaSpec] = None, tol: float = 1e-10, step: Optional[float] = None) -> RaySample:
    if not isinstance(speed, SpeedModel):
        speed = SpeedModel.constant(float(speed))
    return trace_rays([x], [xi], speed, T, grid, gamma, tol, step)[0]


def _alternating_p(phi_pos: np.ndarray, phi_neg: np.ndarray) -> float:
    k = max(phi_pos.size, phi_neg.size)
    a = np.zeros(k)
    a[:phi_pos.size] += phi_pos
    a[:phi_neg.size] += phi_neg
    signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    return float(np.sum(signs * a))


def symbol_kappa(sample: RaySample, w: AveragingWeight, gamma_only: bool = False,
                 sharp_band: float = 0.0) -> SymbolResult:
    """``kappa = sum (-1)^k l_k / sum l_k`` and ``p = 1 - kappa`` for one ray.

    ``gamma_only`` drops hits off the measured set before the times are indexed.
    For the sharp weight, hits with ``||tau| - T| <= sharp_band`` make the result
    degenerate since its ``phi`` jumps there.
    """
    if sample.degenerate:
        return SymbolResult.degenerate_result()
    tp = [t for t, lab in zip(sample.tau_pos, sample.hits_pos) if lab == "on" or not gamma_only]
    tn = [t for t, lab in zip(sample.tau_neg, sample.hits_neg) if lab == "on" or not gamma_only]
    if w.kind == "sharp" and any(abs(abs(t) - w.T) <= sharp_band for t in tp + tn):
        return SymbolResult.degenerate_result()
    phi_pos = np.asarray(w.phi(np.asarray(tp, dtype=float)), dtype=float)
    phi_neg = np.asarray(w.phi(np.asarray(tn, dtype=float)), dtype=float)

    def first(a):
        return a[0] if a.size else 0.0

    l = {0: float(2.0 - first(phi_pos) - first(phi_neg))}
    for sign, ph in ((1, phi_pos), (-1, phi_neg)):
        nxt = np.append(ph[1:], 0.0)
        for k, v in enumerate(ph - nxt, start=1):
            l[sign * k] = float(v)
    total = sum(l.values())
    kappa = sum((-1) ** abs(k) * v for k, v in l.items()) / total
    p = 1.0 - kappa
    p_direct = _alternating_p(phi_pos, phi_neg)
    if abs(p - p_direct) > 1e-10:
        raise ArithmeticError(f"symbol routes disagree: {p!r} vs {p_direct!r}")
    return SymbolResult(l, float(kappa), float(p))


@dataclass
class VisibilityReport:
    T: float
    gamma: str
    n_samples: int
    visible: int
    invisible: int
    borderline: int
    degenerate: int
    min_p: float
    rows: list = field(repr=False, default_factory=list)

    @property
    def stable(self) -> bool:
        return self.invisible == 0 and self.borderline == 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "theta", "class", "p", "kappa", "n_reflections"])
        for x, y, th, cls, p, kappa, nr in self.rows:
            wr.writerow([f"{x:.10g}", f"{y:.10g}", f"{th:.10g}", cls, f"{p:.10g}", f"{kappa:.10g}", nr])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            "{",
            f'  "verdict": "{"stable" if self.stable else "unstable"}",',
            f'  "gamma": "{self.gamma}",',
            f'  "T": {self.T:.10g},',
            f'  "samples": {self.n_samples},',
            f'  "visible": {self.visible},',
            f'  "invisible": {self.invisible},',
            f'  "borderline": {self.borderline},',
            f'  "degenerate": {self.degenerate},',
            f'  "min_p": {self.min_p:.10g}',
            "}",
        ]
        return "\n".join(lines)


def sample_phase_space(omega0: SubdomainSpec, n_samples: int, seed: int = 0):
    """Scrambled Sobol points over ``omega0 x S^1``: arrays ``x, y, theta``."""
    u = qmc.Sobol(3, scramble=True, seed=seed).random(n_samples)
    if omega0.kind == "rect":
        x0, x1, y0, y1 = omega0.params
        x, y = x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]
    else:
        cx, cy, r = omega0.params
        rad, ang = r * np.sqrt(u[:, 0]), 2 * np.pi * u[:, 1]
        x, y = cx + rad * np.cos(ang), cy + rad * np.sin(ang)
    return x, y, 2 * np.pi * u[:, 2]


def classify_visibility(omega0: SubdomainSpec, gamma: GammaSpec, speed: SpeedModel, T: float,
                        n_samples: int = 1024, seed: int = 0, grid: Grid2D = DEFAULT_GRID,
                        w: Optional[AveragingWeight] = None) -> VisibilityReport:
    """Census of ``(x, xi)`` over ``omega0 x S^1``: does each ray meet ``gamma`` for ``|t| < T``?

    ``borderline`` counts rays whose only contact with the measured set lies in the
    tolerance band of its relative boundary (or at a corner of mixed membership).
    ``min_p`` is the smallest symbol over visible, non-degenerate samples.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    w = AveragingWeight.uniform(T) if w is None else w
    x, y, theta = sample_phase_space(omega0, n_samples, seed)
    rays = trace_rays(np.column_stack([x, y]), np.column_stack([np.cos(theta), np.sin(theta)]),
                      speed, T, grid, gamma)
    counts = {"visible": 0, "invisible": 0, "borderline": 0}
    degenerate = 0
    min_p = float("inf")
    rows = []
    partial = not gamma.is_full()
    for xi, yi, th, r in zip(x, y, theta, rays):
        labels = [lab for t, lab in zip(r.tau_pos + r.tau_neg, r.hits_pos + r.hits_neg) if abs(t) < T]
        if "on" in labels:
            cls = "visible"
        elif "edge" in labels:
            cls = "borderline"
        else:
            cls = "invisible"
        counts[cls] += 1
        sym = symbol_kappa(r, w, gamma_only=partial)
        if sym.degenerate:
            degenerate += 1
        elif cls == "visible":
            min_p = min(min_p, sym.p)
        rows.append((float(xi), float(yi), float(th), cls, sym.p, sym.kappa, r.n_reflections))
    return VisibilityReport(T, str(gamma), n_samples, counts["visible"], counts["invisible"],
                            counts["borderline"], degenerate, min_p if math.isfinite(min_p) else float("nan"),
                            rows)


def uniqueness_time(omega0: SubdomainSpec, gamma: GammaSpec, speed: SpeedModel,
                    grid: Grid2D = DEFAULT_GRID) -> float:
    """``T0 = max over the closure of omega0 of the travel-time distance to gamma``.

    First-order fast marching from the measured boundary nodes, via scikit-fmm.
    """
    seeds = gamma.node_mask(grid)
    if not seeds.any():
        raise ValueError("measurement set has no grid nodes")
    if abs(grid.hx - grid.hy) > 1e-12 * grid.hx:
        dx = (grid.hx, grid.hy)
    else:
        dx = grid.hx
    phi = np.where(seeds, 0.0, 1.0)
    tt = np.asarray(skfmm.travel_time(phi, speed.on_grid(grid), dx=dx, order=1))
    return float(np.max(tt[omega0.closure_mask(grid)]))


@dataclass
class ChordCensus:
    time: float
    n_chords: int
    trapped: int


def chord_census(speed: SpeedModel, grid: Grid2D = DEFAULT_GRID, n_samples: int = 64,
                 step: Optional[float] = None) -> ChordCensus:
    """Longest boundary-to-boundary geodesic without reflections.

    Chords start at every boundary node in the directions
    ``2 pi k / n_samples`` pointing strictly inward.  A chord still inside after ten
    diagonal crossings at the slowest nodal speed is counted as trapped and dropped.
    """
    if n_samples < 8 or n_samples % 8:
        raise ValueError("n_samples must be a positive multiple of 8")
    box = (grid.x_min, grid.x_max, grid.y_min, grid.y_max)
    bm = grid.boundary_mask()
    X, Y = grid.mesh()
    bx, by = X[bm], Y[bm]
    nx = np.where(np.isclose(bx, box[0]), 1.0, np.where(np.isclose(bx, box[1]), -1.0, 0.0))
    ny = np.where(np.isclose(by, box[2]), 1.0, np.where(np.isclose(by, box[3]), -1.0, 0.0))
    th = 2 * np.pi * np.arange(n_samples) / n_samples
    dx, dy = np.cos(th)[None, :], np.sin(th)[None, :]
    # strictly inward across every wall the node sits on (two walls at a corner)
    inward = ((nx[:, None] == 0) | (dx * nx[:, None] > 1e-12)) & ((ny[:, None] == 0) | (dy * ny[:, None] > 1e-12))
    ii, kk = np.nonzero(inward)
    x, y = bx[ii], by[ii]
    ux, uy = np.cos(th[kk]), np.sin(th[kk])
    c = speed(x, y)
    s = (x.copy(), y.copy(), ux / c, uy / c)
    step = grid.h_min / 4 if step is None else step
    limit = 10 * grid.diagonal / float(np.min(speed.on_grid(grid)))
    n = x.size
    t = np.zeros(n)
    exit_t = np.full(n, np.nan)
    alive = np.ones(n, dtype=bool)
    while alive.any():
        idx = np.flatnonzero(alive)
        cur = _take(s, idx)
        new = _rk4(cur, step, speed)
        out = _bfun(new[0], new[1], box) > 0
        if out.any():
            oi = np.flatnonzero(out)
            dt_in, _, _ = _locate_hits(_take(cur, oi), step, speed, box, 1e-10)
            exit_t[idx[oi]] = t[idx[oi]] + dt_in
            alive[idx[oi]] = False
        keep = ~out
        for a, b in zip(s, new):
            a[idx[keep]] = b[keep]
        t[idx[keep]] += step
        alive &= t <= limit
    trapped = int(np.isnan(exit_t).sum())
    return ChordCensus(float(np.nanmax(exit_t)), n, trapped)


def domain_time(speed: SpeedModel, grid: Grid2D = DEFAULT_GRID, n_samples: int = 64) -> float:
    """``T(Omega)``: the longest chord travel time (``2 sqrt 2`` for ``c = 1`` on ``[-1, 1]^2``)."""
    census = chord_census(speed, grid, n_samples)
    if census.trapped:
        log.warning("%d of %d chords did not exit; the speed may trap rays", census.trapped, census.n_chords)
    return census.time
