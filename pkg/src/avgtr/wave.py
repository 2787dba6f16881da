"""Leapfrog finite differences for ``u_tt = c(x)**2 * Laplace(u)`` on the grid.

Neumann nodes use mirror ghosts (ghost value = interior neighbour); Dirichlet nodes
are overwritten with prescribed data every step.  The scheme is exactly
time-reversible, so time reversal is run by feeding boundary data in reverse order
to the same stepper.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .grid import GammaSpec, Grid2D, SubdomainSpec, check_field, check_speed

log = logging.getLogger(__name__)


@numba.njit(cache=True)
def _step(u, other, out, c2dt2, ihx2, ihy2, a, b, g):
    """out = a*u + b*other + g*c2dt2*L(u), L the mirror-ghost 5-point Laplacian."""
    nx, ny = u.shape
    for i in range(nx):
        im = i - 1 if i > 0 else 1
        ip = i + 1 if i < nx - 1 else nx - 2
        for j in range(ny):
            jm = j - 1 if j > 0 else 1
            jp = j + 1 if j < ny - 1 else ny - 2
            uc = u[i, j]
            lap = (u[ip, j] - 2.0 * uc + u[im, j]) * ihx2 + (u[i, jp] - 2.0 * uc + u[i, jm]) * ihy2
            out[i, j] = a * uc + b * other[i, j] + g * c2dt2[i, j] * lap


def laplacian(grid: Grid2D, u: np.ndarray) -> np.ndarray:
    """5-point Laplacian with mirror-ghost (Neumann) closure at every boundary node."""
    out = np.empty_like(u, dtype=np.float64)
    zero = np.zeros_like(out)
    _step(np.ascontiguousarray(u, dtype=np.float64), zero, out, np.ones(grid.shape),
          1.0 / grid.hx**2, 1.0 / grid.hy**2, 0.0, 0.0, 1.0)
    return out


class CFLError(ValueError):
    pass


def cfl_dt(grid: Grid2D, c, cfl: float = 0.5, T: Optional[float] = None) -> float:
    """Time step ``cfl * min(h) / (sqrt(2) * max c)``, shrunk so that ``T/dt`` is an integer."""
    if not (0 < cfl <= 1):
        raise CFLError(f"cfl must lie in (0, 1], got {cfl}")
    c = np.asarray(c, dtype=float)
    check_speed(c)
    dt = cfl * grid.h_min / (math.sqrt(2.0) * float(np.max(c)))
    if T is not None:
        if T <= 0:
            raise ValueError("T must be positive")
        dt = T / math.ceil(T / dt - 1e-9)
    return dt


def max_stable_dt(grid: Grid2D, c) -> float:
    return grid.h_min / (math.sqrt(2.0) * float(np.max(c)))


@dataclass
class BoundaryTrace:
    """Time samples ``values[n, k]`` at ``t = n*dt`` on the nodes of ``gamma`` (row-major order)."""

    grid: Grid2D
    gamma: GammaSpec
    dt: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n_nodes = int(self.gamma.node_mask(self.grid).sum())
        if self.values.ndim != 2 or self.values.shape[1] != n_nodes:
            raise ValueError(f"trace shape {self.values.shape} does not match {n_nodes} boundary nodes")

    @property
    def nt(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> float:
        return (self.nt - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt)

    def nodes(self):
        return self.gamma.nodes(self.grid)

    def reversed(self) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.gamma, self.dt, self.values[::-1].copy())

    def with_values(self, values: np.ndarray) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.gamma, self.dt, values)

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, s: float) -> "BoundaryTrace":
        return self.with_values(self.values * s)

    __rmul__ = __mul__

    def _check_compatible(self, other: "BoundaryTrace") -> None:
        if (other.grid != self.grid or other.gamma != self.gamma or other.values.shape != self.values.shape
                or abs(other.dt - self.dt) > 1e-14 * self.dt):
            raise ValueError("incompatible traces")


@dataclass
class BoundaryCondition:
    """``neumann`` everywhere, or Dirichlet data on ``trace.gamma`` and Neumann elsewhere.

    Full Dirichlet data is the case ``trace.gamma.is_full()``.  Where a Dirichlet
    segment meets a Neumann one the shared node is Dirichlet.
    """

    kind: str = "neumann"
    trace: Optional[BoundaryTrace] = None

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls("neumann")

    @classmethod
    def dirichlet(cls, trace: BoundaryTrace) -> "BoundaryCondition":
        if not trace.gamma.is_full():
            raise ValueError("full Dirichlet data needs a trace on the whole boundary")
        return cls("dirichlet", trace)

    @classmethod
    def mixed(cls, trace: BoundaryTrace) -> "BoundaryCondition":
        return cls("mixed", trace)

    def __post_init__(self):
        if self.kind not in ("neumann", "dirichlet", "mixed"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if self.kind != "neumann" and self.trace is None:
            raise ValueError(f"{self.kind} boundary condition needs a trace")


@dataclass
class WaveState:
    """Two time levels of the leapfrog scheme.

    A state built from Cauchy data has ``u_prev=None`` and velocity ``ut`` (zero if
    omitted); the first step then uses a second-order Taylor start.
    """

    u: np.ndarray
    dt: float
    t: float = 0.0
    u_prev: Optional[np.ndarray] = None
    ut: Optional[np.ndarray] = None

    @classmethod
    def at_rest(cls, u0: np.ndarray, dt: float, t: float = 0.0) -> "WaveState":
        return cls(np.array(u0, dtype=np.float64), dt, t)

    def reversed(self) -> "WaveState":
        """Swap the two time levels, so further steps march backwards in time."""
        if self.u_prev is None:
            raise ValueError("state has a single time level")
        return WaveState(self.u_prev.copy(), -self.dt, self.t - self.dt, self.u.copy())


def propagate(grid: Grid2D, initial: WaveState, bc: BoundaryCondition, c, duration: float,
              record: Optional[GammaSpec] = None, check_every: int = 200):
    """March ``initial`` for ``duration`` (a multiple of ``|dt|``).

    Returns ``(state, trace)``; ``trace`` holds ``u`` on the nodes of ``record`` at
    every time level including both endpoints, or is ``None``.  With Dirichlet data,
    the value applied at time ``t`` is ``trace.values[round(t/dt)]``.
    """
    c = np.broadcast_to(np.asarray(c, dtype=np.float64), grid.shape)
    check_field(grid, initial.u, c)
    check_speed(c)
    dt = initial.dt
    adt = abs(dt)
    if adt > max_stable_dt(grid, c) * (1 + 1e-12):
        raise CFLError(f"dt={adt:.4g} violates the CFL bound {max_stable_dt(grid, c):.4g}; lower cfl or refine")
    if duration <= 0:
        raise ValueError("duration must be positive")
    n_steps = int(round(duration / adt))
    if abs(n_steps * adt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt={adt}")

    dir_i = dir_j = None
    data = None
    n0 = 0
    if bc.kind != "neumann":
        tr = bc.trace
        if tr.grid != grid:
            raise ValueError("trace/grid mismatch")
        if abs(tr.dt - adt) > 1e-12 * adt:
            raise ValueError(f"trace dt {tr.dt} differs from solver dt {adt}")
        dir_i, dir_j = tr.nodes()
        data = tr.values
        n0 = int(round(initial.t / adt))
        n_end = n0 + (n_steps if dt > 0 else -n_steps)
        if abs(n0 * adt - initial.t) > 1e-6 * adt or not (0 <= n0 < tr.nt and 0 <= n_end < tr.nt):
            raise ValueError("boundary trace does not cover the solve interval")
    sign = 1 if dt > 0 else -1

    rec_i = rec_j = None
    rec = None
    if record is not None:
        rec_i, rec_j = record.nodes(grid)
        rec = np.empty((n_steps + 1, rec_i.size))

    c2dt2 = np.ascontiguousarray(c**2 * dt**2)
    ihx2, ihy2 = 1.0 / grid.hx**2, 1.0 / grid.hy**2

    u = np.array(initial.u, dtype=np.float64)
    if data is not None:
        u[dir_i, dir_j] = data[n0]
    if rec is not None:
        rec[0] = u[rec_i, rec_j]

    nxt = np.empty_like(u)
    if initial.u_prev is None:
        ut = np.zeros_like(u) if initial.ut is None else np.asarray(initial.ut, dtype=np.float64)
        _step(u, ut, nxt, c2dt2, ihx2, ihy2, 1.0, dt, 0.5)
        prev = np.empty_like(u)
    else:
        prev = np.array(initial.u_prev, dtype=np.float64)
        _step(u, prev, nxt, c2dt2, ihx2, ihy2, 2.0, -1.0, 1.0)
    for n in range(1, n_steps + 1):
        if n > 1:
            _step(u, prev, nxt, c2dt2, ihx2, ihy2, 2.0, -1.0, 1.0)
        if data is not None:
            nxt[dir_i, dir_j] = data[n0 + sign * n]
        prev, u, nxt = u, nxt, prev
        if rec is not None:
            rec[n] = u[rec_i, rec_j]
        if n % check_every == 0 and not np.isfinite(u[::8, ::8]).all():
            raise FloatingPointError(f"non-finite values at step {n} (t={initial.t + n * dt:.4g}); check cfl/speed")
    if not np.isfinite(u).all():
        raise FloatingPointError("non-finite values in final state")

    state = WaveState(u, dt, initial.t + n_steps * dt, prev)
    trace = None
    if rec is not None:
        if dt < 0:
            raise ValueError("recording is only supported forward in time")
        trace = BoundaryTrace(grid, record, adt, rec)
    return state, trace


def state_energy(grid: Grid2D, state: WaveState, c) -> float:
    """Energy of a Neumann-problem state, velocity by a centred difference.

    For a Cauchy state the stored velocity is used; otherwise one extra Neumann step
    supplies ``u^{n+1}`` and ``ut = (u^{n+1} - u^{n-1}) / (2 dt)``.
    """
    from .grid import energy

    c = np.broadcast_to(np.asarray(c, dtype=np.float64), grid.shape)
    if state.u_prev is None:
        ut = np.zeros(grid.shape) if state.ut is None else state.ut
        return energy(grid, state.u, ut, c)
    nxt = np.empty_like(state.u)
    _step(state.u, state.u_prev, nxt, np.ascontiguousarray(c**2 * state.dt**2),
          1.0 / grid.hx**2, 1.0 / grid.hy**2, 2.0, -1.0, 1.0)
    ut = (nxt - state.u_prev) / (2 * state.dt)
    return energy(grid, state.u, ut, c)


def lambda_forward(grid: Grid2D, f: np.ndarray, c, T: float, gamma: GammaSpec, cfl: float = 0.5,
                   omega0: Optional[SubdomainSpec] = None) -> BoundaryTrace:
    """Boundary observation of the reflecting-wall wave started from ``(f, 0)``."""
    f = np.asarray(f, dtype=np.float64)
    check_field(grid, f)
    if omega0 is not None:
        outside = ~omega0.closure_mask(grid)
        fmax = float(np.max(np.abs(f))) if f.size else 0.0
        if fmax > 0 and np.max(np.abs(f[outside])) > 1e-12 * fmax:
            log.warning("source is not supported in %s; values outside reach %.3g",
                        omega0, float(np.max(np.abs(f[outside]))))
    dt = cfl_dt(grid, c, cfl, T)
    _, trace = propagate(grid, WaveState.at_rest(f, dt), BoundaryCondition.neumann(), c, T, record=gamma)
    return trace
