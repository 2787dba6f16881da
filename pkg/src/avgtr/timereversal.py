"""Sharp and averaged time reversal of boundary traces, full and partial data.

Averaging sharp reversals over final times ``tau`` with weight ``chi`` is done with
a single backward solve whose Dirichlet data is

    h(t) = phi(t) * Lf(t) - int_t^T chi(tau) Lf(tau) dtau,   phi(t) = int_t^T chi,

never with a loop over ``tau``.  Each reversal starts from zero Cauchy data at
``t = T`` (``h(T) = 0`` by construction) and returns the projection onto fields
supported in the subdomain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import elliptic
from .grid import GammaSpec, Grid2D, SubdomainSpec
from .wave import BoundaryCondition, BoundaryTrace, WaveState, propagate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AveragingWeight:
    """Weight ``chi >= 0`` of unit integral on ``[0, T]``.

    ``uniform``: ``chi = 1/T`` so ``phi(t) = (T - t)/T``.
    ``sharp``: a unit mass at ``tau = T`` (plain time reversal), ``phi = 1`` on ``[0, T]``.
    ``custom``: ``chi`` sampled on a uniform grid of ``[0, T]`` (``samples``).
    """

    kind: str = "uniform"
    T: float = 5.0
    samples: Optional[tuple] = None

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.kind == "custom":
            if self.samples is None or len(self.samples) < 2:
                raise ValueError("custom weight needs at least two samples")
            chi = np.asarray(self.samples, dtype=float)
            if np.any(chi < 0):
                raise ValueError("weight must be nonnegative")
            integral = np.trapezoid(chi, dx=self.T / (chi.size - 1))
            if abs(integral - 1.0) > 1e-10:
                raise ValueError(f"weight must integrate to one, got {integral!r}")
            object.__setattr__(self, "samples", tuple(float(v) for v in chi))
        elif self.kind not in ("uniform", "sharp"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def uniform(cls, T: float) -> "AveragingWeight":
        return cls("uniform", T)

    @classmethod
    def sharp(cls, T: float) -> "AveragingWeight":
        return cls("sharp", T)

    def chi(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform":
            return np.where((t >= 0) & (t <= self.T), 1.0 / self.T, 0.0)
        if self.kind == "custom":
            grid_t = np.linspace(0.0, self.T, len(self.samples))
            return np.interp(t, grid_t, self.samples, left=0.0, right=0.0)
        raise ValueError("the sharp weight is a point mass")

    def phi(self, t) -> np.ndarray:
        """``int_|t|^T chi``: the even extension used by the symbol calculus."""
        a = np.abs(np.asarray(t, dtype=float))
        if self.kind == "uniform":
            return np.clip((self.T - a) / self.T, 0.0, 1.0)
        if self.kind == "sharp":
            return np.where(a <= self.T, 1.0, 0.0)
        grid_t = np.linspace(0.0, self.T, len(self.samples))
        chi = np.asarray(self.samples)
        seg = 0.5 * (chi[1:] + chi[:-1]) * np.diff(grid_t)
        tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        return np.interp(a, grid_t, tail, left=1.0, right=0.0)

    def with_T(self, T: float) -> "AveragingWeight":
        return AveragingWeight(self.kind, T, self.samples)


def _tail_integral(values: np.ndarray, weights: np.ndarray, dt: float) -> np.ndarray:
    """``out[n] = int_{t_n}^T w(tau) v(tau) dtau`` by the trapezoidal rule; rows are times."""
    g = weights[:, None] * values
    seg = 0.5 * (g[1:] + g[:-1]) * dt
    out = np.zeros_like(values)
    out[:-1] = np.cumsum(seg[::-1], axis=0)[::-1]
    return out


def _check_weight(trace: BoundaryTrace, w: AveragingWeight) -> None:
    if abs(w.T - trace.T) > 1e-9 * max(1.0, trace.T):
        raise ValueError(f"weight is defined on [0, {w.T}] but the trace spans [0, {trace.T}]")


def averaged_boundary_data(trace: BoundaryTrace, w: AveragingWeight) -> BoundaryTrace:
    """Dirichlet data of the averaged reversal; vanishes identically at ``t = T``."""
    _check_weight(trace, w)
    t = trace.times
    lf = trace.values
    if w.kind == "sharp":
        h = lf - lf[-1]
    else:
        if w.kind == "uniform":
            phi = (w.T - t) / w.T
        else:
            phi = _tail_integral(w.chi(t)[:, None], np.ones_like(t), trace.dt)[:, 0]
        h = phi[:, None] * lf - _tail_integral(lf, w.chi(t), trace.dt)
    h[-1] = 0.0
    return trace.with_values(h)


def averaged_integral(trace: BoundaryTrace, w: AveragingWeight) -> np.ndarray:
    """``int_0^T chi(tau) Lf(tau) dtau`` per boundary node."""
    _check_weight(trace, w)
    if w.kind == "sharp":
        return trace.values[-1].copy()
    return _tail_integral(trace.values, w.chi(trace.times), trace.dt)[0]


def backward_solve(trace: BoundaryTrace, c, final: Optional[np.ndarray] = None) -> np.ndarray:
    """Solve backwards from Cauchy data ``(final, 0)`` at ``t = T`` with Dirichlet data ``trace``
    on its nodes and zero flux elsewhere; return the field at ``t = 0``.
    """
    grid = trace.grid
    u_T = np.zeros(grid.shape) if final is None else np.asarray(final, dtype=np.float64)
    bc = BoundaryCondition.mixed(trace.reversed())
    state, _ = propagate(grid, WaveState.at_rest(u_T, trace.dt), bc, c, trace.T)
    return state.u


def _warn_if_unstable(trace: BoundaryTrace, c, omega0: SubdomainSpec) -> None:
    # Cheap census for constant speed only; variable speed is left to the ray tools.
    from .phantoms import SpeedModel
    from .raysymbol import classify_visibility

    c = np.asarray(c, dtype=float)
    if c.ndim and np.ptp(c) > 0:
        return
    rep = classify_visibility(omega0, trace.gamma, SpeedModel.constant(float(np.max(c))), trace.T,
                              n_samples=256, grid=trace.grid)
    if rep.invisible:
        log.warning("measurement set leaves %d of %d sampled singularities invisible within T=%.3g",
                    rep.invisible, rep.n_samples, trace.T)


def averaged_time_reversal_full(trace: BoundaryTrace, c, w: AveragingWeight, omega0: SubdomainSpec,
                                include_harmonic_term: bool = False, tol: float = elliptic.DEFAULT_TOL):
    """Averaged reversal of whole-boundary data, projected onto the subdomain.

    The harmonic term of the unprojected operator is annihilated by the projection,
    so it is only added when ``include_harmonic_term`` is set.
    """
    if not trace.gamma.is_full():
        raise ValueError("full-data reversal needs a trace on the whole boundary")
    v0 = backward_solve(averaged_boundary_data(trace, w), c)
    if include_harmonic_term:
        v0 = v0 + elliptic.harmonic_extension(trace.grid, averaged_integral(trace, w), tol)
    return elliptic.project_pi0(trace.grid, v0, omega0, tol)


def sharp_time_reversal_full(trace: BoundaryTrace, c, omega0: SubdomainSpec,
                             include_harmonic_term: bool = True, tol: float = elliptic.DEFAULT_TOL):
    """Reversal from ``t = T`` with the harmonic extension of ``Lf(T)`` as final state."""
    return averaged_time_reversal_full(trace, c, AveragingWeight.sharp(trace.T), omega0,
                                       include_harmonic_term, tol)


def averaged_time_reversal_partial(trace: BoundaryTrace, c, w: AveragingWeight, omega0: SubdomainSpec,
                                   tol: float = elliptic.DEFAULT_TOL, check_stability: bool = False):
    """Averaged reversal with data on ``trace.gamma`` and zero flux on the rest of the boundary."""
    if check_stability:
        _warn_if_unstable(trace, c, omega0)
    v0 = backward_solve(averaged_boundary_data(trace, w), c)
    return elliptic.project_pi0(trace.grid, v0, omega0, tol)


def sharp_time_reversal_partial(trace: BoundaryTrace, c, omega0: SubdomainSpec,
                                tol: float = elliptic.DEFAULT_TOL):
    """Plain reversal from ``(phi, 0)`` at ``t = T``, ``phi`` the Zaremba extension of ``Lf(T)``."""
    grid = trace.grid
    phi = elliptic.zaremba_extension(grid, trace.values[-1], trace.gamma, tol)
    v0 = backward_solve(trace, c, final=phi)
    return elliptic.project_pi0(grid, v0, omega0, tol)


class TimeReversal:
    """The operator ``trace -> A0 trace`` for a fixed measurement set and weight."""

    def __init__(self, grid: Grid2D, gamma: GammaSpec, c, w: AveragingWeight, omega0: SubdomainSpec,
                 tol: float = elliptic.DEFAULT_TOL):
        self.grid, self.gamma, self.c, self.w, self.omega0, self.tol = grid, gamma, c, w, omega0, tol

    def __call__(self, trace: BoundaryTrace) -> np.ndarray:
        if trace.gamma != self.gamma:
            raise ValueError("trace was recorded on a different measurement set")
        if self.w.kind == "sharp":
            if self.gamma.is_full():
                return sharp_time_reversal_full(trace, self.c, self.omega0, tol=self.tol)
            return sharp_time_reversal_partial(trace, self.c, self.omega0, tol=self.tol)
        if self.gamma.is_full():
            return averaged_time_reversal_full(trace, self.c, self.w, self.omega0, tol=self.tol)
        return averaged_time_reversal_partial(trace, self.c, self.w, self.omega0, tol=self.tol)
