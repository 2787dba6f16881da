"""Discrete Laplace problems: harmonic and Zaremba extensions, and the projections.

All problems are posed in stiffness form ``K = Kx (x) My + Mx (x) Ky`` (1-D
Neumann stiffness times trapezoidal mass), i.e. the Euler-Lagrange system of the
Dirichlet form in :mod:`avgtr.grid`.  Eliminating Dirichlet nodes leaves a
symmetric positive definite block that is solved by Jacobi-preconditioned CG.
Zero-flux conditions on the remaining boundary nodes come out naturally.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GammaSpec, Grid2D, SubdomainSpec, check_field

DEFAULT_TOL = 1e-8


class ConvergenceError(RuntimeError):
    pass


def _stiffness_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h


def _mass_1d(n: int, h: float) -> sp.csr_matrix:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return sp.diags(w * h, format="csr")


@functools.lru_cache(maxsize=8)
def stiffness(grid: Grid2D) -> sp.csr_matrix:
    """Matrix of the discrete Dirichlet form on all nodes (row-major numbering)."""
    kx, ky = _stiffness_1d(grid.nx, grid.hx), _stiffness_1d(grid.ny, grid.hy)
    mx, my = _mass_1d(grid.nx, grid.hx), _mass_1d(grid.ny, grid.hy)
    return (sp.kron(kx, my) + sp.kron(mx, ky)).tocsr()


@functools.lru_cache(maxsize=16)
def _block(grid: Grid2D, free_key: bytes):
    free = np.frombuffer(free_key, dtype=bool).reshape(grid.shape).ravel()
    K = stiffness(grid)
    idx = np.flatnonzero(free)
    Kff = K[idx][:, idx].tocsr()
    Kfd = K[idx][:, ~free].tocsr()
    return idx, Kff, Kfd, 1.0 / Kff.diagonal()


def solve_spd(A: sp.spmatrix, b: np.ndarray, tol: float = DEFAULT_TOL, inv_diag=None,
              maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned CG to relative residual ``tol``; raises on non-convergence."""
    n = A.shape[0]
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    if inv_diag is None:
        inv_diag = 1.0 / A.diagonal()
    M = spla.LinearOperator((n, n), matvec=lambda r: inv_diag * r)
    maxiter = maxiter or 10 * n
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
    if info != 0:
        res = float(np.linalg.norm(b - A @ x)) / bnorm
        raise ConvergenceError(f"CG did not converge in {maxiter} iterations (relative residual {res:.3e})")
    return x


def _solve_with_fixed(grid: Grid2D, fixed: np.ndarray, values: np.ndarray, rhs=None,
                      tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimise the Dirichlet form (minus ``rhs``) with ``u = values`` on ``fixed`` nodes."""
    free = ~fixed
    if not fixed.any():
        raise ValueError("at least one node must carry a Dirichlet value")
    idx, Kff, Kfd, inv_diag = _block(grid, free.tobytes())
    u = np.zeros(grid.nx * grid.ny)
    u[fixed.ravel()] = values.ravel()[fixed.ravel()]
    b = -(Kfd @ u[fixed.ravel()])
    if rhs is not None:
        b = b + rhs.ravel()[idx]
    u[idx] = solve_spd(Kff, b, tol, inv_diag)
    return u.reshape(grid.shape)


def _boundary_values(grid: Grid2D, h, gamma: GammaSpec) -> np.ndarray:
    """Spread ``h`` (full field, or a vector in ``gamma`` node order) onto a full array."""
    h = np.asarray(h, dtype=np.float64)
    mask = gamma.node_mask(grid)
    if h.shape == grid.shape:
        return np.where(mask, h, 0.0)
    if h.ndim == 0:
        return np.where(mask, float(h), 0.0)
    if h.shape != (int(mask.sum()),):
        raise ValueError(f"boundary data has shape {h.shape}, expected {grid.shape} or ({int(mask.sum())},)")
    out = np.zeros(grid.shape)
    out[gamma.nodes(grid)] = h
    return out


def harmonic_extension(grid: Grid2D, h, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Discrete harmonic function equal to ``h`` on the whole boundary."""
    full = GammaSpec.full()
    return _solve_with_fixed(grid, full.node_mask(grid), _boundary_values(grid, h, full), tol=tol)


def zaremba_extension(grid: Grid2D, h, gamma: GammaSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Harmonic in the interior, ``h`` on ``gamma`` nodes, zero normal flux on the rest."""
    return _solve_with_fixed(grid, gamma.node_mask(grid), _boundary_values(grid, h, gamma), tol=tol)


def project_pi(grid: Grid2D, f: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``f`` minus the harmonic extension of its boundary values."""
    check_field(grid, f)
    return f - harmonic_extension(grid, f, tol)


def project_pi0(grid: Grid2D, f: np.ndarray, omega0: SubdomainSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Dirichlet-orthogonal projection onto fields vanishing off the interior nodes of ``omega0``.

    Solves ``Lap h = Lap f`` on those nodes with ``h = 0`` elsewhere.
    """
    check_field(grid, f)
    inside = omega0.interior_mask(grid)
    Kf = stiffness(grid) @ np.asarray(f, dtype=np.float64).ravel()
    return _solve_with_fixed(grid, ~inside, np.zeros(grid.shape), rhs=Kf, tol=tol)
