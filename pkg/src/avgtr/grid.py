"""Uniform 2-D grids, subdomains, boundary subsets and discrete inner products.

Fields are plain ``numpy`` arrays of shape ``(nx, ny)``; entry ``[i, j]`` lives at
``x = x_min + i*hx``, ``y = y_min + j*hy``.  Flattening is row-major, so node
``(i, j)`` has flat index ``i*ny + j``.

The Dirichlet form used throughout is the edge (staggered difference) form

    sum over x-edges ((f[i+1,j] - f[i,j]) / hx)**2 * hx*hy * wy[j]
  + sum over y-edges ((f[i,j+1] - f[i,j]) / hy)**2 * hx*hy * wx[i]

with trapezoidal transverse weights.  It is the quadratic form whose gradient is
the 5-point Laplacian with mirror-ghost Neumann closure and trapezoidal mass, so
the wave solver, the elliptic solvers and the norms share one discrete geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Grid2D:
    """Uniform node grid over ``[x_min, x_max] x [y_min, y_max]``."""

    nx: int = 201
    ny: int = 201
    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 51 or n % 2 == 0:
                raise ValueError(f"node counts must be odd and >= 51, got {self.nx}x{self.ny}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty domain extent")

    @classmethod
    def square(cls, n: int = 201) -> "Grid2D":
        return cls(n, n)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def h_min(self) -> float:
        return min(self.hx, self.hy)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y_min + self.hy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x_max - self.x_min, self.y_max - self.y_min))

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal node weights (half on edges, quarter at corners) times hx*hy."""
        return np.outer(_trap(self.nx), _trap(self.ny)) * (self.hx * self.hy)

    def header(self) -> str:
        return f"{self.nx} {self.ny} {self.x_min!r} {self.x_max!r} {self.y_min!r} {self.y_max!r}"

    @classmethod
    def from_header(cls, text: str) -> "Grid2D":
        parts = text.split()
        if len(parts) != 6:
            raise ValueError(f"bad grid header: {text!r}")
        return cls(int(parts[0]), int(parts[1]), *map(float, parts[2:]))


def _trap(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


@dataclass
class ScalarField:
    """A grid plus nodal values; used where a field travels without its grid (files, CLI)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            self.values = self.values.reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


def check_field(grid: Grid2D, *fields: np.ndarray) -> None:
    for f in fields:
        if np.shape(f) != grid.shape:
            raise ValueError(f"grid mismatch: field shape {np.shape(f)} vs grid {grid.shape}")


def check_speed(c: np.ndarray) -> None:
    if np.any(~(c > 0)):
        raise ValueError("speed must be positive everywhere")


def inner_l2_weighted(grid: Grid2D, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """L2 inner product with measure ``c**-2 dx`` by the trapezoidal rule."""
    c = np.broadcast_to(np.asarray(c, dtype=float), grid.shape)
    check_field(grid, a, b, c)
    check_speed(c)
    return float(np.sum(a * b / c**2 * grid.quadrature_weights()))


def hd_inner(grid: Grid2D, a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Dirichlet inner product (edge form, see module docstring)."""
    check_field(grid, a, b)
    wx = _trap(grid.nx)[:, None]
    wy = _trap(grid.ny)[None, :]
    dax, dbx = np.diff(a, axis=0), np.diff(b, axis=0)
    day, dby = np.diff(a, axis=1), np.diff(b, axis=1)
    sx = np.sum(dax * dbx * wy) * (grid.hy / grid.hx)
    sy = np.sum(day * dby * wx) * (grid.hx / grid.hy)
    return float(sx + sy)


def norm_hd(grid: Grid2D, f: np.ndarray) -> float:
    """Dirichlet (energy) seminorm; independent of the speed for a Euclidean metric."""
    return float(np.sqrt(max(hd_inner(grid, f, f), 0.0)))


def energy(grid: Grid2D, u: np.ndarray, ut: np.ndarray, c: np.ndarray) -> float:
    return norm_hd(grid, u) ** 2 + inner_l2_weighted(grid, ut, ut, c)


@dataclass(frozen=True)
class SubdomainSpec:
    """The a-priori support region: an axis-aligned rectangle or a centred disk.

    ``params`` is ``(x0, x1, y0, y1)`` for ``kind="rect"`` and ``(cx, cy, r)`` for
    ``kind="disk"``.
    """

    kind: str = "rect"
    params: tuple = (-0.9, 0.9, -0.9, 0.9)

    def __post_init__(self):
        if self.kind == "rect":
            x0, x1, y0, y1 = self.params
            if not (x1 > x0 and y1 > y0):
                raise ValueError("degenerate rectangle")
        elif self.kind == "disk":
            if len(self.params) != 3 or self.params[2] <= 0:
                raise ValueError("disk needs (cx, cy, r) with r > 0")
        else:
            raise ValueError(f"unknown subdomain kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def default(cls) -> "SubdomainSpec":
        return cls()

    @classmethod
    def parse(cls, text: str) -> "SubdomainSpec":
        """``rect:x0:x1:y0:y1`` or ``disk:cx:cy:r``."""
        kind, *rest = text.strip().split(":")
        return cls(kind, tuple(float(v) for v in rest))

    def __str__(self) -> str:
        return ":".join([self.kind, *(repr(p) for p in self.params)])

    def contains(self, x, y, strict: bool = True):
        """Pointwise membership; ``strict`` excludes the boundary (with a tiny slack)."""
        eps = 1e-9 if strict else -1e-9
        if self.kind == "rect":
            x0, x1, y0, y1 = self.params
            return (x > x0 + eps) & (x < x1 - eps) & (y > y0 + eps) & (y < y1 - eps)
        cx, cy, r = self.params
        return (x - cx) ** 2 + (y - cy) ** 2 < (r - eps) ** 2

    def check_inside(self, grid: Grid2D) -> None:
        if self.kind == "rect":
            x0, x1, y0, y1 = self.params
            lo = (x0 - grid.x_min, grid.x_max - x1, y0 - grid.y_min, grid.y_max - y1)
        else:
            cx, cy, r = self.params
            lo = (cx - r - grid.x_min, grid.x_max - cx - r, cy - r - grid.y_min, grid.y_max - cy - r)
        if min(lo) <= 0:
            raise ValueError(f"subdomain {self} must have positive margin to the domain boundary")

    def interior_mask(self, grid: Grid2D) -> np.ndarray:
        """Nodes strictly inside; the unknowns of the projection onto functions supported here."""
        self.check_inside(grid)
        X, Y = grid.mesh()
        m = self.contains(X, Y, strict=True)
        across = min(m.any(axis=1).sum(), m.any(axis=0).sum())
        if across < 5:
            raise ValueError(f"subdomain {self} spans fewer than 5 nodes on this grid")
        return m

    def closure_mask(self, grid: Grid2D) -> np.ndarray:
        X, Y = grid.mesh()
        return self.contains(X, Y, strict=False)

    def bounding_box(self) -> tuple[float, float, float, float]:
        if self.kind == "rect":
            return self.params
        cx, cy, r = self.params
        return (cx - r, cx + r, cy - r, cy + r)


@dataclass(frozen=True)
class GammaSpec:
    """Measured part of the boundary as a union of edge segments.

    Each segment is ``(edge, start, end)`` with ``edge`` one of ``left``, ``right``,
    ``bottom``, ``top`` and fractions measured along increasing ``y`` (left/right)
    or increasing ``x`` (bottom/top).
    """

    segments: tuple = (("left", 0.0, 1.0), ("right", 0.0, 1.0), ("bottom", 0.0, 1.0), ("top", 0.0, 1.0))

    def __post_init__(self):
        segs = tuple((str(e), float(a), float(b)) for e, a, b in self.segments)
        if not segs:
            raise ValueError("GammaSpec needs at least one segment")
        for e, a, b in segs:
            if e not in EDGES:
                raise ValueError(f"unknown edge {e!r}")
            if not (0.0 <= a < b <= 1.0):
                raise ValueError(f"segment fractions must satisfy 0 <= start < end <= 1, got {a}, {b}")
        for e in EDGES:
            iv = sorted((a, b) for ee, a, b in segs if ee == e)
            for (a0, b0), (a1, b1) in zip(iv, iv[1:]):
                if a1 < b0:
                    raise ValueError(f"overlapping segments on edge {e!r}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def full(cls) -> "GammaSpec":
        return cls()

    @classmethod
    def figure4(cls) -> "GammaSpec":
        """Left and bottom edges plus 20% of the right and top edges next to them."""
        return cls((("left", 0.0, 1.0), ("bottom", 0.0, 1.0), ("right", 0.0, 0.2), ("top", 0.0, 0.2)))

    @classmethod
    def parse(cls, text: str) -> "GammaSpec":
        """``full``, ``figure4`` or ``edge:start:end[,edge:start:end...]``."""
        text = text.strip()
        if text == "full":
            return cls.full()
        if text == "figure4":
            return cls.figure4()
        segs = []
        for part in text.split(","):
            e, a, b = part.split(":")
            segs.append((e.strip(), float(a), float(b)))
        return cls(tuple(segs))

    def __str__(self) -> str:
        return ",".join(f"{e}:{a!r}:{b!r}" for e, a, b in self.segments)

    def intervals(self, edge: str) -> list[tuple[float, float]]:
        """Merged covered intervals on one edge."""
        iv = sorted((a, b) for e, a, b in self.segments if e == edge)
        merged: list[list[float]] = []
        for a, b in iv:
            if merged and a <= merged[-1][1] + 1e-12:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return [(a, b) for a, b in merged]

    def is_full(self) -> bool:
        return all(self.intervals(e) == [(0.0, 1.0)] for e in EDGES)

    def node_mask(self, grid: Grid2D) -> np.ndarray:
        m = np.zeros(grid.shape, dtype=bool)
        fx = (grid.x - grid.x_min) / (grid.x_max - grid.x_min)
        fy = (grid.y - grid.y_min) / (grid.y_max - grid.y_min)
        tol = 1e-9
        for e in EDGES:
            frac = fy if e in ("left", "right") else fx
            sel = np.zeros(frac.shape, dtype=bool)
            for a, b in self.intervals(e):
                sel |= (frac >= a - tol) & (frac <= b + tol)
            if e == "left":
                m[0, sel] = True
            elif e == "right":
                m[-1, sel] = True
            elif e == "bottom":
                m[sel, 0] = True
            else:
                m[sel, -1] = True
        return m

    def nodes(self, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays ``(i, j)`` of the measured nodes, in row-major order."""
        return np.nonzero(self.node_mask(grid))

    def classify_point(self, grid: Grid2D, edge: str, s: float, tol: float) -> str:
        """Label a boundary point at fraction ``s`` of ``edge``.

        Returns ``"on"`` (inside the measured set, farther than ``tol`` from its
        relative boundary), ``"off"`` (outside its closure by more than ``tol``) or
        ``"edge"`` (within ``tol`` of the relative boundary).  ``tol`` is a length.
        """
        length = (grid.y_max - grid.y_min) if edge in ("left", "right") else (grid.x_max - grid.x_min)
        ends = self._relative_boundary(edge)
        if any(abs(s - q) * length <= tol for q in ends):
            return "edge"
        for a, b in self.intervals(edge):
            if a <= s <= b:
                return "on"
        return "off"

    def _relative_boundary(self, edge: str) -> list[float]:
        # Interval ends that sit at a corner are interior to the measured set when the
        # adjacent edge continues it; corners themselves are handled by the caller.
        return [q for a, b in self.intervals(edge) for q in (a, b) if 0.0 < q < 1.0]


__all__ = [
    "Grid2D",
    "ScalarField",
    "SubdomainSpec",
    "GammaSpec",
    "inner_l2_weighted",
    "hd_inner",
    "norm_hd",
    "energy",
    "check_field",
    "check_speed",
]
