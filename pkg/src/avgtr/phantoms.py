"""Test sources and sound-speed models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .grid import Grid2D, SubdomainSpec

# (intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees); classic table
SHEPP_LOGAN = (
    (2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)
SHEPP_LOGAN_SCALE = 0.9

# (cx, cy, r, value): white = +1, black = -1 on a zero (gray) background
DISKS = (
    (-0.50, 0.50, 0.22, 1.0),
    (0.45, 0.50, 0.25, -1.0),
    (0.35, -0.40, 0.30, 1.0),
    (-0.45, -0.45, 0.18, -1.0),
    (0.00, 0.05, 0.12, 1.0),
    (-0.05, -0.72, 0.10, -1.0),
)


def render(grid: Grid2D, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], supersample: int = 4) -> np.ndarray:
    """Box-filtered rendering: mean of ``fn`` over ``supersample**2`` points in each node's cell."""
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    X, Y = grid.mesh()
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    acc = np.zeros(grid.shape)
    for ox in offs:
        for oy in offs:
            acc += fn(X + ox * grid.hx, Y + oy * grid.hy)
    return acc / supersample**2


def shepp_logan_fn(x, y, scale: float = SHEPP_LOGAN_SCALE):
    out = np.zeros(np.broadcast(x, y).shape)
    xs, ys = x / scale, y / scale
    for val, a, b, x0, y0, deg in SHEPP_LOGAN:
        th = np.deg2rad(deg)
        ct, st = np.cos(th), np.sin(th)
        dx, dy = xs - x0, ys - y0
        xr = dx * ct + dy * st
        yr = -dx * st + dy * ct
        out += val * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return out


def disks_fn(x, y):
    out = np.zeros(np.broadcast(x, y).shape)
    for cx, cy, r, val in DISKS:
        out += val * ((x - cx) ** 2 + (y - cy) ** 2 <= r * r)
    return out


def clip(grid: Grid2D, f: np.ndarray, omega0: Optional[SubdomainSpec]) -> np.ndarray:
    if omega0 is None:
        return f
    return np.where(omega0.interior_mask(grid), f, 0.0)


def shepp_logan(grid: Grid2D, supersample: int = 4, omega0: Optional[SubdomainSpec] = None) -> np.ndarray:
    """Shepp-Logan head, shrunk by 0.9 so that it sits inside ``[-0.9, 0.9]**2``."""
    return clip(grid, render(grid, shepp_logan_fn, supersample), omega0)


def disks(grid: Grid2D, supersample: int = 4, omega0: Optional[SubdomainSpec] = None) -> np.ndarray:
    """White (+1) and black (-1) disks on a zero background; see ``DISKS`` for the layout."""
    return clip(grid, render(grid, disks_fn, supersample), omega0)


def gaussian(grid: Grid2D, center=(0.0, 0.0), sigma: float = 0.1, omega0: Optional[SubdomainSpec] = None):
    X, Y = grid.mesh()
    f = np.exp(-((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (2 * sigma**2))
    return clip(grid, f, omega0)


def wave_packet(grid: Grid2D, center=(0.0, 0.0), sigma: float = 0.1, wavevector=(40.0, 0.0),
                omega0: Optional[SubdomainSpec] = None):
    """Gaussian-windowed plane wave; its singular directions are close to ``+-wavevector``."""
    X, Y = grid.mesh()
    dx, dy = X - center[0], Y - center[1]
    f = np.exp(-(dx**2 + dy**2) / (2 * sigma**2)) * np.cos(wavevector[0] * dx + wavevector[1] * dy)
    return clip(grid, f, omega0)


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "disks"
    amplitude: float = 1.0
    supersample: int = 4
    clip: bool = True
    center: tuple = (0.0, 0.0)
    sigma: float = 0.1
    wavevector: tuple = (40.0, 0.0)

    def build(self, grid: Grid2D, omega0: Optional[SubdomainSpec] = None) -> np.ndarray:
        om = omega0 if self.clip else None
        if self.kind == "shepp_logan":
            f = shepp_logan(grid, self.supersample, om)
        elif self.kind == "disks":
            f = disks(grid, self.supersample, om)
        elif self.kind == "gaussian":
            f = gaussian(grid, self.center, self.sigma, om)
        elif self.kind == "point_pulse":
            f = wave_packet(grid, self.center, self.sigma, self.wavevector, om)
        else:
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        return self.amplitude * f


class SpeedModel:
    """Sound speed with gradient, for the wave solver (nodal values) and the ray tracer.

    Kinds: ``constant`` (``c0``), ``figure3`` (``1 + 0.3 sin(pi x) + 0.2 cos(pi y)``)
    and ``sampled`` (bicubic spline through nodal values).
    """

    def __init__(self, kind: str = "constant", c0: float = 1.0, grid: Optional[Grid2D] = None,
                 values: Optional[np.ndarray] = None):
        self.kind = kind
        self.c0 = float(c0)
        if kind == "constant":
            if not self.c0 > 0:
                raise ValueError(f"constant speed must be positive, got {c0}")
        elif kind == "sampled":
            if grid is None or values is None:
                raise ValueError("sampled speed needs a grid and values")
            if np.any(~(np.asarray(values) > 0)):
                raise ValueError("speed must be positive everywhere")
            self._spline = RectBivariateSpline(grid.x, grid.y, values, kx=3, ky=3)
        elif kind != "figure3":
            raise ValueError(f"unknown speed kind {kind!r}")

    @classmethod
    def constant(cls, c0: float = 1.0) -> "SpeedModel":
        return cls("constant", c0)

    @classmethod
    def figure3(cls) -> "SpeedModel":
        return cls("figure3")

    @classmethod
    def parse(cls, text: str) -> "SpeedModel":
        """``figure3``, ``constant`` or ``constant:<c0>``."""
        kind, _, arg = text.partition(":")
        if kind == "constant":
            return cls.constant(float(arg) if arg else 1.0)
        return cls(kind)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def __call__(self, x, y):
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, self.c0)
        if self.kind == "figure3":
            return 1.0 + 0.3 * np.sin(np.pi * x) + 0.2 * np.cos(np.pi * y)
        return self._spline.ev(x, y)

    def grad(self, x, y):
        if self.kind == "constant":
            z = np.zeros(np.broadcast(x, y).shape)
            return z, z.copy()
        if self.kind == "figure3":
            return 0.3 * np.pi * np.cos(np.pi * x) + 0 * y, -0.2 * np.pi * np.sin(np.pi * y) + 0 * x
        return self._spline.ev(x, y, dx=1), self._spline.ev(x, y, dy=1)

    def on_grid(self, grid: Grid2D) -> np.ndarray:
        X, Y = grid.mesh()
        return np.asarray(self(X, Y), dtype=np.float64)

    def __repr__(self) -> str:
        return f"SpeedModel({self.kind!r}, c0={self.c0})" if self.kind == "constant" else f"SpeedModel({self.kind!r})"


def speed_field(grid: Grid2D, kind: str = "constant", c0: float = 1.0) -> np.ndarray:
    """Nodal sound speed: ``constant`` (``c0``) or ``figure3``."""
    return SpeedModel(kind, c0).on_grid(grid)
