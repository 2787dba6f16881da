"""Neumann series inversion ``f = sum_m K0^m A0 h`` run as a fixed-count iteration."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import elliptic
from .grid import GammaSpec, Grid2D, SubdomainSpec, check_field, norm_hd
from .timereversal import AveragingWeight, TimeReversal
from .wave import BoundaryTrace, cfl_dt, lambda_forward

log = logging.getLogger(__name__)


@dataclass
class ReconstructionConfig:
    grid: Grid2D
    c: np.ndarray
    T: float = 5.0
    n_terms: int = 10
    gamma: GammaSpec = field(default_factory=GammaSpec.full)
    weight: str = "uniform"
    omega0: SubdomainSpec = field(default_factory=SubdomainSpec)
    cfl: float = 0.5
    tol: float = elliptic.DEFAULT_TOL

    def __post_init__(self):
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        if self.T <= 0:
            raise ValueError("T must be positive")
        self.c = np.broadcast_to(np.asarray(self.c, dtype=np.float64), self.grid.shape)

    @property
    def variant(self) -> str:
        return "full" if self.gamma.is_full() else "partial"

    @property
    def dt(self) -> float:
        return cfl_dt(self.grid, self.c, self.cfl, self.T)

    def averaging_weight(self) -> AveragingWeight:
        return AveragingWeight(self.weight, self.T)

    def forward(self, f: np.ndarray) -> BoundaryTrace:
        return lambda_forward(self.grid, f, self.c, self.T, self.gamma, self.cfl)

    def time_reversal(self) -> TimeReversal:
        return TimeReversal(self.grid, self.gamma, self.c, self.averaging_weight(), self.omega0, self.tol)


@dataclass
class ConvergenceLog:
    n: list = field(default_factory=list)
    rel_l2: list = field(default_factory=list)
    rel_hd: list = field(default_factory=list)
    rel_linf: list = field(default_factory=list)
    ratio: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "rel_l2", "rel_hd", "rel_linf", "ratio"])
        for row in zip(self.n, self.rel_l2, self.rel_hd, self.rel_linf, self.ratio):
            w.writerow([row[0], *(f"{v:.10g}" for v in row[1:])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceLog":
        out = cls()
        for row in csv.DictReader(io.StringIO(text)):
            out.n.append(int(row["n"]))
            for k in ("rel_l2", "rel_hd", "rel_linf", "ratio"):
                getattr(out, k).append(float(row[k]))
        return out


def rel_error_l2(approx: np.ndarray, truth: np.ndarray) -> float:
    """Nodal 2-norm of the difference over that of the truth."""
    d = float(np.linalg.norm(truth))
    if d == 0:
        raise ValueError("relative error against a zero field")
    return float(np.linalg.norm(approx - truth)) / d


def rel_error_linf(approx: np.ndarray, truth: np.ndarray) -> float:
    """``max |approx - truth| / max |truth|``."""
    d = float(np.max(np.abs(truth)))
    if d == 0:
        raise ValueError("relative error against a zero field")
    return float(np.max(np.abs(approx - truth))) / d


def reconstruct(trace: BoundaryTrace, cfg: ReconstructionConfig, truth: Optional[np.ndarray] = None,
                initial: Optional[np.ndarray] = None, callback=None):
    """Run ``cfg.n_terms`` terms of ``f_n = f_{n-1} - A0 L f_{n-1} + A0 h``.

    ``f_1 = A0 h`` unless ``initial`` supplies ``f_0``, in which case ``f_1`` is the
    first update of it.  ``truth`` only feeds the log; it never changes the iterates.
    Returns ``(f, log)``.
    """
    grid = cfg.grid
    if trace.grid != grid or trace.gamma != cfg.gamma:
        raise ValueError("trace does not match the reconstruction grid/measurement set")
    if abs(trace.dt - cfg.dt) > 1e-12 * cfg.dt or abs(trace.T - cfg.T) > 1e-9 * cfg.T:
        raise ValueError(f"trace sampling (dt={trace.dt}, T={trace.T}) differs from the solver's "
                         f"(dt={cfg.dt}, T={cfg.T}); regenerate the trace with the same grid, speed, T and cfl")
    if truth is not None:
        check_field(grid, truth)
        truth_hd = norm_hd(grid, truth)
    A0 = cfg.time_reversal()
    t0 = time.perf_counter()
    a0h = A0(trace)
    clog = ConvergenceLog()
    f = a0h.copy() if initial is None else initial + a0h - A0(cfg.forward(initial))
    rising = 0
    for n in range(1, cfg.n_terms + 1):
        if n > 1:
            f = f - A0(cfg.forward(f)) + a0h
        clog.n.append(n)
        clog.seconds.append(time.perf_counter() - t0)
        if truth is not None:
            clog.rel_l2.append(rel_error_l2(f, truth))
            clog.rel_hd.append(norm_hd(grid, f - truth) / truth_hd if truth_hd > 0 else float("nan"))
            clog.rel_linf.append(rel_error_linf(f, truth))
            clog.ratio.append(clog.rel_hd[-1] / clog.rel_hd[-2] if n > 1 and clog.rel_hd[-2] > 0 else float("nan"))
            rising = rising + 1 if clog.ratio[-1] > 1.5 else 0
            if rising >= 3:
                log.warning("error grew by more than 1.5x for %d consecutive iterations", rising)
            log.info("term %d: rel L2 %.4g%%, rel H_D %.4g%%", n, 100 * clog.rel_l2[-1], 100 * clog.rel_hd[-1])
        else:
            for k in ("rel_l2", "rel_hd", "rel_linf", "ratio"):
                getattr(clog, k).append(float("nan"))
        if callback is not None:
            callback(n, f)
    return f, clog
