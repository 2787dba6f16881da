"""``avgtr`` command line: phantom, forward, reconstruct and rays subcommands.

Settings are flat ``key=value`` pairs, given on the command line (``key=value`` or
``--key=value``) and/or in a ``--config`` file; the command line wins.  Run
``avgtr keys`` for the list of keys and defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io
from .grid import GammaSpec, Grid2D, SubdomainSpec
from .neumann_series import ReconstructionConfig, reconstruct, rel_error_l2, rel_error_linf
from .phantoms import PhantomSpec, SpeedModel
from .raysymbol import classify_visibility, domain_time, uniqueness_time
from .wave import CFLError

log = logging.getLogger("avgtr")


@dataclass
class ExperimentConfig:
    grid: int = 201  # nodes per side of [-1, 1]^2
    T: float = 5.0
    n_terms: int = 10
    gamma: str = "full"  # full | figure4 | edge:a:b,...
    weight: str = "uniform"  # uniform | sharp
    omega0: str = "rect:-0.9:0.9:-0.9:0.9"
    cfl: float = 0.5
    tol: float = 1e-8
    speed: str = "constant"  # constant | constant:<c0> | figure3
    kind: str = "disks"  # shepp_logan | disks | gaussian | point_pulse
    amplitude: float = 1.0
    supersample: int = 4
    field: str = ""  # phantom dump to use instead of generating ``kind``
    trace: str = ""  # trace file for reconstruct; empty runs the forward solve inline
    out: str = "out"
    images: bool = True
    seed: int = 0
    n_samples: int = 1024

    @classmethod
    def from_pairs(cls, pairs: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, raw in pairs.items():
            if key not in known:
                raise ValueError(f"unknown key {key!r}")
            typ = type(known[key].default)
            if typ is bool:
                if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(f"{key}: expected a boolean, got {raw!r}")
                kw[key] = raw.lower() in ("1", "true", "yes")
            else:
                try:
                    kw[key] = typ(raw)
                except ValueError:
                    raise ValueError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None
        return cls(**kw)

    @property
    def grid2d(self) -> Grid2D:
        return Grid2D.square(self.grid)

    def speed_model(self) -> SpeedModel:
        return SpeedModel.parse(self.speed)

    def reconstruction(self, grid: Grid2D) -> ReconstructionConfig:
        return ReconstructionConfig(grid, self.speed_model().on_grid(grid), self.T, self.n_terms,
                                    GammaSpec.parse(self.gamma), self.weight, SubdomainSpec.parse(self.omega0),
                                    self.cfl, self.tol)

    def phantom(self, grid: Grid2D) -> np.ndarray:
        if self.field:
            g, f = io.read_field(self.field)
            if g != grid:
                raise ValueError(f"{self.field} is on a {g.nx}x{g.ny} grid, config asks for {grid.nx}x{grid.ny}")
            return f
        spec = PhantomSpec(self.kind, self.amplitude, self.supersample)
        return spec.build(grid, SubdomainSpec.parse(self.omega0))


def read_config_file(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_tokens(tokens) -> dict:
    out = {}
    for tok in tokens:
        tok = tok[2:] if tok.startswith("--") else tok
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _outdir(cfg: ExperimentConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_phantom(cfg: ExperimentConfig) -> list[Path]:
    grid = cfg.grid2d
    f = cfg.phantom(grid)
    d = _outdir(cfg)
    data, hdr = io.write_field(d / f"phantom_{cfg.kind}", grid, f)
    written = [data, hdr]
    if cfg.images:
        written += io.write_pgm(d / f"phantom_{cfg.kind}.pgm", f)
    print(f"phantom {cfg.kind} {grid.nx}x{grid.ny} -> {data}")
    return written


def _forward(cfg: ExperimentConfig, rc: ReconstructionConfig, f: np.ndarray):
    try:
        return rc.forward(f)
    except CFLError as exc:
        raise CFLError(f"{exc}; lower cfl (now {cfg.cfl})") from None


def cmd_forward(cfg: ExperimentConfig) -> Path:
    grid = cfg.grid2d
    rc = cfg.reconstruction(grid)
    trace = _forward(cfg, rc, cfg.phantom(grid))
    path, _ = io.write_trace(_outdir(cfg) / "trace.bin", trace,
                             {"speed": cfg.speed, "cfl": cfg.cfl, "T": cfg.T})
    print(f"trace {trace.nt} steps x {trace.values.shape[1]} nodes, dt={trace.dt:.6g} -> {path}")
    return path


def cmd_reconstruct(cfg: ExperimentConfig) -> dict:
    grid = cfg.grid2d
    rc = cfg.reconstruction(grid)
    truth = cfg.phantom(grid)
    if cfg.trace:
        trace, _ = io.read_trace(cfg.trace)
    else:
        trace = _forward(cfg, rc, truth)
    f, clog = reconstruct(trace, rc, truth=truth)
    d = _outdir(cfg)
    io.write_field(d / "reconstruction", grid, f)
    (d / "convergence.csv").write_text(clog.to_csv())
    if cfg.images:
        lo, hi = float(truth.min()), float(truth.max())
        io.write_pgm(d / "reconstruction.pgm", f, lo, hi)
        io.write_pgm(d / "difference.pgm", f - truth)
    l2, linf = rel_error_l2(f, truth), rel_error_linf(f, truth)
    print(f"reconstruct {cfg.kind} terms={cfg.n_terms} L2={100 * l2:.4f}% Linf={100 * linf:.4f}%")
    return {"rel_l2": l2, "rel_linf": linf, "log": clog}


def cmd_rays(cfg: ExperimentConfig) -> dict:
    grid = cfg.grid2d
    om, gamma, speed = SubdomainSpec.parse(cfg.omega0), GammaSpec.parse(cfg.gamma), cfg.speed_model()
    rep = classify_visibility(om, gamma, speed, cfg.T, cfg.n_samples, cfg.seed, grid)
    t0 = uniqueness_time(om, gamma, speed, grid)
    tom = domain_time(speed, grid)
    d = _outdir(cfg)
    (d / "visibility.csv").write_text(rep.to_csv())
    (d / "visibility.txt").write_text(rep.summary() + "\n")
    print(f"verdict {'stable' if rep.stable else 'unstable'} invisible={rep.invisible} "
          f"borderline={rep.borderline} degenerate={rep.degenerate} min_p={rep.min_p:.6g} "
          f"T0={t0:.6g} T_omega={tom:.6g}")
    return {"report": rep, "T0": t0, "T_omega": tom}


COMMANDS = {"phantom": cmd_phantom, "forward": cmd_forward, "reconstruct": cmd_reconstruct, "rays": cmd_rays}


def _keys_help() -> str:
    return "\n".join(f"  {f.name} = {f.default!r}" for f in fields(ExperimentConfig))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="avgtr", description="Averaged time reversal experiments.",
                                epilog="keys and defaults:\n" + _keys_help(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=sorted(COMMANDS) + ["keys"])
    p.add_argument("--config", help="flat key=value file; command-line pairs override it")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-iteration progress")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "keys":
        print(_keys_help())
        return 0
    try:
        pairs = read_config_file(args.config) if args.config else {}
        pairs.update(parse_tokens(rest))
        cfg = ExperimentConfig.from_pairs(pairs)
        COMMANDS[args.command](cfg)
    except Exception as exc:  # one line, nonzero exit
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
