"""File formats: raw field dumps, boundary traces, PGM previews.

Field dump ``<stem>.f64``: little-endian float64 in row-major order of the
``(nx, ny)`` array (``x`` index slowest), with ``<stem>.hdr`` holding
``nx ny x_min x_max y_min y_max``.

Trace file: an ASCII line ``T nt n_nodes``, then one ``i j x y`` line per node,
then ``nt`` rows of ``n_nodes`` little-endian float64.  A JSON sidecar carries
what the node table cannot: grid, measurement set and the exact ``dt``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .grid import GammaSpec, Grid2D
from .wave import BoundaryTrace

LE_F64 = np.dtype("<f8")


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".f64", ".hdr") else p


def write_field(path, grid: Grid2D, f: np.ndarray) -> tuple[Path, Path]:
    stem = _stem(path)
    f = np.asarray(f)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    data, hdr = stem.with_suffix(".f64"), stem.with_suffix(".hdr")
    np.ascontiguousarray(f, dtype=LE_F64).tofile(data)
    hdr.write_text(grid.header() + "\n")
    return data, hdr


def read_field(path) -> tuple[Grid2D, np.ndarray]:
    stem = _stem(path)
    grid = Grid2D.from_header(stem.with_suffix(".hdr").read_text())
    raw = np.fromfile(stem.with_suffix(".f64"), dtype=LE_F64)
    if raw.size != grid.nx * grid.ny:
        raise ValueError(f"{stem.with_suffix('.f64')} holds {raw.size} values, header says {grid.nx}x{grid.ny}")
    return grid, raw.reshape(grid.shape).astype(np.float64)


def write_trace(path, trace: BoundaryTrace, meta: dict | None = None) -> tuple[Path, Path]:
    path = Path(path)
    ii, jj = trace.nodes()
    lines = [f"{trace.T!r} {trace.nt} {ii.size}"]
    lines += [f"{i} {j} {trace.grid.x[i]!r} {trace.grid.y[j]!r}" for i, j in zip(ii, jj)]
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(trace.values, dtype=LE_F64).tobytes())
    side = path.with_name(path.name + ".json")
    info = {"grid": trace.grid.header(), "gamma": str(trace.gamma), "dt": trace.dt}
    info.update(meta or {})
    side.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return path, side


def read_trace(path) -> tuple[BoundaryTrace, dict]:
    path = Path(path)
    info = json.loads(path.with_name(path.name + ".json").read_text())
    grid = Grid2D.from_header(info["grid"])
    gamma = GammaSpec.parse(info["gamma"])
    blob = path.read_bytes()
    pos = blob.index(b"\n")
    T, nt, n_nodes = blob[:pos].decode("ascii").split()
    nt, n_nodes = int(nt), int(n_nodes)
    ii, jj = gamma.nodes(grid)
    for k in range(n_nodes):
        nxt = blob.index(b"\n", pos + 1)
        i, j = blob[pos + 1:nxt].split()[:2]
        if (int(i), int(j)) != (ii[k], jj[k]):
            raise ValueError(f"{path}: node table disagrees with measurement set {info['gamma']!r}")
        pos = nxt
    values = np.frombuffer(blob[pos + 1:], dtype=LE_F64)
    if values.size != nt * n_nodes:
        raise ValueError(f"{path}: expected {nt * n_nodes} samples, found {values.size}")
    trace = BoundaryTrace(grid, gamma, float(info["dt"]), values.reshape(nt, n_nodes).astype(np.float64))
    if abs(trace.T - float(T)) > 1e-9 * max(1.0, float(T)):
        raise ValueError(f"{path}: header T={T} but dt*(nt-1)={trace.T}")
    return trace, info


def to_bytes(f: np.ndarray, lo: float | None = None, hi: float | None = None) -> tuple[np.ndarray, float, float]:
    """Linear map of ``[lo, hi]`` (default the data range) onto 0..255, image rows top to bottom."""
    lo = float(np.min(f)) if lo is None else lo
    hi = float(np.max(f)) if hi is None else hi
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.rint((np.asarray(f) - lo) * scale), 0, 255).astype(np.uint8)
    return img.T[::-1], lo, hi


def write_pgm(path, f: np.ndarray, lo: float | None = None, hi: float | None = None) -> tuple[Path, Path]:
    """Binary P5 preview (width ``nx``, height ``ny``, ``y`` up) and a ``.range`` sidecar ``lo hi``."""
    path = Path(path)
    img, lo, hi = to_bytes(f, lo, hi)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    side = path.with_name(path.name + ".range")
    side.write_text(f"{lo!r} {hi!r}\n")
    return path, side


def read_pgm(path) -> np.ndarray:
    """Pixels of an 8-bit P5 file, rows top to bottom."""
    blob = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", blob)
    if m is None:
        raise ValueError(f"{path} is not a binary PGM")
    w, h, maxval = (int(v) for v in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(blob[m.end():m.end() + w * h], dtype=np.uint8).reshape(h, w)
