import hashlib

import numpy as np
import pytest

from avgtr import io
from avgtr.cli import ExperimentConfig, main, parse_tokens, read_config_file
from avgtr.grid import GammaSpec, Grid2D
from avgtr.phantoms import gaussian
from avgtr.wave import lambda_forward


def test_field_round_trip_bit_identical(tmp_path, rng):
    g = Grid2D(51, 53, -1.0, 1.0, -0.5, 2.0)
    f = rng.standard_normal(g.shape)
    io.write_field(tmp_path / "f", g, f)
    raw = (tmp_path / "f.f64").read_bytes()
    assert raw == f.astype("<f8").tobytes()
    assert (tmp_path / "f.hdr").read_text().split() == ["51", "53", "-1.0", "1.0", "-0.5", "2.0"]
    g2, f2 = io.read_field(tmp_path / "f.f64")
    assert g2 == g and np.array_equal(f, f2)


def test_trace_round_trip(tmp_path):
    g = Grid2D.square(51)
    tr = lambda_forward(g, gaussian(g), np.ones(g.shape), 0.3, GammaSpec.figure4())
    io.write_trace(tmp_path / "t.bin", tr, {"note": "x"})
    head = (tmp_path / "t.bin").read_bytes().split(b"\n", 1)[0].split()
    assert int(head[1]) == tr.nt and int(head[2]) == tr.values.shape[1]
    back, meta = io.read_trace(tmp_path / "t.bin")
    assert np.array_equal(back.values, tr.values) and back.dt == tr.dt and back.gamma == tr.gamma
    assert meta["note"] == "x"


def test_pgm_layout(tmp_path):
    g = Grid2D(51, 61)
    X, Y = g.mesh()
    io.write_pgm(tmp_path / "a.pgm", Y)
    img = io.read_pgm(tmp_path / "a.pgm")
    assert img.shape == (61, 51)
    assert img[0, 0] == 255 and img[-1, 0] == 0  # y increases upwards
    lo, hi = map(float, (tmp_path / "a.pgm.range").read_text().split())
    assert (lo, hi) == (-1.0, 1.0)


def test_config_merge(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("# comment\ngrid = 101\nT=3\nspeed = figure3\n")
    pairs = read_config_file(p)
    pairs.update(parse_tokens(["T=4", "--kind=shepp_logan"]))
    cfg = ExperimentConfig.from_pairs(pairs)
    assert (cfg.grid, cfg.T, cfg.speed, cfg.kind, cfg.n_terms) == (101, 4.0, "figure3", "shepp_logan", 10)
    with pytest.raises(ValueError):
        ExperimentConfig.from_pairs({"grid": "big"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_pairs({"images": "maybe"})


def test_phantom_command(tmp_path):
    assert main(["phantom", "kind=disks", "grid=201", f"out={tmp_path}"]) == 0
    img = io.read_pgm(tmp_path / "phantom_disks.pgm")
    assert img.shape == (201, 201)
    g, f = io.read_field(tmp_path / "phantom_disks")
    assert g == Grid2D.square(201) and f.max() == 1.0
    assert main(["phantom", "kind=shepp_logan", "grid=501", f"out={tmp_path}", "images=false"]) == 0
    assert not (tmp_path / "phantom_shepp_logan.pgm").exists()


def test_errors_are_one_line(tmp_path, capsys):
    assert main(["phantom", "colour=red", f"out={tmp_path}"]) != 0
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: ")
    assert main(["forward", "grid=51", "cfl=2", f"out={tmp_path}"]) != 0
    assert "cfl" in capsys.readouterr().err


def test_forward_then_reconstruct_deterministic(tmp_path, capsys):
    base = ["grid=51", "T=1", "n_terms=2", "kind=gaussian"]
    assert main(["forward", *base, f"out={tmp_path}/a"]) == 0
    assert main(["reconstruct", *base, f"out={tmp_path}/a", f"trace={tmp_path}/a/trace.bin"]) == 0
    assert main(["reconstruct", *base, f"out={tmp_path}/b"]) == 0
    out = capsys.readouterr().out
    assert "L2=" in out and "Linf=" in out
    digest = [hashlib.sha256((tmp_path / d / "reconstruction.f64").read_bytes()).hexdigest() for d in "ab"]
    assert digest[0] == digest[1]
    csv = (tmp_path / "a" / "convergence.csv").read_text().splitlines()
    assert csv[0] == "n,rel_l2,rel_hd,rel_linf,ratio" and len(csv) == 3
    assert (tmp_path / "a" / "difference.pgm").exists()


def test_rays_command(tmp_path, capsys):
    assert main(["rays", "grid=101", "n_samples=64", f"out={tmp_path}"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("verdict stable")
    assert main(["rays", "grid=101", "n_samples=64", "gamma=left:0:1", "T=0.5", f"out={tmp_path}"]) == 0
    assert capsys.readouterr().out.startswith("verdict unstable")
    assert (tmp_path / "visibility.csv").read_text().startswith("x,y,theta,class,p,kappa,n_reflections")
