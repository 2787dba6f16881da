import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avgtr.grid import GammaSpec, Grid2D, SubdomainSpec
from avgtr.phantoms import gaussian
from avgtr.wave import (BoundaryCondition, BoundaryTrace, CFLError, WaveState, cfl_dt, lambda_forward,
                        laplacian, max_stable_dt, propagate, state_energy)


def test_cfl_dt_divides_T(g51):
    c = np.ones(g51.shape)
    dt = cfl_dt(g51, c, 0.5, T=1.0)
    assert dt <= 0.5 * g51.h_min / np.sqrt(2) + 1e-15
    assert round(1.0 / dt) * dt == pytest.approx(1.0, rel=1e-12)


def test_cfl_violation_raises(g51):
    c = np.ones(g51.shape)
    bad = 1.01 * max_stable_dt(g51, c)
    with pytest.raises(CFLError):
        propagate(g51, WaveState.at_rest(np.zeros(g51.shape), bad), BoundaryCondition.neumann(), c, 100 * bad)


def test_laplacian_of_quadratic(g51):
    X, Y = g51.mesh()
    L = laplacian(g51, X**2 + 3 * Y**2)
    assert np.allclose(L[1:-1, 1:-1], 8.0, atol=1e-9)


def test_laplacian_neumann_closure_matches_stiffness(g51, rng):
    from avgtr.elliptic import stiffness
    u = rng.standard_normal(g51.shape)
    w = g51.quadrature_weights()
    Ku = (stiffness(g51) @ u.ravel()).reshape(g51.shape)
    assert np.allclose(-laplacian(g51, u) * w, Ku, atol=1e-9)


def test_zero_source_gives_zero_trace(g51):
    tr = lambda_forward(g51, np.zeros(g51.shape), np.ones(g51.shape), 1.0, GammaSpec.full())
    assert tr.values.shape == (tr.nt, 200)
    assert not tr.values.any()


def test_trace_layout(g51):
    f = gaussian(g51, (0.2, -0.1), 0.15)
    tr = lambda_forward(g51, f, np.ones(g51.shape), 0.5, GammaSpec.figure4())
    ii, jj = tr.nodes()
    assert np.array_equal(tr.values[0], f[ii, jj])
    assert tr.T == pytest.approx(0.5, rel=1e-12)
    assert np.allclose(tr.times[[0, -1]], [0.0, 0.5])


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_forward_map_is_linear(a, b):
    g = Grid2D.square(51)
    c = 1 + 0.2 * g.mesh()[0]
    f1 = gaussian(g, (0.1, 0.2), 0.1)
    f2 = gaussian(g, (-0.3, 0.0), 0.2)
    t1, t2 = (lambda_forward(g, f, c, 0.6, GammaSpec.full()).values for f in (f1, f2))
    t12 = lambda_forward(g, a * f1 + b * f2, c, 0.6, GammaSpec.full()).values
    assert np.max(np.abs(t12 - (a * t1 + b * t2))) <= 1e-12 * max(1.0, np.max(np.abs(t12)))


def test_energy_conserved_with_reflecting_walls():
    g = Grid2D.square(101)
    X, Y = g.mesh()
    c = 1 + 0.3 * np.sin(np.pi * X) + 0.2 * np.cos(np.pi * Y)
    f = gaussian(g, (0.2, 0.1), 0.1)
    dt = cfl_dt(g, c, 0.5, 3.0)
    s0 = WaveState.at_rest(f, dt)
    e0 = state_energy(g, s0, c)
    s1, _ = propagate(g, s0, BoundaryCondition.neumann(), c, 3.0)
    assert abs(state_energy(g, s1, c) - e0) / e0 < 5e-3


def test_leapfrog_reverses_exactly(g51):
    c = np.ones(g51.shape)
    f = gaussian(g51, (0.0, 0.3), 0.15)
    dt = cfl_dt(g51, c, 0.5, 1.0)
    s1, _ = propagate(g51, WaveState.at_rest(f, dt), BoundaryCondition.neumann(), c, 1.0)
    rev = s1.reversed()  # sits at t = 1 - dt
    back, _ = propagate(g51, rev, BoundaryCondition.neumann(), c, rev.t)
    assert back.t == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(back.u - f)) < 1e-12


def test_dirichlet_data_is_imposed(g51):
    c = np.ones(g51.shape)
    dt = cfl_dt(g51, c, 0.5, 0.4)
    nt = int(round(0.4 / dt)) + 1
    n_nodes = GammaSpec.full().node_mask(g51).sum()
    vals = np.outer(np.linspace(0, 1, nt), np.ones(n_nodes))
    tr = BoundaryTrace(g51, GammaSpec.full(), dt, vals)
    s, _ = propagate(g51, WaveState.at_rest(np.zeros(g51.shape), dt), BoundaryCondition.dirichlet(tr), c, 0.4)
    assert np.allclose(s.u[0, :], 1.0) and np.allclose(s.u[:, -1], 1.0)


def test_dirichlet_needs_whole_boundary(g51):
    tr = lambda_forward(g51, np.zeros(g51.shape), np.ones(g51.shape), 0.2, GammaSpec.figure4())
    with pytest.raises(ValueError):
        BoundaryCondition.dirichlet(tr)
    BoundaryCondition.mixed(tr)


def test_trace_must_cover_interval(g51):
    c = np.ones(g51.shape)
    tr = lambda_forward(g51, np.zeros(g51.shape), c, 0.2, GammaSpec.full())
    with pytest.raises(ValueError):
        propagate(g51, WaveState.at_rest(np.zeros(g51.shape), tr.dt), BoundaryCondition.dirichlet(tr), c, 0.4)


def test_support_warning(g51, caplog):
    f = np.ones(g51.shape)
    lambda_forward(g51, f, np.ones(g51.shape), 0.1, GammaSpec.full(), omega0=SubdomainSpec())
    assert "not supported" in caplog.text


def test_trace_arithmetic(g51):
    f = gaussian(g51)
    tr = lambda_forward(g51, f, np.ones(g51.shape), 0.2, GammaSpec.full())
    assert np.array_equal((tr + tr).values, (2 * tr).values)
    assert not (tr - tr).values.any()
    assert np.array_equal(tr.reversed().values[0], tr.values[-1])
