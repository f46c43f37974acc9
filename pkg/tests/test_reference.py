import math

import numpy as np
import pytest

from imexap import reference, spatial, tableaux
from imexap.spatial import BoundaryCondition, Grid1D


def test_erf_riemann_solves_advection_diffusion():
    x = np.linspace(0.5, 3.5, 7)
    t, h = 0.2, 1e-4
    u = lambda x, t: reference.exact_erf_riemann(x, t)
    ut = (u(x, t + h) - u(x, t - h)) / (2 * h)
    ux = (u(x + h, t) - u(x - h, t)) / (2 * h)
    uxx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2
    np.testing.assert_allclose(ut + ux, uxx, atol=1e-5)


def test_erf_riemann_far_field_and_errors():
    assert reference.exact_erf_riemann(-50.0, 0.25) == pytest.approx(4.0)
    assert reference.exact_erf_riemann(50.0, 0.25) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        reference.exact_erf_riemann(0.0, 0.0)


def test_barenblatt_solves_porous_medium_equation():
    # u_t = (u^2)_xx inside the support
    x = np.linspace(-2.0, 2.0, 9)
    t, h = 1.0, 1e-4
    b = reference.barenblatt
    ut = (b(x, t + h) - b(x, t - h)) / (2 * h)
    sq = lambda y: b(y, t) ** 2
    lap = (sq(x + h) - 2 * sq(x) + sq(x - h)) / h**2
    np.testing.assert_allclose(ut, lap, atol=1e-5)


def test_barenblatt_mass_and_support():
    for t in (0.0, 3.0):
        r = reference.barenblatt_radius(t)
        g = Grid1D(4000, -10.0, 10.0)
        mass = reference.barenblatt(g.x, t).sum() * g.dx
        assert mass == pytest.approx(4.0 / 3.0, rel=1e-5)
        assert reference.barenblatt(r * 1.001, t) == 0.0
    assert reference.barenblatt_radius(3.0) == pytest.approx(48 ** (1 / 3))
    with pytest.raises(ValueError):
        reference.barenblatt(0.0, -1.0)


def test_l1_error_and_restrict():
    assert reference.l1_error([1.0, 2.0], [0.0, 0.0], 0.5) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        reference.l1_error([1.0], [1.0, 2.0], 0.1)
    np.testing.assert_allclose(reference.restrict(np.arange(8.0), 2), [0.5, 2.5, 4.5, 6.5])
    np.testing.assert_allclose(reference.restrict(np.arange(8.0), 4), [1.5, 5.5])
    with pytest.raises(ValueError):
        reference.restrict(np.arange(7.0), 2)


def test_restrict_preserves_cell_averages():
    fine = Grid1D(64).cell_averages(np.exp)
    coarse = Grid1D(16).cell_averages(np.exp)
    np.testing.assert_allclose(reference.restrict(fine, 4), coarse, rtol=1e-13)


def test_rates():
    r = reference.rates([1.0, 0.25, 0.0625, 0.0])
    assert math.isnan(r[0]) and math.isnan(r[3])
    assert r[1:3] == pytest.approx([2.0, 2.0])


def test_convergence_study_on_known_error():
    # solution on n cells = exact cell averages + C * dx^3 (smooth perturbation)
    def solve(nx):
        g = Grid1D(nx)
        u = g.cell_averages(lambda x: np.sin(2 * np.pi * x))
        bump = g.cell_averages(lambda x: np.cos(2 * np.pi * x))
        return u + 5.0 * g.dx**3 * bump, u - 2.0 * g.dx**2 * bump

    rep = reference.convergence_study(solve, 16, 4, scheme="toy")
    assert rep.n == [16, 32, 64]
    assert rep.rate_at(32) == pytest.approx(3.0, abs=1e-6)
    assert rep.rate_at(64, "v") == pytest.approx(2.0, abs=1e-6)
    assert len(list(rep.rows())) == 3
    with pytest.raises(ValueError):
        reference.convergence_study(solve, 16, 2)


def test_report_csv(tmp_path):
    rep = reference.ConvergenceReport("BDF2", "ap-explicit", 1.0, 1.0, [8, 16], [1e-2, 2.5e-3], [1e-1, 5e-2])
    path = tmp_path / "r.csv"
    rep.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("scheme,formulation,epsilon")
    assert lines[2].split(",")[4:7] == ["16", "0.0025000000000000001", "2"]


def test_fd6_symbol_is_eigenvalue():
    g = Grid1D(32)
    sym = reference.fd6_symbol(g.nx, g.dx)
    for k in (1, 5, 16):
        mode = np.exp(2j * np.pi * k * np.arange(g.nx) / g.nx)
        ext = spatial.fill_ghosts(mode.real, BoundaryCondition.PERIODIC)
        lap = spatial.laplacian_p_6th(ext, g.dx)
        np.testing.assert_allclose(lap, sym[k] * mode.real, atol=1e-8 * abs(sym[k]))


def test_limit_oracle_convection_translates():
    # BDF2 explicit extrapolation on u_t + u_x = 0 converges to a shift
    errs = []
    for n in (32, 64):
        g = Grid1D(n)
        dt = 0.1 * g.dx
        t = tableaux.builtin_tableau("BDF2")
        exact = lambda tt: g.cell_averages(lambda x: np.sin(2 * np.pi * (x - tt)))
        hist = [exact(0.0), exact(-dt)]
        steps = int(round(0.05 / dt))
        out = reference.limit_scheme_oracle(t, "convection", hist, g, dt, steps)
        assert len(out) == steps
        errs.append(reference.l1_error(out[-1], exact(steps * dt), g.dx))
    assert math.log2(errs[0] / errs[1]) > 1.7


def test_limit_oracle_imex_heat_matches_scalar_recursion():
    # with gamma = 0 a sine mode evolves by the scalar BDF3 recursion
    # y^{n+1} + sum a_j y^{n-j} = dt c_-1 lam y^{n+1}, lam the discrete symbol
    g = Grid1D(32)
    t = tableaux.builtin_tableau("BDF3")
    dt = 1e-3
    shape = np.sin(2 * np.pi * g.x)
    lam = reference.fd6_symbol(g.nx, g.dx)[1]
    ys = [1.0, 1.01, 1.03]
    hist = [y * shape for y in ys]
    out = reference.limit_scheme_oracle(t, "convection_diffusion_imex", hist, g, dt, 20, gamma=0.0)
    for _ in range(20):
        y_new = -np.dot(t.a_arr, ys) / (1 - dt * t.c_minus1 * lam)
        ys = [y_new] + ys[:-1]
    np.testing.assert_allclose(out[-1], ys[0] * shape, atol=1e-13)


def test_limit_oracle_validation():
    g = Grid1D(16)
    t = tableaux.builtin_tableau("BDF2")
    hist = [np.zeros(16)] * 2
    with pytest.raises(ValueError, match="unknown limit"):
        reference.limit_scheme_oracle(t, "heat", hist, g, 0.1, 1)
    with pytest.raises(ValueError, match="history"):
        reference.limit_scheme_oracle(t, "convection", hist[:1], g, 0.1, 1)
    with pytest.raises(ValueError, match="periodic"):
        reference.limit_scheme_oracle(t, "convection_diffusion_imex", hist, g, 0.1, 1,
                                      bc=BoundaryCondition.ZERO_FLUX)


def test_support_edges():
    g = Grid1D(200, -10.0, 10.0)
    u = reference.barenblatt(g.x, 3.0)
    lo, hi = reference.support_edges(g.x, u)
    r = reference.barenblatt_radius(3.0)
    assert abs(hi - r) <= g.dx and abs(lo + r) <= g.dx
    with pytest.raises(ValueError):
        reference.support_edges(g.x, np.zeros(200))
