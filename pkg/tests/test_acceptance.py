"""Acceptance suite: one group of tests per acceptance criterion.

Each test carries ``@pytest.mark.criterion(n)``; ``conftest.py`` prints a
PASS/FAIL line per criterion at the end of the session.  The long
convergence runs are also marked ``slow`` but are not deselected by default.
"""
import functools
import json
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from imexap import cli, models, reference, scenarios, spatial, stability, stepper, tableaux

DATA = Path(__file__).parent / "data"
EPSILONS = (1.0, 0.1, 0.01, 0.001)
BDF = ("BDF2", "BDF3", "BDF4", "BDF5")


# ---------------------------------------------------------------------------
# shared convergence runs (criteria 2 and 3)
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def level_solution(scheme, formulation, epsilon, nx):
    cfg = scenarios.preset_config("test1-convergence", scheme=scheme, formulation=formulation,
                                  epsilon=epsilon)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return scenarios.LevelSolver(cfg)(nx)


def study(scheme, formulation, epsilon, n_levels):
    return reference.convergence_study(
        functools.partial(level_solution, scheme, formulation, epsilon), 128, n_levels,
        scheme=scheme, formulation=formulation, epsilon=epsilon, alpha=1.0,
    )


# ---------------------------------------------------------------------------
# 1. order conditions
# ---------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_c1_order_conditions():
    t0 = time.perf_counter()
    for tab in tableaux.builtin_tableaus():
        res = tableaux.verify_order_conditions(tab, tab.p)
        assert np.max(np.abs(res)) <= 1e-12, tab.name
        if tab.is_bdf:
            assert np.max(np.abs(tableaux.verify_order_conditions(tab, tab.p + 1))) > 1e-12, tab.name
    elapsed = time.perf_counter() - t0
    print(f"criterion 1: 8 tableaus checked in {elapsed:.3f} s")
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 2. convergence rates of the AP-explicit schemes on the smooth periodic test
# ---------------------------------------------------------------------------

# tabulated rates at N = 256 and N = 512 for u and v
PUBLISHED_RATES = {
    ("bdf2", 1.0): {"u": (1.6331, 1.8491), "v": (1.5996, 1.8328)},
    ("bdf3", 1.0): {"u": (2.514, 2.8127), "v": (2.6848, 2.861)},
    ("bdf3", 0.001): {"u": (3.2638, 3.2), "v": (3.1328, 3.0885)},
}


@pytest.mark.slow
@pytest.mark.criterion(2)
@pytest.mark.parametrize("scheme,epsilon", list(PUBLISHED_RATES))
def test_c2_convergence_rates(scheme, epsilon):
    rep = study(scheme, "ap-explicit", epsilon, 4)
    misses = []
    for var in ("u", "v"):
        for n, want in zip((256, 512), PUBLISHED_RATES[scheme, epsilon][var]):
            got = rep.rate_at(n, var)
            print(f"criterion 2: {scheme} eps={epsilon:g} {var} N={n} rate {got:.3f} (published {want})")
            if not abs(got - want) <= 0.35:
                misses.append(f"{var}@{n}: {got:.3f} vs {want}")
    errs = np.array(rep.err_u)
    assert np.all(errs > 0) and np.all(np.isfinite(errs))
    assert not misses, "; ".join(misses)


# ---------------------------------------------------------------------------
# 3. near-uniform accuracy in epsilon
# ---------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(3)
@pytest.mark.parametrize("formulation", ["ap-explicit", "ap-implicit"])
@pytest.mark.parametrize("name", tableaux.BUILTIN_NAMES)
def test_c3_uniform_accuracy(name, formulation):
    p = tableaux.builtin_tableau(name).p
    rates = [study(name.lower(), formulation, eps, 3).rate_at(256) for eps in EPSILONS]
    print(f"criterion 3: {name} {formulation} rates at N=256:",
          ", ".join(f"eps={e:g}: {r:.3f}" for e, r in zip(EPSILONS, rates)))
    assert all(math.isfinite(r) for r in rates)
    assert max(rates) - min(rates) < 1.5
    assert min(rates) >= p - 1


# ---------------------------------------------------------------------------
# 4. equivalence with the limit schemes for vanishing epsilon
# ---------------------------------------------------------------------------

LIMIT_CASES = [
    # formulation, alpha, gamma, limit scheme
    ("ap-explicit", 1.0, 1.0, "convection_diffusion_explicit"),
    ("ap-implicit", 1.0, 1.0, "convection_diffusion_imex"),
    ("ap-explicit", 0.0, 0.5, "convection"),
    ("ap-implicit", 0.0, 0.5, "convection"),
]


@pytest.mark.criterion(4)
@pytest.mark.parametrize("formulation,alpha,gamma,limit", LIMIT_CASES)
@pytest.mark.parametrize("name", tableaux.BUILTIN_NAMES)
def test_c4_limit_scheme_equivalence(name, formulation, alpha, gamma, limit):
    tab = tableaux.builtin_tableau(name)
    grid = spatial.Grid1D(64)
    bc = spatial.BoundaryCondition.PERIODIC
    model = models.linear_relaxation(gamma)
    scaling = models.ScalingParams(1e-12, alpha)
    mode = "hyperbolic" if alpha < 1 else "standard"
    dt = stepper.select_dt(formulation, scaling, grid.dx, 0.1, model, mode)
    decay = 4 * np.pi**2 * (alpha == 1)
    # any smooth start levels will do; both sides receive the same history
    hist = [grid.cell_averages(lambda x, k=k: np.sin(2 * np.pi * (x - gamma * k * dt)) * np.exp(-decay * k * dt))
            for k in range(tab.s)]
    hist_v = [models.well_prepared_v(model, u, scaling, grid, bc) for u in hist]
    state = stepper.init_state(model, scaling, grid, bc, hist[0], hist_v[0], tab, formulation, dt, lam=0.1)
    state.hist_u, state.hist_v = list(hist), list(hist_v)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stepper.run(state, 10)
    oracle = reference.limit_scheme_oracle(tab, limit, hist, grid, dt, 10, gamma=gamma)
    err = reference.l1_error(state.u, oracle[-1], grid.dx)
    print(f"criterion 4: {name} {formulation} {limit} L1 = {err:.2e}")
    assert err <= 1e-9


# ---------------------------------------------------------------------------
# 5 and 6. closed-form benchmarks against frozen thresholds
# ---------------------------------------------------------------------------

CALIBRATION = json.loads((DATA / "calibration.json").read_text())


def calibrated(group):
    return [(c["scheme"], c["formulation"], c["threshold"]) for c in CALIBRATION[group]["cases"]]


def run_preset(preset, scheme, formulation):
    cfg = scenarios.preset_config(preset, scheme=scheme, formulation=formulation)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cfg, scenarios.simulate(cfg)


@pytest.mark.criterion(5)
@pytest.mark.parametrize("scheme,formulation,threshold", calibrated("riemann"))
def test_c5_erf_riemann(scheme, formulation, threshold):
    cfg, st = run_preset("test2-riemann", scheme, formulation)
    exact = st.grid.cell_averages(lambda x: reference.exact_erf_riemann(x, cfg.t_final))
    err = float(np.max(np.abs(st.u - exact)))
    print(f"criterion 5: {scheme} {formulation} Linf = {err:.3e} (threshold {threshold:.3e})")
    assert err < threshold


@functools.lru_cache(maxsize=None)
def barenblatt_run(scheme):
    return run_preset("test3-barenblatt", scheme, "ap-explicit")


def barenblatt_l1(scheme):
    cfg, st = barenblatt_run(scheme)
    exact = st.grid.cell_averages(lambda x: reference.barenblatt(x, cfg.t_final))
    return reference.l1_error(st.u, exact, st.grid.dx)


@pytest.mark.criterion(6)
@pytest.mark.parametrize("scheme,formulation,threshold", calibrated("barenblatt"))
def test_c6_barenblatt(scheme, formulation, threshold):
    cfg, st = barenblatt_run(scheme)
    err = barenblatt_l1(scheme)
    lo, hi = reference.support_edges(st.grid.x, st.u)
    r = reference.barenblatt_radius(cfg.t_final)
    print(f"criterion 6: {scheme} L1 = {err:.3e} (threshold {threshold:.3e}); "
          f"support [{lo:.3f}, {hi:.3f}] vs +-{r:.3f}")
    assert abs(r - 48 ** (1 / 3)) < 1e-12
    assert abs(hi - r) <= 2 * st.grid.dx
    assert abs(lo + r) <= 2 * st.grid.dx
    assert err < threshold


@pytest.mark.slow
def test_barenblatt_high_order_not_worse_than_bdf2():
    # spatial accuracy dominates on this test, so BDF5 should track BDF2
    e2, e5 = barenblatt_l1("bdf2"), barenblatt_l1("bdf5")
    print(f"Barenblatt L1: BDF2 {e2:.3e}, BDF5 {e5:.3e}, ratio {e5 / e2:.3f}")
    assert e5 <= 1.5 * e2


# ---------------------------------------------------------------------------
# 7. linear stability spot checks
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def scan(name, formulation, eps_alpha):
    return stability.scan_region(name, formulation, eps_alpha=list(eps_alpha), resolution=(40, 40))


@pytest.mark.criterion(7)
def test_c7_implicit_bdf2_uniformly_stable_below_half():
    sc = scan("BDF2", "ap-implicit", (0.4,))
    bad = int(np.sum(~sc.stable[0]))
    print(f"criterion 7: implicit BDF2 at eps^alpha=0.4 has {bad}/1600 unstable points, "
          f"max modulus {sc.modulus[0].max():.4f}")
    assert bad == 0


@pytest.mark.criterion(7)
@pytest.mark.parametrize("name", BDF)
def test_c7_implicit_area_at_least_explicit(name):
    ea = (0.1, 0.25)
    imp, exp = scan(name, "ap-implicit", ea).stable_area(), scan(name, "ap-explicit", ea).stable_area()
    print(f"criterion 7: {name} stable areas at eps^alpha={ea}: implicit {imp}, explicit {exp}")
    assert all(i >= e for i, e in zip(imp, exp))


@pytest.mark.criterion(7)
@pytest.mark.parametrize("formulation", ["ap-explicit", "ap-implicit"])
@pytest.mark.parametrize("name", BDF)
def test_c7_area_non_increasing_in_eps_alpha(name, formulation):
    areas = scan(name, formulation, (0.1, 0.25, 0.4, 0.5, 0.75, 1.0)).stable_area()
    print(f"criterion 7: {name} {formulation} areas {areas}")
    assert all(a >= b for a, b in zip(areas, areas[1:]))


# ---------------------------------------------------------------------------
# 8. conservation
# ---------------------------------------------------------------------------

@pytest.mark.criterion(8)
@pytest.mark.parametrize("formulation", ["ap-explicit", "ap-implicit"])
@pytest.mark.parametrize("scheme,epsilon", [("bdf2", 1.0), ("tvb44", 0.01), ("bdf5", 1e-6)])
def test_c8_periodic_mass_conservation(scheme, formulation, epsilon):
    cfg = scenarios.preset_config("test1-convergence", scheme=scheme, formulation=formulation,
                                  epsilon=epsilon, nx=64)
    state, _ = scenarios.build(cfg)
    m0 = state.mass
    # the sine start has zero net mass, so drift is measured against sum |u| dx
    scale = float(np.sum(np.abs(state.u)) * state.grid.dx)
    worst = [0.0]
    prev = [m0]

    def track(st):
        worst[0] = max(worst[0], abs(st.mass - prev[0]) / scale)
        prev[0] = st.mass

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stepper.run(state, 500, callback=track)
    print(f"criterion 8: {scheme} {formulation} eps={epsilon:g} worst drift per step {worst[0]:.2e}")
    assert state.n == 500
    assert worst[0] <= 1e-12
    assert abs(state.mass - m0) / scale <= 500 * 1e-12


# ---------------------------------------------------------------------------
# 9. determinism
# ---------------------------------------------------------------------------

@pytest.mark.criterion(9)
@pytest.mark.parametrize("argv", [
    ["--preset", "test1-convergence", "--nx", "64", "--scheme", "tvb55", "--epsilon", "0.01"],
    ["--preset", "test2-riemann", "--formulation", "ap-implicit", "--scheme", "bdf3"],
    ["--preset", "test4c-variable-alpha", "--t-final", "0.01"],
])
def test_c9_bit_identical_csv(tmp_path, argv):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        assert cli.main(["run", *argv, "-o", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
