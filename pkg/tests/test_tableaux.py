from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imexap import tableaux
from imexap.tableaux import (
    BUILTIN_NAMES,
    UnknownTableauError,
    builtin_tableau,
    has_order,
    load_tableau_file,
    resolve_tableau,
    verify_order_conditions,
    zero_stability_roots,
)


def bdf_coefficients(s):
    """Classical BDF-s coefficients from Lagrange interpolation (independent of the table).

    Returns ``a`` (history weights, newest first) and the implicit weight
    ``c_-1``, normalised so the new level has coefficient 1.
    """
    # derivative at t = 1 of the interpolant through t = 1, 0, -1, ..., 1-s
    nodes = [Fraction(1 - k) for k in range(s + 1)]
    weights = []
    for k in range(s + 1):
        others = [j for j in range(s + 1) if j != k]
        denom = Fraction(1)
        for j in others:
            denom *= nodes[k] - nodes[j]
        deriv = Fraction(0)
        for drop in others:
            prod = Fraction(1)
            for j in others:
                if j != drop:
                    prod *= nodes[0] - nodes[j]
            deriv += prod
        weights.append(deriv / denom)
    lead = weights[0]
    a = [w / lead for w in weights[1:]]
    return a, 1 / lead


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_nominal_order_residuals_vanish(name):
    t = builtin_tableau(name)
    res = verify_order_conditions(t, t.p)
    assert res.shape == (1 + 2 * t.p,)
    assert np.max(np.abs(res)) <= 1e-12


@pytest.mark.parametrize("name", ["BDF2", "BDF3", "BDF4", "BDF5"])
def test_bdf_family_has_order_at_most_s(name):
    t = builtin_tableau(name)
    assert t.is_bdf()
    assert not has_order(t, t.p + 1)


@pytest.mark.parametrize("s", [2, 3, 4, 5])
def test_bdf_tables_match_lagrange_construction(s):
    a, cm1 = bdf_coefficients(s)
    t = builtin_tableau(f"BDF{s}")
    np.testing.assert_allclose(t.a_arr, [float(x) for x in a], rtol=0, atol=1e-15)
    assert t.c_minus1 == pytest.approx(float(cm1), abs=1e-15)
    # explicit weights extrapolate f to the new level: b_j = c_-1 * binom(s, j+1) (-1)^j
    from math import comb
    b = [float(cm1) * comb(s, j + 1) * (-1) ** j for j in range(s)]
    np.testing.assert_allclose(t.b_arr, b, atol=1e-14)


def test_tvb44_sign_of_c1():
    t = builtin_tableau("TVB44")
    assert t.c[1] > 0
    flipped = tableaux.ImexLmTableau("flip", t.s, t.p, t.a, t.b, t.c_minus1,
                                     (t.c[0], -t.c[1], t.c[2], t.c[3]))
    res = verify_order_conditions(flipped, 1)
    assert abs(res[2]) == pytest.approx(2 * 697 / 24576, rel=1e-12)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_zero_stable(name):
    roots = zero_stability_roots(builtin_tableau(name))
    assert np.all(np.abs(roots) <= 1 + 1e-9)
    # the consistency root is simple
    assert np.sum(np.abs(roots - 1) < 1e-6) == 1


def test_aliases_and_case():
    assert builtin_tableau("tvb(4,4)").name == "TVB44"
    assert builtin_tableau("imex-bdf3").name == "BDF3"
    assert builtin_tableau("sg(3,2)") == builtin_tableau("SG32")


def test_unknown_name_lists_choices():
    with pytest.raises(UnknownTableauError, match="BDF2"):
        builtin_tableau("bdf9")


def test_imex_euler_first_order():
    t = tableaux.imex_euler()
    assert has_order(t, 1)
    assert not has_order(t, 2)


def test_constructor_validates_lengths():
    with pytest.raises(ValueError):
        tableaux.ImexLmTableau("bad", 2, 2, (1.0,), (1.0, 1.0), 1.0, (0.0, 0.0))
    with pytest.raises(ValueError):
        tableaux.ImexLmTableau("bad", 1, 1, (-1.0,), (1.0,), 0.0, (0.0,))


def test_verify_order_rejects_nonpositive():
    with pytest.raises(ValueError):
        verify_order_conditions(builtin_tableau("BDF2"), 0)


def write_bdf2(path, extra=""):
    path.write_text(
        "# second-order backward differentiation\n"
        "name = mybdf2\n"
        "s = 2\n"
        "p = 2\n"
        "a = -4/3, 1/3\n"
        "b = 4/3, -2/3   # extrapolated explicit part\n"
        "c = 0, 0\n"
        "c_minus1 = 2/3\n" + extra
    )
    return path


def test_load_file_round_trip(tmp_path):
    t = load_tableau_file(write_bdf2(tmp_path / "bdf2.txt"))
    ref = builtin_tableau("BDF2")
    assert (t.a, t.b, t.c, t.c_minus1) == (ref.a, ref.b, ref.c, ref.c_minus1)
    # exact fractions give exact zeros
    assert np.all(verify_order_conditions(t, 2) == 0.0)
    assert resolve_tableau(str(tmp_path / "bdf2.txt")).name == "mybdf2"


def test_load_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("name = x\ns = 1\n")
    with pytest.raises(ValueError, match="missing keys"):
        load_tableau_file(bad)
    bad.write_text("this line has no equals sign\n")
    with pytest.raises(ValueError, match="malformed"):
        load_tableau_file(bad)
    bad.write_text("name = x\ns = 2\np = 1\na = -1\nb = 1\nc = 0\nc_minus1 = 1\n")
    with pytest.raises(ValueError, match="entries"):
        load_tableau_file(bad)


@settings(max_examples=50, deadline=None)
@given(name=st.sampled_from(BUILTIN_NAMES), j=st.integers(0, 4),
       delta=st.floats(1e-6, 1.0) | st.floats(-1.0, -1e-6))
def test_perturbed_tableau_loses_order(name, j, delta):
    t = builtin_tableau(name)
    j = j % t.s
    a = list(t.a)
    a[j] += delta
    bent = tableaux.ImexLmTableau("bent", t.s, t.p, tuple(a), t.b, t.c_minus1, t.c)
    assert not has_order(bent, t.p)
