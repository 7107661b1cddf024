from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from prymtau import series
from prymtau.curve_model import (HyperellipticCurve, NDifferential, build_curve, build_ndifferential,
                                 distinguished_jet, distinguished_parameter, expected_ndiff_rank,
                                 local_chart, ndiff_basis, recomposition_error)
from prymtau.errors import DegenerateCurve, OutsideChart, WrongDegree

X = sp.symbols("x")


def test_quintic_has_genus_two_and_branch_at_infinity():
    C = build_curve([-1, 0, 0, 0, 0, 1])
    assert C.genus == 2
    assert len(C.branch_points) == 6 and np.isinf(C.branch_points[-1])
    fifth = np.exp(2j * np.pi * np.arange(5) / 5)
    assert max(min(abs(r - f) for f in fifth) for r in C.roots) < 1e-12


def test_elliptic_fixture():
    C = build_curve([0, -1, 0, 1])
    assert C.genus == 1
    assert sorted(np.round(np.real(C.roots), 12)) == [-1, 0, 1]


def test_square_free_agrees_with_resultant():
    p = X**6 - 2 * X**3 + X
    res = sp.resultant(p, sp.diff(p, X), X)
    assert res != 0
    C = build_curve([0, 1, 0, -2, 0, 0, 1])
    assert C.genus == 2


def test_repeated_root_rejected():
    p = sp.expand((X - 1) ** 2 * (X + 2) * (X - 3j) * (X + 0.5))
    coeffs = [complex(c) for c in sp.Poly(p, X).all_coeffs()[::-1]]
    assert sp.resultant(p, sp.diff(p, X), X) == 0
    with pytest.raises(DegenerateCurve):
        build_curve(coeffs)


def test_q_lifts_two_to_one():
    C = build_curve([-1, 0, 0, 0, 0, 1])
    w = build_ndifferential(C, 2, [-4, 0, 1])
    assert w.simple and w.divisor_degree == 4
    xs = sorted(round(z.point.x.real, 12) for z in w.zeros)
    assert xs == [-2, -2, 2, 2]
    for z in w.zeros:
        assert z.point.residual(C) < 1e-12


def test_cubic_q_divisor_degree():
    C = build_curve([-1, 0, 0, 0, 0, 1])
    w = build_ndifferential(C, 3, [-8, 0, 0, 1])
    assert len(w.zeros) == 6 and w.divisor_degree == 6 == 3 * (2 * 2 - 2)


def test_double_root_signature():
    C = build_curve([-1, 0, 0, 0, 0, 1])
    w = build_ndifferential(C, 2, [4, -4, 1])
    assert w.signature == (2, 2) and not w.simple


def test_wrong_degree():
    C = build_curve([-1, 0, 0, 0, 0, 1])
    with pytest.raises(WrongDegree):
        build_ndifferential(C, 2, [1, 0, 0, 1])


@pytest.mark.parametrize("g", [2, 3])
@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_ndiff_basis_sizes(g, m):
    C = HyperellipticCurve.from_roots(np.exp(2j * np.pi * np.arange(2 * g + 2) / (2 * g + 2)) * (1 + 0.1j))
    assert len(ndiff_basis(C, m)) == expected_ndiff_rank(g, m)


def test_ndiff_basis_genus_two_differentials(curve2):
    assert [(b.a, b.e, b.m) for b in ndiff_basis(curve2, 1)] == [(0, 0, 1), (1, 0, 1)]


def test_series_power_matches_sympy():
    u = sp.symbols("u")
    f = 2 + 3 * u - u**2 + 0.5 * u**3
    ref = sp.series(f ** sp.Rational(-3, 4), u, 0, 8).removeO()
    ref = [complex(ref.coeff(u, k)) for k in range(8)]
    got = series.power(np.array([2, 3, -1, 0.5, 0, 0, 0, 0], dtype=complex), -0.75)
    assert np.allclose(got, ref, atol=1e-12)


def test_series_reversion_roundtrip():
    a = np.array([0, 1.5, 0.3 - 0.2j, 0.1, 0.05j, 0, 0, 0, 0, 0], dtype=complex)
    b = series.revert(a)
    comp = series.compose_poly(a, b)
    assert np.allclose(comp, np.eye(len(a))[1], atol=1e-12)


def test_simple_zero_normal_form_limit(w22):
    """``w / (zeta dzeta^2) -> 1`` at a simple zero, checked against an
    independent sympy expansion of the chart."""
    for i in range(len(w22.zeros)):
        for r in (1e-2, 1e-3, 1e-4):
            u = r * np.exp(0.3j)
            zeta, dz = distinguished_jet(w22, i, u)
            x = w22.zeros[i].point.x + u
            s = w22.zeros[i].point.s * np.sqrt(w22.curve.p(x) / w22.zeros[i].point.s**2)
            ratio = w22.value(x, s) / (zeta * dz**2)
            assert abs(ratio - 1) < 1e-9


def test_double_zero_exponent():
    C = build_curve([-1, 0, 0, 0, 0, 1])
    w = build_ndifferential(C, 2, [4, -4, 1])
    assert w.zeros[0].order == 2
    # zeta = (const * int v)^(n/(k+n)); v ~ u du near the zero, so zeta ~ u
    z1 = distinguished_parameter(w, 0, w.zeros[0].point.x + 1e-3)
    z2 = distinguished_parameter(w, 0, w.zeros[0].point.x + 2e-3)
    assert abs(abs(z2 / z1) - 2) < 1e-3
    assert Fraction(w.n, w.zeros[0].order + w.n) == Fraction(1, 2)


def test_outside_chart(w22):
    with pytest.raises(OutsideChart):
        distinguished_parameter(w22, 0, w22.zeros[0].point.x + 10)


@pytest.mark.parametrize("kind", ["generic", "zero", "branch", "infinity"])
def test_chart_recomposition(w22, kind):
    C = w22.curve
    if kind == "zero":
        ch = local_chart(C, w22.zeros[0].point, w22, zero_index=0)
        us = 0.5 * ch.radius * np.exp(2j * np.pi * np.arange(8) / 8)
        for u in us:
            assert abs(ch.w(u) - u) < 1e-8 * abs(u)
        return
    if kind == "generic":
        ch = local_chart(C, C.point(0.5 - 0.4j), w22)
        assert recomposition_error(ch, w22) < 1e-9
    elif kind == "branch":
        ch = local_chart(C, C.point(C.roots[0]))
        u = 0.5 * ch.radius * np.exp(0.7j)
        assert abs(ch.s(u) ** 2 - C.p(ch.x(u))) < 1e-9 * abs(C.p(ch.x(u)))
    else:
        ch = local_chart(C, C.infinity_points()[0])
        u = 0.5 * ch.radius * np.exp(0.7j)
        x = 1 / ch.x(u)
        assert abs(ch.s(u) ** 2 - C.p(x)) < 1e-9 * abs(C.p(x))


@settings(max_examples=25, deadline=None)
@given(g=st.integers(2, 4), n=st.integers(1, 4), seed=st.integers(0, 10**6))
def test_total_multiplicity(g, n, seed):
    r = np.random.default_rng(seed)
    C = HyperellipticCurve.from_roots(r.normal(size=2 * g + 2) + 1j * r.normal(size=2 * g + 2))
    w = NDifferential.from_roots(C, n, r.normal(size=n * (g - 1)) + 1j * r.normal(size=n * (g - 1)))
    assert sum(w.signature) == n * (2 * g - 2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), frac=st.floats(0.05, 0.45), ang=st.floats(0, 6.28))
def test_distinguished_roundtrip(w23, seed, frac, ang):
    i = seed % len(w23.zeros)
    from prymtau.curve_model import chart_radius
    u = frac * chart_radius(w23, i) * np.exp(1j * ang)
    zeta, dz = distinguished_jet(w23, i, u)
    z0 = w23.zeros[i].point
    x = z0.x + u
    s = z0.s * np.sqrt(w23.curve.p(x) / z0.s**2)
    W = w23.value(x, s)
    assert abs(W - zeta * dz**3) < 1e-8 * abs(W)
