from math import gcd

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prymtau.curve_model import HyperellipticCurve, NDifferential, ndiff_basis
from prymtau.cyclic_cover import (build_cover, canonical_v, divisor, eigen_basis, expected_eigen_rank,
                                  formula_genus, phi_k_matrix, special_fibers)


def _random_w(g, n, seed):
    r = np.random.default_rng(seed)
    C = HyperellipticCurve.from_roots(r.normal(size=2 * g + 2) + 1j * r.normal(size=2 * g + 2))
    return NDifferential.from_roots(C, n, r.normal(size=n * (g - 1)) + 1j * r.normal(size=n * (g - 1)))


def _hurwitz_oracle(g, n):
    """Riemann-Hurwitz for the degree-2n map to the x-line, from first
    principles: s ramifies over the 2g+2 roots of p, t over the n(g-1)
    simple roots of q, and over infinity t has ramification n/gcd(n, n(g-1))."""
    deg_p, deg_q = 2 * g + 2, n * (g - 1)
    ram = deg_p * n * (2 - 1) + deg_q * 2 * (n - 1)
    e_inf = n // gcd(n, deg_q)
    ram += (2 * n // e_inf) * (e_inf - 1)
    return (ram - 2 * 2 * n) // 2 + 1


@pytest.mark.parametrize("g,n,expected", [(2, 2, 5), (2, 3, 10), (3, 2, 9), (2, 4, 17)])
def test_cover_genus(g, n, expected):
    cover = build_cover(_random_w(g, n, 3))
    assert cover.genus_hat == expected == formula_genus(g, n) == _hurwitz_oracle(g, n)
    assert cover.formula_checked


@pytest.mark.parametrize("g", [2, 3])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_rank_table(g, n):
    cover = build_cover(_random_w(g, n, 5))
    ranks = [eigen_basis(cover, k).rank for k in range(n)]
    assert ranks == [expected_eigen_rank(g, n, k) for k in range(n)]
    assert sum(ranks) == cover.genus_hat


def test_ranks_g2_n3(w23):
    assert [eigen_basis(build_cover(w23), k).rank for k in range(3)] == [2, 5, 3]


def test_invariant_part_is_pullback(w22):
    basis = eigen_basis(build_cover(w22), 0)
    assert sorted((m.a, m.e, m.b) for m in basis.elements) == [(0, 0, 0), (1, 0, 0)]


@pytest.mark.parametrize("g,n", [(g, n) for g in range(2, 6) for n in range(1, 6)])
def test_rank_sum_identity(g, n):
    assert sum(expected_eigen_rank(g, n, k) for k in range(n)) == formula_genus(g, n)


def test_deck_action_and_defining_property(w23, rng):
    cover = build_cover(w23)
    v = canonical_v(cover)
    x, s, t = cover.random_points(20, rng)
    xs, ss, ts = cover.deck(x, s, t)
    assert np.max(np.abs(v.value(xs, ss, ts) / v.value(x, s, t) - cover.rho)) < 1e-12
    assert np.max(np.abs(v.value(x, s, t) ** 3 / w23.value(x, s) - 1)) < 1e-10
    xn, sn, tn = cover.deck(x, s, t, cover.n)
    assert np.allclose(tn, t, rtol=1e-13)
    for k in range(3):
        for u in eigen_basis(cover, k).elements:
            assert np.allclose(u.value(xs, ss, ts), cover.rho**k * u.value(x, s, t), rtol=1e-12)


def test_v_divisor(w22, w23):
    for w in (w22, w23):
        cover = build_cover(w)
        div = divisor(cover, canonical_v(cover))
        for f in special_fibers(w):
            if f.label.startswith("q"):
                assert div[f.label] == w.n
            else:
                assert div[f.label] == 0


def test_v_order_numerically(w22):
    """|v| along a ray into a root of q scales like |x - r|**(1/n), i.e.
    order n in the local parameter ``(x - r)**(1/n)``."""
    cover = build_cover(w22)
    v = canonical_v(cover)
    r = w22.q_roots[0]
    hs = np.array([1e-4, 1e-6])
    x = r + hs * np.exp(0.4j)
    s = w22.curve.s_principal(x)
    t = cover.t_principal(x)
    val = np.abs(v.value(x, s, t))
    slope = np.log(val[0] / val[1]) / np.log(hs[0] / hs[1])
    assert abs(slope - 1 / w22.n) < 1e-4


@pytest.mark.parametrize("g,n", [(2, 2), (2, 3), (3, 2)])
def test_valuation_at_infinity_growth_oracle(g, n):
    """Holomorphy at infinity versus the growth exponent of the dx
    coefficient measured at large |x|."""
    w = _random_w(g, n, 11)
    cover = build_cover(w)
    inf = [f for f in special_fibers(w) if f.label == "inf"][0]
    for k in range(n):
        for u in eigen_basis(cover, k).elements:
            xs = np.array([1e5, 1e7]) * np.exp(0.3j)
            s = w.curve.s_principal(xs)
            t = cover.t_principal(xs)
            val = np.abs(u.value(xs, s, t))
            alpha = np.log(val[1] / val[0]) / np.log(100)
            order = -inf.e * alpha - inf.e - 1
            assert abs(order - float(u.order(inf))) < 1e-3
            assert order > -1 + 1e-6


@pytest.mark.parametrize("fixture,size", [("w22", 3), ("w23", 5)])
def test_phi1_square_invertible(request, fixture, size):
    w = request.getfixturevalue(fixture)
    cover = build_cover(w)
    M, resid = phi_k_matrix(cover, 1)
    assert M.shape == (size, size)
    assert resid < 1e-10
    assert abs(np.linalg.det(M)) > 1e-8


def test_descent_witness(w23):
    cover = build_cover(w23)
    for k in (1, 2):
        _, resid = phi_k_matrix(cover, k)
        assert resid < 1e-10
        assert len(ndiff_basis(w23.curve, 3 - k + 1)) == eigen_basis(cover, k).rank


@pytest.mark.parametrize("n", [2, 3])
def test_phi_k_generic_determinants(n):
    r = np.random.default_rng(100 + n)
    for trial in range(100):
        w = _random_w(2, n, int(r.integers(1 << 30)))
        cover = build_cover(w)
        for k in range(1, n):
            M, resid = phi_k_matrix(cover, k)
            sv = np.linalg.svd(M, compute_uv=False)
            assert sv[-1] / sv[0] > 1e-12 and resid < 1e-8


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 4))
def test_eigen_monomials_pass_valuation_filter(seed, n):
    w = _random_w(2, n, seed)
    cover = build_cover(w)
    fibers = special_fibers(w)
    for k in range(n):
        basis = eigen_basis(cover, k)
        assert all(m.eigen_index(n) == k for m in basis.elements)
        assert all(m.order(f) >= 0 for m in basis.elements for f in fibers)


def test_cover_json(w22):
    assert build_cover(w22).to_json() == {"genus_hat": 5, "eigen_ranks": [2, 3]}
