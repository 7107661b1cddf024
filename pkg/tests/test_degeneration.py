from fractions import Fraction
from math import gcd

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prymtau.curve_model import HyperellipticCurve
from prymtau.cyclic_cover import build_cover, eigen_basis
from prymtau.degeneration import (
    Grid,
    collide_zeros_family,
    fit_exponent,
    fit_tau_exponent,
    frame_valuation,
    genus_bookkeeping,
    intrinsic_order,
    kernel_dimension,
    limit_cover_model,
    phi_k_degeneration,
    pinch_family,
    segment_integral,
    t_deg,
    zeta_separation,
)
from prymtau.errors import GridTooCoarse, InconclusiveFit

from conftest import G2_ROOTS


# ------------------------------------------------------------ local integrals


def test_segment_integral_matches_quadrature():
    factors = [(0.0, 0.5), (1.0, -0.5), (2.5 + 1j, 1 / 3), (-1 + 2j, -0.5)]
    got = segment_integral(0.0, 1.0, factors, log_lead=0.2)
    # x = sin(t)**2 turns sqrt(x / (1 - x)) dx into 2 sin(t)**2 dt
    rest = lambda x: mpmath.power(x - (2.5 + 1j), mpmath.mpf(1) / 3) / mpmath.sqrt(x - (-1 + 2j))
    f = lambda t: 2 * mpmath.e**0.2 * mpmath.sin(t) ** 2 * rest(mpmath.sin(t) ** 2)
    ref = complex(mpmath.quad(f, [0, mpmath.pi / 2]))
    # only the modulus is canonical
    assert abs(abs(got) - abs(ref)) < 1e-10 * abs(ref)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("lam", [1e-3, 0.2, 1.7])
def test_zeta_separation_inverts_beta_law(n, lam):
    z1, z2 = 0.3 - 0.1j, 0.3 - 0.1j + lam * np.exp(0.4j)
    I = segment_integral(z1, z2, [(z1, 1 / n), (z2, 1 / n)])
    assert abs(zeta_separation(I, n) - lam) < 1e-10 * lam
    assert abs(abs(t_deg(I, n)) - abs(I) ** (2 * n / (n + 2))) < 1e-14


# ------------------------------------------------------------ limit covers


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
def test_limit_cover_genus_superelliptic(n):
    # y**n = quadratic: genus ((n-1)(d-1) - gcd(n, d) + 1) / 2 with d = 2
    lc = limit_cover_model(n)
    assert lc.genus == ((n - 1) - gcd(n, 2) + 1) // 2
    assert lc.nodes == gcd(n, 2)
    assert sum(lc.dimension(k) for k in range(1, n)) == lc.genus


@pytest.mark.parametrize("g", [2, 3, 4])
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_genus_bookkeeping(g, n):
    _, g1, g2, ok = genus_bookkeeping(g, n)
    assert ok
    assert g1 == limit_cover_model(n).genus


def test_intrinsic_order_values():
    assert intrinsic_order(3, 1) == Fraction(1, 3)
    assert intrinsic_order(4, 1) == Fraction(1, 2)
    assert intrinsic_order(5, 2) == Fraction(1, 5)
    assert intrinsic_order(4, 2) == 0
    assert intrinsic_order(2, 1) == 0
    assert [kernel_dimension(5, k) for k in range(1, 5)] == [1, 1, 0, 0]


@given(st.integers(2, 9))
def test_kernel_dimension_sum(n):
    assert sum(kernel_dimension(n, k) for k in range(1, n)) == (n - 1) // 2


def test_frame_valuation(w22, w23):
    # n = 2: the Hodge norm of the non-vanishing direction grows logarithmically
    fv = frame_valuation(eigen_basis(build_cover(w22), 1).elements, 2, 1, "branch")
    assert fv.logarithmic
    # n = 3, k = 1: b = 2, valuation min(0, 1 + j - 4/3) per pivot order j
    el = eigen_basis(build_cover(w23), 1).elements
    fv = frame_valuation(el, 3, 1, "branch")
    assert not fv.logarithmic
    assert list(fv.levels) == sorted(set(fv.levels))
    expect = sum((min(Fraction(0), Fraction(1 + j) - Fraction(4, 3)) for j in fv.levels), Fraction(0))
    assert fv.volume == expect
    assert fv.levels[0] == 0 and fv.volume < 0


# ------------------------------------------------------------ fits and grids


def test_fit_exponent_exact_and_flat():
    x = np.log(np.geomspace(1e-3, 1e-1, 10))
    fit = fit_exponent(x, 0.25 * x + 1.0, 0.25)
    assert fit.passed and fit.conclusive and abs(fit.slope - 0.25) < 1e-12
    assert not fit_exponent(x, 0.26 * x, 0.25).passed
    assert fit_exponent(x, 0.01 * x, 0).passed


def test_fit_exponent_inconclusive():
    rng = np.random.default_rng(0)
    x = np.log(np.geomspace(1e-3, 1e-1, 10))
    y = 0.25 * x + rng.normal(scale=1.0, size=x.size)
    assert not fit_exponent(x, y, 0.25).conclusive
    with pytest.raises(InconclusiveFit):
        fit_exponent(x, y, 0.25, strict=True)


def test_grid():
    v = Grid(M=5, ratio=0.5, eps0=1e-3).values(1.0, 0.05)
    assert np.allclose(v, 1e-3 * 0.5 ** np.arange(5))
    assert np.isclose(Grid().values(2.0, 0.05)[0], 0.1)
    with pytest.raises(GridTooCoarse):
        Grid(eps0=0.5).values(1.0, 0.05)
    with pytest.raises(GridTooCoarse):
        Grid(M=2).values(1.0, 0.05)


# ------------------------------------------------------------ families


@pytest.fixture(scope="module")
def curve():
    return HyperellipticCurve.from_roots(G2_ROOTS)


@pytest.mark.slow
@pytest.mark.parametrize("n,cof", [(2, [-1.8 + 0.3j]), (3, [-1.8 + 0.3j, 0.4 + 1.7j])])
def test_collision_tau_exponent(curve, n, cof):
    fam = collide_zeros_family(curve, n, 0, cof)
    fit = fit_tau_exponent(fam)
    assert fam.expected == Fraction(1, 12 * n * (n + 1))
    assert fit.passed and fit.r2 >= 0.999


@pytest.mark.slow
def test_pair_collision_tau_exponent(curve):
    fam = collide_zeros_family(curve, 2, -0.4 + 0.5j, [], mode="pair")
    fit = fit_tau_exponent(fam)
    assert fam.expected == Fraction(2, 72)
    assert fit.passed


@pytest.mark.slow
def test_pinch_tau_exponent():
    others = G2_ROOTS[2:]
    fam = pinch_family(others, 0.1 + 0.6j, 2, [-1.8 + 0.3j, 0.3 + 0.2j], direction=np.pi / 2)
    fit = fit_tau_exponent(fam)
    assert fam.expected == Fraction(1, 12)
    assert fit.passed and not fam.truncated


@pytest.mark.slow
def test_phi_k_collision(curve):
    fam = collide_zeros_family(curve, 3, 0, [-1.8 + 0.3j, 0.4 + 1.7j], grid=Grid(eps0=1e-5), with_tau=False)
    rep = phi_k_degeneration(fam, 1)
    assert rep.rank_drop == rep.expected_drop == 1
    assert rep.hodge_fit.passed
    assert rep.intrinsic == Fraction(1, 3)
    rep2 = phi_k_degeneration(fam, 2)
    assert rep2.rank_drop == 0 and rep2.passed
