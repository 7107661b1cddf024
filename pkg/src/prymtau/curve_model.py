"""Hyperelliptic base curves, split n-differentials and local charts.

The base curve is ``C: s**2 = p(x)``.  Holomorphic n-differentials are taken
in the split form ``w = q(x) (dx/s)**n`` with ``deg q = n(g-1)``, which is
holomorphic and has no zeros over infinity.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
from scipy.special import roots_jacobi

from . import series
from .errors import DegenerateCurve, OutsideChart, WrongDegree

ALGEBRAIC_TOL = 1e-12
SERIES_TOL = 1e-8
ROOT_SEPARATION_TOL = 1e-7
CHART_FRACTION = 0.4
DEFAULT_CHART_ORDER = 12


def poly_from_roots(roots, lead=1.0):
    """Ascending coefficients of ``lead * prod(x - r)``."""
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.convolve(c, [-r, 1.0])
    return lead * c


def _polish_roots(coeffs, roots, iters=4):
    c = np.polynomial.Polynomial(coeffs)
    dc = c.deriv()
    out = np.array(roots, dtype=complex)
    for _ in range(iters):
        d = dc(out)
        ok = d != 0
        out[ok] = out[ok] - c(out[ok]) / d[ok]
    return out


def _roots_from_coeffs(coeffs):
    coeffs = np.asarray(coeffs, dtype=complex)
    nz = np.nonzero(np.abs(coeffs) > 0)[0]
    if len(nz) == 0:
        raise WrongDegree("zero polynomial")
    coeffs = coeffs[: nz[-1] + 1]
    roots = np.roots(coeffs[::-1]) if len(coeffs) > 1 else np.array([], dtype=complex)
    return _polish_roots(coeffs, roots), coeffs[-1]


def _min_separation(roots):
    r = np.asarray(roots, dtype=complex)
    if len(r) < 2:
        return np.inf
    d = np.abs(r[:, None] - r[None, :])
    d[np.diag_indices(len(r))] = np.inf
    return d.min()


@dataclass(frozen=True)
class CurvePoint:
    """A point of ``s**2 = p(x)`` (optionally with a cover coordinate ``t``).

    At infinity ``x`` is ``inf`` and ``sheet`` distinguishes the two points
    when ``deg p`` is even.
    """

    x: complex
    s: complex
    t: complex | None = None
    at_infinity: bool = False
    sheet: int = 1

    def residual(self, curve, q=None, n=None):
        if self.at_infinity:
            return 0.0
        r = abs(self.s**2 - curve.p(self.x)) / max(1.0, abs(curve.p(self.x)))
        if self.t is not None and q is not None:
            qv = q(self.x)
            r = max(r, abs(self.t**n - qv) / max(1.0, abs(qv)))
        return r


@dataclass(frozen=True)
class HyperellipticCurve:
    """``s**2 = lead * prod(x - roots)`` with pairwise distinct roots."""

    roots: tuple
    lead: complex = 1.0
    separation_tol: float = ROOT_SEPARATION_TOL

    def __post_init__(self):
        roots = tuple(complex(r) for r in self.roots)
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "lead", complex(self.lead))
        if len(roots) < 3:
            raise WrongDegree("deg p must be at least 3")
        scale = max(1.0, max(abs(r) for r in roots))
        if _min_separation(roots) <= self.separation_tol * scale:
            raise DegenerateCurve("p has a repeated root within tolerance")

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        return cls(tuple(roots), lead)

    @property
    def degree(self):
        return len(self.roots)

    @property
    def genus(self):
        return (self.degree - 1) // 2

    @property
    def infinity_is_branch(self):
        return self.degree % 2 == 1

    @property
    def p_coeffs(self):
        return poly_from_roots(self.roots, self.lead)

    @property
    def branch_points(self):
        pts = list(self.roots)
        if self.infinity_is_branch:
            pts.append(complex(np.inf))
        return pts

    def p(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.full(x.shape, self.lead, dtype=complex)
        for r in self.roots:
            out = out * (x - r)
        return out if out.ndim else complex(out)

    def dp(self, x):
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(self.p_coeffs))

    def s_principal(self, x):
        """A fixed single-valued branch of ``s``: product of principal roots."""
        x = np.asarray(x, dtype=complex)
        out = np.full(x.shape, np.sqrt(self.lead), dtype=complex)
        for r in self.roots:
            out = out * np.sqrt(x - r)
        return out if out.ndim else complex(out)

    def point(self, x, sheet=1):
        x = complex(x)
        return CurvePoint(x, sheet * self.s_principal(x))

    def infinity_points(self):
        if self.infinity_is_branch:
            return [CurvePoint(complex(np.inf), complex(np.inf), at_infinity=True, sheet=1)]
        return [CurvePoint(complex(np.inf), complex(np.inf), at_infinity=True, sheet=sg) for sg in (1, -1)]

    def spread(self):
        r = np.asarray(self.roots)
        return float(np.max(np.abs(r - r.mean()))) or 1.0


def build_curve(p_coeffs, separation_tol=ROOT_SEPARATION_TOL):
    """Build a curve from ascending coefficients of ``p``.

    Raises DegenerateCurve when two roots agree to ``separation_tol``
    (relative), which is how a non square-free ``p`` shows up in floating
    point.
    """
    roots, lead = _roots_from_coeffs(p_coeffs)
    return HyperellipticCurve(tuple(roots), lead, separation_tol)


@dataclass(frozen=True)
class Zero:
    """A zero of an n-differential: point, order, and whether it sits at a
    branch point of ``p``."""

    point: CurvePoint
    order: int
    at_branch_point: bool
    q_root_index: int


@dataclass(frozen=True)
class NDifferential:
    """``w = q_lead * prod(x - q_roots) * (dx/s)**n`` on a hyperelliptic curve.

    ``q_roots`` lists distinct roots; ``q_mult`` their multiplicities.
    """

    curve: HyperellipticCurve
    n: int
    q_roots: tuple
    q_lead: complex = 1.0
    q_mult: tuple = None
    zeros: tuple = field(default=(), compare=False)

    def __post_init__(self):
        roots = tuple(complex(r) for r in self.q_roots)
        object.__setattr__(self, "q_roots", roots)
        object.__setattr__(self, "q_lead", complex(self.q_lead))
        mult = tuple(self.q_mult) if self.q_mult is not None else (1,) * len(roots)
        object.__setattr__(self, "q_mult", mult)
        if self.n < 1:
            raise WrongDegree("n must be at least 1")
        need = self.n * (self.curve.genus - 1)
        if sum(mult) != need:
            raise WrongDegree(f"deg q must be n(g-1) = {need}, got {sum(mult)}")
        object.__setattr__(self, "zeros", tuple(self._zeros()))

    @classmethod
    def from_roots(cls, curve, n, roots, lead=1.0):
        """Group equal roots into multiplicities, keeping first-seen order."""
        distinct, mult = [], []
        for r in roots:
            for i, d in enumerate(distinct):
                if abs(d - r) <= ALGEBRAIC_TOL * max(1.0, abs(r)):
                    mult[i] += 1
                    break
            else:
                distinct.append(complex(r))
                mult.append(1)
        return cls(curve, n, tuple(distinct), lead, tuple(mult))

    def _branch_index(self, r):
        for j, e in enumerate(self.curve.roots):
            if abs(e - r) <= ROOT_SEPARATION_TOL * max(1.0, abs(e)):
                return j
        return None

    def _zeros(self):
        out = []
        for i, (r, m) in enumerate(zip(self.q_roots, self.q_mult)):
            j = self._branch_index(r)
            if j is not None:
                e = self.curve.roots[j]
                out.append(Zero(CurvePoint(e, 0j), 2 * m, True, i))
            else:
                for sg in (1, -1):
                    out.append(Zero(self.curve.point(r, sg), m, False, i))
        return out

    @property
    def q_all_roots(self):
        return tuple(r for r, m in zip(self.q_roots, self.q_mult) for _ in range(m))

    @property
    def q_coeffs(self):
        return poly_from_roots(self.q_all_roots, self.q_lead)

    @property
    def signature(self):
        return tuple(z.order for z in self.zeros)

    @property
    def zero_at_branch_point(self):
        return any(z.at_branch_point for z in self.zeros)

    @property
    def simple(self):
        return all(m == 1 for m in self.q_mult) and not self.zero_at_branch_point

    @property
    def divisor_degree(self):
        return sum(self.signature)

    def q(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.full(x.shape, self.q_lead, dtype=complex)
        for r, m in zip(self.q_roots, self.q_mult):
            out = out * (x - r) ** m
        return out if out.ndim else complex(out)

    def value(self, x, s):
        """Coefficient of ``dx**n`` at the point ``(x, s)``."""
        return self.q(x) / np.asarray(s, dtype=complex) ** self.n

    def scaled(self, delta):
        return NDifferential(self.curve, self.n, self.q_roots, self.q_lead * delta, self.q_mult)

    def special_points(self):
        return list(self.curve.roots) + [r for r in self.q_roots if self._branch_index(r) is None]


def build_ndifferential(curve, n, q_coeffs, cluster_tol=1e-6):
    """Build ``q(x)(dx/s)**n`` from ascending coefficients of ``q``.

    Numerically close roots (relative ``cluster_tol``) are merged into one
    root with multiplicity, since a floating-point double root splits.
    """
    roots, lead = _roots_from_coeffs(q_coeffs)
    scale = max(1.0, max((abs(r) for r in roots), default=1.0))
    distinct, mult = [], []
    for r in roots:
        for i, d in enumerate(distinct):
            if abs(d - r) <= cluster_tol * scale:
                distinct[i] = (d * mult[i] + r) / (mult[i] + 1)
                mult[i] += 1
                break
        else:
            distinct.append(r)
            mult.append(1)
    return NDifferential(curve, n, tuple(distinct), lead, tuple(mult))


# ---------------------------------------------------------------- valuations


def infinity_valuations(curve):
    """Orders of ``x``, ``s`` and ``dx`` at a point over infinity."""
    d = curve.degree
    e = 2 // gcd(2, d)
    return {"e": e, "x": Fraction(-e), "s": Fraction(-e * d, 2), "dx": Fraction(-e - 1)}


@dataclass(frozen=True)
class NDiffMonomial:
    """``x**a * s**e * (dx/s)**m`` on the base curve."""

    a: int
    e: int
    m: int

    def value(self, x, s):
        """Coefficient of ``dx**m``."""
        x = np.asarray(x, dtype=complex)
        s = np.asarray(s, dtype=complex)
        return x**self.a * s ** (self.e - self.m)

    def order_at_infinity(self, curve):
        v = infinity_valuations(curve)
        return self.a * v["x"] + self.e * v["s"] + self.m * (v["dx"] - v["s"])


def ndiff_basis(curve, m):
    """Monomial basis of holomorphic m-differentials on the base curve.

    Candidates ``x**a s**e (dx/s)**m`` with ``e`` in {0, 1} are filtered by
    their order at infinity; they are regular at finite points since
    ``dx/s`` is.
    """
    if m < 1:
        raise ValueError("m must be positive")
    amax = m * curve.degree
    basis = [
        NDiffMonomial(a, e, m)
        for e in (0, 1)
        for a in range(amax + 1)
        if NDiffMonomial(a, e, m).order_at_infinity(curve) >= 0
    ]
    rng = np.random.default_rng(0)
    xs = rng.normal(size=2 * len(basis) + 2) + 1j * rng.normal(size=2 * len(basis) + 2)
    ss = curve.s_principal(xs)
    mat = np.array([b.value(xs, ss) for b in basis])
    if np.linalg.matrix_rank(mat) != len(basis):
        raise DegenerateCurve("monomial basis is not independent")
    return basis


def expected_ndiff_rank(g, m):
    return g if m == 1 else (2 * m - 1) * (g - 1)


# ------------------------------------------------------- distinguished charts


@dataclass(frozen=True)
class _ZeroFactors:
    """``W(u) = c * u**k * prod(1 + phi(u)/d_j)**alpha_j`` near a zero.

    ``phi(u) = u`` for a regular zero and ``u**2`` for a zero at a branch
    point (where ``x = e + u**2``).
    """

    c: complex
    k: int
    n: int
    d: np.ndarray
    alpha: np.ndarray
    u_power: int
    radius_x: float


def _zero_factors(w, zero_index):
    z = w.zeros[zero_index]
    curve = w.curve
    x0 = z.point.x
    k, n = z.order, w.n
    others_q = [(r, m) for r, m in zip(w.q_roots, w.q_mult) if r != w.q_roots[z.q_root_index]]
    if z.at_branch_point:
        e_others = [e for e in curve.roots if e != x0]
        st0 = np.sqrt(curve.lead * np.prod([x0 - e for e in e_others]))
        c = w.q_lead * 2**n * np.prod([(x0 - r) ** m for r, m in others_q]) / st0**n
        u_power = 2
    else:
        e_others = list(curve.roots)
        c = w.q_lead * np.prod([(x0 - r) ** m for r, m in others_q]) / z.point.s**n
        u_power = 1
    d = np.array([x0 - r for r, m in others_q] + [x0 - e for e in e_others], dtype=complex)
    alpha = np.array([m for r, m in others_q] + [-n / 2] * len(e_others), dtype=float)
    radius_x = CHART_FRACTION * (np.min(np.abs(d)) if len(d) else 1.0)
    return _ZeroFactors(complex(c), k, n, d, alpha, u_power, float(radius_x))


def _local_u(w, zero_index, target):
    """Chart parameter ``u`` of a target point (complex x or CurvePoint)."""
    z = w.zeros[zero_index]
    x = target.x if isinstance(target, CurvePoint) else complex(target)
    if not z.at_branch_point:
        return x - z.point.x
    u = np.sqrt(x - z.point.x)
    if isinstance(target, CurvePoint):
        st = np.sqrt(w.curve.lead * np.prod([z.point.x - e for e in w.curve.roots if e != z.point.x]))
        if abs(u * st - target.s) > abs(u * st + target.s):
            u = -u
    return u


def lambda_coefficient(w, zero_index):
    """``dzeta/du`` at the zero: the principal ``(k+n)``-th root of the
    leading coefficient of ``w`` in the chart parameter."""
    f = _zero_factors(w, zero_index)
    return f.c ** (1.0 / (f.k + f.n))


_JACOBI_CACHE = {}


def _jacobi_rule(beta, npts=48):
    key = (round(beta, 14), npts)
    if key not in _JACOBI_CACHE:
        xs, ws = roots_jacobi(npts, 0.0, beta)
        _JACOBI_CACHE[key] = ((1 + xs) / 2, ws / 2 ** (beta + 1))
    return _JACOBI_CACHE[key]


def distinguished_jet(w, zero_index, u, radius_fraction=1.0):
    """``(zeta, dzeta/du)`` of the distinguished parameter at chart parameter ``u``.

    With ``W(u) = c u**k H(u)**n`` the parameter is ``zeta = lambda u G(u)``
    where ``G = ((k+n)/n * int_0^1 tau**(k/n) H(u tau) dtau)**(n/(k+n))``;
    then ``dzeta/du = lambda H G**(-k/n)`` so that ``zeta**k dzeta**n = W``.
    """
    f = _zero_factors(w, zero_index)
    if abs(u) ** f.u_power > f.radius_x * radius_fraction:
        raise OutsideChart("target is outside the chart of this zero")
    lam = f.c ** (1.0 / (f.k + f.n))
    if u == 0:
        return 0j, complex(lam)

    def H(t):
        phi = (u * t) ** f.u_power
        h = np.ones_like(phi)
        for dj, aj in zip(f.d, f.alpha):
            h = h * (1 + phi / dj) ** (aj / f.n)
        return h

    taus, wts = _jacobi_rule(f.k / f.n)
    J = np.sum(wts * H(taus))
    G = ((f.k + f.n) / f.n * J) ** (f.n / (f.k + f.n))
    Hu = H(np.array([1.0]))[0]
    return complex(lam * u * G), complex(lam * Hu * G ** (-f.k / f.n))


def distinguished_parameter(w, zero_index, target, radius_fraction=1.0):
    """Distinguished local parameter ``zeta`` at a zero, evaluated at a target.

    ``zeta = (((k+n)/n) * int_{x_i}^{target} v)**(n/(k+n))`` normalized so
    that ``w = zeta**k dzeta**n``.  The root is fixed by requiring
    ``zeta ~ lambda * u`` with ``lambda`` the principal root from
    :func:`lambda_coefficient`, and continued inside the chart disk.
    """
    u = _local_u(w, zero_index, target)
    return distinguished_jet(w, zero_index, u, radius_fraction)[0]


def chart_radius(w, zero_index):
    return _zero_factors(w, zero_index).radius_x


# ---------------------------------------------------------- series charts


@dataclass(frozen=True)
class LocalChart:
    """Truncated expansions around a point in a local parameter ``u``.

    ``x_coeffs`` expand ``x`` (or ``1/x`` at infinity); ``s`` equals
    ``u**s_shift * S(u)`` and ``w`` equals ``u**w_shift * W(u) du**n``.
    ``radius`` is measured in ``u``.
    """

    center: CurvePoint
    kind: str
    order: int
    radius: float
    x_coeffs: np.ndarray
    s_coeffs: np.ndarray
    s_shift: int
    w_coeffs: np.ndarray = None
    w_shift: int = 0
    n: int = 0

    def x(self, u):
        return series.evaluate(self.x_coeffs, u)

    def s(self, u):
        return u**self.s_shift * series.evaluate(self.s_coeffs, u)

    def w(self, u):
        return u**self.w_shift * series.evaluate(self.w_coeffs, u)


def _shift_down(a, k, order):
    out = np.zeros(order, dtype=complex)
    b = a[k:]
    out[: len(b)] = b[:order]
    return out


def _special_distance(curve, x0, w=None):
    pts = list(curve.roots) + (list(w.q_roots) if w is not None else [])
    d = [abs(x0 - p) for p in pts if abs(x0 - p) > ROOT_SEPARATION_TOL]
    return min(d) if d else 1.0


def local_chart(curve, point, w=None, order=DEFAULT_CHART_ORDER, zero_index=None):
    """Build a series chart at ``point``.

    Kind is ``infinity``, ``branch-of-p``, ``zero-of-w`` (when ``zero_index``
    is given) or ``generic``.  In a zero chart the parameter is the
    distinguished parameter, so ``w = u**k du**n`` up to truncation.
    """
    N = order + 1
    pc = curve.p_coeffs
    if point.at_infinity:
        d = curve.degree
        g = curve.genus
        rev = pc[::-1]
        if d % 2 == 0:
            xinv = np.zeros(N, complex)
            xinv[1] = 1
            base = np.zeros(N, complex)
            base[: len(rev)] = rev[:N]
            S = series.power(base, 0.5) * point.sheet
            shift = -(g + 1)
        else:
            xinv = np.zeros(N, complex)
            xinv[2] = 1
            base = np.zeros(N, complex)
            for kk, c in enumerate(rev):
                if 2 * kk < N:
                    base[2 * kk] = c
            S = series.power(base, 0.5)
            shift = -d
        radius = CHART_FRACTION / max(abs(r) for r in curve.roots)
        if d % 2:
            radius = np.sqrt(radius)
        return LocalChart(point, "infinity", order, radius, xinv, S, shift)

    x0 = point.x
    is_branch = any(abs(x0 - e) <= ROOT_SEPARATION_TOL for e in curve.roots)
    if is_branch:
        X = np.zeros(N, complex)
        X[0], X[2] = x0, 1
        pX = series.compose_poly(pc, X)
        base = _shift_down(pX, 2, N)
        S = series.power(base, 0.5)
        s_shift = 1
        D = np.zeros(N, complex)
        D[0] = 2.0
        radius = CHART_FRACTION * np.sqrt(_special_distance(curve, x0, w))
    else:
        X = np.zeros(N, complex)
        X[0], X[1] = x0, 1
        pX = series.compose_poly(pc, X)
        S = series.power(pX, 0.5)
        if abs(S[0] - point.s) > abs(S[0] + point.s):
            S = -S
        s_shift = 0
        D = np.zeros(N, complex)
        D[0] = 1.0
        radius = CHART_FRACTION * _special_distance(curve, x0, w)
    kind = "branch-of-p" if is_branch else "generic"
    if w is None:
        return LocalChart(point, kind, order, radius, X, S, s_shift)

    qX = series.compose_poly(w.q_coeffs, X)
    W = series.mul(series.mul(qX, series.power(D, w.n)), series.power(S, -w.n))
    if zero_index is None:
        return LocalChart(point, kind, order, radius, X, S, s_shift, W, 0, w.n)

    k, n = w.zeros[zero_index].order, w.n
    Wr = _shift_down(W, k, N)
    c = Wr[0]
    H = series.power(Wr / c, 1.0 / n)
    G = H / (np.arange(N) + 1 + k / n)
    lam = c ** (1.0 / (k + n))
    zeta_tail = series.power(G * (k + n) / n, n / (k + n))
    zeta = np.zeros(N, complex)
    zeta[1:] = lam * zeta_tail[: N - 1]
    u_of_zeta = series.revert(zeta)
    Xz = series.compose_poly(X, u_of_zeta)
    Sz = series.compose_poly(S, u_of_zeta)
    if s_shift:
        Sz = series.mul(Sz, _shift_down(u_of_zeta, 1, N))
    Wz = np.zeros(N, complex)
    Wz[0] = 1.0
    zradius = abs(lam) * radius
    return LocalChart(point, "zero-of-w", order, zradius, Xz, Sz, 0, Wz, k, n)


def recomposition_error(chart, w, npts=16, fraction=0.5):
    """Max relative mismatch between ``w`` rebuilt from the chart's ``x`` and
    ``s`` series and the chart's own ``w`` series, on a circle."""
    us = fraction * chart.radius * np.exp(2j * np.pi * (np.arange(npts) + 0.25) / npts)
    dX = series.derivative(chart.x_coeffs)
    worst = 0.0
    for u in us:
        x = series.evaluate(chart.x_coeffs, u)
        s = chart.s(u)
        sp = np.sqrt(w.curve.p(x))
        s = sp if abs(sp - s) < abs(sp + s) else -sp
        direct = w.q(x) * series.evaluate(dX, u) ** w.n / s**w.n
        worst = max(worst, abs(direct - chart.w(u)) / abs(direct))
    return worst
