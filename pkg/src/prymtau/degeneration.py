"""One-parameter families approaching boundary divisors and exponent fits.

Three observables are followed along geometric grids ``eps_i = eps0 * r**i``:

* ``log |tau|`` against ``log |t_deg|`` when two zeros of ``w`` collide,
  with ``t_deg = (int_{x1}^{x2} v)**(2n/(n+2))``;
* ``log |tau|`` against ``log |t_0|`` when two branch points of the base
  curve collide, with ``t_0 = exp(2 pi i P_beta / P_alpha)``;
* the Hodge-metric determinant of ``Phi_k`` against ``log |zeta_1 - zeta_2|``
  for colliding zeros, together with the volume of the monomial frame.

Colliding zeros come in two modes.  In ``branch`` mode a root of ``q``
approaches a root of ``p``: the two zeros over it meet at a Weierstrass
point, which is a single collision with local model
``(zeta**2 + a) dzeta**n``.  In ``pair`` mode two roots of ``q`` meet away
from the branch points, which makes the zeros over both sheets collide at
once, so every exponent is doubled.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
import sympy
from scipy.special import beta as beta_fn
from scipy.special import roots_jacobi
from scipy.stats import linregress

from .curve_model import HyperellipticCurve, NDifferential
from .cyclic_cover import (EigenDifferentialBasis, build_cover, eigen_basis, formula_genus,
                           phi_k_matrix)
from .errors import (ComputationError, CycleTrackingLost, FrameDegenerationUnresolved,
                     GridTooCoarse, InconclusiveFit)
from .homology import (base_sheet_model, choose_base_point, cover_sheet_model, deck_action_h1,
                       eigen_homology, standard_J, symplectic_basis)
from .periods import (base_differentials, cover_differentials, edge_periods, period_matrix,
                      ray_integrals, v_exponents)
from .tau import build_tau_context, log_abs_tau

MIN_R2 = 0.999
REL_TOL = 0.02
FLAT_TOL = 0.02
SV_GAP = 1e3
COLLIDE_EPS_FRACTION = 1e-4
PINCH_EPS_FRACTION = 1 / 20

COLLIDE = "CollideZeros"
PINCH = "PinchNonseparating"


# ------------------------------------------------------------ fits


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares slope of ``y`` against ``x`` compared to an expected
    exponent.  A fit counts as conclusive only with ``r2 >= MIN_R2``; a
    flat expectation (``expected == 0``) is judged by an absolute slope
    tolerance instead, since ``r2`` carries no information there."""

    slope: float
    intercept: float
    stderr: float
    r2: float
    expected: float
    passed: bool
    conclusive: bool
    tolerance: float

    def to_json(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "r2": self.r2, "expected": self.expected, "pass": self.passed,
                "conclusive": self.conclusive, "tolerance": self.tolerance}


def fit_exponent(x, y, expected, rel_tol=REL_TOL, flat_tol=FLAT_TOL, min_r2=MIN_R2, strict=False):
    """Fit ``y = slope * x + c``.

    Passes when ``|slope - expected| <= rel_tol |expected|``
    and the fit is conclusive.  ``strict`` raises InconclusiveFit instead
    of returning an inconclusive fit.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    res = linregress(x, y)
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 0.0
    expected = float(expected)
    if expected == 0:
        tol = flat_tol
        conclusive = True
    else:
        tol = rel_tol * abs(expected)
        conclusive = r2 >= min_r2
    if strict and not conclusive:
        raise InconclusiveFit(f"R^2 = {r2:.6f} < {min_r2}")
    passed = conclusive and abs(res.slope - expected) <= tol
    return ExponentFit(float(res.slope), float(res.intercept), float(res.stderr), r2, expected,
                       bool(passed), bool(conclusive), float(tol))


# ------------------------------------------------------------ grids


@dataclass(frozen=True)
class Grid:
    """Geometric grid ``eps0 * ratio**i``, ``i < M``.

    Without ``eps0`` the start is ``fraction`` times the distance from the
    collision point to the nearest other special point.
    """

    M: int = 12
    ratio: float = 0.8
    eps0: float = None
    fraction: float = None

    def values(self, distance, default_fraction):
        if not 0 < self.ratio < 1 or self.M < 3:
            raise GridTooCoarse("grid needs M >= 3 and 0 < ratio < 1")
        if self.eps0 is not None:
            e0 = float(self.eps0)
        else:
            e0 = (self.fraction or default_fraction) * distance
        if e0 * 10 > distance:
            raise GridTooCoarse(f"eps0 = {e0:.3g} is not 10x below the clearance {distance:.3g}")
        return e0 * self.ratio ** np.arange(self.M)


def segment_integral(za, zb, factors, log_lead=0.0, order=48):
    """``int_{za}^{zb} exp(log_lead) prod (x - r)**gamma dx`` on the segment.

    ``factors`` are ``(r, gamma)`` pairs; a root equal to an endpoint
    becomes a Gauss-Jacobi weight, the others are continued from ``za``.
    The value carries an unspecified unimodular constant coming from the
    endpoint powers, so only its modulus is canonical.
    """
    za, zb = complex(za), complex(zb)
    al = sum(gm for r, gm in factors if r == za)
    be = sum(gm for r, gm in factors if r == zb)
    y, wts = roots_jacobi(order, be, al)
    u = (y + 1) / 2
    x = za + (zb - za) * u
    logF = np.full(x.shape, complex(log_lead))
    for r, gm in factors:
        if r == za or r == zb:
            continue
        logF = logF + gm * (np.log(za - r) + np.log((x - r) / (za - r)))
    val = np.sum(wts * np.exp(logF)) / 2 ** (al + be + 1)
    return complex(val * (zb - za) ** (al + be + 1))


def _v_factors(w):
    f = [(complex(r), m / w.n) for r, m in zip(w.q_roots, w.q_mult)]
    f += [(complex(e), -0.5) for e in w.curve.roots]
    log_lead = np.log(complex(w.q_lead)) / w.n - 0.5 * np.log(complex(w.curve.lead))
    return f, log_lead


def collision_v_integral(w, mode, a, b):
    """``int_{x1}^{x2} v`` between two colliding zeros.

    ``branch``: ``a`` is the root of ``q``, ``b`` the branch point, and the
    path runs ``(a, s) -> b -> (a, -s)``.  ``pair``: ``a`` and ``b`` are the
    two roots of ``q`` on one sheet.
    """
    f, ll = _v_factors(w)
    I = segment_integral(a, b, f, ll)
    return 2 * I if mode == "branch" else I


def zeta_separation(I, n):
    """``|zeta_1 - zeta_2|`` in the chart where ``w = (zeta-zeta_1)(zeta-zeta_2) dzeta**n``."""
    return (abs(I) / beta_fn(1 + 1 / n, 1 + 1 / n)) ** (n / (n + 2))


def t_deg(I, n):
    return complex(I) ** (2 * n / (n + 2))


# ------------------------------------------------------------ limit covers


@dataclass(frozen=True)
class LimitCoverModel:
    """The rational-base component ``y**n = (zeta - zeta_1)(zeta - zeta_2)``.

    ``generators[k]`` is the exponent ``m`` of ``dzeta / y**m`` spanning
    holomorphic ``rho**k`` eigendifferentials.
    """

    n: int
    zeta1: complex
    zeta2: complex
    genus: int
    nodes: int
    generators: dict = field(default_factory=dict)

    def dimension(self, k):
        return 1 if k in self.generators else 0


def limit_cover_model(n, zeta1=-1.0, zeta2=1.0):
    """Genus, node count and holomorphic eigendifferentials of the
    collision component, certified by exact valuations."""
    if zeta1 == zeta2:
        raise ValueError("zeta1 and zeta2 must differ")
    e_inf = n // gcd(n, 2)
    nodes = n // e_inf
    # Riemann-Hurwitz over the zeta line: two total ramifications, plus infinity
    chi = -2 * n + 2 * (n - 1) + (n - nodes)
    genus = chi // 2 + 1
    gens = {}
    for k in range(1, n):
        m = n - k
        finite = n - 1 - m
        at_inf = Fraction(-e_inf - 1) + Fraction(2 * e_inf * m, n)
        if finite >= 0 and at_inf >= 0:
            gens[k] = m
    if len(gens) != genus:
        raise ComputationError("eigendifferential count differs from the genus")
    return LimitCoverModel(n, complex(zeta1), complex(zeta2), genus, nodes, gens)


def genus_bookkeeping(g, n):
    """``(g_hat, g1, g2, ok)`` with ``g2 = g_hat - floor(n/2)``; odd ``n``
    needs ``g_hat = g1 + g2``, even ``n`` needs ``g_hat = g1 + g2 + 1``."""
    gh = formula_genus(g, n)
    g1 = limit_cover_model(n).genus
    g2 = gh - n // 2
    ok = gh == g1 + g2 + (1 if n % 2 == 0 else 0)
    return gh, g1, g2, ok


# ------------------------------------------------------------ frame oracle


@dataclass(frozen=True)
class FrameValuation:
    """Valuations in ``lambda = |zeta_1 - zeta_2|`` of the Hodge norms of a
    monomial frame (``columns``) and of its Hodge volume (``volume``), per
    collision point."""

    columns: tuple
    volume: Fraction
    levels: tuple
    logarithmic: bool


def _jet_levels(polys, z, order):
    """Pivot orders of the Taylor jets of polynomials ``polys`` in ``z``."""
    rows = [[sympy.Poly(f, z).coeff_monomial(z**j) for j in range(order)] for f in polys]
    _, piv = sympy.Matrix(rows).rref()
    return tuple(int(p) for p in piv)


# generic rational values for the point and the unit factors
_GENERIC = (sympy.Rational(7, 3), sympy.Rational(5, 4),
            (sympy.Rational(2, 5), sympy.Rational(-3, 7), sympy.Rational(11, 13), sympy.Rational(-5, 17)))


def frame_valuation(elements, n, k, mode, at_zero=False):
    """Exact valuation oracle for the frame ``x**a s**e t**(-b) dx/s``.

    Near the collision the frame is ``h(z) ((z - z1)(z - z2))**(-b/n) dz``
    with ``h`` analytic in the local parameter ``z`` and ``b = n - k``.
    Scaling ``z = lambda y`` shows that a direction whose ``h`` vanishes to
    order ``j`` has Hodge norm of valuation ``min(0, 1 + j - 2b/n)``; when
    that is zero the norm grows logarithmically.  The volume sums these
    valuations over the pivot orders of the jets of the ``h``, computed in
    exact rational arithmetic at a generic point with generic unit factors.
    A common unit factor does not change the pivots, so ``s`` is cleared.
    """
    b = n - k
    z = sympy.Symbol("z")
    c, s0, gam = _GENERIC
    if at_zero:
        c = 0
    order = 2 * len(elements) + 3
    polys = []
    for m in elements:
        if mode == "branch":
            # x - c = z**2 and s = z * unit; dx/s is a unit times dz
            unit = 1 + sum(gi * z ** (2 * (i + 1)) for i, gi in enumerate(gam))
            h = (c + z**2) ** m.a * (z * unit) ** m.e
        else:
            unit = s0 * (1 + sum(gi * z ** (i + 1) for i, gi in enumerate(gam)))
            h = (c + z) ** m.a * unit**m.e
        polys.append(sympy.expand(h))
    orders = [_jet_levels([f], z, order)[0] for f in polys]
    levels = _jet_levels(polys, z, order)
    val = lambda j: min(Fraction(0), Fraction(1 + j) - Fraction(2 * b, n))
    log = any(Fraction(1 + j) == Fraction(2 * b, n) for j in levels)
    return FrameValuation(tuple(val(j) for j in orders), sum((val(j) for j in levels), Fraction(0)),
                          levels, log)


def intrinsic_order(n, k):
    """Vanishing order of ``det Phi_k`` per collision in ``zeta_1 - zeta_2``."""
    return Fraction(n - 2 * k, n) if 1 <= k <= (n - 1) // 2 else Fraction(0)


def kernel_dimension(n, k):
    return 1 if 1 <= k <= (n - 1) // 2 else 0


# ------------------------------------------------------------ families


@dataclass(frozen=True)
class DegenerationFamily:
    """Members ``w_i`` of a family with their transverse parameters.

    ``transverse`` holds ``t_deg`` or ``t_0``; ``observables`` maps names
    (``log_abs_tau``, ``zeta_sep``, ``P_alpha``, ``P_beta``) to arrays.
    ``expected`` is the exponent of ``|tau|`` in the transverse parameter.
    """

    kind: str
    n: int
    g: int
    mode: str
    grid: np.ndarray
    members: tuple
    transverse: np.ndarray
    observables: dict
    expected: Fraction
    collisions: int = 1
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def csv_rows(self):
        names = sorted(self.observables)
        head = ["eps", "abs_transverse"] + names
        rows = [head]
        for i, e in enumerate(self.grid):
            row = [float(e), float(abs(self.transverse[i]))]
            for k in names:
                v = self.observables[k][i]
                row.append(float(abs(v)) if np.iscomplexobj(v) else float(v))
            rows.append(row)
        return rows


def _pmap(fn, args, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, args))
    return [fn(a) for a in args]


def _special_distance(point, others):
    others = [complex(o) for o in others]
    return min(abs(complex(point) - o) for o in others)


def _tau_member(args):
    w, pd, base_index = args
    return log_abs_tau(build_tau_context(w, pd, base_index=base_index)).log_abs


def collide_zeros_family(curve: HyperellipticCurve, n, target, cofactor, mode="branch",
                         grid: Grid = None, q_lead=1.0, direction=0.7, with_tau=True, jobs=1):
    """Family of ``w_eps = q_eps (dx/s)**n`` whose zeros collide.

    ``branch``: ``q_eps`` has the root ``e_target + eps * exp(i direction)``
    with ``e_target = curve.roots[target]``.  ``pair``: ``q_eps`` has roots
    ``target -/+ eps * exp(i direction)``.  ``cofactor`` lists the other
    roots of ``q``, which must stay simple and away from the collision.
    """
    grid = grid or Grid()
    u = np.exp(1j * direction)
    if mode == "branch":
        centre = complex(curve.roots[target])
        others = [e for j, e in enumerate(curve.roots) if j != target] + list(cofactor)
        roots_of = lambda eps: [centre + eps * u] + list(cofactor)
        collisions = 1
    elif mode == "pair":
        centre = complex(target)
        others = list(curve.roots) + list(cofactor)
        roots_of = lambda eps: [centre - eps * u, centre + eps * u] + list(cofactor)
        collisions = 2
    else:
        raise ValueError(f"unknown collision mode {mode!r}")
    dist = _special_distance(centre, others)
    eps = grid.values(dist, COLLIDE_EPS_FRACTION)
    members, T, Z = [], [], []
    for e in eps:
        w = NDifferential.from_roots(curve, n, roots_of(e), q_lead)
        if len(w.q_roots) != len(roots_of(e)) or w.zero_at_branch_point:
            raise GridTooCoarse(f"eps = {e:.3g} is below the root separation tolerance")
        if mode == "branch":
            I = collision_v_integral(w, mode, w.q_roots[0], centre)
        else:
            I = collision_v_integral(w, mode, w.q_roots[0], w.q_roots[1])
        members.append(w)
        T.append(t_deg(I, n))
        Z.append(zeta_separation(I, n))
    T = np.array(T)
    if np.any(np.diff(np.abs(T)) >= 0):
        raise GridTooCoarse("|t_deg| does not decrease along the grid")
    obs = {"zeta_sep": np.array(Z)}
    if with_tau:
        pd = period_matrix(symplectic_basis(base_sheet_model(curve), curve.genus), base_differentials(curve))
        base_index = 0 if mode == "pair" or target != 0 else 1
        obs["log_abs_tau"] = np.array(_pmap(_tau_member, [(w, pd, base_index) for w in members], jobs))
    expected = Fraction(collisions, 12 * n * (n + 1))
    return DegenerationFamily(COLLIDE, n, curve.genus, mode, eps, tuple(members), T, obs, expected,
                              collisions, meta={"centre": [centre.real, centre.imag], "direction": direction})


def fit_tau_exponent(family: DegenerationFamily, strict=False):
    """Slope of ``log |tau|`` against ``log |t|`` for the family."""
    x = np.log(np.abs(family.transverse))
    y = family.observables["log_abs_tau"]
    return fit_exponent(x, y, float(family.expected), strict=strict)


# ------------------------------------------------------------ pinching


def _lift_to_layer(base_model, cover_model, chain, layer=0):
    """Edge chain of the base lifted to the cover sheets ``(sigma, layer)``."""
    out = np.zeros(cover_model.nedges, dtype=np.int64)
    for e in np.nonzero(chain)[0]:
        i, j = divmod(int(e), base_model.nbranch)
        sg = base_model.sheets[i][0]
        out[cover_model.edge(cover_model.sheet_index((sg, layer)), j)] += chain[e]
    return out


def _pinch_member(args):
    curve, w, p0, pair, base_index = args
    model = base_sheet_model(curve, p0)
    j1, j2 = pair
    a = np.zeros(model.nedges, dtype=np.int64)
    a[model.edge(0, j1)] += 1
    a[model.edge(model.perms[j1][0], j2)] += 1
    try:
        B = symplectic_basis(model, curve.genus, first=a)
    except ComputationError as exc:
        raise CycleTrackingLost(f"no marking with the vanishing cycle first: {exc}") from exc
    pd = period_matrix(B, base_differentials(curve))
    lt = log_abs_tau(build_tau_context(w, pd, base_index=base_index)).log_abs
    cov = build_cover(w)
    cm = cover_sheet_model(cov, p0)
    vexp = [v_exponents(cov)]
    I, _ = ray_integrals(cm, vexp)
    ve = edge_periods(cm, vexp, I)[0]
    Pa = w.n * (ve @ _lift_to_layer(model, cm, B.a[0]))
    Pb = w.n * (ve @ _lift_to_layer(model, cm, B.b[0]))
    return lt, Pa, Pb, B.b[0].copy()


def selection_residual(w, p0, pair):
    """Pairing of the class ``alpha`` with the eigenspaces of homology.

    ``alpha = sum_m rho**m sigma_*^(-m) a`` for a lift ``a`` of the
    vanishing cycle lies in one eigenspace ``H_l0``; the returned residual
    is the largest pairing with ``H_l`` for ``l0 + l != 0 mod n``.
    """
    curve = w.curve
    model = base_sheet_model(curve, p0)
    j1, j2 = pair
    a = np.zeros(model.nedges, dtype=np.int64)
    a[model.edge(0, j1)] += 1
    a[model.edge(model.perms[j1][0], j2)] += 1
    cov = build_cover(w)
    cm = cover_sheet_model(cov, p0)
    B = symplectic_basis(cm, cov.genus_hat)
    M = deck_action_h1(B)
    n = w.n
    rho = np.exp(2j * np.pi / n)
    c0 = B.coords(_lift_to_layer(model, cm, a)).astype(complex)
    Minv = np.linalg.inv(M.astype(float))
    alpha, Mm = np.zeros_like(c0), np.eye(len(c0))
    for m in range(n):
        alpha += rho**m * (Mm @ c0)
        Mm = Mm @ Minv
    l0 = None
    for l in range(n):
        if np.linalg.norm(M @ alpha - rho**l * alpha) < 1e-8 * np.linalg.norm(alpha):
            l0 = l
    if l0 is None:
        raise CycleTrackingLost("alpha is not an eigenvector of the deck action")
    J = standard_J(B.genus)
    worst = 0.0
    for l in range(n):
        if (l0 + l) % n:
            S = eigen_homology(M, n, l).basis
            worst = max(worst, float(np.max(np.abs(alpha @ J @ S))))
    return worst, l0


def pinch_family(others, centre, n, q_roots, grid: Grid = None, q_lead=1.0, direction=0.3,
                 jobs=1):
    """Family of base curves with branch points ``centre -/+ eps exp(i direction)``.

    ``others`` are the remaining roots of ``p``; ``q_roots`` (fixed) the
    roots of ``q``.  The vanishing cycle encircles the colliding pair and
    is the first ``a`` cycle of every marking; the base point of the
    sheet model is fixed along the family so the markings stay
    combinatorially identical.  Members whose marking cannot be built or
    changes are dropped from the end and the family is flagged truncated.
    """
    grid = grid or Grid()
    centre = complex(centre)
    u = np.exp(1j * direction)
    dist = _special_distance(centre, list(others) + list(q_roots))
    eps = grid.values(dist, PINCH_EPS_FRACTION)
    curves = [HyperellipticCurve.from_roots([centre - e * u, centre + e * u] + list(others)) for e in eps]
    p0 = choose_base_point(tuple(curves[0].roots) + tuple(complex(r) for r in q_roots))
    args = []
    for C, e in zip(curves, eps):
        roots = np.array(C.roots)
        pair = tuple(int(np.argmin(np.abs(roots - z))) for z in (centre - e * u, centre + e * u))
        base_index = [j for j in range(len(roots)) if j not in pair][0]
        args.append((C, NDifferential.from_roots(C, n, q_roots, q_lead), p0, pair, base_index))
    results, truncated = [], False
    for out in _pmap(_safe_pinch_member, args, jobs):
        if out is None or (results and not np.array_equal(out[3], results[0][3])):
            truncated = True
            break
        results.append(out)
    if len(results) < 3:
        raise CycleTrackingLost("fewer than three family members could be tracked")
    k = len(results)
    Pa = np.array([r[1] for r in results])
    Pb = np.array([r[2] for r in results])
    ratio = Pb / Pa
    if np.any(ratio.imag <= 0):
        raise CycleTrackingLost("Im(P_beta / P_alpha) is not positive")
    T = np.exp(2j * np.pi * ratio)
    obs = {"log_abs_tau": np.array([r[0] for r in results]), "P_alpha": Pa, "P_beta": Pb}
    sel, l0 = selection_residual(args[0][1], p0, args[0][3])
    meta = {"centre": [centre.real, centre.imag], "direction": direction, "lift_layer": 0,
            "selection_residual": sel, "alpha_eigen_index": l0}
    return DegenerationFamily(PINCH, n, curves[0].genus, "pinch", eps[:k],
                              tuple(a[1] for a in args[:k]), T, obs, Fraction(1, 12), 1, truncated, meta)


def _safe_pinch_member(args):
    try:
        return _pinch_member(args)
    except CycleTrackingLost:
        return None


# ------------------------------------------------------------ Phi_k


@dataclass(frozen=True)
class PhiKReport:
    """Degeneration of ``Phi_k`` along a collision family.

    ``hodge_fit`` fits ``log |det Phi_k|`` in a Hodge-unimodular frame,
    ``frame_fit`` the log-volume of the monomial frame and
    ``monomial_fit`` the bare determinant in the monomial frame, all
    against ``log |zeta_1 - zeta_2|``.  Fits are None when the frame
    valuation is logarithmic.  The limit rank is read off the matrix of
    ``Phi_k`` on the limit fiber (holomorphic differentials of the
    normalized limit cover, stable differentials at the nodes, and the
    collision components, which map to zero).
    """

    n: int
    k: int
    collisions: int
    generic_rank: int
    limit_rank: int
    rank_drop: int
    expected_drop: int
    sv_gap: float
    limit_singular_values: tuple
    intrinsic: Fraction
    c_frame: Fraction
    frame: FrameValuation
    hodge_fit: ExponentFit
    frame_fit: ExponentFit
    monomial_fit: ExponentFit
    sv_exponents: tuple
    vanishing_count: int
    descent_residual: float

    @property
    def rank_ok(self):
        return self.rank_drop == self.expected_drop and self.sv_gap >= SV_GAP

    @property
    def passed(self):
        fits = [f for f in (self.hodge_fit, self.frame_fit, self.monomial_fit) if f is not None]
        return self.rank_ok and all(f.passed for f in fits)

    def to_json(self):
        fj = lambda f: None if f is None else f.to_json()
        return {"n": self.n, "k": self.k, "collisions": self.collisions,
                "generic_rank": self.generic_rank, "limit_rank": self.limit_rank,
                "rank_drop": self.rank_drop, "expected_drop": self.expected_drop,
                "sv_gap": "inf" if np.isinf(self.sv_gap) else self.sv_gap,
                "limit_singular_values": list(self.limit_singular_values),
                "intrinsic": str(self.intrinsic), "c_frame": str(self.c_frame),
                "frame_logarithmic": self.frame.logarithmic,
                "hodge_fit": fj(self.hodge_fit), "frame_fit": fj(self.frame_fit),
                "monomial_fit": fj(self.monomial_fit), "sv_exponents": list(self.sv_exponents),
                "vanishing_count": self.vanishing_count, "descent_residual": self.descent_residual,
                "pass": self.passed}


def _phi_member(args):
    """Monomial determinant, frame log-volume and Hodge-normalized singular
    values of ``Phi_k`` for one family member."""
    w, ks, p0 = args
    cov = build_cover(w)
    cm = cover_sheet_model(cov, p0)
    B = symplectic_basis(cm, cov.genus_hat)
    diffs, groups = cover_differentials(cov)
    G = period_matrix(B, diffs).hodge_gram()
    out = {}
    for k in ks:
        a, b = groups[k]
        Gk = 0.5 * (G[a:b, a:b] + G[a:b, a:b].conj().T)
        M, res = phi_k_matrix(cov, k)
        L = np.linalg.cholesky(Gk)
        N = M @ np.linalg.inv(L).conj().T
        sv = np.linalg.svd(N, compute_uv=False)
        out[k] = (float(np.log(abs(np.linalg.det(M)))), 0.5 * float(np.linalg.slogdet(Gk)[1]), sv, res)
    return out


def limit_fiber_matrix(family: DegenerationFamily, k):
    """Matrix of ``Phi_k`` on the limit fiber and the per-eigenspace
    dimension count ``(normalized cover, nodal, collision components)``."""
    w_last = family.members[-1]
    n = family.n
    cofactor = list(w_last.q_roots[1:]) if family.mode == "branch" else list(w_last.q_roots[2:])
    centre = complex(*family.meta["centre"])
    roots = [centre] + cofactor if family.mode == "branch" else [centre, centre] + cofactor
    w0 = NDifferential.from_roots(w_last.curve, n, roots, w_last.q_lead)
    cov0 = build_cover(w0)
    elems = eigen_basis(cov0, k, check=False).elements
    cols = []
    if elems:
        M2, _ = phi_k_matrix(cov0, k, EigenDifferentialBasis(k, elems), square=False)
        cols.append(M2)
    lc = limit_cover_model(n)
    nodal = family.collisions if (n % 2 == 0 and 2 * k == n) else 0
    if nodal:
        # stable differential dzeta / y**(n/2) on each collision component;
        # its image is that of the frame direction not vanishing at the node
        lead = [m for m in eigen_basis(build_cover(w_last), k).elements if m.a == 0 and m.e == 0]
        Mn, _ = phi_k_matrix(cov0, k, EigenDifferentialBasis(k, tuple(lead[:1])), square=False)
        cols.extend([Mn] * nodal)
    target = cols[0].shape[0] if cols else (2 * n - 2 * k + 1) * (family.g - 1)
    holo = family.collisions * lc.dimension(k)
    if holo:
        cols.append(np.zeros((target, holo)))
    L = np.hstack(cols)
    counts = (len(elems), nodal, holo)
    return L, counts


def phi_k_degeneration(family: DegenerationFamily, k, p0=None, jobs=1, raise_on_frame=True):
    """Rank drop and vanishing order of ``Phi_k`` along a collision family."""
    if family.kind != COLLIDE:
        raise ValueError("Phi_k degeneration needs a collision family")
    n, g = family.n, family.g
    if not 1 <= k <= n - 1:
        raise ValueError("k must lie in 1..n-1")
    generic = (2 * n - 2 * k + 1) * (g - 1)
    w0 = family.members[0]
    if p0 is None:
        p0 = choose_base_point(tuple(w0.curve.roots) + tuple(w0.q_roots))
    data = _pmap(_phi_member, [(w, (k,), p0) for w in family.members], jobs)
    x = np.log(family.observables["zeta_sep"])
    logdet = np.array([d[k][0] for d in data])
    logvol = np.array([d[k][1] for d in data])
    svs = np.array([d[k][2] for d in data])
    resid = max(d[k][3] for d in data)

    elements = eigen_basis(build_cover(w0), k).elements
    frame = frame_valuation(elements, n, k, family.mode)
    c = family.collisions
    intrinsic = c * intrinsic_order(n, k)
    c_frame = c * frame.volume
    if frame.logarithmic:
        hodge_fit = frame_fit = mono_fit = None
    else:
        hodge_fit = fit_exponent(x, logdet - logvol, float(intrinsic))
        frame_fit = fit_exponent(x, logvol, float(c_frame))
        mono_fit = fit_exponent(x, logdet, float(intrinsic + c_frame))
        if raise_on_frame and intrinsic == 0 and not (frame_fit.passed and mono_fit.passed):
            raise FrameDegenerationUnresolved(
                f"frame slope {frame_fit.slope:.4f} differs from the valuation {float(c_frame)}")
    sv_exp = tuple(float(linregress(x, np.log(svs[:, j])).slope) for j in range(svs.shape[1]))
    vanishing = sum(1 for s in sv_exp if intrinsic > 0 and s > float(intrinsic) / (2 * max(c, 1)))

    L, counts = limit_fiber_matrix(family, k)
    if sum(counts) != generic:
        raise ComputationError(f"limit fiber dimensions {counts} do not add up to {generic}")
    norms = np.linalg.norm(L, axis=0)
    Ln = L / np.where(norms > 0, norms, 1.0)
    sv = np.linalg.svd(Ln, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    if rank < len(sv):
        gap = float(sv[rank - 1] / sv[rank]) if sv[rank] > 0 else float("inf")
    else:
        gap = float("inf")
    return PhiKReport(n, k, c, generic, rank, generic - rank, c * kernel_dimension(n, k), gap,
                      tuple(float(s) for s in sv), intrinsic, c_frame, frame, hodge_fit, frame_fit,
                      mono_fit, sv_exp, vanishing, float(resid))
