"""Bergman tau function of an n-differential on a hyperelliptic curve.

All quantities at a generic point are written in the coordinate ``x``;
at a zero of ``w`` they are written in its distinguished parameter.  Only
``|tau|`` is assembled: the phase is defined up to a root of unity.

With ``A`` the Abel map based at a branch point ``e``, the ingredients are

* ``K^x = K^e + (g-1) A(x)`` where ``K^e`` is the half period for which
  ``theta(A(D) + K^e)`` vanishes on effective divisors of degree ``g-1``;
* ``E(x,y) = theta[delta](A(y) - A(x)) / (h(x) h(y))`` with an odd
  characteristic ``delta`` and ``h**2 = sum_i d_i theta[delta](0) v_i``;
* ``Z, Z'`` from ``(1/n) sum k_i (A(x_i) - A(x)) + 2 K^x = Omega Z + Z'``.

The exponential factor is ``exp(-(pi i/6) <Omega Z, Z> + (2 pi i/3) <Z, K^x>)``:
the quadratic coefficient is fixed by invariance under lattice shifts of
``K^e`` and the linear sign by independence of the auxiliary point for
this sign of ``Z``.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import series
from .curve_model import (CurvePoint, NDifferential, _zero_factors,
                          distinguished_jet, lambda_coefficient)
from .errors import (BranchInconsistency, SingularOddCharacteristic,
                     VanishingTestFailed)
from .homology import _segment_distance, base_sheet_model, symplectic_basis
from .periods import AbelMap, PeriodData, base_differentials, lattice_coords, period_matrix
from .theta import ThetaEvaluator, half_characteristics, parity

VANISHING_TOL = 1e-7
QUANTIZATION_TOL = 1e-6


# ------------------------------------------------------------ local jets


def _shift_series(roots, lead, x0, order):
    """Taylor coefficients of ``lead * prod(x - r)`` about ``x0``."""
    out = np.zeros(order, dtype=complex)
    out[0] = lead
    for r in roots:
        lin = np.zeros(order, dtype=complex)
        lin[0] = x0 - r
        if order > 1:
            lin[1] = 1.0
        out = series.mul(out, lin, order)
    return out


def inverse_s_series(curve, x0, s0, order):
    """Taylor coefficients of ``1/s`` about ``(x0, s0)``."""
    P = _shift_series(curve.roots, curve.lead, x0, order)
    return series.power(P / P[0], -0.5, order) / s0


def differential_jet(pd: PeriodData, curve, point, order):
    """Taylor coefficients ``(order, g)`` in ``x`` of the coefficients of the
    normalized differentials ``v_i = sum_l x**l C[l, i] dx / s``."""
    inv_s = inverse_s_series(curve, point.x, point.s, order)
    g = pd.genus
    U = np.empty((order, g), dtype=complex)
    for l in range(g):
        xl = np.zeros(order, dtype=complex)
        for j in range(min(l, order - 1) + 1):
            xl[j] = factorial(l) / (factorial(j) * factorial(l - j)) * point.x ** (l - j)
        U[:, l] = series.mul(xl, inv_s, order)
    return U @ pd.C


def wronskian(jet):
    """Wronskian ``det(d^j v_i / dx^j)`` from Taylor coefficients."""
    g = jet.shape[1]
    D = np.array([factorial(j) * jet[j] for j in range(g)])
    return complex(np.linalg.det(D))


def random_curve_points(curve, p0, m, rng, clearance=0.15, max_tries=100000):
    """Random points whose ray from ``p0`` keeps a distance of at least
    ``clearance`` times the smallest root separation from every root."""
    roots = np.asarray(curve.roots)
    c = roots.mean()
    spread = float(np.max(np.abs(roots - c)))
    sep = min(abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:])
    out = []
    for _ in range(max_tries):
        if len(out) == m:
            return out
        x = c + spread * (rng.uniform(-1.2, 1.2) + 1j * rng.uniform(-1.2, 1.2))
        if min(_segment_distance(r, p0, x) for r in roots) < clearance * sep:
            continue
        out.append(curve.point(x, rng.choice((1, -1))))
    if len(out) < m:
        raise ValueError("could not place random points clear of the branch points")
    return out


# ------------------------------------------------------------ Riemann constants


def riemann_constants_e(pd, abel, theta, curve, rng=None, ndiv=10, tol=VANISHING_TOL):
    """Vector of Riemann constants based at the Abel base point.

    Returns ``(K, residual)``; ``K`` is the half period making theta vanish
    at ``A(D) + K`` for random effective divisors ``D`` of degree ``g-1``.
    """
    rng = np.random.default_rng(7) if rng is None else rng
    g = pd.genus
    images = []
    for _ in range(ndiv if g > 1 else 1):
        pts = random_curve_points(curve, abel.model.p0, g - 1, rng)
        images.append(sum((abel(p.x, p.s) for p in pts), np.zeros(g, dtype=complex)))
    images = np.array(images)
    best, best_res = None, np.inf
    for a, b in half_characteristics(g):
        K = pd.Omega @ a + b
        s, _, _ = theta.scaled(images + K)
        res = float(np.max(np.abs(s)))
        if res < best_res:
            best, best_res = K, res
    if best_res > tol:
        raise VanishingTestFailed(f"no half period makes theta vanish (best {best_res:.2e})")
    return best, best_res


def odd_characteristics(theta):
    """Odd half characteristics with their gradients at the origin, largest
    gradient first."""
    out = []
    for ch in half_characteristics(theta.g):
        if parity(ch) < 0:
            out.append((ch, theta.gradient(np.zeros(theta.g), ch)))
    out.sort(key=lambda c: -float(np.linalg.norm(c[1])))
    return out


def odd_characteristic(theta):
    """Odd half characteristic with the largest gradient at the origin."""
    ch, grad = odd_characteristics(theta)[0]
    if np.linalg.norm(grad) < 1e-8:
        raise SingularOddCharacteristic("every odd characteristic is singular")
    return ch, grad


# ------------------------------------------------------------ context


@dataclass(frozen=True)
class ZeroFrame:
    """Abel image of a zero and ``h**2`` in its distinguished frame."""

    abel: np.ndarray
    h2: complex
    order: int


@dataclass(frozen=True)
class TauContext:
    w: NDifferential
    pd: PeriodData
    theta: ThetaEvaluator = field(repr=False)
    abel: AbelMap = field(repr=False)
    K_e: np.ndarray
    K_residual: float
    delta: tuple
    delta_grad: np.ndarray
    x: CurvePoint
    frames: tuple
    Z: np.ndarray
    Zp: np.ndarray
    Z_residual: float

    @property
    def genus(self):
        return self.pd.genus

    @property
    def n(self):
        return self.w.n


def _branch_index(model, x):
    return int(np.argmin(np.abs(np.asarray(model.branch) - x)))


def _zero_frames(w, pd, abel, grad):
    frames = []
    curve = w.curve
    for i, z in enumerate(w.zeros):
        lam = lambda_coefficient(w, i)
        x0 = z.point.x
        if z.at_branch_point:
            st0 = np.sqrt(curve.lead * np.prod([x0 - e for e in curve.roots if e != x0]))
            omega = 2 * np.array([x0**l for l in range(pd.genus)]) @ pd.C / st0
            A = abel.at_branch(_branch_index(abel.model, x0))
        else:
            omega = np.array([x0**l for l in range(pd.genus)]) @ pd.C / z.point.s
            A = abel(x0, z.point.s)
        frames.append(ZeroFrame(np.asarray(A), complex(grad @ omega / lam), z.order))
    return tuple(frames)


def _select_delta(w, pd, abel, theta, rel_tol=1e-6):
    """First odd characteristic (by gradient size) whose ``h**2`` does not
    vanish at any zero of ``w``.  ``h**2`` has double zeros, and at such a
    zero the theta factor of the prime form vanishes identically."""
    for ch, grad in odd_characteristics(theta):
        gn = float(np.linalg.norm(grad))
        if gn < 1e-8:
            continue
        frames = _zero_frames(w, pd, abel, grad)
        scale = gn * max(1.0, float(np.max(np.abs(pd.C))))
        if all(abs(f.h2) > rel_tol * scale for f in frames):
            return ch, grad, frames
    raise SingularOddCharacteristic("no odd characteristic is regular at every zero")


def default_aux_point(curve, p0, rng=None):
    rng = np.random.default_rng(11) if rng is None else rng
    return random_curve_points(curve, p0, 1, rng, clearance=0.25)[0]


def build_tau_context(w: NDifferential, pd: PeriodData = None, x=None, rng=None, base_index=0):
    """Assemble every ingredient of ``tau`` for a base-curve marking."""
    curve = w.curve
    if pd is None:
        model = base_sheet_model(curve)
        pd = period_matrix(symplectic_basis(model, curve.genus), base_differentials(curve))
    theta = ThetaEvaluator(pd.Omega)
    abel = AbelMap(pd, base_index)
    K_e, K_res = riemann_constants_e(pd, abel, theta, curve, rng)
    delta, grad, frames = _select_delta(w, pd, abel, theta)
    if x is None:
        x = default_aux_point(curve, abel.model.p0)
    lhs = sum(f.order * f.abel for f in frames) / w.n + 2 * K_e
    Z, Zp = lattice_coords(pd.Omega, lhs)
    res = float(max(np.max(np.abs(w.n * Z - np.round(w.n * Z))),
                    np.max(np.abs(w.n * Zp - np.round(w.n * Zp))))) / w.n
    if res > QUANTIZATION_TOL:
        raise BranchInconsistency(f"Z, Z' are off the 1/n lattice by {res:.2e}")
    Z, Zp = np.round(w.n * Z) / w.n, np.round(w.n * Zp) / w.n
    return TauContext(w, pd, theta, abel, K_e, K_res, delta, grad, x, frames, Z, Zp, res)


def remarked_context(ctx: TauContext, S):
    """Context for the marking whose ``(a; b)`` rows are ``S`` times the old."""
    return build_tau_context(ctx.w, ctx.pd.remarked(S), ctx.x, base_index=ctx.abel.base_index)


def rescaled_context(ctx: TauContext, delta):
    """Context for ``delta * w`` with the same marking and auxiliary point."""
    w = ctx.w.scaled(delta)
    frames = _zero_frames(w, ctx.pd, ctx.abel, ctx.delta_grad)
    return TauContext(w, ctx.pd, ctx.theta, ctx.abel, ctx.K_e, ctx.K_residual, ctx.delta,
                      ctx.delta_grad, ctx.x, frames, ctx.Z, ctx.Zp, ctx.Z_residual)


# ------------------------------------------------------------ Riemann constants at x


def riemann_constants(ctx: TauContext, point=None):
    """``K^x`` for the auxiliary point (or a given point)."""
    point = ctx.x if point is None else point
    return ctx.K_e + (ctx.genus - 1) * ctx.abel(point.x, point.s)


def vanishing_residual(ctx: TauContext, point=None, ndiv=10, rng=None):
    """``max |theta(A_x(D) + K^x)|`` (scaled) over random divisors of degree ``g-1``."""
    rng = np.random.default_rng(3) if rng is None else rng
    point = ctx.x if point is None else point
    g = ctx.genus
    Ax = ctx.abel(point.x, point.s)
    Kx = ctx.K_e + (g - 1) * Ax
    out = 0.0
    for _ in range(ndiv if g > 1 else 1):
        pts = random_curve_points(ctx.w.curve, ctx.abel.model.p0, g - 1, rng)
        D = sum((ctx.abel(p.x, p.s) - Ax for p in pts), np.zeros(g, dtype=complex))
        s, _, _ = ctx.theta.scaled(D + Kx)
        out = max(out, abs(s))
    return out


# ------------------------------------------------------------ prime form


def _h2(ctx, point):
    v = differential_jet(ctx.pd, ctx.w.curve, point, 1)[0]
    return complex(ctx.delta_grad @ v)


def _log_abs_theta(ctx, z, char=None, dirs=()):
    s, lp, _ = ctx.theta.scaled(np.asarray(z, dtype=complex), char, dirs)
    return float(np.log(abs(s)) + lp)


def prime_form(ctx: TauContext, P, Q):
    """``E(P, Q)`` with both arguments in the ``x`` coordinate."""
    z = ctx.abel(Q.x, Q.s) - ctx.abel(P.x, P.s)
    return complex(ctx.theta.theta(z, ctx.delta) / (np.sqrt(_h2(ctx, P)) * np.sqrt(_h2(ctx, Q))))


def log_abs_prime_form_zero(ctx: TauContext, P, i, AP=None, h2P=None):
    """``log |E(P, x_i)|`` with ``x_i`` in its distinguished frame."""
    f = ctx.frames[i]
    AP = ctx.abel(P.x, P.s) if AP is None else AP
    h2P = _h2(ctx, P) if h2P is None else h2P
    return _log_abs_theta(ctx, f.abel - AP, ctx.delta) - 0.5 * np.log(abs(h2P)) - 0.5 * np.log(abs(f.h2))


def regularized_prime_form_at_zero(ctx: TauContext, P, i):
    """``E(P, x_i)`` in the distinguished frame at ``x_i`` (complex)."""
    f = ctx.frames[i]
    z = f.abel - ctx.abel(P.x, P.s)
    return complex(ctx.theta.theta(z, ctx.delta) / (np.sqrt(_h2(ctx, P)) * np.sqrt(f.h2)))


def log_abs_prime_form_zeros(ctx: TauContext, i, j):
    """``log |E(x_i, x_j)|`` in distinguished frames."""
    fi, fj = ctx.frames[i], ctx.frames[j]
    return (_log_abs_theta(ctx, fj.abel - fi.abel, ctx.delta)
            - 0.5 * np.log(abs(fi.h2)) - 0.5 * np.log(abs(fj.h2)))


def _zero_chart_differentials(ctx, i, u):
    """Normalized differentials in the chart parameter ``u`` of zero ``i``."""
    curve, z = ctx.w.curve, ctx.w.zeros[i]
    x0 = z.point.x
    g = ctx.genus
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    if z.at_branch_point:
        others = [e for e in curve.roots if e != x0]
        st0 = np.sqrt(curve.lead * np.prod([x0 - e for e in others]))
        x = x0 + u**2
        ratio = np.prod([(x - e) / (x0 - e) for e in others], axis=0)
        coef = 2.0 / (st0 * np.sqrt(ratio))
    else:
        x = x0 + u
        ratio = curve.p(x) / curve.p(x0)
        coef = 1.0 / (z.point.s * np.sqrt(ratio))
    X = np.array([x**l for l in range(g)]).T
    return (X * coef[:, None]) @ ctx.pd.C


def regularized_prime_form_limit(ctx: TauContext, P, i, radius, npts=24):
    """The regularized ``E(P, x_i)`` as the mean over a circle of radius
    ``radius`` (in the chart parameter) of ``E(P, y) sqrt(du/dzeta)(y)``.

    The function averaged is analytic in the chart parameter, so the mean
    reproduces its value at the zero; comparing radii certifies the
    frame normalization used by :func:`regularized_prime_form_at_zero`.
    """
    f = ctx.frames[i]
    AP = ctx.abel(P.x, P.s)
    hP = np.sqrt(_h2(ctx, P))
    hi = np.sqrt(f.h2)
    gl_x, gl_w = np.polynomial.legendre.leggauss(40)
    gl_x, gl_w = (gl_x + 1) / 2, gl_w / 2
    vals = []
    for k in range(npts):
        u = radius * np.exp(2j * np.pi * (k + 0.5) / npts)
        om = _zero_chart_differentials(ctx, i, u * gl_x)
        Ay = f.abel + u * (gl_w @ om)
        om_y = _zero_chart_differentials(ctx, i, u)[0]
        _, dz = distinguished_jet(ctx.w, i, u)
        # frame factor h_zeta(y)**2 = h_u(y)**2 / (dzeta/du), continued from the centre
        D = np.sqrt(complex(ctx.delta_grad @ om_y) / dz)
        if abs(D - hi) > abs(D + hi):
            D = -D
        vals.append(ctx.theta.theta(Ay - AP, ctx.delta) / (hP * D))
    return complex(np.mean(vals))


# ------------------------------------------------------------ tau


@dataclass(frozen=True)
class TauValue:
    log_abs: float
    log_abs_c: float
    exp_term: float
    w_term: float
    pair_term: float
    point: CurvePoint

    @property
    def abs_tau(self):
        return float(np.exp(self.log_abs))


def log_abs_tau(ctx: TauContext, point=None):
    """``log |tau|`` evaluated with the auxiliary point ``point``."""
    point = ctx.x if point is None else point
    g, n = ctx.genus, ctx.n
    Om = ctx.pd.Omega
    Ax = ctx.abel(point.x, point.s)
    Kx = ctx.K_e + (g - 1) * Ax
    jet = differential_jet(ctx.pd, ctx.w.curve, point, max(g, 1))
    v = jet[0]
    W = wronskian(jet)
    log_c = _log_abs_theta(ctx, Kx, None, (v,) * g) - np.log(abs(W))
    Z = ctx.Z
    exp_term = float(np.real(-1j * np.pi / 6 * (Z @ Om @ Z) + 2j * np.pi / 3 * (Z @ Kx)))
    h2x = complex(ctx.delta_grad @ v)
    logE = [log_abs_prime_form_zero(ctx, point, i, Ax, h2x) for i in range(len(ctx.frames))]
    ks = [f.order for f in ctx.frames]
    w_term = (g - 1) / (3 * n) * (np.log(abs(ctx.w.value(point.x, point.s))) - sum(k * e for k, e in zip(ks, logE)))
    pair = 0.0
    for i in range(len(ks)):
        for j in range(i + 1, len(ks)):
            pair += ks[i] * ks[j] / (6 * n * n) * log_abs_prime_form_zeros(ctx, i, j)
    total = 2.0 / 3.0 * log_c + exp_term + w_term + pair
    return TauValue(float(total), float(log_c), exp_term, float(w_term), float(pair), point)


def kappa_expected(signature, n):
    """Homogeneity exponent ``(1/12n^2) sum k(k+2n)/(k+n)`` as a Fraction."""
    from fractions import Fraction
    return sum(Fraction(k * (k + 2 * n), k + n) for k in signature) / (12 * n * n)


@dataclass(frozen=True)
class HomogeneityFit:
    kappa: float
    expected: object
    r2: float
    deltas: tuple
    log_abs: tuple

    @property
    def relative_error(self):
        return abs(self.kappa - float(self.expected)) / float(self.expected)


def tau_homogeneity(ctx: TauContext, deltas=None):
    """Fit ``log|tau(delta w)|`` against ``log delta``.

    Only the zero frames depend on the scale, so every member reuses the
    marking, the theta evaluator and the auxiliary point of ``ctx``.
    """
    from scipy.stats import linregress
    deltas = np.geomspace(0.5, 2.0, 7) if deltas is None else np.asarray(deltas, dtype=float)
    vals = [log_abs_tau(rescaled_context(ctx, d)).log_abs for d in deltas]
    fit = linregress(np.log(deltas), vals)
    sig = [f.order for f in ctx.frames]
    return HomogeneityFit(float(fit.slope), kappa_expected(sig, ctx.n), float(fit.rvalue**2),
                          tuple(map(float, deltas)), tuple(vals))


def random_symplectic(g, rng, steps=6, size=2):
    """Random integer symplectic ``2g x 2g`` matrix from elementary moves."""
    J = np.block([[np.zeros((g, g), int), np.eye(g, dtype=int)], [-np.eye(g, dtype=int), np.zeros((g, g), int)]])
    M = np.eye(2 * g, dtype=np.int64)
    for _ in range(steps):
        kind = rng.integers(3)
        E = np.eye(2 * g, dtype=np.int64)
        if kind == 0:
            B = rng.integers(-size, size + 1, (g, g))
            E[:g, g:] = B + B.T
        elif kind == 1:
            E = J.astype(np.int64)
        else:
            i, j = rng.choice(g, 2, replace=False) if g > 1 else (0, 0)
            U = np.eye(g, dtype=np.int64)
            if i != j:
                U[i, j] = rng.integers(-size, size + 1)
            E[:g, :g] = U
            E[g:, g:] = np.round(np.linalg.inv(U).T).astype(np.int64)
        M = E @ M
    return M


def modular_covariance(ctx: TauContext, S):
    """Return ``(|tau_S / tau|, |det(C Omega + D)|)`` for the marking
    whose ``(a; b)`` rows are ``S`` times the old ones."""
    g = ctx.genus
    new = remarked_context(ctx, S)
    ratio = np.exp(log_abs_tau(new).log_abs - log_abs_tau(ctx).log_abs)
    # normalized periods over the new a-cycles
    A_new = S[:g, :g] + S[:g, g:] @ ctx.pd.Omega
    return float(ratio), float(abs(np.linalg.det(A_new)))


# ------------------------------------------------------------ Bergman kernel


def bergman_kernel(ctx: TauContext, P, Q):
    """``B(P, Q)`` as the coefficient of ``dx dy``."""
    z = ctx.abel(Q.x, Q.s) - ctx.abel(P.x, P.s)
    H = ctx.theta.log_hessian(z[None, :], ctx.delta)[0]
    vP = differential_jet(ctx.pd, ctx.w.curve, P, 1)[0]
    vQ = differential_jet(ctx.pd, ctx.w.curve, Q, 1)[0]
    return complex(-vP @ H @ vQ)


def _nearest_root_distance(curve, x):
    return float(np.min(np.abs(np.asarray(curve.roots) - x)))


def bergman_near_diagonal(ctx: TauContext, P, t, order=40):
    """``B(P, y)`` for ``y = x + t`` near ``P`` (same sheet), using the local
    expansion of the Abel map so no global path is involved."""
    jet = differential_jet(ctx.pd, ctx.w.curve, P, order)
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    powers = t[:, None] ** np.arange(order + 1)[None, :]
    z = powers[:, 1:] @ (jet / np.arange(1, order + 1)[:, None])
    vy = powers[:, :order] @ jet
    H = ctx.theta.log_hessian(z, ctx.delta)
    return -np.einsum("g,pgh,ph->p", jet[0], H, vy)


def bergman_projective_connection(ctx: TauContext, P, chart=None, npts=16, fraction=0.25):
    """``S_B`` at ``P`` from the circle mean of ``B - 1/(x-y)**2``.

    ``chart = (xi0, phi, dphi)`` evaluates ``S_B`` in a coordinate ``xi``
    with ``x = phi(xi)`` and ``phi(xi0) = P.x``; default is ``x`` itself.
    """
    d = _nearest_root_distance(ctx.w.curve, P.x)
    ang = np.exp(2j * np.pi * (np.arange(npts) + 0.5) / npts)
    if chart is None:
        r = fraction * d
        t = r * ang
        B = bergman_near_diagonal(ctx, P, t)
        return complex(6 * np.mean(B - 1 / t**2))
    xi0, phi, dphi = chart
    r = fraction * d / max(abs(dphi(xi0)), 1e-300)
    eta = r * ang
    t = phi(xi0 + eta) - P.x
    if np.max(np.abs(t)) > 0.5 * d:
        raise ValueError("chart circle leaves the expansion disk")
    B = bergman_near_diagonal(ctx, P, t) * dphi(xi0) * dphi(xi0 + eta)
    return complex(6 * np.mean(B - 1 / eta**2))


def schwarzian_v(w: NDifferential, x):
    """Schwarzian of ``int v`` in the coordinate ``x`` (``v**n = w``)."""
    x = np.asarray(x, dtype=complex)
    n = w.n
    dq = sum(m / (x - r) for r, m in zip(w.q_roots, w.q_mult))
    ddq = -sum(m / (x - r) ** 2 for r, m in zip(w.q_roots, w.q_mult))
    dp = sum(1 / (x - e) for e in w.curve.roots)
    ddp = -sum(1 / (x - e) ** 2 for e in w.curve.roots)
    L = dq / n - dp / 2
    dL = ddq / n - ddp / 2
    return dL - 0.5 * L**2


def schwarzian_chart(dphi_ratio1, dphi_ratio2):
    """``{phi, xi} = phi'''/phi' - 1.5 (phi''/phi')**2`` from the two ratios."""
    return dphi_ratio2 - 1.5 * dphi_ratio1**2


# ------------------------------------------------------------ contour integrals


def _gl_nodes(m):
    x, wts = np.polynomial.legendre.leggauss(m)
    return (x + 1) / 2, wts / 2


def bergman_a_period(ctx: TauContext, Q, j, **kw):
    """``oint_{a_j} B(., Q)``; zero for the normalized kernel."""
    return bergman_cycle_period(ctx, Q, ctx.pd.basis.a[j], **kw)


def bergman_cycle_period(ctx: TauContext, Q, chain, panels=12, nodes=24):
    """``oint B(., Q)`` over an edge chain, by quadrature along each lifted
    lollipop with the Abel map continued along the path from ``P0``."""
    from .paths import lollipop
    model = ctx.abel.model
    curve = ctx.w.curve
    AQ = ctx.abel(Q.x, Q.s)
    vQ = differential_jet(ctx.pd, curve, Q, 1)[0]
    sub_t, sub_w = _gl_nodes(nodes)
    total = 0j
    sref0, _ = model.s_t_from_logs(model.reference_logs()[:, None])
    for e in np.nonzero(chain)[0]:
        i, jb = divmod(int(e), model.nbranch)
        sign = model.sheets[i][0]
        path = lollipop(model.p0, model.branch[jb], model.radii[jb], model.roots)
        A0 = ctx.abel(model.p0, sign * sref0[0])
        acc = 0j
        A_start = A0
        L0 = model.reference_logs()
        for seg in path.segments:
            for k in range(panels):
                a, b = k / panels, (k + 1) / panels
                v = a + (b - a) * sub_t
                x, dx, L = seg.evaluate(v, model.roots, L0)
                s = sign * model.s_t_from_logs(L)[0]
                X = np.array([x**l for l in range(ctx.genus)]).T
                vx = (X / s[:, None]) @ ctx.pd.C
                # Abel map at each node: panel start plus a nested Gauss rule
                Ax = np.empty((len(v), ctx.genus), dtype=complex)
                for m, vm in enumerate(v):
                    vv = a + (vm - a) * sub_t
                    xx, ddx, LL = seg.evaluate(vv, model.roots, L0)
                    ss = sign * model.s_t_from_logs(LL)[0]
                    XX = np.array([xx**l for l in range(ctx.genus)]).T
                    Ax[m] = A_start + ((vm - a) * sub_w * ddx) @ ((XX / ss[:, None]) @ ctx.pd.C)
                H = ctx.theta.log_hessian(AQ[None, :] - Ax, ctx.delta)
                Bx = -np.einsum("pg,pgh,h->p", vx, H, vQ)
                acc += np.sum((b - a) * sub_w * dx * Bx)
                A_start = A_start + ((b - a) * sub_w * dx) @ vx
            _, _, Le = seg.evaluate(np.array([1.0]), model.roots, L0)
            L0 = Le[:, 0]
        total += chain[e] * acc
    return complex(total)


# ------------------------------------------------------------ variational formula


@dataclass(frozen=True)
class VariationalResult:
    """Finite-difference ``d log tau / dP_i`` against the contour integral."""

    index: int
    fd: complex
    contour: complex
    residual: float
    step: float
    prefactor_scale: float = 1.0


class StratumFamily:
    """``(C, w)`` in a simple stratum as a holomorphic function of the
    parameters ``(p roots, q roots, q lead)``, with the base and cover
    markings frozen at the reference parameters."""

    def __init__(self, w: NDifferential):
        from .cyclic_cover import build_cover
        from .homology import cover_sheet_model, deck_action_h1, eigen_homology
        from .periods import v_exponents
        if not w.simple:
            raise ValueError("the variational check needs simple zeros")
        self.w0 = w
        self.n = w.n
        self.npr = w.curve.degree
        self.params0 = np.array(list(w.curve.roots) + list(w.q_roots) + [w.q_lead], dtype=complex)
        self.lead = w.curve.lead
        g = w.curve.genus
        base_model = base_sheet_model(w.curve)
        self.base_basis = symplectic_basis(base_model, g)
        cover = build_cover(w)
        self.cover_model = cover_sheet_model(cover)
        self.cover_basis = symplectic_basis(self.cover_model, cover.genus_hat)
        M = deck_action_h1(self.cover_basis)
        self.H1 = eigen_homology(M, self.n, 1, g=g)
        self.Hn1 = eigen_homology(M, self.n, self.n - 1, g=g)
        J = _standard_J(cover.genus_hat)
        G = self.Hn1.basis.T @ J @ self.H1.basis
        # dual classes: s*_j . s_i = delta_ij
        self.dual = self.Hn1.basis @ np.linalg.inv(G).T
        self.v_exps = v_exponents(cover)
        self.aux_x = default_aux_point(w.curve, base_model.p0)

    def ndiff(self, params):
        from .curve_model import HyperellipticCurve
        curve = HyperellipticCurve(tuple(params[: self.npr]), self.lead)
        return NDifferential(curve, self.n, tuple(params[self.npr:-1]), params[-1])

    def _models(self, w):
        from .homology import SheetModel
        bm, cm = self.base_basis.model, self.cover_model
        base = SheetModel(bm.p0, tuple(w.curve.roots), bm.perms, bm.sheets, 1, tuple(w.curve.roots),
                          w.curve.lead, radii=bm.radii)
        cover = SheetModel(cm.p0, tuple(w.curve.roots) + tuple(w.q_roots), cm.perms, cm.sheets, self.n,
                           tuple(w.curve.roots), w.curve.lead, tuple(w.q_roots), cm.q_mult, w.q_lead,
                           cm.radii)
        from .homology import monodromy
        monodromy(base)
        monodromy(cover)
        return base, cover

    def homological_coordinates(self, params):
        from .periods import edge_periods, ray_integrals
        from .homology import SymplecticBasis
        w = self.ndiff(params)
        _, cover = self._models(w)
        I, _ = ray_integrals(cover, [self.v_exps])
        edge = edge_periods(cover, [self.v_exps], I)[0]
        return self.H1.basis.T @ (self.cover_basis.cycles @ edge)

    def context(self, params):
        from .homology import SymplecticBasis
        w = self.ndiff(params)
        base, _ = self._models(w)
        bb = self.base_basis
        basis = SymplecticBasis(base, bb.a, bb.b, bb.W2)
        pd = period_matrix(basis, base_differentials(w.curve))
        x = w.curve.point(self.aux_x.x, 1)
        if abs(x.s - self.aux_x.s) > abs(x.s + self.aux_x.s):
            x = w.curve.point(self.aux_x.x, -1)
        return build_tau_context(w, pd, x)

    def log_abs_tau(self, params):
        return log_abs_tau(self.context(params)).log_abs

    def jacobian(self, h=1e-5):
        cols = []
        for k in range(len(self.params0)):
            e = np.zeros(len(self.params0), dtype=complex)
            e[k] = h
            cols.append((self.homological_coordinates(self.params0 + e)
                         - self.homological_coordinates(self.params0 - e)) / (2 * h))
        return np.array(cols).T

    def direction(self, i, J=None):
        """Parameter direction moving ``P_i`` at unit rate and no other
        coordinate (minimum-norm solution)."""
        J = self.jacobian() if J is None else J
        e = np.zeros(J.shape[0], dtype=complex)
        e[i] = 1.0
        d, *_ = np.linalg.lstsq(J, e, rcond=None)
        if np.max(np.abs(J @ d - e)) > 1e-6:
            from .errors import DeformationSolveFailed
            raise DeformationSolveFailed("no parameter direction moves P_i alone")
        return d

    def fd_derivative(self, d, h=1e-4):
        """``d log tau`` along ``d`` from ``log |tau|`` at four points:
        holomorphy gives the imaginary part from the ``i d`` direction."""
        f = lambda e: self.log_abs_tau(self.params0 + e * d)
        re = (f(h) - f(-h)) / (2 * h)
        im = -(f(1j * h) - f(-1j * h)) / (2 * h)
        return complex(re, im)


def _standard_J(g):
    from .homology import standard_J
    return standard_J(g)


def projective_connection_difference(ctx: TauContext, x, s):
    """``S_B - S_v`` at points ``(x, s)`` in the coordinate ``x``."""
    out = np.empty(len(x), dtype=complex)
    for k, (xx, ss) in enumerate(zip(x, s)):
        out[k] = bergman_projective_connection(ctx, CurvePoint(complex(xx), complex(ss)))
    return out - schwarzian_v(ctx.w, x)


def dual_cycle_integral(fam: StratumFamily, ctx: TauContext, i, tol=1e-10):
    """``int_{s*_i} (S_B - S_v)/v`` over the dual class in ``H_{n-1}``.

    Each lifted lollipop splits into the outgoing ray, the circle and the
    returning ray; on sheet ``(sigma, m)`` the integrand is
    ``sigma rho**(-m)`` times its reference-sheet value with ``S_B``
    evaluated at the point ``sigma s``.
    """
    from .paths import Arc, Line, Path
    model = fam.cover_model
    chain = fam.dual[:, i] @ fam.cover_basis.cycles
    rho = np.exp(2j * np.pi / model.n)
    L0 = model.reference_logs()
    pieces = {}

    def integrand(sig):
        def f(x, L):
            s_ref, t_ref = model.s_t_from_logs(L)
            Q = projective_connection_difference(ctx, x, sig * s_ref)
            return (Q * s_ref / t_ref)[None, :]
        return f

    for j, b in enumerate(model.branch):
        r = model.radii[j]
        d = (b - model.p0) / abs(b - model.p0)
        near = b - r * d
        th0 = float(np.angle(-d))
        ray = Path((Line(model.p0, near),), model.roots)
        arc = Path((Arc(b, r, th0, th0 + 2 * np.pi),), model.roots)
        Lnear = ray.end_logs(L0)
        for sig in (1, -1):
            R, _ = ray.integrate(integrand(sig), L0, tol=tol)
            Cc, _ = arc.integrate(integrand(sig), Lnear, tol=tol)
            pieces[(j, sig)] = (complex(R[0]), complex(Cc[0]))
    total = 0j
    for e in np.nonzero(np.abs(chain) > 1e-14)[0]:
        i_s, j = divmod(int(e), model.nbranch)
        sg, m = model.sheets[i_s]
        sg2, m2 = model.sheets[model.perms[j][i_s]]
        R, Cc = pieces[(j, sg)]
        R2, _ = pieces[(j, sg2)]
        val = sg * rho ** (-m) * (R + Cc) - sg2 * rho ** (-m2) * R2
        total += chain[e] * val
    return complex(total)


def tau_variational_residual(w: NDifferential, i=0, step=1e-4, prefactor_scale=1.0, fam=None):
    """Relative mismatch between the finite-difference ``d log tau/dP_i``
    and ``-(1/(12 pi i n)) int_{s*_i} (S_B - S_v)/v``."""
    fam = StratumFamily(w) if fam is None else fam
    d = fam.direction(i)
    fd = fam.fd_derivative(d, step)
    ctx = fam.context(fam.params0)
    integral = dual_cycle_integral(fam, ctx, i)
    contour = -prefactor_scale / (12j * np.pi * fam.n) * integral
    res = abs(fd - contour) / max(abs(contour), 1e-300)
    return VariationalResult(i, fd, contour, float(res), step, prefactor_scale)
