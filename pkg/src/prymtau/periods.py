"""Periods, normalized differentials and Abel maps.

Differentials are monomials ``x**a * s**es * t**et * dx`` given as integer
exponent triples.  The integral of such a monomial over the lift of the
lollipop loop around ``b_j`` starting on sheet ``i`` is
``(f_i - f_{perm_j(i)}) * I_j``, where ``f`` are the sheet multipliers and
``I_j`` is the reference-sheet integral along the ray from ``P0`` to
``b_j`` (the shrinking circle contributes nothing for integrable
singularities).
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .cyclic_cover import canonical_v, eigen_basis
from .errors import NotPositiveDefinite
from .homology import SymplecticBasis
from .paths import Line, Path

PERIOD_TOL = 1e-13
CONDITIONING_EIG = 1e-6


def _as_exps(diffs):
    return np.array([tuple(d) for d in diffs], dtype=float).reshape(-1, 3)


def monomial_integrand(model, exps):
    """Reference-sheet integrand ``f(x, L)`` for a list of exponent triples."""
    exps = _as_exps(exps)
    npr = len(model.p_roots)
    ls0 = 0.5 * np.log(complex(model.p_lead))
    lt0 = np.log(complex(model.q_lead)) / model.n
    mult = np.asarray(model.q_mult, dtype=float)

    def f(x, L):
        logs = ls0 + 0.5 * L[:npr].sum(axis=0)
        logt = lt0 + (mult[:, None] * L[npr:]).sum(axis=0) / model.n if len(mult) else 0 * logs
        return x[None, :] ** exps[:, :1] * np.exp(exps[:, 1:2] * logs[None, :] + exps[:, 2:3] * logt[None, :])

    return f


def ray_integrals(model, diffs, targets=None, tol=PERIOD_TOL, singular=True):
    """Integrals from ``P0`` to each target along straight rays on the
    reference sheet.  Returns ``(values (M, T), max_error)``."""
    targets = model.branch if targets is None else targets
    f = monomial_integrand(model, diffs)
    L0 = model.reference_logs()
    N = 2 * model.n if singular else 0
    cols, err = [], 0.0
    for b in targets:
        path = Path((Line(model.p0, complex(b), N),), model.roots)
        val, e = path.integrate(f, L0, tol=tol)
        cols.append(val)
        err = max(err, e)
    return np.array(cols).T, err


def integrate_path(model, diffs, path, sheet=0, tol=1e-12):
    """Integral of monomial differentials along a path that starts at ``P0``
    on the given sheet."""
    f = monomial_integrand(model, diffs)
    exps = _as_exps(diffs)
    path = Path(path.segments, model.roots)
    val, err = path.integrate(f, model.reference_logs(), tol=tol)
    fac = np.array([model.sheet_factors((e[1], e[2]))[sheet] for e in exps])
    return fac * val, err


def edge_periods(model, diffs, I):
    """Matrix ``(M, E)`` of integrals over every lifted lollipop edge."""
    exps = _as_exps(diffs)
    out = np.empty((len(exps), model.nedges), dtype=complex)
    for m, e in enumerate(exps):
        fac = model.sheet_factors((e[1], e[2]))
        for j in range(model.nbranch):
            perm = model.perms[j]
            for i in range(model.degree):
                out[m, model.edge(i, j)] = (fac[i] - fac[perm[i]]) * I[m, j]
    return out


@dataclass(frozen=True)
class PeriodData:
    """Periods of a differential basis over a symplectic marking.

    ``A[i, l]`` and ``B[i, l]`` are the integrals of differential ``l``
    over ``a_i`` and ``b_i``.  ``C`` maps the basis to normalized
    differentials: ``v_j = sum_l u_l C[l, j]``.
    """

    basis: SymplecticBasis
    diffs: tuple
    edge: np.ndarray = field(repr=False)
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Omega: np.ndarray
    error: float

    @property
    def genus(self):
        return self.basis.genus

    def chain_periods(self, chain):
        return self.edge @ np.asarray(chain)

    def symmetry_residual(self):
        return float(np.max(np.abs(self.Omega - self.Omega.T)))

    def min_imag_eig(self):
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.Omega.imag + self.Omega.imag.T))))

    def riemann_bilinear_residual(self):
        """``max |A_u.B_w - B_u.A_w|`` over basis pairs."""
        R = self.A.T @ self.B - self.B.T @ self.A
        return float(np.max(np.abs(R)) / max(1.0, np.max(np.abs(self.A))) ** 2)

    def hodge_gram(self):
        """``(i/2) int u_l ^ conj(u_m)`` from the bilinear relations."""
        A, B = self.A, self.B
        return 0.5j * (A.T @ B.conj() - B.T @ A.conj())

    def remarked(self, S):
        """Period data for the marking whose ``(a; b)`` rows are ``S`` times
        the old ones (no new integration)."""
        nb = self.basis.transformed(S)
        return _assemble(nb, self.diffs, self.edge, self.error)

    def reduced(self):
        """Period data for a Siegel-reduced marking."""
        _, S = siegel_reduce(self.Omega)
        return self.remarked(S)

    def marking_hash(self):
        return self.basis.marking_hash()

    def to_json(self):
        c = lambda M: [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(M)]
        return {"marking_hash": self.marking_hash(), "diffs": [list(d) for d in self.diffs],
                "Omega": c(self.Omega), "A": c(self.A), "B": c(self.B), "error": self.error,
                "edge": c(self.edge)}


def _assemble(basis, diffs, edge, err):
    A = (edge @ basis.a.T).T
    B = (edge @ basis.b.T).T
    C = np.linalg.inv(A)
    Omega = B @ C
    return PeriodData(basis, tuple(tuple(d) for d in diffs), edge, A, B, C, Omega, err)


def _lll(G, delta=0.75):
    """Unimodular ``U`` with ``U.T G U`` LLL-reduced, for a positive definite Gram ``G``."""
    g = len(G)
    U = np.eye(g, dtype=np.int64)
    Gc = G.copy()

    def gso(Gc):
        mu = np.zeros((g, g))
        B = np.zeros(g)
        for i in range(g):
            for j in range(i):
                mu[i, j] = (Gc[i, j] - sum(mu[j, l] * mu[i, l] * B[l] for l in range(j))) / B[j]
            B[i] = Gc[i, i] - sum(mu[i, l] ** 2 * B[l] for l in range(i))
        return mu, B

    k = 1
    while k < g:
        for j in range(k - 1, -1, -1):
            mu, _ = gso(Gc)
            r = int(np.round(mu[k, j]))
            if r:
                E = np.eye(g, dtype=np.int64)
                E[j, k] = -r
                U = U @ E
                Gc = E.T @ Gc @ E
        mu, B = gso(Gc)
        if B[k] < (delta - mu[k, k - 1] ** 2) * B[k - 1]:
            P = np.eye(g, dtype=np.int64)
            P[[k, k - 1]] = P[[k - 1, k]]
            U = U @ P
            Gc = P.T @ Gc @ P
            k = max(k - 1, 1)
        else:
            k += 1
    return U


def siegel_reduce(Omega, max_iter=200):
    """Reduce ``Omega`` towards the Siegel fundamental domain.

    Alternates an LLL reduction of ``Im Omega``, an integer shift of
    ``Re Omega`` and the quasi-inversion in the first coordinate while
    ``|Omega_11| < 1``.  Returns ``(Omega_reduced, S)`` with ``S`` acting
    on ``(a; b)`` cycle rows as in ``PeriodData.remarked``.
    """
    Om = np.asarray(Omega, dtype=complex)
    g = len(Om)
    I, Z = np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)
    M = np.eye(2 * g, dtype=np.int64)

    def act(Mk, Om):
        A, B, C, D = Mk[:g, :g], Mk[:g, g:], Mk[g:, :g], Mk[g:, g:]
        return (A @ Om + B) @ np.linalg.inv(C @ Om + D)

    for _ in range(max_iter):
        U = _lll(0.5 * (Om.imag + Om.imag.T))
        Mk = np.block([[U.T, Z], [Z, np.round(np.linalg.inv(U)).astype(np.int64)]])
        Om, M = act(Mk, Om), Mk @ M
        Mk = np.block([[I, -np.round(Om.real).astype(np.int64)], [Z, I]])
        Om, M = act(Mk, Om), Mk @ M
        Om = 0.5 * (Om + Om.T)
        if abs(Om[0, 0]) >= 1 - 1e-12:
            break
        A, D = I.copy(), I.copy()
        A[0, 0] = D[0, 0] = 0
        B, C = Z.copy(), Z.copy()
        B[0, 0], C[0, 0] = -1, 1
        Mk = np.block([[A, B], [C, D]])
        Om, M = act(Mk, Om), Mk @ M
    A, B, C, D = M[:g, :g], M[:g, g:], M[g:, :g], M[g:, g:]
    S = np.block([[D, C], [B, A]])
    return Om, S


def conditioned(pd):
    """Reduce genus one markings and nearly degenerate ones."""
    if pd.genus == 1 or pd.min_imag_eig() < CONDITIONING_EIG:
        return pd.reduced()
    return pd


def period_matrix(basis: SymplecticBasis, diffs, tol=PERIOD_TOL, check=True):
    """Period data of ``diffs`` over a symplectic marking.

    A marking whose ``Im Omega`` is nearly degenerate, or any genus-1
    marking, is replaced by a Siegel-reduced one.
    """
    model = basis.model
    I, err = ray_integrals(model, diffs, tol=tol)
    edge = edge_periods(model, diffs, I)
    pd = _assemble(basis, diffs, edge, err)
    pd = conditioned(pd)
    if check and pd.min_imag_eig() <= 0:
        raise NotPositiveDefinite("Im Omega is not positive definite")
    return pd


def base_differentials(curve):
    """``x**a dx/s`` for ``a < g`` as exponent triples."""
    return tuple((a, -1, 0) for a in range(curve.genus))


def cover_differentials(cover):
    """All eigen monomials, grouped by eigenvalue index, as exponent
    triples, plus the index range of each group."""
    out, groups = [], {}
    for k in range(cover.n):
        start = len(out)
        for m in eigen_basis(cover, k).elements:
            out.append((m.a, m.e - 1, -m.b))
        groups[k] = (start, len(out))
    return tuple(out), groups


def v_exponents(cover):
    m = canonical_v(cover)
    return (m.a, m.e - 1, -m.b)


@dataclass(frozen=True)
class HomologicalCoordinates:
    values: np.ndarray
    other_max: float

    def __len__(self):
        return len(self.values)


def cycle_periods(basis: SymplecticBasis, edge_row):
    """Periods over ``(a_1..a_g, b_1..b_g)`` of one differential."""
    return basis.cycles @ edge_row


def homological_coordinates(basis, spaces, v_edge_row):
    """``P_i`` over the ``k = 1`` eigenspace; also the largest period of
    ``v`` over the other eigenspaces."""
    per = cycle_periods(basis, v_edge_row)
    vals = spaces[1].basis.T @ per
    other = max((float(np.max(np.abs(s.basis.T @ per))) for s in spaces if s.k != 1), default=0.0)
    return HomologicalCoordinates(vals, other)


# ------------------------------------------------------------ Abel maps


def lattice_coords(Omega, z):
    """Real ``(m, n)`` with ``z = Omega m + n``."""
    z = np.asarray(z, dtype=complex)
    m = np.linalg.solve(Omega.imag, z.imag)
    n = z.real - Omega.real @ m
    return m, n


def lattice_residual(Omega, z):
    """Distance of ``z`` from the lattice ``Z^g + Omega Z^g`` in
    lattice coordinates."""
    m, n = lattice_coords(Omega, z)
    return float(max(np.max(np.abs(m - np.round(m))), np.max(np.abs(n - np.round(n)))))


class AbelMap:
    """Abel map of the base curve with base point at a finite branch point.

    ``A_e(x, s) = sigma * (R(x) - I_e)`` where ``R`` integrates the
    normalized differentials along the ray from ``P0`` on the reference
    sheet and ``sigma = s / s_ref(x)``.  The path is ``e -> P0`` on sheet
    ``sigma`` followed by the ray to ``x``.
    """

    def __init__(self, pd: PeriodData, base_index=0, tol=PERIOD_TOL):
        self.pd = pd
        self.model = pd.basis.model
        self.base_index = base_index
        self.tol = tol
        self.e = self.model.branch[base_index]
        I, _ = ray_integrals(self.model, pd.diffs, targets=[self.e], tol=tol)
        self.I_e = pd.C.T @ I[:, 0]

    def ray(self, x):
        """``(R(x), s_ref(x))`` for a finite non-branch ``x``."""
        I, _ = ray_integrals(self.model, self.pd.diffs, targets=[x], tol=self.tol, singular=False)
        L = Line(self.model.p0, complex(x)).evaluate(np.array([1.0]), self.model.roots, self.model.reference_logs())[2]
        s_ref, _ = self.model.s_t_from_logs(L)
        return self.pd.C.T @ I[:, 0], complex(s_ref[0])

    def sheet_sign(self, x, s):
        _, s_ref = self.ray(x)
        return 1 if abs(s - s_ref) < abs(s + s_ref) else -1

    def __call__(self, x, s):
        R, s_ref = self.ray(x)
        sg = 1 if abs(s - s_ref) < abs(s + s_ref) else -1
        return sg * (R - self.I_e)

    def at_branch(self, j):
        """Abel image of the branch point ``b_j`` (on the reference sheet)."""
        I, _ = ray_integrals(self.model, self.pd.diffs, targets=[self.model.branch[j]], tol=self.tol)
        return self.pd.C.T @ I[:, 0] - self.I_e

    def s_ref(self, x):
        return self.ray(x)[1]


def spec_hash(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]
