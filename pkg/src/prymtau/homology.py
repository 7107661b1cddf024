"""Homology of branched covers of the x-line from a fat graph.

Sheets over a generic base point ``P0`` are the vertices; for every sheet
``i`` and finite branch point ``b_j`` the lift of the lollipop loop (ray
from ``P0`` to ``b_j``, small counterclockwise circle, ray back) starting on
sheet ``i`` is an edge ``i -> perm_j(i)``.  The surface retracts onto this
graph with infinity as the centre of the complementary star, so the graph
is a ribbon graph whose cyclic orders come from the angles of the rays.
Its faces certify the genus, and the intersection form on closed edge
chains is computed exactly from the cyclic orders.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, NonPeriodic, RankDeficient,
                     SheetTrackingFailure)
from .paths import lollipop, principal_logs, track_logs

INTEGER_TOL = 1e-6


@dataclass(frozen=True)
class SheetModel:
    """Combinatorial data of a branched cover of the x-line.

    ``sheets`` are labels ``(sigma, m)``: the values of ``s`` and ``t`` at
    ``P0`` are ``sigma * s0`` and ``rho**m * t0``, where ``s0`` and ``t0``
    are products of principal powers at ``P0``.  ``perms[j][i]`` is the sheet
    reached from sheet ``i`` after the lollipop around ``branch[j]``.
    """

    p0: complex
    branch: tuple
    perms: tuple
    sheets: tuple
    n: int
    p_roots: tuple
    p_lead: complex
    q_roots: tuple = ()
    q_mult: tuple = ()
    q_lead: complex = 1.0
    radii: tuple = field(default=(), compare=False)

    @property
    def degree(self):
        return len(self.sheets)

    @property
    def nbranch(self):
        return len(self.branch)

    @property
    def roots(self):
        """All points whose logarithms are tracked: p roots then q roots."""
        return tuple(self.p_roots) + tuple(self.q_roots)

    def edge(self, i, j):
        return i * self.nbranch + j

    def edge_ends(self, e):
        i, j = divmod(e, self.nbranch)
        return i, self.perms[j][i]

    @property
    def nedges(self):
        return self.degree * self.nbranch

    def sheet_index(self, label):
        return self.sheets.index(label)

    def sheet_factors(self, exps):
        """Multiplier of a monomial with ``(s, t)`` exponents ``exps`` on each
        sheet, relative to the reference sheet."""
        es, et = exps
        rho = np.exp(2j * np.pi / self.n)
        return np.array([sg**es * rho ** (m * et) for sg, m in self.sheets])

    def reference_logs(self):
        return principal_logs(self.p0, self.roots)

    def s_t_from_logs(self, L):
        """Reference-sheet values of ``s`` and ``t`` from continued logs."""
        npr = len(self.p_roots)
        s = np.sqrt(self.p_lead) * np.exp(0.5 * L[:npr].sum(axis=0))
        if self.q_roots:
            mult = np.asarray(self.q_mult, dtype=float)[:, None]
            t = self.q_lead ** (1.0 / self.n) * np.exp((mult * L[npr:]).sum(axis=0) / self.n)
        else:
            t = np.ones_like(s)
        return s, t

    def identify_sheet(self, s_ratio, t_ratio):
        sg = 1 if abs(s_ratio - 1) < abs(s_ratio + 1) else -1
        m = int(np.round(np.angle(t_ratio) / (2 * np.pi / self.n))) % self.n
        if abs(s_ratio - sg) > 1e-6 or abs(t_ratio - np.exp(2j * np.pi * m / self.n)) > 1e-6:
            raise SheetTrackingFailure("continued values do not match any sheet")
        return self.sheet_index((sg, m))

    def to_json(self):
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {"p0": c(self.p0), "branch": [c(b) for b in self.branch],
                "perms": [list(p) for p in self.perms], "sheets": [list(s) for s in self.sheets]}


def _segment_distance(z, a, b):
    d = b - a
    u = np.clip(np.real((z - a) * np.conj(d)) / abs(d) ** 2, 0.0, 1.0)
    return abs(z - (a + u * d))


def base_point_quality(p0, pts):
    """Worst clearance between a ray ``P0 -> b_j`` and any other ``b_k``,
    relative to ``|b_k - P0|``."""
    worst = np.inf
    for j, b in enumerate(pts):
        if abs(b - p0) < 1e-12:
            return 0.0
        for k, c in enumerate(pts):
            if k != j:
                worst = min(worst, _segment_distance(c, p0, b) / abs(c - p0))
    return worst


def choose_base_point(pts):
    """Deterministic generic base point maximizing ray clearance."""
    pts = np.asarray(pts, dtype=complex)
    c = pts.mean()
    spread = max(np.max(np.abs(pts - c)), 1e-3)
    best, best_q = None, -1.0
    for r in (0.15, 0.35, 0.6, 0.9, 1.3):
        for k in range(36):
            z = c + r * spread * np.exp(2j * np.pi * (k + 0.37) / 36)
            q = base_point_quality(z, pts)
            if q > best_q:
                best, best_q = z, q
    return complex(best)


def _radii(p0, pts):
    pts = np.asarray(pts, dtype=complex)
    out = []
    for j, b in enumerate(pts):
        others = np.delete(pts, j)
        d = np.min(np.abs(others - b)) if len(others) else 1.0
        out.append(0.3 * min(d, abs(b - p0)))
    return tuple(out)


def base_sheet_model(curve, p0=None):
    """Two-sheeted model of ``s**2 = p(x)``."""
    pts = tuple(curve.roots)
    p0 = choose_base_point(pts) if p0 is None else complex(p0)
    sheets = ((1, 0), (-1, 0))
    perms = tuple((1, 0) for _ in pts)
    return SheetModel(p0, pts, perms, sheets, 1, pts, curve.lead, radii=_radii(p0, pts))


def cover_sheet_model(cover, p0=None):
    """``2n``-sheeted model of the canonical cover (simple stratum)."""
    w = cover.base
    n = w.n
    qr = tuple(r for r in w.q_roots if w._branch_index(r) is None)
    qm = tuple(m for r, m in zip(w.q_roots, w.q_mult) if w._branch_index(r) is None)
    pts = tuple(w.curve.roots) + qr
    p0 = choose_base_point(pts) if p0 is None else complex(p0)
    sheets = tuple((sg, m) for sg in (1, -1) for m in range(n))
    perms = []
    for j in range(len(pts)):
        if j < len(w.curve.roots):
            perms.append(tuple(sheets.index((-sg, m)) for sg, m in sheets))
        else:
            mu = qm[j - len(w.curve.roots)]
            perms.append(tuple(sheets.index((sg, (m + mu) % n)) for sg, m in sheets))
    return SheetModel(p0, pts, tuple(perms), sheets, n, tuple(w.curve.roots), w.curve.lead,
                      qr, qm, w.q_lead, _radii(p0, pts))


def _polyline(path, pts_per_segment=64):
    xs = []
    for seg in path.segments:
        v = np.linspace(0, 1, pts_per_segment)
        x, _, _ = seg.evaluate(v, (), np.zeros(0))
        xs.extend(x if not xs else x[1:])
    return np.array(xs)


def monodromy(model: SheetModel):
    """Numerically continued monodromy, checked against the model.

    Returns ``(perms, perm_infinity)``; the continuation uses the generic
    stepping tracker, independent of the exact segment formulas.  Raises
    SheetTrackingFailure on disagreement or if the sphere relation fails.
    """
    L0 = model.reference_logs()
    s0, t0 = model.s_t_from_logs(L0[:, None])
    found = []
    for j, b in enumerate(model.branch):
        path = lollipop(model.p0, b, model.radii[j], model.roots)
        L = track_logs(_polyline(path), model.roots, L0)
        s1, t1 = model.s_t_from_logs(L[:, None])
        base = model.identify_sheet(complex(s1[0] / s0[0]), complex(t1[0] / t0[0]))
        bs, bm = model.sheets[base]
        perm = tuple(model.sheet_index((sg * bs, (m + bm) % model.n)) for sg, m in model.sheets)
        if perm != model.perms[j]:
            raise SheetTrackingFailure(f"monodromy at branch {j} disagrees with the model")
        found.append(perm)
    # big counterclockwise circle around everything
    R = 2.0 * max(abs(b - model.p0) for b in model.branch)
    angs = np.sort(np.angle(np.asarray(model.branch) - model.p0))
    gaps = np.diff(np.concatenate([angs, [angs[0] + 2 * np.pi]]))
    phi = angs[np.argmax(gaps)] + gaps.max() / 2
    circ = model.p0 + R * np.exp(1j * (phi + np.linspace(0, 2 * np.pi, 2049)))
    line = model.p0 + np.linspace(0, 1, 65) * R * np.exp(1j * phi)
    L = track_logs(np.concatenate([line, circ[1:], line[::-1][1:]]), model.roots, L0)
    s1, t1 = model.s_t_from_logs(L[:, None])
    base = model.identify_sheet(complex(s1[0] / s0[0]), complex(t1[0] / t0[0]))
    bs, bm = model.sheets[base]
    pinf = tuple(model.sheet_index((sg * bs, (m + bm) % model.n)) for sg, m in model.sheets)
    # sphere relation: the ordered product of local loops equals the big loop
    order = np.argsort(np.mod(np.angle(np.asarray(model.branch) - model.p0) - phi, 2 * np.pi))
    prod = list(range(model.degree))
    for j in order:
        prod = [model.perms[j][i] for i in prod]
    if tuple(prod) != pinf:
        raise SheetTrackingFailure("product of local monodromies differs from the loop at infinity")
    return tuple(found), pinf


# ----------------------------------------------------------- fat graph


def _cyclic_darts(model: SheetModel):
    """Counterclockwise darts ``(edge, sign)`` at each vertex; sign +1 for
    the outgoing end, -1 for the incoming end."""
    angs = np.angle(np.asarray(model.branch) - model.p0)
    order = np.argsort(angs)
    inv = [np.argsort(p) for p in model.perms]
    darts = []
    for v in range(model.degree):
        lst = []
        for j in order:
            lst.append((model.edge(v, j), 1))
            lst.append((model.edge(int(inv[j][v]), j), -1))
        darts.append(lst)
    return darts


def intersection_matrix2(model: SheetModel):
    """Integer matrix ``W2`` with ``c . c' = c^T W2 c' / 2`` on closed chains."""
    E = model.nedges
    W2 = np.zeros((E, E), dtype=np.int64)
    for lst in _cyclic_darts(model):
        for a in range(len(lst)):
            ea, sa = lst[a]
            for b in range(a + 1, len(lst)):
                eb, sb = lst[b]
                W2[ea, eb] += sa * sb
                W2[eb, ea] -= sa * sb
    return W2


def faces(model: SheetModel):
    """Boundary chains of the faces of the ribbon graph."""
    darts = _cyclic_darts(model)
    pos = {}
    for v, lst in enumerate(darts):
        for k, d in enumerate(lst):
            pos[d] = (v, k)
    seen, out = set(), []
    for d0 in pos:
        if d0 in seen:
            continue
        chain = np.zeros(model.nedges, dtype=np.int64)
        d = d0
        while d not in seen:
            seen.add(d)
            e, sg = d
            chain[e] += sg
            other = (e, -sg)
            v, k = pos[other]
            lst = darts[v]
            d = lst[(k + 1) % len(lst)]
        out.append(chain)
    return out


def boundary(model: SheetModel, chain):
    out = np.zeros(model.degree, dtype=np.int64)
    for e, c in enumerate(chain):
        if c:
            u, v = model.edge_ends(e)
            out[v] += c
            out[u] -= c
    return out


def cycle_space(model: SheetModel):
    """Integer basis of closed edge chains from a BFS spanning tree."""
    V, E = model.degree, model.nedges
    parent = {0: None}
    queue = [0]
    adj = [[] for _ in range(V)]
    for e in range(E):
        u, v = model.edge_ends(e)
        adj[u].append((e, v, 1))
        adj[v].append((e, u, -1))
    tree = set()
    while queue:
        u = queue.pop(0)
        for e, v, sg in adj[u]:
            if v not in parent:
                parent[v] = (u, e, sg)
                tree.add(e)
                queue.append(v)
    if len(parent) != V:
        raise RankDeficient("sheet graph is disconnected")

    def root_path(x):
        c = np.zeros(E, dtype=np.int64)
        while parent[x] is not None:
            u, e, sg = parent[x]
            c[e] += sg
            x = u
        return c

    paths = [root_path(x) for x in range(V)]
    basis = []
    for e in range(E):
        if e in tree:
            continue
        u, v = model.edge_ends(e)
        c = paths[u] - paths[v]
        c[e] += 1
        basis.append(c)
    return np.array(basis, dtype=np.int64)


def symplectic_reduce(vectors, gram, first=None):
    """Integer symplectic reduction of an antisymmetric Gram matrix.

    Returns ``(a_vectors, b_vectors, radical_vectors)`` as integer arrays
    with ``a_i . b_j = delta_ij`` and all other pairings zero.  When
    ``first`` is an index, that vector is kept unchanged as ``a_1``.
    Works in exact Python integers.
    """
    r = len(vectors)
    V = [[int(x) for x in v] for v in vectors]
    K = [[int(x) for x in row] for row in gram]

    def addmul(k, j, q):
        V[k] = [x - q * y for x, y in zip(V[k], V[j])]
        K[k] = [x - q * y for x, y in zip(K[k], K[j])]
        K[k][k] = 0
        for l in range(r):
            K[l][k] = -K[k][l]

    def negate(k):
        V[k] = [-x for x in V[k]]
        K[k] = [-x for x in K[k]]
        for l in range(r):
            K[l][k] = -K[k][l]

    rem = list(range(r))
    A, B = [], []
    while True:
        if first is not None and first in rem:
            i = first
        else:
            best = None
            for ii in rem:
                for l in rem:
                    if K[ii][l] and (best is None or abs(K[ii][l]) < best[0]):
                        best = (abs(K[ii][l]), ii)
            if best is None:
                break
            i = best[1]
        while True:
            cands = [l for l in rem if l != i and K[i][l]]
            if not cands:
                raise RankDeficient("pivot vector pairs trivially with everything")
            j = min(cands, key=lambda l: abs(K[i][l]))
            done = True
            for l in rem:
                if l in (i, j) or not K[i][l]:
                    continue
                q = round(K[i][l] / K[i][j])
                if q:
                    addmul(l, j, q)
                if K[i][l]:
                    done = False
            if done:
                break
        if abs(K[i][j]) != 1:
            raise RankDeficient("intersection form is not unimodular on the cycle space")
        if K[i][j] == -1:
            negate(j)
        for l in rem:
            if l not in (i, j) and K[j][l]:
                addmul(l, i, -K[j][l])
        A.append(V[i])
        B.append(V[j])
        rem.remove(i)
        rem.remove(j)
        if first == i:
            first = None
    for k in rem:
        if any(K[k][l] for l in rem):
            raise RankDeficient("reduction left a nondegenerate remainder")
    as_arr = lambda rows: np.array(rows, dtype=np.int64).reshape(len(rows), -1)
    return as_arr(A), as_arr(B), as_arr([V[k] for k in rem])


@dataclass(frozen=True)
class SymplecticBasis:
    """Closed edge chains ``a_i``, ``b_i`` with ``a_i.b_j = delta_ij``."""

    model: SheetModel
    a: np.ndarray
    b: np.ndarray
    W2: np.ndarray = field(repr=False)

    @property
    def genus(self):
        return len(self.a)

    @property
    def cycles(self):
        return np.vstack([self.a, self.b])

    def dot(self, c1, c2):
        v = np.asarray(c1, dtype=np.int64) @ self.W2 @ np.asarray(c2, dtype=np.int64)
        return int(v) // 2

    def intersection_matrix(self):
        C = self.cycles
        return (C @ self.W2 @ C.T) // 2

    def coords(self, chain):
        """Integer coordinates ``(alpha, beta)`` with
        ``chain ~ sum alpha_i a_i + beta_i b_i``."""
        c = np.asarray(chain, dtype=np.int64)
        al = [self.dot(c, bi) for bi in self.b]
        be = [-self.dot(c, ai) for ai in self.a]
        return np.array(al + be, dtype=np.int64)

    def transformed(self, S):
        """New basis whose ``(a; b)`` rows are ``S`` applied to the old
        ``(a; b)``: the coordinate vectors of new cycles are the columns of
        ``S.T`` ordered ``a_1..a_g, b_1..b_g``."""
        S = np.asarray(S, dtype=np.int64)
        C = S @ self.cycles
        g = self.genus
        return SymplecticBasis(self.model, C[:g], C[g:], self.W2)

    def marking_hash(self):
        h = hashlib.sha256()
        h.update(json.dumps(self.model.to_json(), sort_keys=True).encode())
        h.update(self.cycles.tobytes())
        return h.hexdigest()[:16]

    def to_json(self):
        return {"model": self.model.to_json(), "a": self.a.tolist(), "b": self.b.tolist()}


def standard_J(g):
    Z, I = np.zeros((g, g), dtype=np.int64), np.eye(g, dtype=np.int64)
    return np.block([[Z, I], [-I, Z]])


def symplectic_basis(model: SheetModel, genus, first=None):
    """Symplectic basis of ``H_1`` for a sheet model.

    ``first`` optionally prescribes ``a_1`` as a closed edge chain.
    Verifies the face count against the genus and that face boundaries
    span the radical of the form.
    """
    E, V = model.nedges, model.degree
    F = faces(model)
    if V - E + len(F) != 2 - 2 * genus:
        raise RankDeficient(f"Euler characteristic {V - E + len(F)} does not match genus {genus}")
    W2 = intersection_matrix2(model)
    Z = cycle_space(model)
    idx = None
    if first is not None:
        first = np.asarray(first, dtype=np.int64)
        if np.any(boundary(model, first)):
            raise RankDeficient("prescribed cycle is not closed")
        Z = np.vstack([first[None, :], Z])
        idx = 0
    G2 = Z @ W2 @ Z.T
    if np.any(G2 % 2):
        raise RankDeficient("intersection numbers are not integers")
    A, B, R = symplectic_reduce(Z, G2 // 2, first=idx)
    if len(A) != genus:
        raise RankDeficient(f"found {len(A)} symplectic pairs, expected {genus}")
    for f in F:
        if np.any(np.vstack([A, B]) @ W2 @ f):
            raise RankDeficient("face boundary pairs nontrivially with a basis cycle")
    basis = SymplecticBasis(model, A, B, W2)
    if not np.array_equal(basis.intersection_matrix(), standard_J(genus)):
        raise RankDeficient("reduced intersection matrix is not J")
    return basis


# ------------------------------------------------------- deck action


def deck_edge_permutation(model: SheetModel):
    """Edge map induced by ``t -> rho t``: sheet ``(sigma, m) -> (sigma, m+1)``."""
    n = model.n
    sheet_map = [model.sheet_index((sg, (m + 1) % n)) for sg, m in model.sheets]
    perm = np.empty(model.nedges, dtype=np.int64)
    for e in range(model.nedges):
        i, j = divmod(e, model.nbranch)
        perm[e] = model.edge(sheet_map[i], j)
    return perm


def push_chain(perm, chain):
    out = np.zeros_like(chain)
    out[perm] = chain
    return out


def deck_action_h1(basis: SymplecticBasis):
    """Integer matrix of the deck pushforward on ``(a; b)`` coordinates.

    Column ``l`` holds the coordinates of the image of basis cycle ``l``.
    Raises NonPeriodic if ``M**n != I`` or ``M`` is not symplectic.
    """
    model = basis.model
    perm = deck_edge_permutation(model)
    M = np.array([basis.coords(push_chain(perm, c)) for c in basis.cycles], dtype=np.int64).T
    n, g = model.n, basis.genus
    J = standard_J(g)
    if not np.array_equal(np.linalg.matrix_power(M, n), np.eye(2 * g, dtype=np.int64)):
        raise NonPeriodic("deck matrix does not have order n")
    if not np.array_equal(M.T @ J @ M, J):
        raise NonPeriodic("deck matrix does not preserve the intersection form")
    return M


@dataclass(frozen=True)
class EigenHomology:
    """Basis (columns, complex coordinates over ``(a; b)``) of the
    ``rho**k`` eigenspace of the deck pushforward."""

    k: int
    basis: np.ndarray

    @property
    def dimension(self):
        return self.basis.shape[1]


def expected_eigen_homology_dim(g, n, k):
    return 2 * g if k == 0 else (2 * n + 2) * (g - 1)


def eigen_homology(M, n, k, g=None, sv_tol=1e-8):
    """Eigenspace from the projector ``(1/n) sum rho**(-km) M**m``."""
    rho = np.exp(2j * np.pi / n)
    dim = M.shape[0]
    P = np.zeros((dim, dim), dtype=complex)
    Mm = np.eye(dim)
    for m in range(n):
        P += rho ** (-k * m) * Mm
        Mm = Mm @ M
    P /= n
    U, sv, _ = np.linalg.svd(P)
    rank = int(np.sum(sv > sv_tol))
    from scipy.linalg import qr
    _, _, piv = qr(P, pivoting=True)
    cols = P[:, np.sort(piv[:rank])]
    if g is not None and rank != expected_eigen_homology_dim(g, n, k):
        raise DimensionMismatch(f"dim H_{k} = {rank}, expected {expected_eigen_homology_dim(g, n, k)}")
    return EigenHomology(k, cols)


def pairing_blocks(spaces, g):
    """Pairings ``S_k^T J S_l`` between eigenspaces."""
    J = standard_J(g)
    return {(a.k, b.k): a.basis.T @ J @ b.basis for a in spaces for b in spaces}


def pairing_vanishing_check(spaces, n, g):
    """Max off-block residual and condition numbers of the dual blocks."""
    blocks = pairing_blocks(spaces, g)
    off, conds = 0.0, {}
    for (k, l), B in blocks.items():
        if (k + l) % n:
            off = max(off, float(np.max(np.abs(B))) if B.size else 0.0)
        else:
            conds[(k, l)] = float(np.linalg.cond(B))
    return {"offblock_max": off, "dual_condition": conds}
