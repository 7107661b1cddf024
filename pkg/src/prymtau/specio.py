"""Curve-spec files and the on-disk period cache.

A curve spec is JSON ``{"p": [c0, ...], "q": [c0, ...], "n": int}`` with
ascending coefficients and complex numbers written as ``[re, im]`` pairs
(plain numbers are accepted for real coefficients).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curve_model import build_curve, build_ndifferential
from .errors import ConfigError
from .periods import PeriodData, _assemble, conditioned, period_matrix, spec_hash

# fixed genus-2 configuration used when no spec file is given
DEFAULT_G2_ROOTS = (0.1, 1.2j, -1.0, 1.5, -0.7 - 0.8j, 0.9 - 1.0j)
DEFAULT_Q_ROOTS = (-1.8 + 0.3j, 0.4 + 1.7j, 0.3 - 1.4j, -0.2 + 0.6j, 2.1 - 0.4j, -1.3 - 1.6j)


def _number(v, where):
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(u, (int, float)) and not isinstance(u, bool) for u in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number or [re, im], got {v!r}")


def _encode(z):
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True)
class CurveSpec:
    p: tuple
    q: tuple
    n: int

    @property
    def genus(self):
        return (len(self.p) - 2) // 2

    def to_json(self):
        return {"p": [_encode(c) for c in self.p], "q": [_encode(c) for c in self.q], "n": self.n}

    @property
    def hash(self):
        return spec_hash(self.to_json())

    def build(self):
        """Return ``(curve, w)``; numerical degeneracy is a ComputationError."""
        curve = build_curve(self.p)
        return curve, build_ndifferential(curve, self.n, self.q)


def parse_spec(obj):
    """Validate a decoded spec; every defect is a ConfigError."""
    if not isinstance(obj, dict):
        raise ConfigError("curve spec must be a JSON object")
    extra = set(obj) - {"p", "q", "n"}
    if extra:
        raise ConfigError(f"unknown curve-spec fields: {sorted(extra)}")
    for key in ("p", "q", "n"):
        if key not in obj:
            raise ConfigError(f"curve spec is missing '{key}'")
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if not isinstance(obj["p"], list) or not isinstance(obj["q"], list):
        raise ConfigError("p and q must be coefficient lists")
    p = tuple(_number(v, f"p[{i}]") for i, v in enumerate(obj["p"]))
    q = tuple(_number(v, f"q[{i}]") for i, v in enumerate(obj["q"]))
    if not p or p[-1] == 0 or not q or q[-1] == 0:
        raise ConfigError("leading coefficients of p and q must be nonzero")
    deg = len(p) - 1
    if deg < 3:
        raise ConfigError(f"deg p must be at least 3, got {deg}")
    g = (deg - 1) // 2
    if len(q) - 1 != n * (g - 1):
        raise ConfigError(f"deg q must be n(g-1) = {n * (g - 1)}, got {len(q) - 1}")
    return CurveSpec(p, q, n)


def load_spec(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read curve spec {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"curve spec {path} is not valid JSON: {exc}") from exc
    return parse_spec(obj)


def _coeffs(roots):
    return tuple(complex(c) for c in np.poly(roots)[::-1])


def default_spec(g, n, seed=0):
    """Reproducible spec with simple zeros: a fixed configuration for
    ``g = 2`` and seeded random roots otherwise."""
    if g < 2 or n < 1:
        raise ConfigError("default specs need g >= 2 and n >= 1")
    need = n * (g - 1)
    if g == 2 and need <= len(DEFAULT_Q_ROOTS):
        return CurveSpec(_coeffs(DEFAULT_G2_ROOTS), _coeffs(DEFAULT_Q_ROOTS[:need]), n)
    rng = np.random.default_rng(seed)
    pr = rng.normal(size=2 * g + 2) + 1j * rng.normal(size=2 * g + 2)
    qr = rng.normal(size=need) + 1j * rng.normal(size=need)
    return CurveSpec(_coeffs(pr), _coeffs(qr), n)


class PeriodCache:
    """Edge periods stored as JSON, keyed by spec hash, marking hash and
    the differential list.  The marking itself is rebuilt deterministically
    and only its hash is compared."""

    def __init__(self, directory, enabled=True):
        self.dir = Path(directory) if directory else None
        self.enabled = bool(enabled and directory)
        self.hits = 0

    def _path(self, spec_h, marking_h, diffs):
        key = spec_hash({"spec": spec_h, "marking": marking_h, "diffs": [list(d) for d in diffs]})
        return self.dir / f"{key}.json"

    def get(self, spec_h, basis, diffs):
        if not self.enabled:
            return None
        path = self._path(spec_h, basis.marking_hash(), diffs)
        if not path.exists():
            return None
        try:
            d = json.loads(path.read_text())
            edge = np.array([[complex(*z) for z in row] for row in d["edge"]])
        except (OSError, ValueError, KeyError, TypeError):
            return None
        self.hits += 1
        pd = _assemble(basis, diffs, edge, float(d["error"]))
        return conditioned(pd)

    def put(self, spec_h, basis, pd: PeriodData):
        """Store ``pd`` under the marking it was requested for."""
        if not self.enabled:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self._path(spec_h, basis.marking_hash(), pd.diffs)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(pd.to_json()))
        tmp.replace(path)


def cached_period_matrix(cache, spec_h, basis, diffs):
    """Period data from the cache, or computed and stored."""
    pd = cache.get(spec_h, basis, diffs) if cache is not None else None
    if pd is None:
        pd = period_matrix(basis, diffs)
        if cache is not None:
            cache.put(spec_h, basis, pd)
    return pd

