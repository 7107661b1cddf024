"""Paths in the x-plane and analytic continuation of ``log(x - r)``.

Every multivalued function used in the package is a product
``prod (x - r_k)**alpha_k``; continuing it along a path only requires the
continued logarithms ``L_k = log(x - r_k)``.  On a straight segment from
``a`` the continuation is ``L_k(a) + Log((x - r_k)/(a - r_k))`` with the
principal Log, which is exact because the ratio never crosses the negative
axis unless the segment hits ``r_k``.  On an arc around a root the angle is
tracked explicitly; other roots must lie outside the arc's disk.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SheetTrackingFailure
from .quadrature import adaptive_gl


def principal_logs(x0, roots):
    return np.log(x0 - np.asarray(roots, dtype=complex))


@dataclass(frozen=True)
class Line:
    """Straight segment ``a -> b``.

    ``singular_end = N`` switches to the parametrization
    ``u = 1 - (1 - v)**N`` which tames algebraic endpoint singularities at
    ``b`` of order greater than ``-1``.
    """

    a: complex
    b: complex
    singular_end: int = 0

    @property
    def start(self):
        return complex(self.a)

    @property
    def end(self):
        return complex(self.b)

    def evaluate(self, v, roots, start_logs):
        v = np.asarray(v, dtype=float)
        N = self.singular_end or 1
        # distance to the end in the parameter, kept exact near the end point
        w = (1 - v) ** N
        dw = N * (1 - v) ** (N - 1)
        d = self.b - self.a
        x = self.b - d * w
        r = np.asarray(roots, dtype=complex)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            L = start_logs[:, None] + np.log(((self.b - r) - d * w[None, :]) / (self.a - r))
        return x, d * dw, L

    def reversed(self):
        if self.singular_end:
            raise ValueError("cannot reverse a segment with a singular end")
        return Line(self.b, self.a)

    def to_json(self):
        return {"type": "line", "a": [self.a.real, self.a.imag], "b": [self.b.real, self.b.imag],
                "singular_end": self.singular_end}


@dataclass(frozen=True)
class Arc:
    """Arc ``center + radius * exp(i theta)``, theta from ``theta0`` to
    ``theta1``; a full turn when they differ by 2 pi."""

    center: complex
    radius: float
    theta0: float
    theta1: float

    @property
    def start(self):
        return complex(self.center + self.radius * np.exp(1j * self.theta0))

    @property
    def end(self):
        return complex(self.center + self.radius * np.exp(1j * self.theta1))

    def evaluate(self, v, roots, start_logs):
        v = np.asarray(v, dtype=float)
        th = self.theta0 + (self.theta1 - self.theta0) * v
        x = self.center + self.radius * np.exp(1j * th)
        dx = 1j * (self.theta1 - self.theta0) * (x - self.center)
        roots = np.asarray(roots, dtype=complex)
        L = np.empty((len(roots), len(v)), dtype=complex)
        a = self.start
        for k, r in enumerate(roots):
            dist = abs(r - self.center)
            if dist <= 1e-13 * max(1.0, abs(r)):
                L[k] = start_logs[k] + 1j * (th - self.theta0)
            elif dist < self.radius * (1 + 1e-12):
                raise SheetTrackingFailure("arc disk contains a root other than its center")
            else:
                L[k] = start_logs[k] + np.log((x - r) / (a - r))
        return x, dx, L

    def reversed(self):
        return Arc(self.center, self.radius, self.theta1, self.theta0)

    def to_json(self):
        return {"type": "arc", "center": [self.center.real, self.center.imag], "radius": self.radius,
                "theta0": self.theta0, "theta1": self.theta1}


def segment_from_json(d):
    if d["type"] == "line":
        return Line(complex(*d["a"]), complex(*d["b"]), d.get("singular_end", 0))
    return Arc(complex(*d["center"]), d["radius"], d["theta0"], d["theta1"])


@dataclass(frozen=True)
class Path:
    """A chain of segments; ``roots`` are the points whose logs are tracked."""

    segments: tuple
    roots: tuple = field(default=())

    @property
    def start(self):
        return self.segments[0].start

    @property
    def end(self):
        return self.segments[-1].end

    def end_logs(self, start_logs):
        L = np.asarray(start_logs, dtype=complex)
        for seg in self.segments:
            _, _, Ls = seg.evaluate(np.array([1.0]), self.roots, L)
            L = Ls[:, 0]
        return L

    def integrate(self, f, start_logs, tol=1e-12, order=16):
        """Integrate ``f(x, L)`` (shape ``(M, npts)``, coefficient of dx) along
        the path.  Returns ``(values, error_estimate)``."""
        L0 = np.asarray(start_logs, dtype=complex)
        total, err = 0, 0.0
        for seg in self.segments:
            def g(v, seg=seg, L0=L0):
                x, dx, L = seg.evaluate(v, self.roots, L0)
                return np.atleast_2d(f(x, L)) * dx
            val, e = adaptive_gl(g, tol=tol, order=order)
            total = total + val
            err += e
            if seg is not self.segments[-1]:
                _, _, Ls = seg.evaluate(np.array([1.0]), self.roots, L0)
                L0 = Ls[:, 0]
        return total, err

    def reversed(self):
        return Path(tuple(s.reversed() for s in reversed(self.segments)), self.roots)

    def to_json(self):
        return [s.to_json() for s in self.segments]


def lollipop(p0, b, radius, roots, turns=1):
    """Ray from ``p0`` towards ``b``, a counterclockwise circle of given
    radius around ``b``, and the ray back."""
    d = (b - p0) / abs(b - p0)
    near = b - radius * d
    th0 = float(np.angle(-d))
    return Path((Line(p0, near), Arc(b, radius, th0, th0 + 2 * np.pi * turns), Line(near, p0)), tuple(roots))


def track_logs(xs, roots, start_logs, max_halvings=30):
    """Continue ``log(x - r)`` along a polyline by small principal steps.

    Steps whose argument change exceeds pi/4 are subdivided; a step that
    cannot be resolved raises SheetTrackingFailure.  This is the generic
    stepping tracker used to certify monodromy independently of the exact
    segment formulas.
    """
    roots = np.asarray(roots, dtype=complex)
    L = np.asarray(start_logs, dtype=complex).copy()
    for x0, x1 in zip(xs[:-1], xs[1:]):
        stack = [(x0, x1, 0)]
        while stack:
            a, b, depth = stack.pop()
            ratio = (b - roots) / (a - roots)
            if np.all(np.abs(np.angle(ratio)) < np.pi / 4):
                L = L + np.log(ratio)
                continue
            if depth >= max_halvings:
                raise SheetTrackingFailure("continuation step rejected too many times")
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
    return L
