"""Command-line front end.

``prymtau run <experiment> [options]`` writes a JSON report (and a CSV for
degeneration families) and exits with 0 when every asserted check passes,
1 on a failed check, 2 on a configuration error (nothing is written) and
3 when a computation fails.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CheckFailure, ComputationError, ConfigError

EXPERIMENTS = ("ranks", "homology", "periods", "tau-homogeneity", "tau-modular",
               "degenerate-deg", "degenerate-d0", "phi-k", "variational")

DEFAULT_TOLERANCES = {
    "symmetry": 1e-8,
    "bilinear": 1e-8,
    "offblock": 1e-10,
    "other_eigenspaces": 1e-8,
    "kappa_rel": 1e-6,
    "modular_rel": 1e-6,
    "exponent_rel": 0.02,
    "min_r2": 0.999,
    "variational_rel": 1e-3,
}

FAMILY_EXPERIMENTS = ("degenerate-deg", "degenerate-d0", "phi-k")


@dataclass
class ExperimentConfig:
    experiment: str = None
    spec: str = None
    g: int = 2
    n: int = 2
    seed: int = 0
    jobs: int = 1
    cache: bool = True
    cache_dir: str = ".prymtau-cache"
    out: str = None
    csv: str = None
    tolerances: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    k: int = None

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        for name in ("g", "n", "seed", "jobs"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{name} must be an integer")
        if self.g < 2 or self.n < 1 or self.jobs < 1:
            raise ConfigError("need g >= 2, n >= 1 and jobs >= 1")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        for key, val in self.tolerances.items():
            if isinstance(val, bool) or not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"tolerance {key} must be a positive number")
        unknown = set(self.grid) - {"points", "ratio", "eps0"}
        if unknown:
            raise ConfigError(f"unknown grid fields: {sorted(unknown)}")
        if self.k is not None and not 1 <= self.k <= self.n - 1:
            raise ConfigError("k must lie in 1..n-1")

    @property
    def tol(self):
        return {**DEFAULT_TOLERANCES, **self.tolerances}


def load_config(path):
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(obj) - names
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return obj


# ------------------------------------------------------------ reports


class Report:
    def __init__(self):
        self.checks = []
        self.result = {}
        self.marking_hashes = []
        self.csv_rows = None

    def check(self, name, value, threshold, passed):
        self.checks.append({"name": name, "value": _plain(value), "threshold": _plain(threshold),
                            "pass": bool(passed)})

    @property
    def failures(self):
        return [c["name"] for c in self.checks if not c["pass"]]


def _plain(v):
    """JSON-safe copy: complex as [re, im], Fractions as strings."""
    if isinstance(v, dict):
        return {str(k): _plain(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(u) for u in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


# ------------------------------------------------------------ experiments


def _base_marking(curve):
    from .homology import base_sheet_model, symplectic_basis
    return symplectic_basis(base_sheet_model(curve), curve.genus)


def _base_periods(ctx, curve):
    from .periods import base_differentials
    from .specio import cached_period_matrix
    basis = _base_marking(curve)
    pd = cached_period_matrix(ctx.cache, ctx.spec.hash, basis, base_differentials(curve))
    ctx.report.marking_hashes.append(pd.marking_hash())
    return pd


def _tau_context(ctx):
    from .tau import build_tau_context
    curve, w = ctx.spec.build()
    return build_tau_context(w, _base_periods(ctx, curve))


def exp_ranks(ctx):
    from .cyclic_cover import build_cover, eigen_basis, expected_eigen_rank, formula_genus
    _, w = ctx.spec.build()
    cover = build_cover(w)
    g, n = w.curve.genus, w.n
    ranks = [eigen_basis(cover, k).rank for k in range(n)]
    expected = [expected_eigen_rank(g, n, k) for k in range(n)]
    r = ctx.report
    r.result.update(genus_hat=cover.genus_hat, formula_genus=formula_genus(g, n), eigen_ranks=ranks,
                    expected_ranks=expected)
    r.check("genus_formula", cover.genus_hat, formula_genus(g, n), cover.genus_hat == formula_genus(g, n))
    r.check("eigen_ranks", ranks, expected, ranks == expected)
    r.check("rank_total", sum(ranks), cover.genus_hat, sum(ranks) == cover.genus_hat)


def _cover_marking(w):
    from .cyclic_cover import build_cover
    from .homology import cover_sheet_model, symplectic_basis
    cover = build_cover(w)
    return cover, symplectic_basis(cover_sheet_model(cover), cover.genus_hat)


def exp_homology(ctx):
    from .homology import (deck_action_h1, eigen_homology, expected_eigen_homology_dim,
                           pairing_vanishing_check)
    _, w = ctx.spec.build()
    cover, basis = _cover_marking(w)
    ctx.report.marking_hashes.append(basis.marking_hash())
    M = deck_action_h1(basis)
    g, n = w.curve.genus, w.n
    spaces = [eigen_homology(M, n, k) for k in range(n)]
    dims = [s.dimension for s in spaces]
    expected = [expected_eigen_homology_dim(g, n, k) for k in range(n)]
    pair = pairing_vanishing_check(spaces, n, basis.genus)
    tol = ctx.config.tol["offblock"]
    r = ctx.report
    r.result.update(genus_hat=cover.genus_hat, dimensions=dims, expected_dimensions=expected,
                    offblock_max=pair["offblock_max"],
                    dual_condition={f"{k}-{l}": c for (k, l), c in pair["dual_condition"].items()})
    r.check("eigenspace_dimensions", dims, expected, dims == expected)
    r.check("selection_rule", pair["offblock_max"], tol, pair["offblock_max"] < tol)


def _period_checks(r, name, pd, tol):
    sym, eig, bil = pd.symmetry_residual(), pd.min_imag_eig(), pd.riemann_bilinear_residual()
    r.result[name] = {"genus": pd.genus, "symmetry_residual": sym, "min_imag_eig": eig,
                      "bilinear_residual": bil, "error": pd.error, "marking_hash": pd.marking_hash(),
                      "Omega": pd.Omega}
    r.check(f"{name}_symmetry", sym, tol["symmetry"], sym < tol["symmetry"])
    r.check(f"{name}_positivity", eig, 0.0, eig > 0)
    r.check(f"{name}_bilinear", bil, tol["bilinear"], bil < tol["bilinear"])


def exp_periods(ctx):
    from .homology import deck_action_h1, eigen_homology
    from .periods import cover_differentials, edge_periods, homological_coordinates, ray_integrals, v_exponents
    from .specio import cached_period_matrix
    curve, w = ctx.spec.build()
    tol = ctx.config.tol
    r = ctx.report
    _period_checks(r, "base", _base_periods(ctx, curve), tol)
    cover, basis = _cover_marking(w)
    diffs, _ = cover_differentials(cover)
    pd = cached_period_matrix(ctx.cache, ctx.spec.hash, basis, diffs)
    r.marking_hashes.append(pd.marking_hash())
    _period_checks(r, "cover", pd, tol)
    M = deck_action_h1(basis)
    spaces = [eigen_homology(M, w.n, k) for k in range(w.n)]
    model = basis.model
    vx = [v_exponents(cover)]
    I, _ = ray_integrals(model, vx)
    hc = homological_coordinates(basis, spaces, edge_periods(model, vx, I)[0])
    need = (2 * w.n + 2) * (curve.genus - 1)
    r.result["homological_coordinates"] = {"values": hc.values, "other_max": hc.other_max}
    r.check("coordinate_count", len(hc), need, len(hc) == need)
    r.check("other_eigenspaces", hc.other_max, tol["other_eigenspaces"], hc.other_max < tol["other_eigenspaces"])


def _psi_coefficient(g, n):
    return Fraction((g - 1) * (2 * n + 1), 6 * n * (n + 1))


def exp_tau_homogeneity(ctx):
    from .tau import tau_homogeneity
    tc = _tau_context(ctx)
    fit = tau_homogeneity(tc)
    tol = ctx.config.tol["kappa_rel"]
    r = ctx.report
    r.result.update(abs_tau=float(np.exp(fit.log_abs[len(fit.deltas) // 2])), kappa_measured=fit.kappa,
                    kappa_expected=fit.expected, r2=fit.r2, deltas=fit.deltas, log_abs_tau=fit.log_abs)
    r.check("kappa", fit.relative_error, tol, fit.relative_error < tol)
    if tc.w.simple:
        psi = _psi_coefficient(tc.genus, tc.n)
        r.result["psi_coefficient"] = psi
        measured = Fraction(fit.kappa).limit_denominator(1000)
        r.check("kappa_equals_psi_coefficient", measured, psi,
                measured == psi and fit.expected == psi)


def exp_tau_modular(ctx):
    from .tau import log_abs_tau, modular_covariance, random_symplectic
    tc = _tau_context(ctx)
    rng = np.random.default_rng(ctx.config.seed)
    tol = ctx.config.tol["modular_rel"]
    res = []
    for i in range(3):
        S = random_symplectic(tc.genus, rng)
        ratio, det = modular_covariance(tc, S)
        rel = abs(ratio / det - 1)
        res.append({"S": S, "ratio": ratio, "abs_det": det, "residual": rel})
        ctx.report.check(f"modular_{i}", rel, tol, rel < tol)
    ctx.report.result.update(abs_tau=float(np.exp(log_abs_tau(tc).log_abs)),
                             modular_residuals=[d["residual"] for d in res], transforms=res)


def _grid(ctx, default_eps0=None):
    from .degeneration import Grid
    gr = ctx.config.grid
    eps0 = gr.get("eps0", default_eps0)
    return Grid(M=int(gr.get("points", 12)), ratio=float(gr.get("ratio", 0.8)), eps0=eps0)


def _collision_setup(curve, w):
    """Collide the ``q`` root nearest a branch point into it."""
    qr = list(w.q_roots)
    best = min(((abs(q - e), i, j) for i, q in enumerate(qr) for j, e in enumerate(curve.roots)))
    _, i, j = best
    cof = qr[:i] + qr[i + 1:]
    return j, cof


def _family_json(fam, fit=None):
    out = {"kind": fam.kind, "n": fam.n, "g": fam.g, "mode": fam.mode, "grid": fam.grid,
           "transverse": np.abs(fam.transverse), "truncated": fam.truncated,
           "observable": {k: np.abs(v) if np.iscomplexobj(v) else v for k, v in fam.observables.items()},
           "expected": fam.expected, "meta": fam.meta}
    if fit is not None:
        out["fit"] = fit.to_json()
    return out


def _fit_check(ctx, name, fit):
    tol = ctx.config.tol
    ok = (fit.r2 >= tol["min_r2"] and abs(fit.slope - fit.expected) <= tol["exponent_rel"] * abs(fit.expected))
    ctx.report.check(name, fit.slope, fit.expected, ok)


def exp_degenerate_deg(ctx):
    from .degeneration import collide_zeros_family, fit_tau_exponent
    curve, w = ctx.spec.build()
    target, cof = _collision_setup(curve, w)
    fam = collide_zeros_family(curve, w.n, target, cof, grid=_grid(ctx), q_lead=w.q_lead,
                               jobs=ctx.config.jobs)
    fit = fit_tau_exponent(fam)
    ctx.report.result["family"] = _family_json(fam, fit)
    ctx.report.csv_rows = fam.csv_rows()
    _fit_check(ctx, "tau_exponent_deg", fit)


def exp_degenerate_d0(ctx):
    from .degeneration import fit_tau_exponent, pinch_family
    curve, w = ctx.spec.build()
    roots = list(curve.roots)
    d = [(abs(roots[i] - roots[j]), i, j) for i in range(len(roots)) for j in range(i + 1, len(roots))]
    _, i, j = min(d)
    centre = 0.5 * (roots[i] + roots[j])
    others = [e for m, e in enumerate(roots) if m not in (i, j)]
    qr = [q for q, m in zip(w.q_roots, w.q_mult) for _ in range(m)]
    fam = pinch_family(others, centre, w.n, qr, grid=_grid(ctx), q_lead=w.q_lead, jobs=ctx.config.jobs)
    fit = fit_tau_exponent(fam)
    ctx.report.result["family"] = _family_json(fam, fit)
    ctx.report.csv_rows = fam.csv_rows()
    _fit_check(ctx, "tau_exponent_d0", fit)


def exp_phi_k(ctx):
    from .degeneration import collide_zeros_family, phi_k_degeneration
    curve, w = ctx.spec.build()
    if w.n < 2:
        raise ConfigError("phi-k needs n >= 2")
    target, cof = _collision_setup(curve, w)
    fam = collide_zeros_family(curve, w.n, target, cof, grid=_grid(ctx, 1e-5), q_lead=w.q_lead,
                               with_tau=False, jobs=ctx.config.jobs)
    ks = [ctx.config.k] if ctx.config.k else list(range(1, w.n))
    reports = {}
    for k in ks:
        rep = phi_k_degeneration(fam, k, jobs=ctx.config.jobs)
        reports[str(k)] = rep.to_json()
        ctx.report.check(f"phi_{k}_rank_drop", rep.rank_drop, rep.expected_drop, rep.rank_ok)
        ctx.report.check(f"phi_{k}_exponent", None if rep.hodge_fit is None else rep.hodge_fit.slope,
                         rep.intrinsic, rep.passed)
    ctx.report.result.update(family=_family_json(fam), phi_k=reports)
    ctx.report.csv_rows = fam.csv_rows()


def exp_variational(ctx):
    from .tau import StratumFamily, tau_variational_residual
    _, w = ctx.spec.build()
    fam = StratumFamily(w)
    tol = ctx.config.tol["variational_rel"]
    rows, best = [], np.inf
    for i in range(fam.H1.dimension):
        res = tau_variational_residual(w, i, fam=fam)
        rows.append({"index": i, "fd": res.fd, "contour": res.contour, "residual": res.residual})
        best = min(best, res.residual)
        if res.residual < tol:
            break
    ctx.report.result["coordinates"] = rows
    ctx.report.check("variational_best", best, tol, best < tol)


RUNNERS = {
    "ranks": exp_ranks,
    "homology": exp_homology,
    "periods": exp_periods,
    "tau-homogeneity": exp_tau_homogeneity,
    "tau-modular": exp_tau_modular,
    "degenerate-deg": exp_degenerate_deg,
    "degenerate-d0": exp_degenerate_d0,
    "phi-k": exp_phi_k,
    "variational": exp_variational,
}


# ------------------------------------------------------------ driver


@dataclass
class RunContext:
    config: ExperimentConfig
    spec: object
    cache: object
    report: Report


def build_parser():
    ap = argparse.ArgumentParser(prog="prymtau", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a named experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--spec", help="curve-spec JSON file")
    run.add_argument("--config", help="JSON config with ExperimentConfig field names")
    run.add_argument("--g", type=int, help="genus of the default curve")
    run.add_argument("--n", type=int, help="order of the differential for the default curve")
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int)
    run.add_argument("--k", type=int, help="eigenspace index for phi-k")
    run.add_argument("--no-cache", dest="cache", action="store_false", default=None)
    run.add_argument("--cache-dir")
    run.add_argument("--out", help="report JSON path")
    run.add_argument("--csv", help="CSV path for degeneration families")
    run.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    run.add_argument("--points", type=int, help="grid size")
    run.add_argument("--ratio", type=float, help="geometric grid ratio")
    run.add_argument("--eps0", type=float, help="largest grid value")
    return ap


def make_config(args):
    values = load_config(args.config) if args.config else {}
    for name in ("spec", "g", "n", "seed", "jobs", "k", "cache", "cache_dir", "out", "csv"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    tols = dict(values.get("tolerances", {}))
    for item in args.tol:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        try:
            tols[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"tolerance {key} is not a number") from exc
    grid = dict(values.get("grid", {}))
    for name in ("points", "ratio", "eps0"):
        v = getattr(args, name)
        if v is not None:
            grid[name] = v
    values.update(tolerances=tols, grid=grid, experiment=args.experiment)
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def run(cfg: ExperimentConfig):
    """Run one experiment; returns ``(exit_code, report_dict)`` and writes
    the outputs.  Configuration errors propagate before anything is written."""
    from .specio import PeriodCache, default_spec, load_spec
    spec = load_spec(cfg.spec) if cfg.spec else default_spec(cfg.g, cfg.n, cfg.seed)
    out = Path(cfg.out or f"{cfg.experiment}.json")
    csv_path = Path(cfg.csv or out.with_suffix(".csv"))
    cache = PeriodCache(cfg.cache_dir, cfg.cache)
    ctx = RunContext(cfg, spec, cache, Report())
    error = None
    try:
        RUNNERS[cfg.experiment](ctx)
    except ComputationError as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
    report = {
        "schema": 1,
        "version": __version__,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "spec": spec.to_json(),
        "spec_hash": spec.hash,
        "marking_hash": ctx.report.marking_hashes,
        "tolerances": cfg.tol,
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("tolerances",)},
        "checks": ctx.report.checks,
        "failures": ctx.report.failures,
        "result": _plain(ctx.report.result),
        "error": error,
    }
    report["config"] = _plain(report["config"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=1))
    if ctx.report.csv_rows is not None:
        with open(csv_path, "w", newline="") as fh:
            csv.writer(fh).writerows(ctx.report.csv_rows)
    if error is not None:
        code = 3
    elif ctx.report.failures:
        code = 1
    else:
        code = 0
    return code, report


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = make_config(args)
        code, report = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    summary = "pass" if code == 0 else ("computation error" if code == 3 else "FAIL: " + ", ".join(report["failures"]))
    print(f"{report['experiment']}: {summary}")
    return code


if __name__ == "__main__":
    sys.exit(main())
