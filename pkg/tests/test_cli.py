import json

import pytest

from prymtau import cli
from prymtau.errors import ConfigError


def _run(tmp_path, *args):
    out = tmp_path / "report.json"
    code = cli.main(["run", *args, "--out", str(out), "--cache-dir", str(tmp_path / "cache")])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_ranks(tmp_path):
    code, rep = _run(tmp_path, "ranks", "--n", "3")
    assert code == 0 and not rep["failures"]
    assert rep["result"]["eigen_ranks"] == [2, 5, 3]
    assert rep["schema"] == 1 and rep["config"]["n"] == 3
    for key in ("version", "seed", "spec", "spec_hash", "marking_hash", "tolerances", "checks"):
        assert key in rep


def test_malformed_spec_writes_nothing(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"p": [1, 0, 1], "q": [1], "n": 2}))
    code, rep = _run(tmp_path, "periods", "--spec", str(spec))
    assert code == 2 and rep is None
    assert not (tmp_path / "cache").exists()


def test_unknown_config_field(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, rep = _run(tmp_path, "ranks", "--config", str(cfg))
    assert code == 2 and rep is None


@pytest.mark.parametrize("flags", [["--tol", "nope=1"], ["--tol", "kappa_rel"], ["--n", "3", "--k", "5"],
                                   ["--jobs", "0"]])
def test_bad_flags(tmp_path, flags):
    code, rep = _run(tmp_path, "ranks", *flags)
    assert code == 2 and rep is None


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "seed": 7, "tolerances": {"kappa_rel": 1e-3}}))
    args = cli.build_parser().parse_args(["run", "ranks", "--config", str(cfg), "--n", "3",
                                          "--tol", "modular_rel=1e-4"])
    c = cli.make_config(args)
    assert (c.n, c.seed) == (3, 7)
    assert c.tol["kappa_rel"] == 1e-3 and c.tol["modular_rel"] == 1e-4


def test_config_validation():
    with pytest.raises(ConfigError):
        cli.ExperimentConfig(experiment="nope").validate()
    with pytest.raises(ConfigError):
        cli.ExperimentConfig(experiment="ranks", grid={"size": 3}).validate()


def test_periods_idempotent_with_cache(tmp_path):
    code1, r1 = _run(tmp_path, "periods")
    code2, r2 = _run(tmp_path, "periods")
    code3, r3 = _run(tmp_path, "periods", "--no-cache")
    assert code1 == code2 == code3 == 0
    assert r1["marking_hash"] == r2["marking_hash"] == r3["marking_hash"]
    assert r1["result"] == r2["result"] == r3["result"]
    assert list((tmp_path / "cache").glob("*.json"))


def test_tau_homogeneity(tmp_path):
    code, rep = _run(tmp_path, "tau-homogeneity", "--n", "3")
    assert code == 0 and not rep["failures"]


def test_tolerance_failure_exit_code(tmp_path):
    code, rep = _run(tmp_path, "tau-homogeneity", "--tol", "kappa_rel=1e-30")
    assert code == 1 and rep["failures"]
