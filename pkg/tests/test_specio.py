import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prymtau.errors import ConfigError
from prymtau.homology import base_sheet_model, symplectic_basis
from prymtau.periods import base_differentials, period_matrix
from prymtau.specio import PeriodCache, cached_period_matrix, default_spec, load_spec, parse_spec

GOOD = {"p": [1, 0, 0, 0, 0, [0.5, 1], 1], "q": [[1, -1], 1], "n": 1}


def test_parse_roundtrip():
    spec = parse_spec(GOOD)
    assert spec.genus == 2
    assert spec.p[5] == 0.5 + 1j
    again = parse_spec(json.loads(json.dumps(spec.to_json())))
    assert again == spec and again.hash == spec.hash


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d.pop("q"),
    lambda d: d.update(n=0),
    lambda d: d.update(n=True),
    lambda d: d.update(p=[1, 0, 1]),
    lambda d: d.update(p=GOOD["p"][:-1] + [0]),
    lambda d: d.update(q=[1, 2, 3]),
    lambda d: d.update(p=["a"] + GOOD["p"][1:]),
    lambda d: d.update(p=[[1, 2, 3]] + GOOD["p"][1:]),
])
def test_parse_rejects(mutate):
    d = json.loads(json.dumps(GOOD))
    mutate(d)
    with pytest.raises(ConfigError):
        parse_spec(d)


def test_load_spec_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_spec(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_spec(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(GOOD))
    assert load_spec(good) == parse_spec(GOOD)


@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 50))
def test_default_spec_valid_and_reproducible(g, n, seed):
    spec = default_spec(g, n, seed)
    assert spec == default_spec(g, n, seed)
    assert spec.genus == g and len(spec.q) - 1 == n * (g - 1)
    assert parse_spec(spec.to_json()) == parse_spec(json.loads(json.dumps(spec.to_json())))


def test_period_cache_roundtrip(tmp_path):
    curve, _ = default_spec(2, 2).build()
    basis = symplectic_basis(base_sheet_model(curve), 2)
    diffs = base_differentials(curve)
    cache = PeriodCache(tmp_path, True)
    pd1 = cached_period_matrix(cache, "h", basis, diffs)
    assert cache.hits == 0 and len(list(tmp_path.glob("*.json"))) == 1
    pd2 = cached_period_matrix(cache, "h", basis, diffs)
    assert cache.hits == 1
    assert np.array_equal(pd1.Omega, pd2.Omega)
    assert np.allclose(pd1.Omega, period_matrix(basis, diffs).Omega, atol=0)


def test_period_cache_disabled(tmp_path):
    cache = PeriodCache(tmp_path, False)
    curve, _ = default_spec(2, 2).build()
    basis = symplectic_basis(base_sheet_model(curve), 2)
    cached_period_matrix(cache, "h", basis, base_differentials(curve))
    assert not list(tmp_path.iterdir())
