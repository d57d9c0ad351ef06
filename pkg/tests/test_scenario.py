import json

import numpy as np
import pytest

from offload_commons.errors import ConfigError
from offload_commons.scenario import from_dict, load_scenario, random_scenario, save_scenario, to_dict, with_value

import scenarios as S


@pytest.mark.parametrize("name", sorted(S.ACCEPTANCE))
def test_round_trip(name, tmp_path):
    sc = S.ACCEPTANCE[name]()
    assert from_dict(to_dict(sc)) == sc
    path = tmp_path / "c.json"
    save_scenario(sc, path)
    assert load_scenario(path).fingerprint() == sc.fingerprint()


@pytest.mark.parametrize("seed", range(5))
def test_random_round_trip(seed):
    sc = random_scenario(np.random.default_rng(seed), "any")
    assert from_dict(to_dict(sc)) == sc


def _base():
    return to_dict(S.wifi_floor())


def _errors(data):
    with pytest.raises(ConfigError) as exc:
        from_dict(data)
    return exc.value.errors


def test_class_ordering_is_enforced():
    data = _base()
    data["classes"]["premium"]["min_quality"] = data["classes"]["bulk"]["min_quality"]
    assert any("class ordering" in e for e in _errors(data))


def test_cost_ordering_is_enforced():
    data = _base()
    lic = next(p for p in data["providers"] if p.get("licensed"))
    lic["licensed"]["cost_per_unit"] = 0.0
    assert any("cost ordering" in e for e in _errors(data))


def test_every_problem_is_reported():
    data = _base()
    data["unlicensed"]["capacity"] = -5.0
    data["solver"]["grid_steps"] = 1
    errs = _errors(data)
    assert len(errs) >= 2
    assert all(":" in e for e in errs)


def test_parse_errors_carry_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "classes": ,\n}')
    with pytest.raises(ConfigError) as exc:
        load_scenario(path)
    assert "line 2" in str(exc.value) and "column" in str(exc.value)


def test_with_value_rejects_unknown_paths():
    data = _base()
    assert with_value(data, "providers.1.backhaul.capacity", 12.0) != data
    with pytest.raises(ConfigError):
        with_value(data, "providers.7.nothing", 1.0)


def test_fingerprint_tracks_content():
    a = S.tragedy()
    assert a.fingerprint() == S.tragedy().fingerprint()
    assert a.fingerprint() != S.abundance().fingerprint()
    assert json.loads(json.dumps(to_dict(a))) == to_dict(a)
