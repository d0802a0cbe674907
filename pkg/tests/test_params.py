import dataclasses
import math

import pytest

import stabmap as sm
from stabmap.errors import DomainError, StructuralError
from stabmap.params import (dumps_spec, loads_spec, read_param, validate_spec)


def test_bind_round_trip(spec2):
    s = sm.bind(spec2, "unit1.Kp4", 0.3)
    assert read_param(s, "unit1.Kp4") == 0.3
    assert read_param(spec2, "unit1.Kp4") == 0.5  # original untouched
    assert read_param(s, "unit2.Kp4") == 0.5


def test_bind_setpoint_scenario(spec2):
    s = sm.bind(spec2, "unit2.Qgref", -0.13)
    assert read_param(s, "unit2.Qgref") == -0.13
    assert read_param(s, "unit1.Qgref") == 0.0


def test_bind_all_path_kinds(spec2):
    cases = {
        "unit1.Rs": 0.05, "unit2.Lc": 0.2, "unit1.omega_mref": 1.05,
        "unit2.Ki7": 3.5, "feeder2.R": 0.02, "trunk.L": 0.4,
        "grid.V": 0.97, "grid.theta": 0.1, "unit1.base_mva": 2.0,
    }
    s = spec2
    for path, val in cases.items():
        s = sm.bind(s, path, val)
    for path, val in cases.items():
        assert read_param(s, path) == val


def test_bind_out_of_range_unit(spec3):
    with pytest.raises(StructuralError, match="unit9.Kp4"):
        sm.bind(spec3, "unit9.Kp4", 1.0)


@pytest.mark.parametrize("path", ["unit1.bogus", "feeder1.X", "grid.f", "junk"])
def test_bad_paths_rejected(spec2, path):
    with pytest.raises(StructuralError):
        read_param(spec2, path)
    with pytest.raises(StructuralError):
        sm.bind(spec2, path, 1.0)


def test_toml_template_round_trip(spec2):
    text = dumps_spec(spec2)
    assert loads_spec(text) == spec2


def test_toml_explicit_round_trip(spec2):
    s = sm.bind(spec2, "unit2.Qgref", -0.13)
    assert loads_spec(dumps_spec(s)) == s


def test_shipped_config_matches_defaults(spec2):
    import os

    path = os.path.join(os.path.dirname(__file__), "..", "config",
                        "default_farm.toml")
    assert sm.load_spec(path) == spec2


def test_default_spec_shape(spec3):
    assert spec3.n_units == 3
    assert spec3.n_states == 19 * 3 + 2 * 4
    assert spec3.system_mva == pytest.approx(3 * 1.5)
    assert spec3.units[0].machine.omega_b == pytest.approx(100 * math.pi)


def test_validate_rejects_bad_leakage(spec1):
    bad = sm.bind(spec1, "unit1.Lm", 3.2)   # Lm > Ls
    with pytest.raises(DomainError):
        validate_spec(bad)


def test_validate_rejects_negative_gain(spec1):
    with pytest.raises(DomainError):
        validate_spec(sm.bind(spec1, "unit1.Ki3", -1.0))


def test_feeder_count_enforced(spec2):
    with pytest.raises(StructuralError):
        dataclasses.replace(spec2, feeders=spec2.feeders[:1])


def test_spec_is_hashable_value_type(spec2):
    alt = sm.bind(spec2, "unit1.Kp1", 10.0)   # same value -> equal spec
    assert alt == spec2 and hash(alt) == hash(spec2)
    assert sm.bind(spec2, "unit1.Kp1", 11.0) != spec2
