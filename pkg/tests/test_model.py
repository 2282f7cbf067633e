import pytest

from isosim.errors import IsosimError, ValidationError
from isosim.model import BUILTINS, ModelSpec, builtin, validate


def two_wires(**extra):
    raw = {
        "wires": [{"name": "x1", "sites": 4}, {"name": "x2", "sites": 5, "mass": 2.0}],
        "pair_potentials": [{"i": "x1", "j": "x2", "expr": "0.5*(x1-x2)^2"}],
    }
    raw.update(extra)
    return raw


def test_valid_two_wire_model():
    m = validate(two_wires())
    assert isinstance(m, ModelSpec)
    assert m.num_wires == 2 and len(m.pairs) == 1
    assert m.wire("x2").mass == 2.0
    assert m.wire("x1").length == 1.0
    assert m.dimension == 20
    assert m.scale == 1.0


def test_dangling_reference():
    raw = two_wires(pair_potentials=[{"i": "x1", "j": "x9", "expr": "x1*x9"}])
    with pytest.raises(ValidationError) as exc:
        validate(raw)
    assert any("dangling" in v and "x9" in v for v in exc.value.violations)


def test_unbound_constant_in_field():
    raw = two_wires(one_body=[{"wire": "x1", "expr": "k0*x1"}])
    with pytest.raises(ValidationError) as exc:
        validate(raw)
    assert any("unbound" in v and "k0" in v for v in exc.value.violations)


def test_declared_constant_is_accepted():
    m = validate(two_wires(one_body=[{"wire": "x1", "expr": "k0*x1*sin(t)"}], constants={"k0": 3}))
    assert m.constants == {"k0": 3.0}
    assert m.time_dependent


def test_all_violations_reported():
    raw = {
        "wires": [
            {"name": "x1", "sites": 1},
            {"name": "x1", "sites": 4, "mass": -1},
            {"name": "y", "sites": 4, "length": 0},
        ],
        "pair_potentials": [{"i": "x1", "j": "x1", "expr": "x1"}],
        "one_body": [{"wire": "x3", "expr": "x3 +"}],
        "scale": 0,
        "extra": True,
    }
    with pytest.raises(ValidationError) as exc:
        validate(raw)
    text = "\n".join(exc.value.violations)
    for fragment in ["sites", "duplicate", "mass", "length", "x<digits>", "distinct",
                     "dangling", "offset", "scale", "extra: unknown key"]:
        assert fragment in text
    assert len(exc.value.violations) >= 9


def test_pair_variable_outside_pair_rejected():
    raw = {
        "wires": [{"name": f"x{k}", "sites": 3} for k in (1, 2, 3)],
        "pair_potentials": [{"i": "x1", "j": "x2", "expr": "x1*x3"}],
    }
    with pytest.raises(ValidationError, match="x3"):
        validate(raw)


def test_time_not_allowed_in_pairs():
    raw = two_wires(pair_potentials=[{"i": "x1", "j": "x2", "expr": "t*x1*x2"}])
    with pytest.raises(ValidationError, match="'t'"):
        validate(raw)


def test_duplicate_pair_either_order():
    raw = two_wires(pair_potentials=[
        {"i": "x1", "j": "x2", "expr": "x1"},
        {"i": "x2", "j": "x1", "expr": "x2"},
    ])
    with pytest.raises(ValidationError, match="second potential"):
        validate(raw)


@pytest.mark.parametrize("name", ["pi", "t", "x4", "sin"])
def test_reserved_constant_names(name):
    with pytest.raises(ValidationError, match="reserved"):
        validate(two_wires(constants={name: 1.0}))


def test_unknown_nested_key_reports_path():
    raw = two_wires()
    raw["wires"][0]["colour"] = "red"
    with pytest.raises(ValidationError, match=r"wires\[0\]\.colour: unknown key"):
        validate(raw)


def test_validate_is_idempotent():
    m = validate(two_wires(one_body=[{"wire": "x2", "expr": "x2^2"}], scale=3.0))
    assert validate(m) == m
    assert validate(m.to_dict()) == m


def test_with_scale():
    m = validate(two_wires())
    assert m.with_scale(2.5).scale == 2.5
    assert m.with_scale(2.5).pairs == m.pairs


def test_builtin_box():
    m = builtin("box", {"N": 16})
    assert (m.num_wires, len(m.pairs), len(m.fields)) == (1, 0, 0)


def test_builtin_coupled_harmonic_with_greek_keys():
    m = builtin("coupled_harmonic", {"ω": 40, "κ": 200, "N": 24})
    assert (m.num_wires, len(m.pairs), len(m.fields)) == (2, 1, 2)
    assert m.constants["kappa"] == 200 and m.constants["omega"] == 40


def test_builtin_double_well_chain():
    m = builtin("double_well_chain", {"M": 4, "N": 6})
    assert m.num_wires == 4 and len(m.pairs) == 3 and len(m.fields) == 4


def test_builtin_errors():
    with pytest.raises(IsosimError, match="unknown builtin"):
        builtin("frobnicate", {})
    with pytest.raises(IsosimError, match="missing"):
        builtin("harmonic", {"N": 8})
    with pytest.raises(IsosimError, match="does not take"):
        builtin("box", {"N": 8, "omega": 3})


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_pass_validate(name):
    params = {"N": 6, "omega": 40, "kappa": 100, "M": 3}
    required, optional = BUILTINS[name]
    m = builtin(name, {k: params[k] for k in required})
    assert validate(m) == m
