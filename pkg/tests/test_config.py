import json
from pathlib import Path

from pytest import mark, raises

from catalog.config import ConfigError, canonical_hash, load_config, parse_config
from constraints.projectors import classify
from utils.settings import settings

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

NUMBER = {
    "name": "number",
    "spec": {"n_fermions": 2},
    "constraints": {
        "even": [{"name": "Phi", "terms": [
            {"coeff": 1, "ops": ["fdag1", "f1"]},
            {"coeff": [1, 0], "ops": ["fdag2", "f2"]},
            {"coeff": -1, "ops": []},
        ]}],
    },
}


def with_changes(**changes):
    data = json.loads(json.dumps(NUMBER))
    data.update(changes)
    return data


class TestShippedConfigs:

    @mark.parametrize("filename, verdict", [
        ("number_constraint.json", "first-class"),
        ("three_fermion.json", "first-class"),
        ("bose_fermi.json", "first-class"),
        ("lattice_fixed_number.json", "first-class"),
        ("linear_odd.json", "second-class"),
        ("diagonal_pair.json", "second-class"),
        ("nonlinear_odd.json", "second-class"),
    ])
    def test_classification(self, filename, verdict):
        config = load_config(CONFIGS / filename)
        report = classify(config.constraints)
        assert set(report.verdicts.values()) == {verdict}

    def test_tolerances_are_applied(self):
        settings.update({"bose_fermi_tolerance": 1e-3})
        load_config(CONFIGS / "bose_fermi.json")
        assert settings.bose_fermi_tolerance == 1e-10

    def test_tolerances_can_be_skipped(self):
        settings.update({"bose_fermi_tolerance": 1e-3})
        config = load_config(CONFIGS / "bose_fermi.json", apply_tolerances=False)
        assert settings.bose_fermi_tolerance == 1e-3
        assert config.tolerances == {"bose_fermi_tolerance": 1e-10}

    def test_lattice_section(self):
        config = load_config(CONFIGS / "lattice_fixed_number.json")
        assert config.lattice == {
            "example": "eq39", "n_slices": 4, "t": 1.0,
            "schedule": [0.3, -1.2, 0.0, 2.5], "substitution": "exact",
        }

    def test_shifted_odd_constraint(self):
        config = load_config(CONFIGS / "linear_odd.json")
        chi = config.constraints.get("chi").operator
        assert chi.shift == (1, "thetabar", "theta")
        assert config.constraints.get("chidag").operator.shift is None
        registry = config.registry
        assert registry.partner(registry.index("theta")) == registry.index("thetabar")


class TestConfigErrors:

    def test_json_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "name": "x",\n  "spec": {"n_fermions": 2,}\n}\n')
        with raises(ConfigError) as info:
            load_config(path)
        assert info.value.line == 3
        assert str(info.value).startswith("line 3, column")

    def test_missing_file(self, tmp_path):
        with raises(ConfigError):
            load_config(tmp_path / "missing.json")

    @mark.parametrize("changes, path", [
        (dict(spec={"n_fermions": -1}), "spec.n_fermions"),
        (dict(spec={}), "spec.n_fermions"),
        (dict(extra=1), ""),
        (dict(name=3), "name"),
        (dict(tolerances={"no_such_tolerance": 1.0}), "tolerances"),
        (dict(tolerances={"kernel_tolerance": "tight"}), "tolerances"),
        (dict(constraints={"even": [], "odd": []}), "constraints"),
        (dict(constraints={"even": [{"terms": []}]}), "constraints.even[0].name"),
        (dict(constraints={"even": [{"name": "P", "terms": [{"coeff": True, "ops": []}]}]}),
         "constraints.even[0].terms[0].coeff"),
        (dict(constraints={"even": [{"name": "P", "terms": [{"ops": ["g1"]}]}]}), "constraints.even[0].terms"),
        (dict(constraints={"even": [{"name": "P", "terms": [{"ops": ["fdag1", "f2"]}]}]}), "constraints"),
        (dict(lattice={"example": "eq39", "n_slices": 0}), "lattice.n_slices"),
        (dict(lattice={"n_slices": 2}), "lattice.example"),
        (dict(lattice={"example": "eq39", "substitution": "midpoint"}), "lattice.substitution"),
    ])
    def test_field_path(self, changes, path):
        with raises(ConfigError) as info:
            parse_config(with_changes(**changes))
        assert info.value.path == path

    def test_odd_shift_must_be_pair(self):
        data = with_changes(constraints={"odd": [
            {"name": "chi", "shift": "theta", "terms": [{"ops": ["f1"]}]},
        ]})
        with raises(ConfigError) as info:
            parse_config(data)
        assert info.value.path == "constraints.odd[0].shift"

    def test_even_constraint_parity(self):
        data = with_changes(constraints={"even": [{"name": "P", "terms": [{"ops": ["f1"]}]}]})
        with raises(ConfigError):
            parse_config(data)


class TestCanonicalHash:

    def test_key_order_does_not_matter(self):
        assert canonical_hash({"a": 1, "b": [1, 2]}) == canonical_hash({"b": [1, 2], "a": 1})
        assert canonical_hash({"a": 1}) != canonical_hash({"a": 2})

    def test_config_hash(self):
        config = parse_config(NUMBER)
        assert config.config_hash == canonical_hash(NUMBER)
        assert len(config.config_hash) == 64
