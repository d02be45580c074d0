"""
Config loading
Reads JSON constraint configs into a Hilbert space, Hamiltonian and
ConstraintSet, reporting malformed input with its line/column or field path
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from algebra.fock import FockOperator, HilbertSpec, OperatorPolynomial, realize
from algebra.graded import GrassmannOperator
from algebra.grassmann import GeneratorRegistry
from constraints.projectors import ConstraintSet
from utils.settings import settings

logger = logging.getLogger(__name__)

SECTIONS = ("name", "spec", "hamiltonian", "constraints", "lattice", "tolerances")


class ConfigError(ValueError):
    """Malformed config, located by JSON position or field path"""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}, column {column}"
        else:
            where = path or "config"
        super().__init__(f"{where}: {message}")


@dataclass
class ToolkitConfig:
    """Parsed config"""

    name: str
    spec: HilbertSpec
    registry: GeneratorRegistry
    constraints: ConstraintSet
    hamiltonian: Optional[FockOperator] = None
    hamiltonian_polynomial: Optional[OperatorPolynomial] = None
    lattice: Optional[Dict[str, Any]] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return canonical_hash(self.raw)


def canonical_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON form"""
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(path: Union[str, Path], apply_tolerances: bool = True) -> ToolkitConfig:
    """
    Load a JSON config from disk

    Args:
        path: Config file
        apply_tolerances: Push the tolerances section into the shared settings

    Returns:
        ToolkitConfig
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno, column=e.colno)
    logger.info("loaded config %s", path)
    return parse_config(data, apply_tolerances)


def parse_config(data: Any, apply_tolerances: bool = True) -> ToolkitConfig:
    """
    Build a ToolkitConfig from decoded JSON

    Args:
        data: Decoded JSON object
        apply_tolerances: Push the tolerances section into the shared settings

    Returns:
        ToolkitConfig
    """
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections {unknown}")

    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ConfigError("must be an object", "tolerances")
    if apply_tolerances and tolerances:
        try:
            settings.update(tolerances)
        except (KeyError, TypeError) as e:
            raise ConfigError(str(e).strip("'\""), "tolerances")

    name = data.get("name", "config")
    if not isinstance(name, str):
        raise ConfigError("must be a string", "name")
    spec = _parse_spec(data.get("spec"))
    registry = GeneratorRegistry()

    hamiltonian = poly = None
    if data.get("hamiltonian") is not None:
        poly = _parse_terms(data["hamiltonian"], "hamiltonian")
        hamiltonian = _realize(poly, spec, "even", "H", "hamiltonian")

    section = data.get("constraints")
    if not isinstance(section, dict):
        raise ConfigError("must be an object with even and odd lists", "constraints")
    evens = [_parse_even(item, spec, f"constraints.even[{i}]") for i, item in enumerate(_list(section, "even"))]
    odds = [_parse_odd(item, spec, registry, f"constraints.odd[{i}]") for i, item in enumerate(_list(section, "odd"))]
    if not evens and not odds:
        raise ConfigError("constraint list is empty", "constraints")
    try:
        constraints = ConstraintSet(spec, evens=evens, odds=odds, hamiltonian=hamiltonian)
    except ValueError as e:
        raise ConfigError(str(e), "constraints")

    lattice = data.get("lattice")
    if lattice is not None:
        lattice = _parse_lattice(lattice)
    return ToolkitConfig(name, spec, registry, constraints, hamiltonian, poly, lattice, dict(tolerances), data)


def _list(section: dict, key: str) -> list:
    items = section.get(key, [])
    if not isinstance(items, list):
        raise ConfigError("must be a list", f"constraints.{key}")
    return items


def _parse_spec(raw: Any) -> HilbertSpec:
    if not isinstance(raw, dict):
        raise ConfigError("must be an object", "spec")
    values = {}
    for key, default in (("n_fermions", None), ("n_bosons", 0), ("boson_cutoff", 0)):
        value = raw.get(key, default)
        if value is None:
            raise ConfigError("is required", f"spec.{key}")
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise ConfigError(f"must be a non-negative integer, got {value!r}", f"spec.{key}")
        values[key] = value
    try:
        return HilbertSpec(values["n_fermions"], values["n_bosons"], values["boson_cutoff"])
    except ValueError as e:
        raise ConfigError(str(e), "spec")


def _parse_coeff(raw: Any, path: str) -> complex:
    if isinstance(raw, bool):
        raise ConfigError(f"coefficient must be a number or [re, im], got {raw!r}", path)
    if isinstance(raw, (int, float)):
        return complex(raw)
    if (
        isinstance(raw, list) and len(raw) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
    ):
        return complex(raw[0], raw[1])
    raise ConfigError(f"coefficient must be a number or [re, im], got {raw!r}", path)


def _parse_terms(raw: Any, path: str) -> OperatorPolynomial:
    """[{"coeff": [re, im], "ops": ["fdag1", "f2"]}, ...] as a polynomial"""
    if not isinstance(raw, list):
        raise ConfigError("must be a list of terms", path)
    items: List[Tuple[complex, List[str]]] = []
    for i, term in enumerate(raw):
        where = f"{path}[{i}]"
        if not isinstance(term, dict):
            raise ConfigError("term must be an object", where)
        coeff = _parse_coeff(term.get("coeff", 1.0), f"{where}.coeff")
        ops = term.get("ops", [])
        if not isinstance(ops, list) or not all(isinstance(op, str) for op in ops):
            raise ConfigError("ops must be a list of strings", f"{where}.ops")
        items.append((coeff, ops))
    try:
        return OperatorPolynomial.from_terms(items)
    except ValueError as e:
        raise ConfigError(str(e), path)


def _realize(poly: OperatorPolynomial, spec: HilbertSpec, parity: str, name: str, path: str) -> FockOperator:
    try:
        return realize(poly, spec, parity, name)
    except ValueError as e:
        raise ConfigError(str(e), path)


def _constraint_name(item: Any, path: str) -> str:
    if not isinstance(item, dict):
        raise ConfigError("constraint must be an object", path)
    name = item.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("constraint needs a non-empty name", f"{path}.name")
    return name


def _parse_even(item: Any, spec: HilbertSpec, path: str) -> Tuple[str, FockOperator]:
    name = _constraint_name(item, path)
    poly = _parse_terms(item.get("terms"), f"{path}.terms")
    return name, _realize(poly, spec, "even", name, f"{path}.terms")


def _parse_odd(item: Any, spec: HilbertSpec, registry: GeneratorRegistry, path: str) -> Tuple:
    """
    Odd constraint, optionally shifted by a Grassmann generator

    "shift": ["thetabar", "theta"] subtracts theta; with "conjugate": true
    it subtracts thetabar instead (the partner of a shifted annihilator).
    """
    name = _constraint_name(item, path)
    poly = _parse_terms(item.get("terms"), f"{path}.terms")
    op = _realize(poly, spec, "odd", name, f"{path}.terms")
    partner = item.get("partner")
    if partner is not None and not isinstance(partner, str):
        raise ConfigError("must be a constraint name", f"{path}.partner")

    shift = item.get("shift")
    if shift is None:
        return (name, op, partner) if partner else (name, op)
    if not (isinstance(shift, list) and len(shift) == 2 and all(isinstance(s, str) for s in shift)):
        raise ConfigError("must be a [bar label, label] pair", f"{path}.shift")
    try:
        thetabar, theta = registry.pair(*shift)
    except ValueError as e:
        raise ConfigError(str(e), f"{path}.shift")
    conjugate = bool(item.get("conjugate", False))
    shifted = GrassmannOperator.from_fock(op, registry) - GrassmannOperator.scalar(spec, thetabar if conjugate else theta)
    shifted.name = name
    if not conjugate and len(poly.terms) == 1 and poly.terms[0].coeff == 1:
        factors = poly.terms[0].factors
        if len(factors) == 1 and factors[0][0] == "f":
            shifted.shift = (factors[0][1], shift[0], shift[1])
    return (name, shifted, partner) if partner else (name, shifted)


def _parse_lattice(raw: Any) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError("must be an object", "lattice")
    example = raw.get("example")
    if not isinstance(example, str):
        raise ConfigError("names the catalog example to run", "lattice.example")
    n_slices = raw.get("n_slices", 4)
    if isinstance(n_slices, bool) or not isinstance(n_slices, int) or n_slices < 1:
        raise ConfigError(f"must be a positive integer, got {n_slices!r}", "lattice.n_slices")
    t = raw.get("t", 1.0)
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise ConfigError(f"must be a number, got {t!r}", "lattice.t")
    schedule = raw.get("schedule", "endpoint-average")
    if not isinstance(schedule, str):
        if not isinstance(schedule, list) or not all(isinstance(v, (int, float)) for v in schedule):
            raise ConfigError("must be a schedule name or a list of multipliers", "lattice.schedule")
    substitution = raw.get("substitution")
    if substitution is not None and substitution not in ("normal-symbol", "exact"):
        raise ConfigError(f"must be normal-symbol or exact, got {substitution!r}", "lattice.substitution")
    return {"example": example, "n_slices": n_slices, "t": float(t), "schedule": schedule,
            "substitution": substitution}
