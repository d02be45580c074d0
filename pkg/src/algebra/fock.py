"""
Fock-space operators
Dense matrix representations of fermion and truncated boson ladder
operators, normal-ordered operator polynomials and matrix exponentials.

Basis order: boson occupations outermost (mode 1 fastest among bosons),
then fermion occupation bits little-endian (mode 1 is bit 0).
"""

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from utils.settings import settings

logger = logging.getLogger(__name__)

FERMION_KINDS = ("fdag", "f")
BOSON_KINDS = ("bdag", "b")
_FACTOR = re.compile(r"^(fdag|f|bdag|b)(\d+)$")


class FockError(ValueError):
    """Base class for Fock-space errors"""


class DimensionError(FockError):
    pass


class ParityMismatchError(FockError):
    pass


class NonFiniteError(FockError):
    pass


@dataclass(frozen=True)
class HilbertSpec:
    """Fermion modes tensored with truncated boson modes"""

    n_fermions: int
    n_bosons: int = 0
    boson_cutoff: int = 0

    def __post_init__(self):
        for name in ("n_fermions", "n_bosons", "boson_cutoff"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise FockError(f"{name} must be a non-negative integer, got {value!r}")
        if self.n_bosons > 0 and self.boson_cutoff < 1:
            raise FockError(f"Boson modes need boson_cutoff >= 1, got {self.boson_cutoff}")
        if self.dimension > settings.max_dimension:
            raise DimensionError(
                f"Hilbert dimension {self.dimension} exceeds the cap {settings.max_dimension}"
            )

    @property
    def fermion_dimension(self) -> int:
        return 2 ** self.n_fermions

    @property
    def boson_dimension(self) -> int:
        return (self.boson_cutoff + 1) ** self.n_bosons

    @property
    def dimension(self) -> int:
        return self.fermion_dimension * self.boson_dimension

    def fermion_only(self) -> "HilbertSpec":
        return HilbertSpec(self.n_fermions)

    def boson_only(self) -> "HilbertSpec":
        return HilbertSpec(0, self.n_bosons, self.boson_cutoff)

    def occupations(self, index: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """(boson occupations, fermion occupations) of a basis index"""
        boson_index, fermion_index = divmod(index, self.fermion_dimension)
        fermions = tuple((fermion_index >> i) & 1 for i in range(self.n_fermions))
        bosons = []
        for _ in range(self.n_bosons):
            boson_index, n = divmod(boson_index, self.boson_cutoff + 1)
            bosons.append(n)
        return tuple(bosons), fermions

    def fermion_parities(self) -> np.ndarray:
        """Fermion-number parity (0 or 1) of every basis state"""
        return _fermion_parities(self.n_fermions, self.boson_dimension)

    def basis_labels(self) -> List[str]:
        labels = []
        for index in range(self.dimension):
            bosons, fermions = self.occupations(index)
            head = ",".join(str(n) for n in bosons)
            tail = "".join(str(n) for n in fermions)
            labels.append(f"|{head};{tail}>" if bosons else f"|{tail}>")
        return labels


@lru_cache(maxsize=None)
def _fermion_parities(n_fermions: int, boson_dimension: int) -> np.ndarray:
    counts = np.array([bin(s).count("1") % 2 for s in range(2 ** n_fermions)], dtype=np.int64)
    parities = np.tile(counts, boson_dimension)
    parities.flags.writeable = False
    return parities


class FockOperator:
    """Dense complex operator on a HilbertSpec"""

    __array_ufunc__ = None

    def __init__(
        self,
        spec: HilbertSpec,
        matrix: np.ndarray,
        declared_parity: Optional[str] = None,
        name: Optional[str] = None
    ):
        matrix = np.array(matrix, dtype=complex)
        if matrix.shape != (spec.dimension, spec.dimension):
            raise DimensionError(
                f"Matrix shape {matrix.shape} does not match dimension {spec.dimension}"
            )
        if not np.all(np.isfinite(matrix)):
            raise NonFiniteError(f"Operator {name or ''} has non-finite entries")
        if declared_parity not in (None, "even", "odd"):
            raise FockError(f"Unknown parity {declared_parity!r}")
        self.spec = spec
        self.matrix = matrix
        self.matrix.flags.writeable = False
        self.declared_parity = declared_parity
        self.name = name

    def __repr__(self) -> str:
        label = self.name or "operator"
        return f"FockOperator({label}, dim={self.spec.dimension}, parity={self.declared_parity})"

    @classmethod
    def identity(cls, spec: HilbertSpec) -> "FockOperator":
        return cls(spec, np.eye(spec.dimension), "even", "1")

    @classmethod
    def zero(cls, spec: HilbertSpec) -> "FockOperator":
        return cls(spec, np.zeros((spec.dimension, spec.dimension)), "even", "0")

    def _check(self, other: "FockOperator"):
        if self.spec != other.spec:
            raise DimensionError(f"Operators live on different spaces: {self.spec} vs {other.spec}")

    def _combined_parity(self, other: "FockOperator") -> Optional[str]:
        if self.declared_parity is None or other.declared_parity is None:
            return None
        return "even" if self.declared_parity == other.declared_parity else "odd"

    def __matmul__(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        self._check(other)
        return FockOperator(self.spec, self.matrix @ other.matrix, self._combined_parity(other))

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = other * FockOperator.identity(self.spec)
        if not isinstance(other, FockOperator):
            return NotImplemented
        self._check(other)
        same = self.declared_parity if self.declared_parity == other.declared_parity else None
        return FockOperator(self.spec, self.matrix + other.matrix, same)

    __radd__ = __add__

    def __neg__(self):
        return FockOperator(self.spec, -self.matrix, self.declared_parity, self.name)

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = other * FockOperator.identity(self.spec)
        return self + (-other)

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, complex, np.number)):
            return NotImplemented
        return FockOperator(self.spec, self.matrix * scalar, self.declared_parity)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FockOperator(self.spec, self.matrix / scalar, self.declared_parity)

    def dagger(self) -> "FockOperator":
        name = f"{self.name}†" if self.name else None
        return FockOperator(self.spec, self.matrix.conj().T, self.declared_parity, name)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def max_deviation(self, other: "FockOperator") -> float:
        self._check(other)
        return float(np.max(np.abs(self.matrix - other.matrix))) if self.spec.dimension else 0.0

    def is_self_adjoint(self, tol: Optional[float] = None) -> bool:
        tol = settings.projector_tolerance if tol is None else tol
        return self.max_deviation(self.dagger()) <= tol

    def parity_blocks(self) -> Tuple[float, float]:
        """Max norms of the parity-preserving and parity-flipping blocks"""
        parities = self.spec.fermion_parities()
        flips = parities[:, None] != parities[None, :]
        magnitude = np.abs(self.matrix)
        even = float(np.max(magnitude[~flips], initial=0.0))
        odd = float(np.max(magnitude[flips], initial=0.0))
        return even, odd

    def parity(self, tol: float = 1e-14) -> str:
        """Observed Grassmann parity: even, odd or mixed (zero counts as even)"""
        even, odd = self.parity_blocks()
        if odd <= tol:
            return "even"
        if even <= tol:
            return "odd"
        return "mixed"

    def check_parity(self) -> None:
        if self.declared_parity is not None and self.parity() != self.declared_parity:
            raise ParityMismatchError(
                f"Operator declared {self.declared_parity} but acts as {self.parity()}"
            )


def commutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b - b @ a


def anticommutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b + b @ a


def graded_bracket(a: FockOperator, b: FockOperator) -> FockOperator:
    """Anticommutator for two odd operators, commutator otherwise"""
    if a.parity() == "odd" and b.parity() == "odd":
        return anticommutator(a, b)
    return commutator(a, b)


def _single_fermion_annihilator(n_fermions: int, mode: int, string: str = "preceding") -> np.ndarray:
    dim = 2 ** n_fermions
    bit = 1 << (mode - 1)
    if string == "preceding":
        string_mask = bit - 1
    elif string == "following":
        string_mask = (dim - 1) ^ ((bit << 1) - 1)
    else:
        raise FockError(f"Unknown sign string {string!r}; use 'preceding' or 'following'")
    matrix = np.zeros((dim, dim))
    for state in range(dim):
        if state & bit:
            sign = -1.0 if bin(state & string_mask).count("1") % 2 else 1.0
            matrix[state ^ bit, state] = sign
    return matrix


def build_fermion_ops(spec: HilbertSpec, string: str = "preceding") -> List[Tuple[FockOperator, FockOperator]]:
    """
    Fermion ladder operators (f_i, f_i†) for i = 1..N

    Each f_i carries the alternating sign string of the preceding modes (or
    of the following modes) so that cross-mode anticommutators vanish.

    Args:
        spec: Hilbert space
        string: "preceding" or "following"

    Returns:
        List of (annihilator, creator) pairs
    """
    if spec.n_fermions < 1:
        raise FockError("build_fermion_ops needs at least one fermion mode")
    boson_identity = np.eye(spec.boson_dimension)
    ops = []
    for mode in range(1, spec.n_fermions + 1):
        f = np.kron(boson_identity, _single_fermion_annihilator(spec.n_fermions, mode, string))
        annihilator = FockOperator(spec, f, "odd", f"f{mode}")
        ops.append((annihilator, annihilator.dagger()))
    return ops


def build_boson_ops(spec: HilbertSpec) -> List[Tuple[FockOperator, FockOperator]]:
    """
    Truncated boson ladder operators (b_i, b_i†)

    [b, b†] = 1 holds except on the top cutoff level.
    """
    if spec.n_bosons < 1 or spec.boson_cutoff < 1:
        raise FockError("build_boson_ops needs a boson mode with boson_cutoff >= 1")
    levels = spec.boson_cutoff + 1
    ladder = np.diag(np.sqrt(np.arange(1, levels)), k=1)
    ops = []
    for mode in range(1, spec.n_bosons + 1):
        # mode 1 is the fastest boson index, i.e. the rightmost Kronecker factor
        outer = np.eye(levels ** (spec.n_bosons - mode))
        inner = np.eye(levels ** (mode - 1))
        b = np.kron(np.kron(np.kron(outer, ladder), inner), np.eye(spec.fermion_dimension))
        annihilator = FockOperator(spec, b, "even", f"b{mode}")
        ops.append((annihilator, annihilator.dagger()))
    return ops


def fermion_parity_operator(spec: HilbertSpec) -> FockOperator:
    """(-1)^(total fermion number)"""
    signs = np.where(spec.fermion_parities() == 1, -1.0, 1.0)
    return FockOperator(spec, np.diag(signs), "even", "P")


@dataclass(frozen=True)
class PolynomialTerm:
    """coeff times an ordered product of ladder operators, e.g. fdag1 f2"""

    coeff: complex
    factors: Tuple[Tuple[str, int], ...] = ()

    def fermion_degree(self) -> int:
        return sum(1 for kind, _ in self.factors if kind in FERMION_KINDS)

    def is_normal_ordered(self) -> bool:
        for kinds in (FERMION_KINDS, BOSON_KINDS):
            seen_annihilator = False
            for kind, _ in self.factors:
                if kind == kinds[1]:
                    seen_annihilator = True
                elif kind == kinds[0] and seen_annihilator:
                    return False
        return True

    def adjoint(self) -> "PolynomialTerm":
        flipped = {"fdag": "f", "f": "fdag", "bdag": "b", "b": "bdag"}
        factors = tuple((flipped[kind], mode) for kind, mode in reversed(self.factors))
        return PolynomialTerm(complex(self.coeff).conjugate(), factors)

    def render(self) -> str:
        ops = " ".join(f"{kind}{mode}" for kind, mode in self.factors)
        return f"({self.coeff:.6g}) {ops}".strip()


def parse_factor(text: str) -> Tuple[str, int]:
    match = _FACTOR.match(text.strip())
    if match is None:
        raise FockError(f"Cannot parse ladder operator {text!r} (expected fdag1, f2, bdag1, b1)")
    mode = int(match.group(2))
    if mode < 1:
        raise FockError(f"Mode indices are 1-based, got {text!r}")
    return match.group(1), mode


@dataclass(frozen=True)
class OperatorPolynomial:
    """Sum of ordered ladder-operator products"""

    terms: Tuple[PolynomialTerm, ...] = field(default_factory=tuple)

    @classmethod
    def from_terms(cls, items: Sequence[Tuple[complex, Union[str, Sequence[str]]]]) -> "OperatorPolynomial":
        """
        Build from (coeff, factors) items

        Args:
            items: factors given as "fdag1 f1" or ["fdag1", "f1"]; "" is the identity
        """
        terms = []
        for coeff, ops in items:
            tokens = ops.split() if isinstance(ops, str) else list(ops)
            terms.append(PolynomialTerm(complex(coeff), tuple(parse_factor(t) for t in tokens)))
        return cls(tuple(terms))

    @classmethod
    def constant(cls, value: complex) -> "OperatorPolynomial":
        return cls((PolynomialTerm(complex(value), ()),))

    @classmethod
    def number(cls, modes: Sequence[int], omega: float = 1.0, kind: str = "f") -> "OperatorPolynomial":
        dag = "fdag" if kind == "f" else "bdag"
        return cls(tuple(PolynomialTerm(complex(omega), ((dag, m), (kind, m))) for m in modes))

    def __add__(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        return OperatorPolynomial(self.terms + other.terms)

    def __mul__(self, scalar) -> "OperatorPolynomial":
        return OperatorPolynomial(tuple(PolynomialTerm(t.coeff * scalar, t.factors) for t in self.terms))

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self.terms)

    def adjoint(self) -> "OperatorPolynomial":
        return OperatorPolynomial(tuple(t.adjoint() for t in self.terms))

    def is_normal_ordered(self) -> bool:
        return all(t.is_normal_ordered() for t in self.terms)

    def fermion_parity(self) -> Optional[str]:
        degrees = {t.fermion_degree() % 2 for t in self.terms if t.coeff != 0}
        if not degrees:
            return None
        if len(degrees) > 1:
            return "mixed"
        return "odd" if degrees.pop() else "even"

    def max_modes(self) -> Tuple[int, int]:
        """Highest fermion and boson mode indices referenced"""
        fermion = max((m for t in self.terms for k, m in t.factors if k in FERMION_KINDS), default=0)
        boson = max((m for t in self.terms for k, m in t.factors if k in BOSON_KINDS), default=0)
        return fermion, boson

    def render(self) -> str:
        return " + ".join(t.render() for t in self.terms) or "0"


def realize(
    poly: OperatorPolynomial,
    spec: HilbertSpec,
    declared_parity: Optional[str] = None,
    name: Optional[str] = None,
    string: str = "preceding"
) -> FockOperator:
    """
    Matrix of an operator polynomial, products taken in the written order

    Args:
        poly: Operator polynomial
        spec: Hilbert space
        declared_parity: Expected parity; inferred from term degrees if None
        string: Sign string of the fermion ladders

    Returns:
        FockOperator
    """
    fermion_max, boson_max = poly.max_modes()
    if fermion_max > spec.n_fermions or boson_max > spec.n_bosons:
        raise FockError(
            f"Polynomial references mode f{fermion_max}/b{boson_max} beyond "
            f"{spec.n_fermions} fermions and {spec.n_bosons} bosons"
        )
    inferred = poly.fermion_parity()
    if declared_parity is not None and inferred not in (None, declared_parity):
        raise ParityMismatchError(
            f"Polynomial has {inferred} fermion parity but was declared {declared_parity}"
        )
    parity = declared_parity or (inferred if inferred in ("even", "odd") else None)
    if inferred is None:
        parity = parity or "even"

    ladders: Dict[Tuple[str, int], np.ndarray] = {}
    if fermion_max:
        for mode, (f, fdag) in enumerate(build_fermion_ops(spec, string), start=1):
            ladders[("f", mode)] = f.matrix
            ladders[("fdag", mode)] = fdag.matrix
    if boson_max:
        for mode, (b, bdag) in enumerate(build_boson_ops(spec), start=1):
            ladders[("b", mode)] = b.matrix
            ladders[("bdag", mode)] = bdag.matrix

    total = np.zeros((spec.dimension, spec.dimension), dtype=complex)
    for term in poly.terms:
        product = np.eye(spec.dimension, dtype=complex)
        for factor in term.factors:
            product = product @ ladders[factor]
        total += term.coeff * product
    return FockOperator(spec, total, parity, name)


def mat_exp(op: FockOperator, scale: complex = 1.0) -> FockOperator:
    """
    exp(scale·op) by scaling and squaring

    Unitarity is checked when op is self-adjoint and scale is imaginary.
    """
    result = expm(scale * op.matrix)
    if not np.all(np.isfinite(result)):
        raise NonFiniteError(f"exp({scale}·{op.name or 'op'}) overflowed")
    out = FockOperator(op.spec, result, "even" if op.declared_parity == "even" else None)
    if complex(scale).real == 0 and op.is_self_adjoint():
        defect = np.max(np.abs(result.conj().T @ result - np.eye(op.spec.dimension)))
        if defect > settings.unitarity_tolerance:
            raise NonFiniteError(f"exp(-itH) lost unitarity: defect {defect:.3e}")
    return out


def tensor(a: FockOperator, b: FockOperator) -> FockOperator:
    """
    a ⊗ b with the boson factor leftmost

    a must act on a boson-only space and b on a fermion-only space, or both
    on fermion-only spaces (modes of a come after those of b in bit order).
    """
    if a.spec.n_fermions == 0 and b.spec.n_bosons == 0:
        spec = HilbertSpec(b.spec.n_fermions, a.spec.n_bosons, a.spec.boson_cutoff)
    elif a.spec.n_bosons == 0 and b.spec.n_bosons == 0:
        spec = HilbertSpec(a.spec.n_fermions + b.spec.n_fermions)
    elif a.spec.n_fermions == 0 and b.spec.n_fermions == 0 and a.spec.boson_cutoff == b.spec.boson_cutoff:
        spec = HilbertSpec(0, a.spec.n_bosons + b.spec.n_bosons, a.spec.boson_cutoff)
    else:
        raise DimensionError(f"Cannot tensor {a.spec} with {b.spec}")
    parity = a._combined_parity(b)
    return FockOperator(spec, np.kron(a.matrix, b.matrix), parity)


def save_operator(op: FockOperator, path: str) -> None:
    """
    Write an operator as text: a header line then one row per line,
    entries written as "re:im" with round-trip float precision
    """
    spec = op.spec
    lines = [f"dim {spec.dimension} fermions {spec.n_fermions} bosons {spec.n_bosons} cutoff {spec.boson_cutoff}"]
    for row in op.matrix:
        lines.append(" ".join(f"{float(c.real)!r}:{float(c.imag)!r}" for c in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_operator(path: str) -> FockOperator:
    """Read an operator written by save_operator"""
    with open(path, "r") as f:
        lines = [line.strip() for line in f if line.strip()]
    header = lines[0].split()
    if len(header) != 8 or header[0] != "dim":
        raise FockError(f"{path}: malformed operator header {lines[0]!r}")
    dim = int(header[1])
    spec = HilbertSpec(int(header[3]), int(header[5]), int(header[7]))
    if spec.dimension != dim or len(lines) != dim + 1:
        raise FockError(f"{path}: expected {dim} rows, found {len(lines) - 1}")
    matrix = np.zeros((dim, dim), dtype=complex)
    for i, line in enumerate(lines[1:]):
        entries = line.split()
        if len(entries) != dim:
            raise FockError(f"{path}: row {i} has {len(entries)} entries, expected {dim}")
        for j, entry in enumerate(entries):
            re_part, im_part = entry.split(":")
            matrix[i, j] = complex(float(re_part), float(im_part))
    return FockOperator(spec, matrix)
