"""
Constraint classification and projection operators
First/second-class classification by least-squares closure fits, and
projectors by group averaging, spectral kernels, odd-pair formulas and the
two-point representation of a known projector.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import eigh, eigvalsh, inv, svd

from algebra.coherent import (
    CoherentVector,
    coherent_ket,
    matrix_element,
    odd_coherent_ket,
    overlap,
)
from algebra.fock import (
    FockOperator,
    HilbertSpec,
    anticommutator,
    commutator,
    mat_exp,
)
from algebra.graded import GrassmannOperator
from algebra.grassmann import GrassmannElement
from utils.settings import settings

logger = logging.getLogger(__name__)

ConstraintOperator = Union[FockOperator, GrassmannOperator]


class ConstraintError(ValueError):
    """Base class for constraint and projector errors"""


class TrivialConstraintError(ConstraintError):
    pass


class SpectrumError(ConstraintError):
    pass


class QuadratureTooSmallError(ConstraintError):
    pass


class CertificateError(ConstraintError):
    pass


class SingularXError(ConstraintError):
    pass


class NonCommutingXError(ConstraintError):
    pass


def numeric(op: ConstraintOperator) -> FockOperator:
    return op.numeric_part() if isinstance(op, GrassmannOperator) else op


@dataclass
class Constraint:
    name: str
    operator: ConstraintOperator
    parity: str
    partner: Optional[str] = None

    @property
    def matrix(self) -> np.ndarray:
        return numeric(self.operator).matrix


class ConstraintSet:
    """Even constraints Φ_a, odd constraints χ_α and an optional Hamiltonian"""

    def __init__(
        self,
        spec: HilbertSpec,
        evens: Sequence[Tuple[str, ConstraintOperator]] = (),
        odds: Sequence[Tuple] = (),
        hamiltonian: Optional[FockOperator] = None
    ):
        self.spec = spec
        self.hamiltonian = hamiltonian
        self.evens = [Constraint(name, op, "even") for name, op in evens]
        self.odds = [
            Constraint(item[0], item[1], "odd", item[2] if len(item) > 2 else None)
            for item in odds
        ]
        if not self.evens and not self.odds:
            raise ConstraintError("Constraint set is empty")
        self._validate()

    def _validate(self) -> None:
        tol = settings.projector_tolerance
        names = [c.name for c in self.constraints]
        if len(set(names)) != len(names):
            raise ConstraintError(f"Duplicate constraint names in {names}")
        for c in self.constraints:
            if c.operator.spec != self.spec:
                raise ConstraintError(f"Constraint {c.name} lives on {c.operator.spec}, expected {self.spec}")
        for c in self.evens:
            op = numeric(c.operator)
            if not op.is_self_adjoint(tol):
                raise ConstraintError(f"Even constraint {c.name} is not self-adjoint")
            if op.parity() != "even":
                raise ConstraintError(f"Constraint {c.name} is not even")
        by_name = {c.name: c for c in self.odds}
        for c in self.odds:
            op = numeric(c.operator)
            if np.max(np.abs(op.matrix)) <= tol:
                raise TrivialConstraintError(f"Odd constraint {c.name} vanishes and does not represent any constraint")
            if op.parity() != "odd":
                raise ConstraintError(f"Constraint {c.name} is not odd")
            check_trivial_odd(op)
            if c.partner is None:
                if not op.is_self_adjoint(tol):
                    raise ConstraintError(f"Odd constraint {c.name} is neither self-adjoint nor paired")
                continue
            partner = by_name.get(c.partner)
            if partner is None:
                raise ConstraintError(f"Odd constraint {c.name} names unknown partner {c.partner}")
            deviation = _deviation(c.operator.dagger(), partner.operator)
            if deviation > tol:
                raise ConstraintError(f"{c.partner} is not the adjoint of {c.name} (deviation {deviation:.3e})")

    @property
    def constraints(self) -> List[Constraint]:
        return self.evens + self.odds

    def get(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)


def _deviation(a: ConstraintOperator, b: ConstraintOperator) -> float:
    if isinstance(a, GrassmannOperator):
        return a.max_deviation(b)
    if isinstance(b, GrassmannOperator):
        return b.max_deviation(a)
    return a.max_deviation(b)


def check_trivial_odd(chi: FockOperator) -> None:
    """
    A self-adjoint odd operator with χ² = 0 is zero: ‖χv‖² = ⟨v|χ²|v⟩.
    Raises TrivialConstraintError for such a constraint.
    """
    square = np.max(np.abs((chi @ chi).matrix))
    if chi.is_self_adjoint() and square <= settings.projector_tolerance:
        raise TrivialConstraintError(
            f"Self-adjoint odd constraint with vanishing square is the zero operator "
            f"(norm {np.max(np.abs(chi.matrix)):.3e})"
        )


@dataclass
class RelationFit:
    """Expansion of one (anti)commutator in the constraint basis"""

    relation: str
    kind: str
    members: Tuple[str, ...]
    coefficients: Dict[str, complex]
    residual: float
    tolerance: float

    @property
    def closes(self) -> bool:
        return self.residual <= self.tolerance

    @property
    def structure_constants(self) -> Dict[str, complex]:
        """Constants s with relation = i·Σ s_c C_c"""
        return {name: value / 1j for name, value in self.coefficients.items()}


@dataclass
class ClassificationReport:
    fits: List[RelationFit]
    verdicts: Dict[str, str]
    tolerance: float

    @property
    def first_class(self) -> bool:
        return all(v == "first-class" for v in self.verdicts.values())

    def fit(self, relation: str) -> RelationFit:
        for item in self.fits:
            if item.relation == relation:
                return item
        raise KeyError(relation)

    def by_kind(self, kind: str) -> List[RelationFit]:
        return [item for item in self.fits if item.kind == kind]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for item in self.fits:
            expansion = " + ".join(
                f"({value.real:.6g}{value.imag:+.6g}i)·{name}"
                for name, value in item.coefficients.items() if abs(value) > item.tolerance
            ) or "0"
            rows.append({
                'relation': item.relation,
                'kind': item.kind,
                'expansion': expansion,
                'residual': item.residual,
                'closes': item.closes
            })
        return pd.DataFrame(rows, columns=['relation', 'kind', 'expansion', 'residual', 'closes'])


def _fit(target: np.ndarray, basis: List[Constraint]) -> Tuple[Dict[str, complex], float]:
    if not basis:
        return {}, float(np.linalg.norm(target))
    design = np.stack([c.matrix.ravel() for c in basis], axis=1)
    solution, *_ = np.linalg.lstsq(design, target.ravel(), rcond=None)
    residual = float(np.linalg.norm(target.ravel() - design @ solution))
    return {c.name: complex(x) for c, x in zip(basis, solution)}, residual


def classify(cs: ConstraintSet) -> ClassificationReport:
    """
    Fit every closure relation of the constraint superalgebra

    [Φ_a,Φ_b] = i c Φ, [Φ_a,χ_α] = i d χ, {χ_α,χ_β} = i g Φ,
    [Φ_a,H] = i h Φ, [χ_α,H] = i k χ; a constraint is first class iff every
    relation it enters closes within the closure tolerance.

    Args:
        cs: Constraint set

    Returns:
        ClassificationReport
    """
    tol = settings.closure_tolerance
    fits: List[RelationFit] = []

    def record(relation, kind, members, target, basis):
        coefficients, residual = _fit(target, basis)
        fits.append(RelationFit(relation, kind, members, coefficients, residual, tol))

    evens, odds = cs.evens, cs.odds
    for i, a in enumerate(evens):
        for b in evens[i + 1:]:
            target = a.matrix @ b.matrix - b.matrix @ a.matrix
            record(f"[{a.name},{b.name}]", "c", (a.name, b.name), target, evens)
    for a in evens:
        for alpha in odds:
            target = a.matrix @ alpha.matrix - alpha.matrix @ a.matrix
            record(f"[{a.name},{alpha.name}]", "d", (a.name, alpha.name), target, odds)
    for i, alpha in enumerate(odds):
        for beta in odds[i:]:
            target = alpha.matrix @ beta.matrix + beta.matrix @ alpha.matrix
            record(f"{{{alpha.name},{beta.name}}}", "g", (alpha.name, beta.name), target, evens)
    if cs.hamiltonian is not None:
        h = cs.hamiltonian.matrix
        for a in evens:
            record(f"[{a.name},H]", "h", (a.name,), a.matrix @ h - h @ a.matrix, evens)
        for alpha in odds:
            record(f"[{alpha.name},H]", "k", (alpha.name,), alpha.matrix @ h - h @ alpha.matrix, odds)

    verdicts = {c.name: "first-class" for c in cs.constraints}
    for item in fits:
        if not item.closes:
            for name in item.members:
                verdicts[name] = "second-class"
    logger.info("classified %d constraints: %s", len(verdicts), verdicts)
    return ClassificationReport(fits, verdicts, tol)


@dataclass
class Projector:
    """Certified projector E = E² = E†"""

    operator: FockOperator
    route: str
    idempotency: float
    self_adjointness: float
    rank: int

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def spec(self) -> HilbertSpec:
        return self.operator.spec

    @classmethod
    def certify(cls, operator: FockOperator, route: str) -> "Projector":
        idempotency = operator.max_deviation(operator @ operator)
        self_adjointness = operator.max_deviation(operator.dagger())
        tol = settings.projector_tolerance
        if idempotency > tol or self_adjointness > tol:
            raise CertificateError(
                f"{route} result is not a projector: |E²-E| = {idempotency:.3e}, |E†-E| = {self_adjointness:.3e}"
            )
        rank = int(round(operator.trace().real))
        clean = FockOperator(operator.spec, operator.matrix, "even", f"E[{route}]")
        return cls(clean, route, idempotency, self_adjointness, rank)

    def max_deviation(self, other: "Projector") -> float:
        return self.operator.max_deviation(other.operator)


def integer_spectrum(phi: FockOperator) -> np.ndarray:
    """Eigenvalues of a self-adjoint operator, checked to be integers"""
    if not phi.is_self_adjoint():
        raise SpectrumError(f"{phi.name or 'constraint'} is not self-adjoint")
    values = eigvalsh(phi.matrix)
    rounded = np.round(values)
    if np.max(np.abs(values - rounded), initial=0.0) > settings.integer_spectrum_tolerance:
        raise SpectrumError(f"{phi.name or 'constraint'} has a non-integer spectrum: {values}")
    return rounded


def quadrature_size(phi: FockOperator) -> int:
    spectrum = integer_spectrum(phi)
    return 2 * int(np.max(np.abs(spectrum), initial=0.0)) + 1


def project_group_average(phi: FockOperator, points: Optional[int] = None) -> Projector:
    """
    E = (1/K) Σ_k exp(−i 2πk/K Φ), exact on integer spectra

    Args:
        phi: Self-adjoint constraint with integer spectrum
        points: Quadrature size K (default 2·max|λ|+1)

    Returns:
        Projector onto the Φ = 0 eigenspace
    """
    needed = quadrature_size(phi)
    points = needed if points is None else points
    if points < needed:
        raise QuadratureTooSmallError(f"K = {points} aliases the spectrum; need at least {needed}")
    total = np.zeros((phi.spec.dimension, phi.spec.dimension), dtype=complex)
    for k in range(points):
        total += mat_exp(phi, -2j * np.pi * k / points).matrix
    logger.debug("group average of %s with K=%d", phi.name, points)
    return Projector.certify(FockOperator(phi.spec, total / points), "group-average")


def project_group_average_all(phis: Sequence[FockOperator]) -> Projector:
    """Product of U(1) averages for mutually commuting constraints"""
    if not phis:
        raise ConstraintError("No constraints to average over")
    for i, a in enumerate(phis):
        for b in phis[i + 1:]:
            if np.max(np.abs(commutator(a, b).matrix)) > settings.closure_tolerance:
                raise ConstraintError("Abelian averaging needs mutually commuting constraints")
    product = FockOperator.identity(phis[0].spec)
    for phi in phis:
        product = product @ project_group_average(phi).operator
    return Projector.certify(product, "group-average")


def project_kernel(ops: Sequence[ConstraintOperator]) -> Projector:
    """
    Orthogonal projector onto the joint kernel of the operators

    Grassmann-shifted constraints have no complex kernel and are rejected.
    """
    if not ops:
        raise ConstraintError("project_kernel needs at least one operator")
    matrices = []
    for op in ops:
        if isinstance(op, GrassmannOperator):
            if not op.is_numeric():
                raise ConstraintError(
                    "Grassmann-shifted constraints have no complex kernel; use project_odd_pair"
                )
            op = op.numeric_part()
        matrices.append(op.matrix)
    spec = ops[0].spec
    stacked = np.vstack(matrices)
    _, values, vh = svd(stacked)
    scale = max(1.0, float(values[0])) if values.size else 1.0
    null = values <= settings.null_space_threshold * scale
    null = np.concatenate([null, np.ones(spec.dimension - values.size, dtype=bool)])
    basis = vh[null]
    matrix = basis.conj().T @ basis
    return Projector.certify(FockOperator(spec, matrix), "spectral-kernel")


def build_projector(phi: FockOperator) -> Projector:
    """Group average when the spectrum is integer, spectral kernel otherwise"""
    try:
        return project_group_average(phi)
    except SpectrumError as e:
        logger.info("falling back to the spectral kernel route: %s", e)
        return project_kernel([phi])


def project_eq52(projector: Projector, points: int = 2) -> Projector:
    """(1/K) Σ_k exp(−i 2πk/K (1 − E)); spectrum of 1 − E is {0, 1}"""
    if points < 2:
        raise QuadratureTooSmallError(f"K = {points} is too small; need at least 2")
    Projector.certify(projector.operator, projector.route)
    complement = FockOperator.identity(projector.spec) - projector.operator
    total = np.zeros((projector.spec.dimension,) * 2, dtype=complex)
    for k in range(points):
        total += mat_exp(complement, -2j * np.pi * k / points).matrix
    return Projector.certify(FockOperator(projector.spec, total / points), "eq52")


def anticommutator_scalar(a: FockOperator, b: FockOperator) -> complex:
    """w with {a, b} = w·1, checked"""
    bracket = anticommutator(a, b).matrix
    w = np.trace(bracket) / a.spec.dimension
    if np.max(np.abs(bracket - w * np.eye(a.spec.dimension))) > settings.closure_tolerance:
        raise ConstraintError("Anticommutator is not proportional to the identity")
    return complex(w)


def anticommutator_matrix(chis: Sequence[FockOperator]) -> np.ndarray:
    """W_αβ = {χ_α, χ_β} for constraints whose anticommutators are scalars"""
    size = len(chis)
    w = np.zeros((size, size), dtype=complex)
    for i in range(size):
        for j in range(size):
            w[i, j] = anticommutator_scalar(chis[i], chis[j])
    return w


def diagonalize_odd(w: np.ndarray, chis: Sequence[FockOperator]) -> List[FockOperator]:
    """
    χ′_α = (Dᵀ)_α^β χ_β / √v_α with DᵀWD = diag(v)

    Args:
        w: Real symmetric positive definite matrix of anticommutators
        chis: Self-adjoint odd constraints

    Returns:
        Constraints with {χ′_α, χ′_β} = δ_αβ
    """
    w = np.asarray(w)
    if np.max(np.abs(np.imag(w)), initial=0.0) > settings.closure_tolerance:
        raise ConstraintError("W must be real")
    w = np.real(w)
    if np.max(np.abs(w - w.T), initial=0.0) > settings.closure_tolerance:
        raise ConstraintError("W must be symmetric")
    off_diagonal = w - np.diag(np.diag(w))
    if np.max(np.abs(off_diagonal), initial=0.0) <= settings.closure_tolerance:
        values, rotation = np.diag(w).copy(), np.eye(len(w))
    else:
        values, rotation = eigh(w)
    if np.any(values <= 0):
        raise ConstraintError(f"W has non-positive eigenvalues {values}; constraints are not second class")
    result = []
    for alpha in range(len(chis)):
        combo = sum((rotation[beta, alpha] * chis[beta] for beta in range(len(chis))), FockOperator.zero(chis[0].spec))
        combo = FockOperator(combo.spec, combo.matrix / np.sqrt(values[alpha]), "odd", f"{chis[alpha].name or 'chi'}'")
        result.append(combo)
    check = anticommutator_matrix(result)
    if np.max(np.abs(check - np.eye(len(result)))) > settings.closure_tolerance:
        raise ConstraintError("Diagonalized constraints do not satisfy {χ′_α, χ′_β} = δ_αβ")
    return result


def pair_self_adjoint(first: FockOperator, second: FockOperator) -> Tuple[FockOperator, FockOperator]:
    """χ = (χ′₁ − iχ′₂)/√2 and its adjoint from two normalized self-adjoint constraints"""
    chi = FockOperator(first.spec, (first.matrix - 1j * second.matrix) / np.sqrt(2), "odd", "chi")
    return chi, chi.dagger()


def _x_operator(chi: FockOperator, chi_dagger: FockOperator) -> Tuple[FockOperator, FockOperator]:
    x = anticommutator(chi, chi_dagger)
    values = eigvalsh(x.matrix)
    if values.size and values.min() <= settings.null_space_threshold:
        raise SingularXError(f"X = {{χ, χ†}} is singular (min eigenvalue {values.min():.3e}); not second class")
    if np.max(np.abs(commutator(x, chi).matrix)) > settings.closure_tolerance:
        raise NonCommutingXError("[X, χ] does not vanish")
    return x, FockOperator(x.spec, inv(x.matrix), "even", "X^-1")


def rescale_odd(chi: FockOperator, chi_dagger: Optional[FockOperator] = None) -> Tuple[FockOperator, FockOperator]:
    """χ′ = X^(−1/2) χ with {χ′, χ′†} = 1"""
    chi_dagger = chi.dagger() if chi_dagger is None else chi_dagger
    x, _ = _x_operator(chi, chi_dagger)
    values, vectors = eigh(x.matrix)
    root = vectors @ np.diag(values ** -0.5) @ vectors.conj().T
    scaled = FockOperator(chi.spec, root @ chi.matrix, "odd", f"{chi.name or 'chi'}'")
    return scaled, scaled.dagger()


@dataclass
class OddPairKernel:
    """
    Projector E_A = X⁻¹χχ† or E_B = X⁻¹χ†χ for a Grassmann-shifted χ

    Only its coherent-state matrix elements are algebra-valued numbers; for a
    single shifted mode the rank-one factors |θ⟩, ⟨θ| (case A) or |θ̄), (θ̄|
    (case B) are kept as well.
    """

    case: str
    operator: GrassmannOperator
    idempotency: float
    self_adjointness: float
    outer: Optional[Tuple[CoherentVector, CoherentVector]] = None

    @property
    def route(self) -> str:
        return f"odd-pair-{self.case}"

    @property
    def spec(self) -> HilbertSpec:
        return self.operator.spec

    def matrix_element(self, bra: CoherentVector, ket: CoherentVector, via: str = "operator") -> GrassmannElement:
        if via == "outer":
            if self.outer is None:
                raise ConstraintError("No rank-one factors stored for this projector")
            u, u_dagger = self.outer
            return overlap(bra, u) * overlap(u_dagger, ket)
        return matrix_element(bra, self.operator, ket)


def project_odd_pair(
    chi: ConstraintOperator,
    case: str = "A",
    chi_dagger: Optional[ConstraintOperator] = None
) -> Union[Projector, OddPairKernel]:
    """
    E_A = X⁻¹χχ† or E_B = X⁻¹χ†χ with X = {χ, χ†}

    Args:
        chi: Odd constraint, numeric or Grassmann-shifted
        case: "A" or "B"
        chi_dagger: Adjoint (computed when omitted)

    Returns:
        Projector for numeric χ, OddPairKernel for Grassmann-shifted χ
    """
    if case not in ("A", "B"):
        raise ConstraintError(f"case must be A or B, got {case!r}")
    chi_dagger = chi.dagger() if chi_dagger is None else chi_dagger
    x, x_inv = _x_operator(numeric(chi), numeric(chi_dagger))

    if isinstance(chi, FockOperator) and isinstance(chi_dagger, FockOperator):
        product = chi @ chi_dagger if case == "A" else chi_dagger @ chi
        return Projector.certify(x_inv @ product, f"odd-pair-{case}")

    chi_g = chi if isinstance(chi, GrassmannOperator) else GrassmannOperator.from_fock(chi, chi_dagger.registry)
    chi_dagger_g = chi_dagger if isinstance(chi_dagger, GrassmannOperator) else GrassmannOperator.from_fock(chi_dagger, chi_g.registry)
    full_x = chi_g @ chi_dagger_g + chi_dagger_g @ chi_g
    if full_x.max_deviation(x) > settings.closure_tolerance:
        raise ConstraintError("{χ, χ†} carries Grassmann terms; expected a complex operator")
    product = chi_g @ chi_dagger_g if case == "A" else chi_dagger_g @ chi_g
    e = GrassmannOperator.from_fock(x_inv, chi_g.registry) @ product
    idempotency = e.max_deviation(e @ e)
    self_adjointness = e.max_deviation(e.dagger())
    tol = settings.projector_tolerance
    if idempotency > tol or self_adjointness > tol:
        raise CertificateError(
            f"odd-pair-{case} is not a projector: |E²-E| = {idempotency:.3e}, |E†-E| = {self_adjointness:.3e}"
        )
    e.name = f"E_{case}"

    outer = None
    if chi_g.shift is not None and chi_g.spec.n_fermions == 1 and x.max_deviation(FockOperator.identity(x.spec)) <= tol:
        _, bar_label, label = chi_g.shift
        if case == "A":
            u = coherent_ket(chi_g.registry, chi_g.spec, [(bar_label, label)])
        else:
            u = odd_coherent_ket(chi_g.registry, chi_g.spec, [(bar_label, label)])
        outer = (u, u.adjoint())
    return OddPairKernel(case, e, idempotency, self_adjointness, outer)


def project_odd_family(
    pairs: Sequence[Tuple[FockOperator, FockOperator]],
    cases: Sequence[str]
) -> Projector:
    """
    E = E^(1)_{i1} ⋯ E^(M)_{iM} for constraints obeying
    {χ_α, χ_β} = 0, {χ_α, χ_β†} = δ_αβ
    """
    if len(pairs) != len(cases):
        raise ConstraintError("One case per constraint pair is required")
    for i, (chi_a, _) in enumerate(pairs):
        for j, (chi_b, chi_b_dagger) in enumerate(pairs):
            target = 1.0 if i == j else 0.0
            if abs(anticommutator_scalar(chi_a, chi_b_dagger) - target) > settings.closure_tolerance:
                raise ConstraintError("Constraint family is not diagonal")
            if abs(anticommutator_scalar(chi_a, chi_b)) > settings.closure_tolerance:
                raise ConstraintError("Constraint family is not diagonal")
    product = FockOperator.identity(pairs[0][0].spec)
    for (chi, chi_dagger), case in zip(pairs, cases):
        product = product @ project_odd_pair(chi, case, chi_dagger).operator
    return Projector.certify(product, "odd-pair-" + "".join(cases))


def even_replacement(
    pairs: Sequence[Tuple[FockOperator, FockOperator]],
    hamiltonian: Optional[FockOperator] = None
) -> ConstraintSet:
    """Replace each odd pair (χ, χ†) by the even constraints Φ_A = χ†χ and Φ_B = χχ†"""
    evens = []
    for alpha, (chi, chi_dagger) in enumerate(pairs, start=1):
        evens.append((f"PhiA{alpha}", chi_dagger @ chi))
        evens.append((f"PhiB{alpha}", chi @ chi_dagger))
    return ConstraintSet(pairs[0][0].spec, evens=evens, hamiltonian=hamiltonian)


def project_even_replacement(chi: FockOperator, case: str = "A", chi_dagger: Optional[FockOperator] = None) -> Projector:
    """E_A = ∫dη/2π exp(−iη χ†χ) (case A) or the χχ† average (case B)"""
    chi_dagger = chi.dagger() if chi_dagger is None else chi_dagger
    phi = chi_dagger @ chi if case == "A" else chi @ chi_dagger
    return project_group_average(FockOperator(phi.spec, phi.matrix, "even", f"Phi{case}"))
