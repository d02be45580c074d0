"""
Coherent states
Fermion coherent states with Grassmann labels, odd coherent states,
truncated boson coherent states, and their overlaps and matrix elements.

A ket stores its Grassmann coefficients to the right of the basis vectors
(|n⟩a_n) and a bra to the left (b_n⟨n|); the overlap is Σ b_n a_n.
"""

import logging
from math import factorial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from algebra.fock import (
    FockOperator,
    HilbertSpec,
    DimensionError,
    OperatorPolynomial,
    build_fermion_ops,
    realize,
)
from algebra.graded import GrassmannOperator
from algebra.grassmann import (
    GeneratorRegistry,
    GrassmannElement,
    GrassmannError,
    ParityError,
    canonicalize,
    common_registry,
    contract,
    exp_even,
    integrate_array,
    involution_map,
    mask_parity,
)
from utils.settings import settings

logger = logging.getLogger(__name__)

LabelPairs = Sequence[Tuple[str, str]]
Operator = Union[FockOperator, GrassmannOperator, OperatorPolynomial]


def mode_labels(stem: str, n_modes: int) -> List[Tuple[str, str]]:
    """(bar, plain) label pairs such as ("psibar_f1", "psi_f1") for a state"""
    return [(f"psibar_{stem}{i}", f"psi_{stem}{i}") for i in range(1, n_modes + 1)]


def register_labels(registry: GeneratorRegistry, labels: LabelPairs) -> None:
    for bar_label, label in labels:
        registry.add_pair(bar_label, label)


class CoherentVector:
    """Hilbert-space vector with Grassmann amplitudes"""

    __array_ufunc__ = None

    def __init__(
        self,
        spec: HilbertSpec,
        registry: GeneratorRegistry,
        masks: np.ndarray,
        coeffs: np.ndarray,
        side: str = "ket",
        labels: LabelPairs = (),
        z: Sequence[complex] = (),
        kind: str = "composite",
        canonical: bool = False
    ):
        if side not in ("ket", "bra"):
            raise GrassmannError(f"side must be ket or bra, got {side!r}")
        if not canonical:
            masks, coeffs = canonicalize(masks, coeffs)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[0] != spec.dimension:
            raise DimensionError(f"{coeffs.shape[0]} amplitudes for dimension {spec.dimension}")
        self.spec = spec
        self.registry = registry
        self.masks = np.asarray(masks, dtype=np.uint64)
        self.coeffs = coeffs
        self.side = side
        self.labels = tuple(tuple(p) for p in labels)
        self.z = tuple(complex(v) for v in z)
        self.kind = kind

    def __repr__(self) -> str:
        return f"CoherentVector({self.side}, {self.kind}, dim={self.spec.dimension}, labels={self.labels})"

    def _derived(self, masks, coeffs, registry=None, canonical=False, **kwargs) -> "CoherentVector":
        return CoherentVector(
            self.spec, registry or self.registry, masks, coeffs,
            side=kwargs.get("side", self.side),
            labels=kwargs.get("labels", ()),
            z=kwargs.get("z", ()),
            kind=kwargs.get("kind", "composite"),
            canonical=canonical
        )

    def _check(self, other: "CoherentVector"):
        if other.spec != self.spec:
            raise DimensionError(f"Vectors live on different spaces: {self.spec} vs {other.spec}")
        if other.side != self.side:
            raise GrassmannError(f"Cannot combine a {self.side} with a {other.side}")

    def __add__(self, other: "CoherentVector") -> "CoherentVector":
        self._check(other)
        registry = common_registry(self.registry, other.registry)
        return self._derived(
            np.concatenate([self.masks, other.masks]),
            np.concatenate([self.coeffs, other.coeffs], axis=1),
            registry=registry
        )

    def __neg__(self) -> "CoherentVector":
        return self._derived(self.masks, -self.coeffs, canonical=True)

    def __sub__(self, other: "CoherentVector") -> "CoherentVector":
        return self + (-other)

    def __mul__(self, scalar) -> "CoherentVector":
        if not isinstance(scalar, (int, float, complex, np.number)):
            return NotImplemented
        return self._derived(self.masks, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "CoherentVector":
        return self._derived(self.masks, self.coeffs / scalar)

    def amplitude(self, index: int) -> GrassmannElement:
        return GrassmannElement(self.registry, self.masks, self.coeffs[index])

    def amplitudes(self, convention: str = "stored") -> List[GrassmannElement]:
        """
        Amplitudes per basis state

        Args:
            convention: "stored" (kets right, bras left of the basis vector),
                "left" for kets written a_n|n⟩, "right" for bras written ⟨n|b_n

        Returns:
            List of GrassmannElement
        """
        coeffs = self.coeffs
        if convention != "stored":
            if (convention, self.side) not in (("left", "ket"), ("right", "bra")):
                raise GrassmannError(f"Convention {convention!r} does not apply to a {self.side}")
            flip = np.outer(self.spec.fermion_parities(), mask_parity(self.masks)) % 2
            coeffs = np.where(flip == 1, -coeffs, coeffs)
        return [GrassmannElement(self.registry, self.masks, coeffs[i]) for i in range(self.spec.dimension)]

    def parity(self) -> str:
        """Total grading of the vector: amplitude degree plus basis fermion parity"""
        nonzero = np.abs(self.coeffs) > 0
        total = (self.spec.fermion_parities()[:, None] + mask_parity(self.masks)[None, :]) % 2
        seen = set(np.unique(total[nonzero]).tolist())
        if seen <= {0}:
            return "even"
        if seen == {1}:
            return "odd"
        return "mixed"

    def is_zero(self) -> bool:
        return len(self.masks) == 0

    def max_deviation(self, other: "CoherentVector") -> float:
        diff = self - other
        return float(np.max(np.abs(diff.coeffs))) if diff.coeffs.size else 0.0

    def adjoint(self) -> "CoherentVector":
        """Ket to bra (or back) by involuting every amplitude"""
        images, signs = involution_map(self.registry, self.masks)
        side = "bra" if self.side == "ket" else "ket"
        return self._derived(
            images, np.conj(self.coeffs) * signs[None, :],
            side=side, labels=self.labels, z=tuple(np.conj(self.z)), kind=self.kind
        )

    def left_multiply(self, element: GrassmannElement) -> "CoherentVector":
        """g·v, with the graded sign when g passes a ket's basis vector"""
        if self.side == "ket":
            return apply(GrassmannOperator.scalar(self.spec, element), self)
        masks, coeffs = contract(",n->n", element.masks, element.coeffs, self.masks, self.coeffs)
        return self._derived(masks, coeffs, registry=common_registry(element.registry, self.registry), canonical=True)

    def right_multiply(self, element: GrassmannElement) -> "CoherentVector":
        """v·g, with the graded sign when g passes a bra's basis vector"""
        if self.side == "bra":
            return apply(GrassmannOperator.scalar(self.spec, element), self)
        masks, coeffs = contract("n,->n", self.masks, self.coeffs, element.masks, element.coeffs)
        return self._derived(masks, coeffs, registry=common_registry(element.registry, self.registry), canonical=True)


def vacuum(spec: HilbertSpec, registry: GeneratorRegistry, side: str = "ket") -> CoherentVector:
    coeffs = np.zeros((spec.dimension, 1), dtype=complex)
    coeffs[0, 0] = 1.0
    return CoherentVector(spec, registry, np.zeros(1, dtype=np.uint64), coeffs, side=side, kind="coherent")


def _check_labels(registry: GeneratorRegistry, labels: LabelPairs, n_modes: int) -> None:
    if len(labels) != n_modes:
        raise GrassmannError(f"Expected {n_modes} label pairs, got {len(labels)}")
    for bar_label, label in labels:
        registry.index(bar_label)
        registry.index(label)
        registry.add_pair(bar_label, label)


def _fermion_ket(registry: GeneratorRegistry, spec: HilbertSpec, labels: Optional[LabelPairs]) -> CoherentVector:
    fermions = spec.fermion_only()
    if labels is None or fermions.n_fermions == 0:
        return vacuum(fermions, registry)
    _check_labels(registry, labels, fermions.n_fermions)
    generator = None
    for (f, fdag), (_, label) in zip(build_fermion_ops(fermions), labels):
        piece = GrassmannOperator.from_fock(fdag, registry) @ registry.generator(label)
        generator = piece if generator is None else generator + piece
    state = vacuum(fermions, registry)
    term = state
    for k in range(1, fermions.n_fermions + 1):
        term = apply(generator, term) / k
        state = state + term
    exponent = registry.zero()
    for bar_label, label in labels:
        exponent = exponent - 0.5 * registry.generator(bar_label) * registry.generator(label)
    return state.left_multiply(exp_even(exponent))


def boson_amplitudes(z: Sequence[complex], n_bosons: int, cutoff: int) -> np.ndarray:
    """Truncated e^{-|z|²/2} zⁿ/√n! amplitudes, boson mode 1 fastest"""
    if len(z) != n_bosons:
        raise GrassmannError(f"Expected {n_bosons} boson labels, got {len(z)}")
    amplitudes = np.ones(1, dtype=complex)
    for value in z:
        levels = np.arange(cutoff + 1)
        single = np.exp(-abs(value) ** 2 / 2) * np.array(
            [value ** n / np.sqrt(factorial(n)) for n in levels], dtype=complex
        )
        # later modes are slower, i.e. the left Kronecker factor
        amplitudes = np.kron(single, amplitudes)
    return amplitudes


def coherent_ket(
    registry: GeneratorRegistry,
    spec: HilbertSpec,
    labels: Optional[LabelPairs] = None,
    z: Optional[Sequence[complex]] = None
) -> CoherentVector:
    """
    exp{−½Ψ̄·Ψ} exp{Σ f_i†ψ_i}|0⟩, tensored with boson coherent states

    Args:
        registry: Registry holding the (ψ̄_i, ψ_i) labels
        spec: Hilbert space
        labels: One (bar, plain) label pair per fermion mode; None gives the vacuum
        z: Boson labels (numeric), one per boson mode

    Returns:
        Ket CoherentVector
    """
    fermion = _fermion_ket(registry, spec, labels)
    if spec.n_bosons == 0:
        coeffs = fermion.coeffs
        z = ()
    else:
        z = tuple(z) if z is not None else (0j,) * spec.n_bosons
        bosons = boson_amplitudes(z, spec.n_bosons, spec.boson_cutoff)
        coeffs = np.kron(bosons[:, None], fermion.coeffs)
    return CoherentVector(
        spec, registry, fermion.masks, coeffs, side="ket",
        labels=labels or (), z=z, kind="coherent", canonical=True
    )


def coherent_bra(
    registry: GeneratorRegistry,
    spec: HilbertSpec,
    labels: Optional[LabelPairs] = None,
    z: Optional[Sequence[complex]] = None
) -> CoherentVector:
    """⟨Ψ| carrying the conjugate labels ψ̄_i on the left"""
    return coherent_ket(registry, spec, labels, z).adjoint()


def odd_coherent_ket(registry: GeneratorRegistry, spec: HilbertSpec, labels: LabelPairs) -> CoherentVector:
    """
    |Θ̄) = exp{½Θ̄·Θ} Π_i (f_i† − θ̄_i)|0⟩, an odd eigenstate of every f_i†
    """
    if spec.n_bosons:
        raise GrassmannError("Odd coherent states are defined on fermion-only spaces")
    _check_labels(registry, labels, spec.n_fermions)
    state = vacuum(spec, registry)
    ops = build_fermion_ops(spec)
    for (f, fdag), (bar_label, _) in reversed(list(zip(ops, labels))):
        state = apply(fdag, state) - state.left_multiply(registry.generator(bar_label))
    exponent = registry.zero()
    for bar_label, label in labels:
        exponent = exponent + 0.5 * registry.generator(bar_label) * registry.generator(label)
    state = state.left_multiply(exp_even(exponent))
    return CoherentVector(spec, registry, state.masks, state.coeffs, labels=labels, kind="odd", canonical=True)


def odd_coherent_bra(registry: GeneratorRegistry, spec: HilbertSpec, labels: LabelPairs) -> CoherentVector:
    return odd_coherent_ket(registry, spec, labels).adjoint()


def boson_coherent(z: Sequence[complex], spec: HilbertSpec, registry: GeneratorRegistry) -> CoherentVector:
    """Truncated boson coherent state |z⃗⟩ on the boson factor of spec"""
    bosons = spec.boson_only()
    coeffs = boson_amplitudes(z, bosons.n_bosons, bosons.boson_cutoff)[:, None]
    return CoherentVector(bosons, registry, np.zeros(1, dtype=np.uint64), coeffs, z=z, kind="coherent")


def tensor_states(boson: CoherentVector, fermion: CoherentVector) -> CoherentVector:
    """|z⃗⟩ ⊗ |Ψ⟩ with the boson factor leftmost"""
    if boson.spec.n_fermions or fermion.spec.n_bosons or boson.side != fermion.side:
        raise DimensionError("tensor_states needs a boson-only and a fermion-only vector on the same side")
    if not boson.is_zero() and np.any(boson.masks != 0):
        raise GrassmannError("Boson factor must have numeric amplitudes")
    spec = HilbertSpec(fermion.spec.n_fermions, boson.spec.n_bosons, boson.spec.boson_cutoff)
    coeffs = np.kron(boson.coeffs[:, :1], fermion.coeffs)
    registry = common_registry(boson.registry, fermion.registry)
    return CoherentVector(
        spec, registry, fermion.masks, coeffs, side=fermion.side,
        labels=fermion.labels, z=boson.z, kind=fermion.kind, canonical=True
    )


def apply(op: Operator, vec: CoherentVector) -> CoherentVector:
    """
    Act with an operator on a ket (op|v⟩) or a bra (⟨v|op)

    Args:
        op: FockOperator, GrassmannOperator or OperatorPolynomial
        vec: Target vector

    Returns:
        CoherentVector on the same side
    """
    if isinstance(op, OperatorPolynomial):
        op = realize(op, vec.spec)
    if op.spec != vec.spec:
        raise DimensionError(f"Operator on {op.spec} cannot act on a vector in {vec.spec}")
    if op.parity() == "mixed":
        raise ParityError(f"Cannot apply mixed-parity operator {op!r}")
    if isinstance(op, FockOperator):
        coeffs = op.matrix @ vec.coeffs if vec.side == "ket" else op.matrix.T @ vec.coeffs
        return vec._derived(vec.masks, coeffs)
    registry = common_registry(op.registry, vec.registry)
    if vec.side == "ket":
        masks, coeffs = contract("nk,k->n", op.masks, op.coeffs, vec.masks, vec.coeffs)
    else:
        masks, coeffs = contract("n,nk->k", vec.masks, vec.coeffs, op.masks, op.coeffs)
    return vec._derived(masks, coeffs, registry=registry, canonical=True)


def overlap(bra: CoherentVector, ket: CoherentVector) -> GrassmannElement:
    """⟨bra|ket⟩ = Σ_n b_n a_n"""
    if bra.side != "bra" or ket.side != "ket":
        raise GrassmannError("overlap needs a bra and a ket")
    if bra.spec != ket.spec:
        raise DimensionError(f"Spec mismatch: {bra.spec} vs {ket.spec}")
    registry = common_registry(bra.registry, ket.registry)
    masks, coeffs = contract("n,n->", bra.masks, bra.coeffs, ket.masks, ket.coeffs)
    return GrassmannElement(registry, masks, coeffs, canonical=True)


def substitute(
    poly: OperatorPolynomial,
    registry: GeneratorRegistry,
    bar_labels: Sequence[str],
    labels: Sequence[str],
    z_bar: Sequence[complex] = (),
    z: Sequence[complex] = ()
) -> GrassmannElement:
    """
    G(ψ̄, ψ): replace f_i† by ψ̄_i, f_i by ψ_i (b_i†, b_i by z̄_i, z_i) in written order

    Args:
        poly: Operator polynomial
        registry: Registry holding the labels
        bar_labels: Labels substituted for f_i†
        labels: Labels substituted for f_i
        z_bar, z: Numeric boson labels

    Returns:
        GrassmannElement
    """
    total = registry.zero()
    for term in poly.terms:
        value = registry.scalar(term.coeff)
        for kind, mode in term.factors:
            if kind == "fdag":
                value = value * registry.generator(bar_labels[mode - 1])
            elif kind == "f":
                value = value * registry.generator(labels[mode - 1])
            elif kind == "bdag":
                value = value * complex(z_bar[mode - 1])
            else:
                value = value * complex(z[mode - 1])
        total = total + value
    return total


def matrix_element(bra: CoherentVector, op: Operator, ket: CoherentVector) -> GrassmannElement:
    """
    ⟨bra|op|ket⟩ via apply and overlap

    For a normal-ordered polynomial between fermion coherent states the
    result must equal G(ψ̄″, ψ′)⟨ψ″|ψ′⟩; a mismatch raises.
    """
    value = overlap(bra, apply(op, ket))
    if (
        isinstance(op, OperatorPolynomial)
        and op.is_normal_ordered()
        and bra.kind == ket.kind == "coherent"
        and bra.labels and ket.labels
        and bra.spec.n_bosons == 0
    ):
        expected = substitute(
            op, value.registry, [p[0] for p in bra.labels], [p[1] for p in ket.labels]
        ) * overlap(bra, ket)
        deviation = value.max_deviation(expected)
        if deviation > settings.kernel_tolerance:
            raise GrassmannError(f"Normal-ordered substitution rule violated by {deviation:.3e}")
    return value


def overlap_closed_form(
    registry: GeneratorRegistry,
    bra_labels: LabelPairs,
    ket_labels: LabelPairs
) -> GrassmannElement:
    """exp{−½Ψ̄″·Ψ″ − ½Ψ̄′·Ψ′ + Ψ̄″·Ψ′}"""
    exponent = registry.zero()
    for (bar_f, plain_f), (bar_i, plain_i) in zip(bra_labels, ket_labels):
        g = registry.generator
        exponent = exponent - 0.5 * g(bar_f) * g(plain_f) - 0.5 * g(bar_i) * g(plain_i) + g(bar_f) * g(plain_i)
    return exp_even(exponent)


def identity_resolution_check(spec: HilbertSpec) -> float:
    """
    Max-norm deviation of ∫dΨ̄dΨ |Ψ⟩⟨Ψ| from the identity

    Args:
        spec: Fermion-only Hilbert space with 1 ≤ N ≤ 4

    Returns:
        Residual norm
    """
    if spec.n_bosons or not 1 <= spec.n_fermions <= 4:
        raise DimensionError("identity_resolution_check needs a fermion-only space with 1 to 4 modes")
    registry = GeneratorRegistry()
    labels = mode_labels("", spec.n_fermions)
    register_labels(registry, labels)
    ket = coherent_ket(registry, spec, labels)
    projector = GrassmannOperator.outer(ket, ket.adjoint())
    masks, coeffs = projector.masks, projector.coeffs
    for bar_label, label in reversed(labels):
        masks, coeffs = integrate_array(masks, coeffs, registry.index(label))
        masks, coeffs = integrate_array(masks, coeffs, registry.index(bar_label))
    residual = 0.0
    identity = np.eye(spec.dimension)
    for j, mask in enumerate(masks):
        target = identity if mask == 0 else 0.0
        residual = max(residual, float(np.max(np.abs(coeffs[:, :, j] - target))))
    if not np.any(masks == 0):
        residual = max(residual, 1.0)
    logger.debug("identity resolution residual for N=%d: %.3e", spec.n_fermions, residual)
    return residual
