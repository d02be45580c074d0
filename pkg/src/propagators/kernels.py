"""
Operator-side constrained propagators
Constrained evolution 𝔼e^{−it(𝔼H𝔼)}𝔼, its coherent-state matrix elements,
and the multiplier quadrature of the boson-fermion projector.
"""

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from algebra.coherent import CoherentVector, LabelPairs, matrix_element
from algebra.fock import DimensionError, FockOperator, commutator, mat_exp
from algebra.graded import GrassmannOperator
from algebra.grassmann import (
    GeneratorRegistry,
    GrassmannElement,
    GrassmannError,
    common_registry,
    exp_even,
)
from constraints.projectors import OddPairKernel, Projector, QuadratureTooSmallError
from utils.settings import settings

logger = logging.getLogger(__name__)

ROUTES = ("operator-side", "closed-form", "quadrature", "lattice")


@dataclass
class ConstrainedKernel:
    """Coherent-state matrix element of a constrained propagator"""

    example_id: str
    route: str
    value: GrassmannElement
    bra_labels: LabelPairs = ()
    ket_labels: LabelPairs = ()
    extra_labels: Tuple[str, ...] = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"Unknown route {self.route!r}; expected one of {ROUTES}")
        allowed = set(self.extra_labels)
        for pair in list(self.bra_labels) + list(self.ket_labels):
            allowed.update(pair)
        stray = set(self.value.generator_labels()) - allowed
        if stray:
            raise GrassmannError(f"{self.route} kernel for {self.example_id} carries foreign generators {sorted(stray)}")

    def deviation(self, other: "ConstrainedKernel") -> float:
        """Largest coefficient difference against another route"""
        registry = common_registry(self.value.registry, other.value.registry)
        return self.value.rebind(registry).max_deviation(other.value.rebind(registry))


def constrained_evolution(
    hamiltonian: Optional[FockOperator],
    projector: Projector,
    t: float
) -> FockOperator:
    """
    𝔼·exp(−it 𝔼H𝔼)·𝔼

    When H commutes with 𝔼 the result must also equal e^{−itH}𝔼.

    Args:
        hamiltonian: Self-adjoint Hamiltonian (None for H = 0)
        projector: Certified projector
        t: Time

    Returns:
        FockOperator
    """
    e = projector.operator
    if hamiltonian is None:
        return e
    if hamiltonian.spec != e.spec:
        raise DimensionError(f"Hamiltonian on {hamiltonian.spec} but projector on {e.spec}")
    restricted = e @ hamiltonian @ e
    evolved = e @ mat_exp(restricted, -1j * t) @ e
    if np.max(np.abs(commutator(hamiltonian, e).matrix)) <= settings.closure_tolerance:
        direct = mat_exp(hamiltonian, -1j * t) @ e
        deviation = evolved.max_deviation(direct)
        if deviation > settings.kernel_tolerance:
            raise GrassmannError(f"e^(-itH)E differs from the restricted evolution by {deviation:.3e}")
    return FockOperator(e.spec, evolved.matrix, "even", "U_E(t)")


def graded_evolution(hamiltonian: Optional[FockOperator], kernel: OddPairKernel, t: float) -> GrassmannOperator:
    """𝔼e^{−it𝔼H𝔼}𝔼 for a projector with Grassmann-valued entries"""
    e = kernel.operator
    if hamiltonian is None:
        return e
    restricted = e @ hamiltonian @ e
    return e @ restricted.expm(-1j * t) @ e


def kernel_operator_side(
    bra: CoherentVector,
    ket: CoherentVector,
    hamiltonian: Optional[FockOperator],
    projector: Union[Projector, OddPairKernel],
    t: float,
    example_id: str = "custom",
    extra_labels: Sequence[str] = ()
) -> ConstrainedKernel:
    """
    ⟨bra|𝔼e^{−it𝔼H𝔼}𝔼|ket⟩ as a Grassmann element

    Args:
        bra: Coherent bra ⟨ψ″|
        ket: Coherent ket |ψ′⟩
        hamiltonian: Hamiltonian matrix or None
        projector: Numeric Projector or Grassmann-valued OddPairKernel
        t: Time
        example_id: Tag stored on the kernel
        extra_labels: Constraint generators allowed in the result

    Returns:
        ConstrainedKernel with route "operator-side"
    """
    if isinstance(projector, OddPairKernel):
        evolution = graded_evolution(hamiltonian, projector, t)
    else:
        evolution = constrained_evolution(hamiltonian, projector, t)
    value = matrix_element(bra, evolution, ket)
    return ConstrainedKernel(
        example_id, "operator-side", value, bra.labels, ket.labels, tuple(extra_labels), {"t": t}
    )


def boson_series(z_final: Sequence[complex], z_initial: Sequence[complex], phase: complex, cutoff: int) -> complex:
    """Π_i Σ_{m ≤ cutoff} (phase·z″_i* z′_i)^m / m!"""
    total = 1.0 + 0j
    for zf, zi in zip(z_final, z_initial):
        x = phase * np.conj(zf) * zi
        total *= sum(x ** m / factorial(m) for m in range(cutoff + 1))
    return complex(total)


def bose_fermi_points(n_bosons: int, n_fermions: int, cutoff: int, p: int) -> int:
    """Smallest exact quadrature size 2·(M·n_max + N + |p|) + 1"""
    return 2 * (n_bosons * cutoff + n_fermions + abs(p)) + 1


def bose_fermi_kernel(
    registry: GeneratorRegistry,
    z_final: Sequence[complex],
    psi_final: LabelPairs,
    z_initial: Sequence[complex],
    psi_initial: LabelPairs,
    omega: float,
    t: float,
    p: int,
    cutoff: int,
    points: Optional[int] = None
) -> ConstrainedKernel:
    """
    Discrete multiplier quadrature of ⟨z″Ψ″|e^{−itH}𝔼|z′Ψ′⟩ with
    H = ω(N_b + N_f) and Φ = N_b − N_f − p

    𝒩 (1/K) Σ_k e^{iφ_k p} exp{e^{−i(ωt+φ_k)} z″*·z′ + e^{−i(ωt−φ_k)} Ψ̄″·Ψ′},
    with the boson exponential truncated at the Fock cutoff.

    Args:
        registry: Registry holding both label sets
        z_final, z_initial: Boson labels
        psi_final, psi_initial: Fermion label pairs
        omega: Frequency
        t: Time
        p: Integer offset in the constraint
        cutoff: Boson occupation cutoff n_max per mode
        points: Quadrature size K (default the smallest exact size)

    Returns:
        ConstrainedKernel with route "quadrature"
    """
    needed = bose_fermi_points(len(z_final), len(psi_final), cutoff, p)
    points = needed if points is None else points
    if points < needed:
        raise QuadratureTooSmallError(f"K = {points} aliases the multiplier average; need at least {needed}")
    g = registry.generator
    pairing = registry.zero()
    normal = registry.zero()
    for (bar_f, plain_f), (bar_i, plain_i) in zip(psi_final, psi_initial):
        pairing = pairing + g(bar_f) * g(plain_i)
        normal = normal - 0.5 * (g(bar_f) * g(plain_f) + g(bar_i) * g(plain_i))
    boson_norm = np.exp(-0.5 * (np.sum(np.abs(z_final) ** 2) + np.sum(np.abs(z_initial) ** 2)))
    total = registry.zero()
    for k in range(points):
        phi = 2 * np.pi * k / points
        bosons = boson_series(z_final, z_initial, np.exp(-1j * (omega * t + phi)), cutoff)
        fermions = exp_even(np.exp(-1j * (omega * t - phi)) * pairing)
        total = total + np.exp(1j * phi * p) * bosons * fermions
    value = boson_norm * exp_even(normal) * (total / points)
    logger.debug("bose-fermi quadrature with K=%d", points)
    return ConstrainedKernel(
        "bose-fermi", "quadrature", value, tuple(psi_final), tuple(psi_initial),
        params={"t": t, "p": p, "omega": omega, "points": points}
    )
