"""
Time-lattice path integration
Exact evaluation of constrained coherent-state path integrals: short-time
kernels on each slice are folded together by Berezin convolution over fresh
slice generators held in a run-local registry scope.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from algebra.coherent import (
    LabelPairs,
    apply,
    boson_coherent,
    coherent_bra,
    coherent_ket,
    matrix_element,
    mode_labels,
    overlap,
    overlap_closed_form,
    register_labels,
    substitute,
)
from algebra.fock import FockOperator, HilbertSpec, OperatorPolynomial, mat_exp, realize
from algebra.grassmann import GeneratorRegistry, GrassmannElement, GrassmannError, exp_even, integrate_pairs
from constraints.projectors import OddPairKernel, Projector
from models.trotter import TrotterSlopeModel
from propagators.kernels import ConstrainedKernel, bose_fermi_points, constrained_evolution, graded_evolution

logger = logging.getLogger(__name__)

SCHEDULES = ("endpoint-average",)
SUBSTITUTIONS = ("normal-symbol", "exact")


class SliceMismatchError(GrassmannError):
    pass


class PlanError(ValueError):
    pass


@dataclass
class LatticePlan:
    """
    Time-lattice plan

    Attributes:
        example_id: Catalog example the plan runs on
        n_slices: Number of time slices N_t
        t: Total time
        schedule: "endpoint-average" (every η_n = 0 with one group average
            at τ = 0) or explicit per-slice multipliers η_n
        substitution: "normal-symbol" replaces H by H(ψ̄_n, ψ_{n−1});
            "exact" uses the operator matrix element of each slice
    """

    example_id: str
    n_slices: int
    t: float
    schedule: Union[str, Sequence[float]] = "endpoint-average"
    substitution: str = "normal-symbol"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n_slices) < 1:
            raise PlanError(f"n_slices must be at least 1, got {self.n_slices}")
        self.n_slices = int(self.n_slices)
        if self.substitution not in SUBSTITUTIONS:
            raise PlanError(f"Unknown substitution {self.substitution!r}; expected one of {SUBSTITUTIONS}")
        if isinstance(self.schedule, str):
            if self.schedule not in SCHEDULES:
                raise PlanError(f"Unknown schedule {self.schedule!r}")
        elif len(self.schedule) != self.n_slices:
            raise PlanError(f"{len(self.schedule)} multipliers given for {self.n_slices} slices")

    @property
    def epsilon(self) -> float:
        return self.t / self.n_slices

    def multipliers(self) -> List[float]:
        if isinstance(self.schedule, str):
            return [0.0] * self.n_slices
        return [float(eta) for eta in self.schedule]


def short_time_kernel(
    registry: GeneratorRegistry,
    bra_labels: LabelPairs,
    ket_labels: LabelPairs,
    hamiltonian: Optional[OperatorPolynomial],
    eps: float,
    phi: Optional[OperatorPolynomial] = None,
    eta: float = 0.0,
    substitution: str = "normal-symbol",
    spec: Optional[HilbertSpec] = None
) -> GrassmannElement:
    """
    One slice ⟨ψ_n|e^{−iε(H + ηΦ)}|ψ_{n−1}⟩

    With the normal-symbol substitution this is the overlap times
    exp{−iεH(ψ̄_n, ψ_{n−1})} exp{−iεηΦ(ψ̄_n, ψ_{n−1})}.

    Args:
        registry: Registry holding both label sets
        bra_labels: Slice n labels
        ket_labels: Slice n−1 labels
        hamiltonian: Normal-ordered Hamiltonian polynomial or None
        eps: Slice length
        phi: Even constraint polynomial or None
        eta: Multiplier of this slice
        substitution: "normal-symbol" or "exact"
        spec: Fermion Hilbert space, needed for the exact substitution

    Returns:
        Even GrassmannElement
    """
    if substitution == "exact":
        if spec is None:
            raise PlanError("The exact substitution needs the Hilbert space")
        generator = FockOperator.zero(spec)
        if hamiltonian is not None:
            generator = generator + realize(hamiltonian, spec)
        if phi is not None and eta:
            generator = generator + eta * realize(phi, spec)
        step = mat_exp(generator, -1j * eps)
        return matrix_element(coherent_bra(registry, spec, bra_labels), step, coherent_ket(registry, spec, ket_labels))

    value = overlap_closed_form(registry, bra_labels, ket_labels)
    bars = [p[0] for p in bra_labels]
    plains = [p[1] for p in ket_labels]
    for poly, scale in ((hamiltonian, 1.0), (phi, eta)):
        if poly is None or not scale:
            continue
        if not poly.is_normal_ordered():
            raise GrassmannError(f"Substitution H(ψ̄_n, ψ_(n-1)) needs a normal-ordered polynomial: {poly.render()}")
        value = value * exp_even(-1j * eps * scale * substitute(poly, registry, bars, plains))
    return value


def constrained_short_time_kernel(
    registry: GeneratorRegistry,
    bra_labels: LabelPairs,
    ket_labels: LabelPairs,
    hamiltonian: Optional[OperatorPolynomial],
    projector: Union[Projector, OddPairKernel],
    eps: float,
    spec: HilbertSpec,
    substitution: str = "normal-symbol"
) -> GrassmannElement:
    """
    ⟨ψ_n|𝔼e^{−iε𝔼H𝔼}𝔼|ψ_{n−1}⟩

    A rank-one projector |u⟩⟨u| gives ⟨ψ_n|u⟩ e^{−iεh} ⟨u|ψ_{n−1}⟩ with h the
    symbol of H at the constraint labels (normal-symbol) or ⟨u|H|u⟩ (exact).
    """
    bra = coherent_bra(registry, spec, bra_labels)
    ket = coherent_ket(registry, spec, ket_labels)
    h_matrix = realize(hamiltonian, spec) if hamiltonian is not None else None
    if isinstance(projector, Projector):
        return matrix_element(bra, constrained_evolution(h_matrix, projector, eps), ket)
    if projector.outer is None:
        return matrix_element(bra, graded_evolution(h_matrix, projector, eps), ket)

    u, u_dagger = projector.outer
    if hamiltonian is None:
        h = registry.zero()
    elif substitution == "normal-symbol":
        bar_label, label = u.labels[0]
        h = substitute(hamiltonian, registry, [bar_label], [label])
    else:
        h = matrix_element(u_dagger, h_matrix, u)
    return overlap(bra, u) * exp_even(-1j * eps * h) * overlap(u_dagger, ket)


def convolve(k1: GrassmannElement, k2: GrassmannElement, slice_labels: LabelPairs) -> GrassmannElement:
    """
    ∫dψ̄_n dψ_n k1·k2 over the generators of one slice

    Raises:
        SliceMismatchError: when neither kernel depends on the slice
    """
    slice_set = {label for pair in slice_labels for label in pair}
    used = set(k1.generator_labels()) | set(k2.generator_labels())
    if not slice_set & used:
        raise SliceMismatchError(f"Neither kernel depends on slice generators {sorted(slice_set)}")
    return integrate_pairs(k1 * k2, slice_labels)


def _fold(
    scope: GeneratorRegistry,
    points: List[LabelPairs],
    slice_kernel
) -> GrassmannElement:
    """Fold slice kernels from the final point down to points[0]"""
    top = len(points) - 1
    acc = slice_kernel(top, points[top], points[top - 1])
    for n in range(top - 1, 0, -1):
        acc = convolve(acc, slice_kernel(n, points[n], points[n - 1]), points[n])
    return acc


def lattice_propagate(plan: LatticePlan, setup) -> ConstrainedKernel:
    """
    Lattice kernel for a catalog example

    First-class and unconstrained examples fold bare short-time kernels and
    insert the group average once at τ = 0 through ⟨Ψ₀|𝔼|Ψ′⟩; second-class
    examples insert the projector on every slice.

    Args:
        plan: Lattice plan
        setup: ExampleSetup from the catalog

    Returns:
        ConstrainedKernel with route "lattice"
    """
    if setup.example_id != plan.example_id:
        raise PlanError(f"Plan for {plan.example_id!r} cannot run on {setup.example_id!r}")
    if setup.lattice is None:
        raise PlanError(f"Example {setup.example_id!r} has no lattice form")
    scope = setup.registry.scope()
    spec = setup.spec.fermion_only()
    n_modes = spec.n_fermions
    second_class = setup.constraint_class == "second"
    if second_class and not isinstance(plan.schedule, str):
        raise PlanError("Second-class plans insert the projector on every slice; multipliers do not apply")
    if not isinstance(plan.schedule, str) and setup.phi_polynomial is None:
        raise PlanError(f"Example {setup.example_id!r} has no fermion constraint polynomial for multipliers")

    first = 0 if setup.lattice == "endpoint" else 1
    points: List[LabelPairs] = [setup.initial_labels]
    for n in range(first, plan.n_slices):
        labels = mode_labels(f"slice{n}_", n_modes)
        register_labels(scope, labels)
        if n == 0:
            points[0] = labels
        else:
            points.append(labels)
    points.append(setup.final_labels)
    logger.info("lattice %s: %d slices, %d generators", plan.example_id, plan.n_slices, len(scope))

    eps = plan.epsilon
    etas = plan.multipliers()
    poly = setup.lattice_hamiltonian

    def slice_kernel(n, bra_labels, ket_labels):
        if second_class:
            return constrained_short_time_kernel(
                scope, bra_labels, ket_labels, poly, setup.projector, eps, spec, plan.substitution
            )
        return short_time_kernel(
            scope, bra_labels, ket_labels, poly, eps, setup.phi_polynomial, etas[n - 1], plan.substitution, spec
        )

    acc = _fold(scope, points, slice_kernel)
    if setup.lattice == "endpoint":
        bra = coherent_bra(scope, spec, points[0])
        ket = coherent_ket(scope, spec, setup.initial_labels)
        if setup.example_id == "bose-fermi":
            value = _bose_fermi_endpoint(acc, bra, ket, points[0], setup, plan)
        else:
            insertion = matrix_element(bra, setup.projector.operator, ket)
            value = convolve(acc, insertion, points[0])
    else:
        value = acc

    value = value.rebind(setup.registry)
    return ConstrainedKernel(
        plan.example_id, "lattice", value, setup.final_labels, setup.initial_labels,
        setup.extra_labels, {"t": plan.t, "n_slices": plan.n_slices, "substitution": plan.substitution}
    )


def _bose_fermi_endpoint(acc, bra, ket, slice_labels, setup, plan) -> GrassmannElement:
    """
    Multiplier average at τ = 0 for the boson-fermion example

    The fermion slices are already folded into acc. The boson factor runs on
    its own truncated Fock lattice: |z′⟩ is stepped through every slice by
    e^{−iεωN_b}, then e^{−iξN_b} and the final ⟨z″| close it.
    """
    params = setup.params
    omega, p = params["omega"], int(params["p"])
    points = bose_fermi_points(setup.spec.n_bosons, setup.spec.n_fermions, setup.spec.boson_cutoff, p)
    number = realize(OperatorPolynomial.number(range(1, bra.spec.n_fermions + 1)), bra.spec)

    bosons = setup.spec.boson_only()
    boson_number = realize(OperatorPolynomial.number(range(1, bosons.n_bosons + 1), kind="b"), bosons)
    step = mat_exp(boson_number, -1j * omega * plan.epsilon)
    evolved = boson_coherent(setup.z_initial, bosons, acc.registry)
    for _ in range(plan.n_slices):
        evolved = apply(step, evolved)
    final = boson_coherent(setup.z_final, bosons, acc.registry).adjoint()

    total = acc.registry.zero()
    for k in range(points):
        xi = 2 * np.pi * k / points
        # fermion part of e^{−iξΦ} is e^{iξN_f}
        insertion = matrix_element(bra, mat_exp(number, 1j * xi), ket)
        fermions = convolve(acc, insertion, slice_labels)
        boson_part = overlap(final, apply(mat_exp(boson_number, -1j * xi), evolved)).scalar_part()
        total = total + complex(np.exp(1j * xi * p) * boson_part) * fermions
    return total / points


def trotter_convergence(
    setup,
    reference: ConstrainedKernel,
    t: float,
    sweep: Sequence[int] = (2, 4, 8, 16),
    substitution: str = "normal-symbol"
) -> Tuple[pd.DataFrame, dict]:
    """
    Lattice error against a reference kernel as a function of N_t

    Args:
        setup: ExampleSetup with a lattice form
        reference: Operator-side kernel at time t
        t: Total time
        sweep: Slice counts
        substitution: Short-time substitution rule

    Returns:
        Tuple of (DataFrame with n_slices and error, slope fit summary)
    """
    rows = []
    for n_slices in sweep:
        kernel = lattice_propagate(LatticePlan(setup.example_id, n_slices, t, substitution=substitution), setup)
        rows.append({'n_slices': n_slices, 'error': kernel.deviation(reference)})
    df = pd.DataFrame(rows, columns=['n_slices', 'error'])
    fit = TrotterSlopeModel().fit(df)
    logger.info("trotter sweep for %s: slope %.3f", setup.example_id, fit['slope'])
    return df, fit
