"""
Example catalog
Named setups for every worked example: Hilbert space, generator labels,
Hamiltonian, constraint set and projector, plus route dispatch for kernels
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from algebra.coherent import LabelPairs, coherent_bra, coherent_ket, mode_labels, register_labels
from algebra.fock import FockOperator, HilbertSpec, OperatorPolynomial, realize
from algebra.graded import shifted_annihilator
from algebra.grassmann import GeneratorRegistry
from constraints.projectors import (
    ConstraintSet,
    OddPairKernel,
    Projector,
    anticommutator_matrix,
    diagonalize_odd,
    pair_self_adjoint,
    project_group_average,
    project_kernel,
    project_odd_family,
    project_odd_pair,
)
from propagators.kernels import ConstrainedKernel, bose_fermi_kernel, kernel_operator_side
from propagators.lattice import LatticePlan, lattice_propagate
from propagators.oracles import UnknownExampleError, oracle_closed_form

logger = logging.getLogger(__name__)

THETA = ("thetabar", "theta")


@dataclass
class ExampleSetup:
    """Everything a route needs to evaluate one worked example"""

    example_id: str
    spec: HilbertSpec
    registry: GeneratorRegistry
    final_labels: LabelPairs
    initial_labels: LabelPairs
    constraint_class: str
    constraints: Optional[ConstraintSet] = None
    projector: Union[Projector, OddPairKernel, None] = None
    hamiltonian: Optional[FockOperator] = None
    hamiltonian_polynomial: Optional[OperatorPolynomial] = None
    lattice_hamiltonian: Optional[OperatorPolynomial] = None
    phi: Optional[FockOperator] = None
    phi_polynomial: Optional[OperatorPolynomial] = None
    lattice: Optional[str] = None
    extra_labels: Tuple[str, ...] = ()
    z_final: Tuple[complex, ...] = ()
    z_initial: Tuple[complex, ...] = ()
    odd_pairs: List[Tuple[FockOperator, FockOperator]] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)

    def bra(self):
        return coherent_bra(self.registry, self.spec, self.final_labels, self.z_final or None)

    def ket(self):
        return coherent_ket(self.registry, self.spec, self.initial_labels, self.z_initial or None)


class ExampleCatalog:
    """Catalog of the worked examples"""

    EXAMPLES = {
        "eq39": {
            "title": "Fixed fermion number, N=2, M=1, H=0",
            "constraint_class": "first",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 1.0},
        },
        "sec42": {
            "title": "Three fermions with one even and two odd first-class constraints",
            "constraint_class": "first",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 1.0},
        },
        "eq58": {
            "title": "Linear odd constraint f - theta, case A, normal-ordered H",
            "constraint_class": "second",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 0.7, "omega": 1.0, "h0": 0.25},
        },
        "eq63": {
            "title": "Linear odd constraint f - theta, case B, anti-normal H",
            "constraint_class": "second",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 0.7, "omega": 1.0, "h0": 0.25},
            "substitution": "exact",
        },
        "eq65": {
            "title": "Two-mode odd constraint (f1 - f2)/sqrt2, case A",
            "constraint_class": "second",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 0.7},
        },
        "eq66": {
            "title": "Two-mode odd constraint (f1 - f2)/sqrt2, case B",
            "constraint_class": "second",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 0.7},
        },
        "bose-fermi": {
            "title": "Bosons and fermions with N_b - N_f = p",
            "constraint_class": "first",
            "routes": ("operator-side", "closed-form", "quadrature", "lattice"),
            "defaults": {"t": 0.0, "omega": 1.0, "p": 0, "n_bosons": 1, "n_fermions": 1,
                         "cutoff": 6, "z_final": 0.5, "z_initial": 0.5},
            "substitution": "exact",
        },
        "sec62": {
            "title": "Nonlinear odd constraint f1 - f2 f3 f4dag",
            "constraint_class": "second",
            "routes": (),
            "defaults": {},
        },
        "eq68": {
            "title": "Two non-diagonal self-adjoint odd pairs brought to diagonal form",
            "constraint_class": "second",
            "routes": (),
            "defaults": {"cases": "AA"},
        },
        "free": {
            "title": "Unconstrained fermion with H = omega fdag f",
            "constraint_class": "none",
            "routes": ("operator-side", "closed-form", "lattice"),
            "defaults": {"t": 1.0, "omega": 1.0},
        },
    }

    def list_examples(self) -> pd.DataFrame:
        """Catalog overview as a DataFrame"""
        return pd.DataFrame([
            {'example': key, 'title': info['title'], 'class': info['constraint_class'],
             'routes': ", ".join(info['routes']) or "-"}
            for key, info in self.EXAMPLES.items()
        ])

    def default_substitution(self, example_id: str) -> str:
        """Lattice short-time rule of an example"""
        return self.EXAMPLES[example_id].get("substitution", "normal-symbol")

    def build(self, example_id: str, labels: Optional[Dict[str, LabelPairs]] = None, **params) -> ExampleSetup:
        """
        Build the setup of an example

        Args:
            example_id: Catalog key
            labels: Optional {"final": pairs, "initial": pairs} overriding the
                default psibar_f1/psi_f1 and psibar_i1/psi_i1 labels
            **params: Overrides of the example defaults

        Returns:
            ExampleSetup
        """
        if example_id not in self.EXAMPLES:
            raise UnknownExampleError(f"Unknown example {example_id!r}; known: {sorted(self.EXAMPLES)}")
        values = dict(self.EXAMPLES[example_id]["defaults"])
        values.update({k: v for k, v in params.items() if v is not None})
        builder = getattr(self, "_build_" + example_id.replace("-", "_"))
        setup = builder(values, labels or {})
        setup.params = values
        logger.debug("built %s on %s", example_id, setup.spec)
        return setup

    # --- builders ---------------------------------------------------------------------

    def _registry(self, n_fermions: int, labels: Dict[str, LabelPairs], theta: bool = False):
        final = [tuple(p) for p in labels.get("final", mode_labels("f", n_fermions))]
        initial = [tuple(p) for p in labels.get("initial", mode_labels("i", n_fermions))]
        registry = GeneratorRegistry()
        register_labels(registry, final)
        register_labels(registry, initial)
        if theta:
            registry.add_pair(*THETA)
        return registry, tuple(final), tuple(initial)

    def _build_eq39(self, values, labels) -> ExampleSetup:
        spec = HilbertSpec(2)
        registry, final, initial = self._registry(2, labels)
        phi_poly = OperatorPolynomial.number([1, 2]) + OperatorPolynomial.constant(-1)
        phi = realize(phi_poly, spec, "even", "Phi")
        return ExampleSetup(
            "eq39", spec, registry, final, initial, "first",
            constraints=ConstraintSet(spec, evens=[("Phi", phi)]),
            projector=project_group_average(phi),
            phi=phi, phi_polynomial=phi_poly, lattice="endpoint"
        )

    def _build_sec42(self, values, labels) -> ExampleSetup:
        spec = HilbertSpec(3)
        registry, final, initial = self._registry(3, labels)
        phi_poly = OperatorPolynomial.from_terms([
            (1, ""), (-1, "fdag1 f1"), (-1, "fdag2 f2"), (-1, "fdag3 f3"),
            (1, "fdag1 f1 fdag2 f2"), (1, "fdag2 f2 fdag3 f3"), (1, "fdag3 f3 fdag1 f1"),
        ])
        phi = realize(phi_poly, spec, "even", "Phi")
        chi = realize(OperatorPolynomial.from_terms([(1, "f1 f2 f3")]), spec, "odd", "chi")
        chi_dagger = chi.dagger()
        odds = [
            ("chi+chidag", FockOperator(spec, (chi + chi_dagger).matrix, "odd", "chi+chidag")),
            ("i(chi-chidag)", FockOperator(spec, 1j * (chi - chi_dagger).matrix, "odd", "i(chi-chidag)")),
        ]
        return ExampleSetup(
            "sec42", spec, registry, final, initial, "first",
            constraints=ConstraintSet(spec, evens=[("Phi", phi)], odds=odds),
            projector=project_group_average(phi),
            phi=phi, phi_polynomial=phi_poly, lattice="endpoint",
            odd_pairs=[(chi, chi_dagger)]
        )

    def _linear_odd(self, example_id, case, poly, values, labels) -> ExampleSetup:
        spec = HilbertSpec(1)
        registry, final, initial = self._registry(1, labels, theta=True)
        chi, chi_dagger = shifted_annihilator(spec, registry, 1, THETA)
        hamiltonian = realize(poly, spec, "even", "H")
        constraints = ConstraintSet(
            spec, odds=[("chi", chi, "chidag"), ("chidag", chi_dagger, "chi")], hamiltonian=hamiltonian
        )
        return ExampleSetup(
            example_id, spec, registry, final, initial, "second",
            constraints=constraints,
            projector=project_odd_pair(chi, case, chi_dagger),
            hamiltonian=hamiltonian, hamiltonian_polynomial=poly, lattice_hamiltonian=poly,
            lattice="direct", extra_labels=THETA
        )

    def _build_eq58(self, values, labels) -> ExampleSetup:
        poly = OperatorPolynomial.constant(values["h0"]) + OperatorPolynomial.number([1], values["omega"])
        return self._linear_odd("eq58", "A", poly, values, labels)

    def _build_eq63(self, values, labels) -> ExampleSetup:
        poly = OperatorPolynomial.from_terms([(values["h0"], ""), (values["omega"], "f1 fdag1")])
        return self._linear_odd("eq63", "B", poly, values, labels)

    def _two_mode(self, example_id, case, values, labels) -> ExampleSetup:
        spec = HilbertSpec(2)
        registry, final, initial = self._registry(2, labels)
        root = 1 / np.sqrt(2)
        chi = realize(OperatorPolynomial.from_terms([(root, "f1"), (-root, "f2")]), spec, "odd", "chi")
        chi_dagger = chi.dagger()
        return ExampleSetup(
            example_id, spec, registry, final, initial, "second",
            constraints=ConstraintSet(spec, odds=[("chi", chi, "chidag"), ("chidag", chi_dagger, "chi")]),
            projector=project_odd_pair(chi, case, chi_dagger),
            lattice="direct", odd_pairs=[(chi, chi_dagger)]
        )

    def _build_eq65(self, values, labels) -> ExampleSetup:
        return self._two_mode("eq65", "A", values, labels)

    def _build_eq66(self, values, labels) -> ExampleSetup:
        return self._two_mode("eq66", "B", values, labels)

    def _build_bose_fermi(self, values, labels) -> ExampleSetup:
        n_bosons, n_fermions = int(values["n_bosons"]), int(values["n_fermions"])
        spec = HilbertSpec(n_fermions, n_bosons, int(values["cutoff"]))
        registry, final, initial = self._registry(n_fermions, labels)
        bosons = range(1, n_bosons + 1)
        fermions = range(1, n_fermions + 1)
        omega, p = float(values["omega"]), int(values["p"])
        phi_poly = (
            OperatorPolynomial.number(bosons, kind="b")
            + OperatorPolynomial.number(fermions, -1.0)
            + OperatorPolynomial.constant(-p)
        )
        h_poly = OperatorPolynomial.number(bosons, omega, kind="b") + OperatorPolynomial.number(fermions, omega)
        phi = realize(phi_poly, spec, "even", "Phi")
        hamiltonian = realize(h_poly, spec, "even", "H")
        z_final = _as_labels(values["z_final"], n_bosons)
        z_initial = _as_labels(values["z_initial"], n_bosons)
        return ExampleSetup(
            "bose-fermi", spec, registry, final, initial, "first",
            constraints=ConstraintSet(spec, evens=[("Phi", phi)], hamiltonian=hamiltonian),
            projector=project_group_average(phi),
            hamiltonian=hamiltonian, hamiltonian_polynomial=h_poly,
            lattice_hamiltonian=OperatorPolynomial.number(fermions, omega),
            phi=phi, lattice="endpoint", z_final=z_final, z_initial=z_initial
        )

    def _build_sec62(self, values, labels) -> ExampleSetup:
        spec = HilbertSpec(4)
        registry, final, initial = self._registry(4, labels)
        chi = realize(OperatorPolynomial.from_terms([(1, "f1"), (-1, "f2 f3 fdag4")]), spec, "odd", "chi")
        chi_dagger = chi.dagger()
        return ExampleSetup(
            "sec62", spec, registry, final, initial, "second",
            constraints=ConstraintSet(spec, odds=[("chi", chi, "chidag"), ("chidag", chi_dagger, "chi")]),
            projector=project_odd_pair(chi, "A", chi_dagger),
            odd_pairs=[(chi, chi_dagger)]
        )

    def _build_eq68(self, values, labels) -> ExampleSetup:
        spec = HilbertSpec(2)
        registry, final, initial = self._registry(2, labels)
        root = 1 / np.sqrt(2)
        majoranas = []
        for sign in (-1.0, 1.0):
            chi = realize(OperatorPolynomial.from_terms([(root, "f1"), (sign * root, "f2")]), spec, "odd")
            majoranas.append((chi + chi.dagger()).matrix)
            majoranas.append(1j * (chi - chi.dagger()).matrix)
        # real mixing makes the anticommutator matrix non-diagonal
        mixing = np.array([
            [1.0, 0.3, 0.0, 0.0],
            [0.0, 1.0, 0.2, 0.0],
            [0.0, 0.0, 1.0, 0.1],
            [0.0, 0.0, 0.0, 1.0],
        ])
        mixed = [
            FockOperator(spec, sum(mixing[a, b] * majoranas[b] for b in range(4)), "odd", f"c{a + 1}")
            for a in range(4)
        ]
        w = anticommutator_matrix(mixed)
        normalized = diagonalize_odd(w, mixed)
        pairs = [pair_self_adjoint(normalized[0], normalized[1]), pair_self_adjoint(normalized[2], normalized[3])]
        cases = tuple(values.get("cases", "AA"))
        return ExampleSetup(
            "eq68", spec, registry, final, initial, "second",
            constraints=ConstraintSet(spec, odds=[(op.name, op) for op in mixed]),
            projector=project_odd_family(pairs, cases),
            odd_pairs=pairs
        )

    def _build_free(self, values, labels) -> ExampleSetup:
        spec = HilbertSpec(1)
        registry, final, initial = self._registry(1, labels)
        poly = OperatorPolynomial.number([1], float(values["omega"]))
        hamiltonian = realize(poly, spec, "even", "H")
        return ExampleSetup(
            "free", spec, registry, final, initial, "none",
            projector=project_kernel([FockOperator.zero(spec)]),
            hamiltonian=hamiltonian, hamiltonian_polynomial=poly, lattice_hamiltonian=poly,
            lattice="direct"
        )

    # --- routes -------------------------------------------------------------------------

    def kernel(
        self,
        setup: ExampleSetup,
        route: str,
        t: Optional[float] = None,
        n_slices: int = 4,
        substitution: Optional[str] = None,
        schedule: Union[str, Sequence[float]] = "endpoint-average",
        points: Optional[int] = None
    ) -> ConstrainedKernel:
        """
        Kernel of an example along one route

        Args:
            setup: Built example
            route: operator-side, closed-form, quadrature or lattice
            t: Time (example default when None)
            n_slices: Lattice slices
            substitution: Lattice short-time rule (example default when None)
            schedule: Lattice multiplier schedule
            points: Quadrature size for the bose-fermi quadrature

        Returns:
            ConstrainedKernel
        """
        routes = self.EXAMPLES[setup.example_id]["routes"]
        if route not in routes:
            raise ValueError(f"Example {setup.example_id!r} supports routes {routes}, not {route!r}")
        t = float(setup.params.get("t", 0.0) if t is None else t)
        if route == "operator-side":
            return kernel_operator_side(
                setup.bra(), setup.ket(), setup.hamiltonian, setup.projector, t,
                setup.example_id, setup.extra_labels
            )
        if route == "closed-form":
            params = dict(setup.params, t=t, theta=THETA, cutoff=setup.spec.boson_cutoff)
            params["z_final"], params["z_initial"] = setup.z_final, setup.z_initial
            if setup.hamiltonian_polynomial is not None:
                params["hamiltonian"] = setup.hamiltonian_polynomial
            return oracle_closed_form(setup.example_id, setup.registry, setup.final_labels, setup.initial_labels, params)
        if route == "quadrature":
            return bose_fermi_kernel(
                setup.registry, setup.z_final, setup.final_labels, setup.z_initial, setup.initial_labels,
                float(setup.params["omega"]), t, int(setup.params["p"]), setup.spec.boson_cutoff, points
            )
        substitution = substitution or self.default_substitution(setup.example_id)
        plan = LatticePlan(setup.example_id, n_slices, t, schedule, substitution)
        return lattice_propagate(plan, setup)

    def compare(self, setup: ExampleSetup, route_a: str, route_b: str, **kwargs) -> Tuple[ConstrainedKernel, ConstrainedKernel, float]:
        """Kernels along two routes and their max coefficient deviation"""
        first = self.kernel(setup, route_a, **kwargs)
        second = self.kernel(setup, route_b, **kwargs)
        return first, second, first.deviation(second)


def _as_labels(value, count: int) -> Tuple[complex, ...]:
    """Scalar, [re, im] pair or list of either, expanded to one label per boson mode"""
    if isinstance(value, (int, float, complex)):
        return (complex(value),) * count
    items = list(value)
    if len(items) == 2 and all(isinstance(v, (int, float)) for v in items) and count != 2:
        return (complex(items[0], items[1]),) * count
    out = []
    for item in items:
        out.append(complex(item[0], item[1]) if isinstance(item, (list, tuple)) else complex(item))
    if len(out) != count:
        raise ValueError(f"Expected {count} boson labels, got {len(out)}")
    return tuple(out)


# Singleton instance
example_catalog = ExampleCatalog()
