import numpy as np
from pytest import mark, raises

from algebra.coherent import coherent_bra, coherent_ket, matrix_element
from algebra.fock import FockOperator, HilbertSpec, OperatorPolynomial, realize
from algebra.grassmann import GeneratorRegistry, GrassmannError, exp_even, involute
from catalog.examples import example_catalog
from constraints.projectors import QuadratureTooSmallError, project_group_average
from propagators.kernels import (
    ConstrainedKernel,
    bose_fermi_kernel,
    bose_fermi_points,
    boson_series,
    constrained_evolution,
    graded_evolution,
    kernel_operator_side,
)
from propagators.oracles import UnknownExampleError, oracle_closed_form
from utils.settings import settings

EXAMPLES = ["eq39", "sec42", "eq58", "eq63", "eq65", "eq66", "free"]


class TestOperatorSideAgainstClosedForm:

    @mark.parametrize("example_id", EXAMPLES)
    @mark.parametrize("t", [0.0, 0.7, 3.1])
    def test_routes_agree(self, example_id, t):
        setup = example_catalog.build(example_id)
        _, _, deviation = example_catalog.compare(setup, "operator-side", "closed-form", t=t)
        assert deviation <= settings.kernel_tolerance

    @mark.parametrize("omega, h0", [(0.3, 0.0), (2.0, -1.5)])
    def test_linear_odd_parameters(self, omega, h0):
        for example_id in ("eq58", "eq63"):
            setup = example_catalog.build(example_id, omega=omega, h0=h0)
            _, _, deviation = example_catalog.compare(setup, "operator-side", "closed-form", t=1.1)
            assert deviation <= settings.kernel_tolerance

    def test_custom_labels(self):
        labels = {"final": [("abar", "a"), ("bbar", "b")], "initial": [("cbar", "c"), ("dbar", "d")]}
        setup = example_catalog.build("eq39", labels=labels)
        first, second, deviation = example_catalog.compare(setup, "operator-side", "closed-form")
        assert deviation <= settings.kernel_tolerance
        assert set(first.value.generator_labels()) <= {"abar", "a", "bbar", "b", "cbar", "c", "dbar", "d"}

    def test_second_class_kernel_carries_theta(self):
        setup = example_catalog.build("eq58")
        kernel = example_catalog.kernel(setup, "operator-side")
        assert {"thetabar", "theta"} & set(kernel.value.generator_labels())


class TestKernelSymmetries:

    @mark.parametrize("example_id", ["eq39", "eq58", "eq65", "free"])
    @mark.parametrize("t", [0.0, 0.9])
    def test_hermiticity(self, example_id, t):
        setup = example_catalog.build(example_id)
        swapped_bra = coherent_bra(setup.registry, setup.spec, setup.initial_labels)
        swapped_ket = coherent_ket(setup.registry, setup.spec, setup.final_labels)
        forward = kernel_operator_side(
            setup.bra(), setup.ket(), setup.hamiltonian, setup.projector, t, example_id, setup.extra_labels
        )
        backward = kernel_operator_side(
            swapped_bra, swapped_ket, setup.hamiltonian, setup.projector, -t, example_id, setup.extra_labels
        )
        assert forward.value.max_deviation(involute(backward.value)) < 1e-12

    def test_odd_pair_evolution_diagonal(self):
        setup = example_catalog.build("eq58")
        t, h0, omega = 1.3, setup.params["h0"], setup.params["omega"]
        bra = coherent_bra(setup.registry, setup.spec, setup.final_labels)
        ket = coherent_ket(setup.registry, setup.spec, setup.final_labels)
        value = matrix_element(bra, graded_evolution(setup.hamiltonian, setup.projector, t), ket)
        g = setup.registry.generator
        bar_label, label = setup.final_labels[0]
        symbol = h0 + omega * g("thetabar") * g("theta")
        shifted = (g(bar_label) - g("thetabar")) * (g(label) - g("theta"))
        expected = exp_even(-1j * t * symbol) * exp_even(-1 * shifted)
        assert value.max_deviation(expected) < 1e-12


class TestBoseFermi:

    @mark.parametrize("p", [-1, 0, 1])
    @mark.parametrize("t", [0.0, 1.3])
    def test_quadrature_matches_closed_form(self, p, t):
        setup = example_catalog.build("bose-fermi", p=p)
        _, _, deviation = example_catalog.compare(setup, "quadrature", "closed-form", t=t)
        assert deviation <= settings.bose_fermi_tolerance

    def test_operator_side_matches_closed_form(self):
        setup = example_catalog.build("bose-fermi", p=1)
        _, _, deviation = example_catalog.compare(setup, "operator-side", "closed-form", t=0.3)
        assert deviation <= settings.bose_fermi_tolerance

    def test_two_boson_modes(self):
        setup = example_catalog.build("bose-fermi", n_bosons=2, cutoff=4, p=1, z_final=0.3, z_initial=[0.2, -0.1])
        _, _, deviation = example_catalog.compare(setup, "quadrature", "closed-form", t=0.4)
        assert deviation <= settings.bose_fermi_tolerance

    def test_points(self):
        assert bose_fermi_points(1, 1, 6, 0) == 15
        assert bose_fermi_points(2, 1, 4, -2) == 23

    def test_undersized_quadrature(self):
        setup = example_catalog.build("bose-fermi")
        with raises(QuadratureTooSmallError):
            bose_fermi_kernel(
                setup.registry, setup.z_final, setup.final_labels, setup.z_initial, setup.initial_labels,
                1.0, 0.0, 0, setup.spec.boson_cutoff, points=3
            )

    def test_oversized_quadrature_agrees(self):
        setup = example_catalog.build("bose-fermi", p=1)
        exact = example_catalog.kernel(setup, "quadrature", t=0.5)
        larger = example_catalog.kernel(setup, "quadrature", t=0.5, points=40)
        assert exact.deviation(larger) < 1e-12

    def test_boson_series_approaches_exponential(self):
        value = boson_series([0.4], [0.5 + 0.1j], np.exp(-0.3j), 30)
        assert abs(value - np.exp(np.exp(-0.3j) * 0.4 * (0.5 + 0.1j))) < 1e-14


class TestKernelPlumbing:

    def test_unknown_route(self):
        registry = GeneratorRegistry()
        with raises(ValueError):
            ConstrainedKernel("x", "telepathy", registry.scalar(1.0))

    def test_foreign_generators(self):
        registry = GeneratorRegistry()
        registry.add_pair("psibar_f1", "psi_f1")
        with raises(GrassmannError):
            ConstrainedKernel("x", "closed-form", registry.generator("psi_f1"))

    def test_example_without_routes(self):
        setup = example_catalog.build("sec62")
        with raises(ValueError):
            example_catalog.kernel(setup, "closed-form")

    @mark.parametrize("example_id, substitution", [
        ("eq39", "normal-symbol"), ("eq58", "normal-symbol"), ("free", "normal-symbol"),
        ("eq63", "exact"), ("bose-fermi", "exact"),
    ])
    def test_default_substitution(self, example_id, substitution):
        assert example_catalog.default_substitution(example_id) == substitution

    def test_unknown_example(self):
        with raises(UnknownExampleError):
            example_catalog.build("eq99")
        with raises(UnknownExampleError):
            oracle_closed_form("eq99", GeneratorRegistry(), (), (), {})

    def test_evolution_without_hamiltonian_is_projector(self):
        spec = HilbertSpec(2)
        phi = realize(OperatorPolynomial.number([1, 2]) + OperatorPolynomial.constant(-1), spec, "even")
        projector = project_group_average(phi)
        assert constrained_evolution(None, projector, 2.0).max_deviation(projector.operator) == 0

    def test_commuting_hamiltonian(self):
        spec = HilbertSpec(2)
        phi = realize(OperatorPolynomial.number([1, 2]) + OperatorPolynomial.constant(-1), spec, "even")
        hamiltonian = realize(OperatorPolynomial.from_terms([(0.5, "fdag1 f2"), (0.5, "fdag2 f1")]), spec, "even")
        projector = project_group_average(phi)
        evolved = constrained_evolution(hamiltonian, projector, 1.0)
        unitary = evolved.matrix.conj().T @ evolved.matrix
        assert np.allclose(unitary, projector.matrix, atol=1e-12)

    def test_catalog_listing(self):
        df = example_catalog.list_examples()
        assert set(df['example']) == set(example_catalog.EXAMPLES)
        assert df.set_index('example').loc['sec62', 'routes'] == "-"

    def test_bose_fermi_labels(self):
        setup = example_catalog.build("bose-fermi", z_final=[0.1, 0.2])
        assert setup.z_final == (0.1 + 0.2j,)
        assert isinstance(setup.projector.operator, FockOperator)
