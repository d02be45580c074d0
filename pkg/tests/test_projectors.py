import numpy as np
from pytest import mark, raises

from algebra.coherent import coherent_bra, coherent_ket, matrix_element, mode_labels, overlap, register_labels
from algebra.fock import (
    FockOperator,
    HilbertSpec,
    OperatorPolynomial,
    anticommutator,
    build_fermion_ops,
    mat_exp,
    realize,
)
from algebra.graded import GrassmannOperator, shifted_annihilator
from algebra.grassmann import GeneratorRegistry, exp_even, integrate_pairs
from catalog.examples import example_catalog
from constraints.projectors import (
    CertificateError,
    ConstraintError,
    ConstraintSet,
    Projector,
    QuadratureTooSmallError,
    SingularXError,
    SpectrumError,
    TrivialConstraintError,
    anticommutator_scalar,
    build_projector,
    classify,
    diagonalize_odd,
    even_replacement,
    integer_spectrum,
    pair_self_adjoint,
    project_eq52,
    project_even_replacement,
    project_group_average,
    project_group_average_all,
    project_kernel,
    project_odd_pair,
    quadrature_size,
    rescale_odd,
)
from propagators.kernels import constrained_evolution

SPEC = HilbertSpec(2)
(F1, FD1), (F2, FD2) = build_fermion_ops(SPEC)
IDENTITY = FockOperator.identity(SPEC)


def number(*modes, omega=1.0):
    return realize(OperatorPolynomial.number(list(modes), omega=omega), SPEC, "even")


class TestConstraintSet:

    def test_empty_set(self):
        with raises(ConstraintError):
            ConstraintSet(SPEC)

    def test_even_must_be_self_adjoint(self):
        with raises(ConstraintError):
            ConstraintSet(SPEC, evens=[("phi", FD1 @ F2)])

    def test_vanishing_odd_constraint(self):
        zero = FockOperator(SPEC, np.zeros((4, 4)), "odd")
        with raises(TrivialConstraintError):
            ConstraintSet(SPEC, odds=[("chi", zero)])

    def test_unpaired_odd_must_be_self_adjoint(self):
        with raises(ConstraintError):
            ConstraintSet(SPEC, odds=[("chi", F1)])

    def test_partner_must_be_adjoint(self):
        with raises(ConstraintError):
            ConstraintSet(SPEC, odds=[("chi", F1, "chi_dag"), ("chi_dag", F2)])

    def test_duplicate_names(self):
        with raises(ConstraintError):
            ConstraintSet(SPEC, evens=[("phi", number(1)), ("phi", number(2))])

    def test_get(self):
        cs = ConstraintSet(SPEC, odds=[("chi", F1, "chi_dag"), ("chi_dag", FD1, "chi")])
        assert cs.get("chi_dag").partner == "chi"
        with raises(KeyError):
            cs.get("missing")


class TestClassification:

    def test_number_constraint_is_first_class(self):
        cs = ConstraintSet(SPEC, evens=[("N", number(1, 2))], hamiltonian=number(1, 2, omega=0.4))
        report = classify(cs)
        assert report.first_class
        assert report.fit("[N,H]").closes

    def test_odd_pair_is_second_class(self):
        cs = ConstraintSet(SPEC, odds=[("chi", F1, "chi_dag"), ("chi_dag", FD1, "chi")])
        report = classify(cs)
        assert report.verdicts == {"chi": "second-class", "chi_dag": "second-class"}
        assert not report.fit("{chi,chi_dag}").closes

    def test_structure_constants(self):
        # [N1, f1] = -f1 = i·(i f1)
        cs = ConstraintSet(SPEC, evens=[("N1", number(1))], odds=[("chi", F1, "chi_dag"), ("chi_dag", FD1, "chi")])
        fit = classify(cs).fit("[N1,chi]")
        assert fit.closes
        assert abs(fit.structure_constants["chi"] - 1j) < 1e-12

    def test_frame(self):
        cs = ConstraintSet(SPEC, evens=[("N1", number(1)), ("N2", number(2))])
        df = classify(cs).to_frame()
        assert list(df.columns) == ['relation', 'kind', 'expansion', 'residual', 'closes']
        assert df['closes'].all()
        assert len(classify(cs).by_kind("c")) == 1

    def test_sec42_catalog_constraints(self):
        report = classify(example_catalog.build("sec42").constraints)
        assert report.first_class


class TestEvenProjectors:

    def test_integer_spectrum(self):
        assert sorted(integer_spectrum(number(1, 2) - 1.0)) == [-1.0, 0.0, 0.0, 1.0]
        assert quadrature_size(number(1, 2)) == 5

    def test_non_integer_spectrum(self):
        with raises(SpectrumError):
            integer_spectrum(number(1, omega=0.5))

    def test_routes_agree(self):
        phi = number(1, 2) - 1.0
        group = project_group_average(phi)
        kernel = project_kernel([phi])
        assert group.rank == kernel.rank == 2
        assert group.max_deviation(kernel) < 1e-12
        assert project_eq52(group).max_deviation(group) < 1e-12

    def test_build_projector_falls_back_to_kernel(self):
        projector = build_projector(number(1, omega=0.5))
        assert projector.route == "spectral-kernel"
        assert projector.rank == 2

    def test_quadrature_too_small(self):
        with raises(QuadratureTooSmallError):
            project_group_average(number(1, 2), points=3)
        with raises(QuadratureTooSmallError):
            project_eq52(project_group_average(number(1)), points=1)

    def test_joint_average(self):
        projector = project_group_average_all([number(1), number(2)])
        assert projector.rank == 1
        assert abs(projector.matrix[0, 0] - 1.0) < 1e-12

    def test_joint_average_needs_commuting_constraints(self):
        gamma = FockOperator(SPEC, (FD1 @ F2 + FD2 @ F1).matrix, "even")
        with raises(ConstraintError):
            project_group_average_all([number(1), gamma])

    def test_certificate(self):
        with raises(CertificateError):
            Projector.certify(2.0 * IDENTITY, "bogus")

    def test_kernel_rejects_shifted_constraint(self):
        registry = GeneratorRegistry()
        chi, _ = shifted_annihilator(HilbertSpec(1), registry, 1, ("thetabar", "theta"))
        with raises(ConstraintError):
            project_kernel([chi])

    def test_three_fermion_complement(self):
        setup = example_catalog.build("sec42")
        assert setup.projector.rank == 6
        complement = FockOperator.identity(setup.spec) - setup.phi
        assert setup.projector.operator.max_deviation(complement) < 1e-12


class TestOddProjectors:

    @mark.parametrize("case, occupied", [("A", 0), ("B", 1)])
    def test_single_mode_pair(self, case, occupied):
        projector = project_odd_pair(F1, case, FD1)
        assert projector.rank == 2
        diagonal = np.real(np.diag(projector.matrix))
        # basis index bit 0 is the occupation of mode 1
        assert all(diagonal[i] == (1.0 if (i & 1) == occupied else 0.0) for i in range(4))

    def test_cases_split_identity(self):
        e_a = project_odd_pair(F1, "A", FD1)
        e_b = project_odd_pair(F1, "B", FD1)
        assert (e_a.operator + e_b.operator).max_deviation(IDENTITY) < 1e-12

    def test_unknown_case(self):
        with raises(ConstraintError):
            project_odd_pair(F1, "C", FD1)

    def test_singular_x(self):
        chi = F1 @ (IDENTITY - number(2))
        with raises(SingularXError):
            project_odd_pair(chi, "A")

    def test_even_replacement_matches(self):
        for case in ("A", "B"):
            assert project_even_replacement(F1, case, FD1).max_deviation(project_odd_pair(F1, case, FD1)) < 1e-12
        cs = even_replacement([(F1, FD1)])
        assert [c.name for c in cs.evens] == ["PhiA1", "PhiB1"]

    def test_rescaled_nonlinear_constraint(self):
        setup = example_catalog.build("sec62")
        scaled, scaled_dagger = rescale_odd(*setup.odd_pairs[0])
        bracket = anticommutator(scaled, scaled_dagger)
        assert bracket.max_deviation(FockOperator.identity(setup.spec)) < 1e-10

    def test_majorana_pairing(self):
        spec = HilbertSpec(1)
        f, fdag = build_fermion_ops(spec)[0]
        gamma_1 = FockOperator(spec, (f + fdag).matrix, "odd")
        gamma_2 = FockOperator(spec, (1j * (fdag - f)).matrix, "odd")
        normalized = diagonalize_odd(np.diag([2.0, 2.0]), [gamma_1, gamma_2])
        chi, chi_dagger = pair_self_adjoint(*normalized)
        assert abs(anticommutator_scalar(chi, chi_dagger) - 1.0) < 1e-12
        assert abs(anticommutator_scalar(chi, chi)) < 1e-12

    @mark.parametrize("w", [np.array([[1.0, 0.5], [0.2, 1.0]]), np.array([[1.0, 2.0], [2.0, 1.0]])])
    def test_diagonalize_rejects_bad_w(self, w):
        spec = HilbertSpec(1)
        f, fdag = build_fermion_ops(spec)[0]
        with raises(ConstraintError):
            diagonalize_odd(w, [f + fdag, f + fdag])

    @mark.parametrize("example_id", ["eq58", "eq63"])
    def test_outer_factorization(self, example_id):
        setup = example_catalog.build(example_id)
        bra, ket = setup.bra(), setup.ket()
        via_outer = setup.projector.matrix_element(bra, ket, via="outer")
        assert via_outer.max_deviation(setup.projector.matrix_element(bra, ket)) < 1e-12


def occupation_amplitudes(matrix, spec, string):
    """<m|M|n> with |n> = f1†^n1 f2†^n2 ... |0> built from the same ladders"""
    ops = build_fermion_ops(spec, string)
    columns = []
    for occupation in range(spec.dimension):
        state = np.zeros(spec.dimension, dtype=complex)
        state[0] = 1.0
        for mode in reversed(range(spec.n_fermions)):
            if occupation >> mode & 1:
                state = ops[mode][1].matrix @ state
        columns.append(state)
    states = np.array(columns).T
    return states.conj().T @ matrix @ states


class TestSignConvention:
    """Physical amplitudes do not depend on the Jordan-Wigner sign string"""

    spec = HilbertSpec(3)

    def realize_both(self, poly, parity):
        return [realize(poly, self.spec, parity, string=s) for s in ("preceding", "following")]

    def assert_same_amplitudes(self, first, second):
        a = occupation_amplitudes(first, self.spec, "preceding")
        b = occupation_amplitudes(second, self.spec, "following")
        assert np.max(np.abs(a - b)) < 1e-12

    def test_number_projector(self):
        poly = OperatorPolynomial.number([1, 2, 3]) + OperatorPolynomial.constant(-1)
        projectors = [project_group_average(phi) for phi in self.realize_both(poly, "even")]
        self.assert_same_amplitudes(*(p.matrix for p in projectors))

    @mark.parametrize("case", ["A", "B"])
    def test_odd_pair_projector(self, case):
        poly = OperatorPolynomial.from_terms([(2 ** -0.5, "f1"), (-2 ** -0.5, "f3")])
        chis = self.realize_both(poly, "odd")
        projectors = [project_odd_pair(chi, case, chi.dagger()) for chi in chis]
        self.assert_same_amplitudes(*(p.matrix for p in projectors))

    def test_constrained_evolution(self):
        constraint = OperatorPolynomial.number([1, 2, 3]) + OperatorPolynomial.constant(-2)
        hamiltonian = OperatorPolynomial.from_terms([
            (0.5, "fdag1 f3"), (0.5, "fdag3 f1"), (0.3, "fdag1 f1 fdag2 f2"), (-0.2, "fdag2 f2")
        ])
        evolved = [
            constrained_evolution(h, project_group_average(phi), 0.8).matrix
            for h, phi in zip(self.realize_both(hamiltonian, "even"), self.realize_both(constraint, "even"))
        ]
        self.assert_same_amplitudes(*evolved)


class TestProjectorIdentities:

    def test_odd_pair_cases_split_overlap(self):
        setup = example_catalog.build("eq58")
        chi = setup.constraints.get("chi").operator
        chi_dagger = setup.constraints.get("chidag").operator
        e_b = project_odd_pair(chi, "B", chi_dagger)
        identity = GrassmannOperator.from_fock(FockOperator.identity(setup.spec), setup.registry)
        assert (setup.projector.operator + e_b.operator).max_deviation(identity) < 1e-12
        bra, ket = setup.bra(), setup.ket()
        split = setup.projector.matrix_element(bra, ket, via="outer") + e_b.matrix_element(bra, ket, via="outer")
        assert split.max_deviation(overlap(bra, ket)) < 1e-12

    def test_odd_pair_diagonal_element(self):
        setup = example_catalog.build("eq58")
        bar_label, label = setup.final_labels[0]
        bra = coherent_bra(setup.registry, setup.spec, setup.final_labels)
        ket = coherent_ket(setup.registry, setup.spec, setup.final_labels)
        g = setup.registry.generator
        shifted = (g(bar_label) - g("thetabar")) * (g(label) - g("theta"))
        expected = exp_even(-1 * shifted)
        assert setup.projector.matrix_element(bra, ket).max_deviation(expected) < 1e-12

    def test_reproducing_kernel(self):
        setup = example_catalog.build("eq39")
        middle = mode_labels("m", setup.spec.n_fermions)
        register_labels(setup.registry, middle)
        e = setup.projector.operator
        to_middle = matrix_element(setup.bra(), e, coherent_ket(setup.registry, setup.spec, middle))
        from_middle = matrix_element(coherent_bra(setup.registry, setup.spec, middle), e, setup.ket())
        folded = integrate_pairs(to_middle * from_middle, middle)
        assert folded.max_deviation(matrix_element(setup.bra(), e, setup.ket())) < 1e-12

    @mark.parametrize("example_id", ["eq39", "sec42"])
    def test_group_average_absorbs_gauge_phases(self, example_id):
        setup = example_catalog.build(example_id)
        e = setup.projector.operator
        rng = np.random.default_rng(7)
        for xi in rng.uniform(-np.pi, np.pi, size=10):
            assert (mat_exp(setup.phi, -1j * xi) @ e).max_deviation(e) < 1e-12

    def test_even_constraint_implies_odd_ones(self):
        setup = example_catalog.build("sec42")
        e = setup.projector.operator
        assert (setup.phi @ e).max_deviation(FockOperator.zero(setup.spec)) < 1e-12
        for operator in setup.odd_pairs[0]:
            assert (operator @ e).max_deviation(FockOperator.zero(setup.spec)) < 1e-12
