import numpy as np
from pytest import mark, raises

from algebra.coherent import (
    apply,
    boson_coherent,
    coherent_bra,
    coherent_ket,
    identity_resolution_check,
    matrix_element,
    mode_labels,
    odd_coherent_bra,
    odd_coherent_ket,
    overlap,
    overlap_closed_form,
    register_labels,
    substitute,
    tensor_states,
    vacuum,
)
from algebra.fock import DimensionError, HilbertSpec, OperatorPolynomial, build_boson_ops, build_fermion_ops
from algebra.grassmann import GeneratorRegistry, GrassmannError


def two_sided(n_modes):
    registry = GeneratorRegistry()
    final, initial = mode_labels("f", n_modes), mode_labels("i", n_modes)
    register_labels(registry, final)
    register_labels(registry, initial)
    return registry, final, initial


class TestCoherentStates:

    def test_mode_labels(self):
        assert mode_labels("f", 2) == [("psibar_f1", "psi_f1"), ("psibar_f2", "psi_f2")]

    def test_vacuum_without_labels(self):
        registry = GeneratorRegistry()
        spec = HilbertSpec(2)
        assert coherent_ket(registry, spec).max_deviation(vacuum(spec, registry)) == 0

    def test_single_mode_ket(self):
        registry, final, _ = two_sided(1)
        ket = coherent_ket(registry, HilbertSpec(1), final)
        g = registry.generator
        pair = g("psibar_f1") * g("psi_f1")
        assert ket.amplitude(0).max_deviation(1.0 - 0.5 * pair) < 1e-15
        assert ket.amplitude(1).max_deviation(g("psi_f1")) < 1e-15

    def test_coherent_ket_is_even(self):
        registry, final, _ = two_sided(3)
        assert coherent_ket(registry, HilbertSpec(3), final).parity() == "even"

    def test_label_count_must_match(self):
        registry, final, _ = two_sided(2)
        with raises(GrassmannError):
            coherent_ket(registry, HilbertSpec(3), final)

    @mark.parametrize("n_modes", [1, 2, 3])
    def test_overlap_closed_form(self, n_modes):
        registry, final, initial = two_sided(n_modes)
        spec = HilbertSpec(n_modes)
        value = overlap(coherent_bra(registry, spec, final), coherent_ket(registry, spec, initial))
        assert value.max_deviation(overlap_closed_form(registry, final, initial)) < 1e-12

    def test_overlap_needs_bra_and_ket(self):
        registry, final, initial = two_sided(1)
        ket = coherent_ket(registry, HilbertSpec(1), final)
        with raises(GrassmannError):
            overlap(ket, ket)

    @mark.parametrize("n_modes", [1, 2, 3, 4])
    def test_identity_resolution(self, n_modes):
        assert identity_resolution_check(HilbertSpec(n_modes)) < 1e-13

    def test_identity_resolution_range(self):
        with raises(DimensionError):
            identity_resolution_check(HilbertSpec(5))

    def test_annihilator_eigenvalue(self):
        registry, final, initial = two_sided(1)
        spec = HilbertSpec(1)
        ket = coherent_ket(registry, spec, initial)
        f, _ = build_fermion_ops(spec)[0]
        expected = ket.left_multiply(registry.generator("psi_i1"))
        assert apply(f, ket).max_deviation(expected) < 1e-15


class TestMatrixElements:

    def test_number_operator_symbol(self):
        registry, final, initial = two_sided(2)
        spec = HilbertSpec(2)
        bra, ket = coherent_bra(registry, spec, final), coherent_ket(registry, spec, initial)
        poly = OperatorPolynomial.number([1, 2], omega=0.8)
        expected = substitute(poly, registry, ["psibar_f1", "psibar_f2"], ["psi_i1", "psi_i2"]) * overlap(bra, ket)
        assert matrix_element(bra, poly, ket).max_deviation(expected) < 1e-12

    def test_quartic_normal_ordered_symbol(self):
        registry, final, initial = two_sided(2)
        spec = HilbertSpec(2)
        bra, ket = coherent_bra(registry, spec, final), coherent_ket(registry, spec, initial)
        poly = OperatorPolynomial.from_terms([(0.3, ""), (1.5 - 0.2j, "fdag1 f2"), (0.7, "fdag1 fdag2 f2 f1")])
        expected = substitute(poly, registry, ["psibar_f1", "psibar_f2"], ["psi_i1", "psi_i2"]) * overlap(bra, ket)
        assert matrix_element(bra, poly, ket).max_deviation(expected) < 1e-12

    def test_substitute_keeps_written_order(self):
        registry, final, initial = two_sided(2)
        poly = OperatorPolynomial.from_terms([(1.0, "fdag1 f2")])
        value = substitute(poly, registry, ["psibar_f1", "psibar_f2"], ["psi_i1", "psi_i2"])
        assert value.coefficient(["psibar_f1", "psi_i2"]) == 1

    def test_mixed_parity_operator_rejected(self):
        registry, final, _ = two_sided(1)
        poly = OperatorPolynomial.from_terms([(1.0, "f1"), (1.0, "")])
        with raises(GrassmannError):
            apply(poly, coherent_ket(registry, HilbertSpec(1), final))


class TestOddStates:

    def setup_method(self):
        self.registry = GeneratorRegistry()
        self.labels = [("thetabar", "theta")]
        register_labels(self.registry, self.labels)
        self.spec = HilbertSpec(1)

    def test_parity(self):
        assert odd_coherent_ket(self.registry, self.spec, self.labels).parity() == "odd"
        assert odd_coherent_bra(self.registry, self.spec, self.labels).parity() == "odd"

    def test_anti_normal_symbol(self):
        h0, omega = 0.25, 1.0
        poly = OperatorPolynomial.from_terms([(h0, ""), (omega, "f1 fdag1")])
        value = matrix_element(
            odd_coherent_bra(self.registry, self.spec, self.labels), poly,
            odd_coherent_ket(self.registry, self.spec, self.labels)
        )
        expected = h0 + omega * self.registry.generator("theta") * self.registry.generator("thetabar")
        assert value.max_deviation(expected) < 1e-12

    def test_bosons_rejected(self):
        with raises(GrassmannError):
            odd_coherent_ket(self.registry, HilbertSpec(1, 1, 2), self.labels)

    @mark.parametrize("n_modes", [1, 2, 3])
    def test_orthogonal_to_coherent_state(self, n_modes):
        registry = GeneratorRegistry()
        labels = mode_labels("t", n_modes)
        register_labels(registry, labels)
        spec = HilbertSpec(n_modes)
        value = overlap(coherent_bra(registry, spec, labels), odd_coherent_ket(registry, spec, labels))
        assert value.max_deviation(registry.zero()) < 1e-15

    @mark.parametrize("n_modes", [1, 2])
    def test_creation_eigenvalue(self, n_modes):
        registry = GeneratorRegistry()
        labels = mode_labels("t", n_modes)
        register_labels(registry, labels)
        spec = HilbertSpec(n_modes)
        ket = odd_coherent_ket(registry, spec, labels)
        for (_, fdag), (bar_label, _) in zip(build_fermion_ops(spec), labels):
            expected = ket.left_multiply(registry.generator(bar_label))
            assert apply(fdag, ket).max_deviation(expected) < 1e-15


class TestBosonStates:

    def test_truncated_norm_approaches_one(self):
        registry = GeneratorRegistry()
        state = boson_coherent([0.5], HilbertSpec(0, 1, 12), registry)
        assert abs(np.sum(np.abs(state.coeffs[:, 0]) ** 2) - 1.0) < 1e-10

    @mark.parametrize("z1, z2", [(0.5, 0.5), (0.3 + 0.4j, -0.6j), (1.0, 0.6 - 0.8j)])
    def test_overlap_closed_form(self, z1, z2):
        registry = GeneratorRegistry()
        spec = HilbertSpec(0, 1, 20)
        bra = boson_coherent([z1], spec, registry).adjoint()
        value = overlap(bra, boson_coherent([z2], spec, registry)).scalar_part()
        expected = np.exp(-0.5 * abs(z1) ** 2 - 0.5 * abs(z2) ** 2 + np.conj(z1) * z2)
        assert abs(value - expected) < 1e-12

    def test_eigenvalue_defect_sits_on_top_level(self):
        registry = GeneratorRegistry()
        spec = HilbertSpec(0, 1, 8)
        z = 0.7 - 0.2j
        amplitudes = boson_coherent([z], spec, registry).coeffs[:, 0]
        b, _ = build_boson_ops(spec)[0]
        residual = b.matrix @ amplitudes - z * amplitudes
        assert np.max(np.abs(residual[:-1])) < 1e-14
        assert abs(residual[-1] + z * amplitudes[-1]) < 1e-15
        assert abs(residual[-1]) > 1e-6

    def test_tensor_with_fermion_state(self):
        registry, final, _ = two_sided(1)
        spec = HilbertSpec(1, 1, 4)
        boson = boson_coherent([0.3], spec, registry)
        fermion = coherent_ket(registry, spec.fermion_only(), final)
        combined = tensor_states(boson, fermion)
        assert combined.spec == spec
        assert combined.max_deviation(coherent_ket(registry, spec, final, z=[0.3])) < 1e-15

    def test_tensor_needs_split_factors(self):
        registry, final, _ = two_sided(1)
        fermion = coherent_ket(registry, HilbertSpec(1), final)
        with raises(DimensionError):
            tensor_states(fermion, fermion)
