import numpy as np
from hypothesis import given
from hypothesis import settings as hyp_settings
from hypothesis import strategies as st
from pytest import mark, raises

from algebra.grassmann import (
    MAX_GENERATORS,
    GeneratorLeakError,
    GeneratorRegistry,
    GrassmannElement,
    GrassmannError,
    ParityError,
    RegistryFullError,
    RegistryMismatchError,
    UnknownGeneratorError,
    UnpairedGeneratorError,
    berezin_integrate,
    differentiate,
    exp_even,
    integrate_pairs,
    involute,
    monomial,
    parse,
    render,
)

LABELS = [("psibar_1", "psi_1"), ("psibar_2", "psi_2"), ("psibar_3", "psi_3")]


def make_registry():
    registry = GeneratorRegistry()
    for bar, plain in LABELS:
        registry.add_pair(bar, plain)
    return registry


REGISTRY = make_registry()

coefficients = st.floats(min_value=-2, max_value=2, allow_nan=False, allow_infinity=False)
terms = st.lists(st.tuples(st.integers(0, 63), coefficients, coefficients), max_size=6)


def build(items, parity=None):
    masks, coeffs = [], []
    for mask, re, im in items:
        if parity is not None and bin(mask).count("1") % 2 != (parity == "odd"):
            mask ^= 1
        masks.append(mask)
        coeffs.append(complex(re, im))
    return GrassmannElement(REGISTRY, np.array(masks, dtype=np.uint64), np.array(coeffs, dtype=complex))


elements = terms.map(build)
even_elements = terms.map(lambda items: build(items, "even"))
odd_elements = terms.map(lambda items: build(items, "odd"))
homogeneous = st.one_of(even_elements, odd_elements)


def g(label):
    return REGISTRY.generator(label)


class TestRegistry:

    def test_add_reuses_existing_labels(self):
        registry = GeneratorRegistry()
        assert registry.add("theta") == registry.add("theta") == 0
        assert len(registry) == 1

    def test_unknown_generator(self):
        with raises(UnknownGeneratorError):
            GeneratorRegistry().generator("psi_9")

    @mark.parametrize("label", ["", "psi 1", "a·b", "f(1)"])
    def test_invalid_labels(self, label):
        with raises(GrassmannError):
            GeneratorRegistry().add(label)

    def test_registry_full(self):
        registry = GeneratorRegistry([f"g{i}" for i in range(MAX_GENERATORS)])
        with raises(RegistryFullError):
            registry.add("one_more")

    def test_unpaired_generator_cannot_be_involuted(self):
        registry = GeneratorRegistry(["lonely"])
        with raises(UnpairedGeneratorError):
            involute(registry.generator("lonely"))

    def test_unrelated_registries_do_not_mix(self):
        with raises(RegistryMismatchError):
            make_registry().generator("psi_1") + make_registry().generator("psi_1")

    def test_scope_leak_is_detected(self):
        registry = make_registry()
        scope = registry.scope()
        scope.add_pair("psibar_s", "psi_s")
        inherited = scope.generator("psi_1") * 2.0
        assert inherited.rebind(registry).max_deviation(2.0 * registry.generator("psi_1")) == 0
        with raises(GeneratorLeakError):
            (scope.generator("psi_s") * scope.generator("psi_1")).rebind(registry)


class TestProducts:

    @mark.parametrize("label", [label for pair in LABELS for label in pair])
    def test_generators_square_to_zero(self, label):
        assert (g(label) * g(label)).is_zero()

    def test_generators_anticommute(self):
        assert (g("psi_1") * g("psi_2")).max_deviation(-1 * (g("psi_2") * g("psi_1"))) == 0

    def test_coefficient_follows_requested_order(self):
        x = g("psi_2") * g("psi_1")
        assert x.coefficient(["psi_2", "psi_1"]) == 1
        assert x.coefficient(["psi_1", "psi_2"]) == -1

    @hyp_settings(max_examples=200, deadline=None)
    @given(elements, elements, elements)
    def test_associativity(self, a, b, c):
        assert ((a * b) * c).max_deviation(a * (b * c)) < 1e-12

    @hyp_settings(max_examples=200, deadline=None)
    @given(elements, elements, elements)
    def test_distributivity(self, a, b, c):
        assert (a * (b + c)).max_deviation(a * b + a * c) < 1e-12

    @hyp_settings(max_examples=200, deadline=None)
    @given(homogeneous, homogeneous)
    def test_graded_commutativity(self, a, b):
        sign = -1.0 if a.parity() == b.parity() == "odd" else 1.0
        assert (a * b).max_deviation(sign * (b * a)) < 1e-12

    @hyp_settings(max_examples=200, deadline=None)
    @given(odd_elements)
    def test_odd_elements_square_to_zero(self, x):
        assert (x * x).max_deviation(REGISTRY.zero()) < 1e-12

    def test_parity(self):
        assert g("psi_1").parity() == "odd"
        assert (g("psibar_1") * g("psi_1")).parity() == "even"
        assert (g("psi_1") + 1.0).parity() == "mixed"


class TestBerezin:

    def test_integral_rules(self):
        assert berezin_integrate(REGISTRY.scalar(1.0), "psi_1").is_zero()
        assert berezin_integrate(g("psi_1"), "psi_1").scalar_part() == 1

    def test_integration_anticommutes_past_odd_factors(self):
        value = berezin_integrate(g("psibar_1") * g("psi_1"), "psi_1")
        assert value.max_deviation(-1 * g("psibar_1")) == 0

    @hyp_settings(max_examples=50, deadline=None)
    @given(elements)
    def test_integration_is_left_differentiation(self, x):
        assert berezin_integrate(x, "psi_2").max_deviation(differentiate(x, "psi_2")) == 0

    def test_pair_measure_sign(self):
        pairs = LABELS[:1]
        assert integrate_pairs(g("psi_1") * g("psibar_1"), pairs).scalar_part() == 1
        assert integrate_pairs(g("psibar_1") * g("psi_1"), pairs).scalar_part() == -1

    @hyp_settings(max_examples=50, deadline=None)
    @given(elements)
    def test_swapping_differentials_flips_sign(self, x):
        inner_first = berezin_integrate(berezin_integrate(x, "psi_1"), "psibar_1")
        bar_first = berezin_integrate(berezin_integrate(x, "psibar_1"), "psi_1")
        assert inner_first.max_deviation(-1 * bar_first) == 0

    @hyp_settings(max_examples=50, deadline=None)
    @given(elements)
    def test_pairs_nest_innermost_first(self, x):
        nested = integrate_pairs(integrate_pairs(x, LABELS[1:2]), LABELS[:1])
        assert integrate_pairs(x, LABELS[:2]).max_deviation(nested) == 0

    @hyp_settings(max_examples=100, deadline=None)
    @given(st.lists(coefficients, min_size=18, max_size=18))
    def test_gaussian_integral_is_determinant(self, values):
        a = (np.array(values[:9]) + 1j * np.array(values[9:])).reshape(3, 3)
        exponent = REGISTRY.zero()
        for i, (bar, _) in enumerate(LABELS):
            for j, (_, plain) in enumerate(LABELS):
                exponent = exponent - complex(a[i, j]) * g(bar) * g(plain)
        value = integrate_pairs(exp_even(exponent), LABELS)
        assert abs(value.scalar_part() - np.linalg.det(a)) < 1e-10


class TestExpAndInvolution:

    def test_exp_rejects_odd_input(self):
        with raises(ParityError):
            exp_even(g("psi_1"))

    def test_exp_of_pair(self):
        pair = g("psibar_1") * g("psi_1")
        assert exp_even(pair).max_deviation(1.0 + pair) == 0

    def test_exp_factors_scalar_part(self):
        pair = g("psibar_1") * g("psi_1")
        assert exp_even(0.5 + pair).max_deviation(np.exp(0.5) * (1.0 + pair)) < 1e-15

    @hyp_settings(max_examples=200, deadline=None)
    @given(even_elements)
    def test_exp_inverse(self, x):
        x = 0.25 * x
        assert (exp_even(x) * exp_even(-1 * x)).max_deviation(REGISTRY.scalar(1.0)) < 1e-10

    def test_involution_of_generators(self):
        assert involute(1j * g("psi_1")).max_deviation(-1j * g("psibar_1")) == 0
        pair = g("psibar_1") * g("psi_1")
        assert involute(pair).max_deviation(pair) == 0

    @hyp_settings(max_examples=200, deadline=None)
    @given(elements, elements)
    def test_involution_reverses_products(self, a, b):
        assert involute(a * b).max_deviation(involute(b) * involute(a)) < 1e-12
        assert involute(involute(a)).max_deviation(a) < 1e-15


class TestTextForm:

    def test_render(self):
        x = REGISTRY.scalar(1.0) + monomial(REGISTRY, ["psibar_1", "psi_1"], -0.5)
        assert render(x) == "(+1.0+0.0i) + (-0.5+0.0i)·psibar_1·psi_1"
        assert render(REGISTRY.zero()) == "0"

    @hyp_settings(max_examples=100, deadline=None)
    @given(elements)
    def test_parse_inverts_render(self, x):
        assert parse(render(x), REGISTRY).max_deviation(x) == 0

    def test_parse_rejects_garbage(self):
        with raises(GrassmannError):
            parse("1 + psi", REGISTRY)

    def test_monomial(self):
        x = monomial(REGISTRY, ["psi_1", "psi_2"], 2.0)
        assert x.coefficient(["psi_1", "psi_2"]) == 2.0
