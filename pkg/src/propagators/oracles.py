"""
Closed-form kernels
Literal closed-form coherent-state kernels of the worked examples, built
directly in Grassmann terms as an oracle for the operator-side and lattice
routes.
"""

import logging
from itertools import product
from math import factorial
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from algebra.coherent import LabelPairs, matrix_element, odd_coherent_bra, odd_coherent_ket, overlap_closed_form, substitute
from algebra.fock import HilbertSpec, OperatorPolynomial
from algebra.grassmann import GeneratorRegistry, GrassmannElement, exp_even, involute, monomial
from propagators.kernels import ConstrainedKernel

logger = logging.getLogger(__name__)


class UnknownExampleError(ValueError):
    pass


def _norm(registry: GeneratorRegistry, final: LabelPairs, initial: LabelPairs) -> GrassmannElement:
    """exp{−(Ψ̄″·Ψ″ + Ψ̄′·Ψ′)/2}"""
    g = registry.generator
    exponent = registry.zero()
    for (bar_f, plain_f), (bar_i, plain_i) in zip(final, initial):
        exponent = exponent - 0.5 * (g(bar_f) * g(plain_f) + g(bar_i) * g(plain_i))
    return exp_even(exponent)


def _pair(registry: GeneratorRegistry, final: LabelPairs, initial: LabelPairs, i: int) -> GrassmannElement:
    """ψ̄″_i ψ′_i for 1-based mode i"""
    return registry.generator(final[i - 1][0]) * registry.generator(initial[i - 1][1])


def _eq39(registry, final, initial, params):
    pairing = sum((_pair(registry, final, initial, i) for i in range(1, len(final) + 1)), registry.zero())
    return _norm(registry, final, initial) * pairing


def _sec42(registry, final, initial, params):
    a = [_pair(registry, final, initial, i) for i in range(1, 4)]
    bracket = a[0] + a[1] + a[2] + a[0] * a[1] + a[1] * a[2] + a[2] * a[0]
    return _norm(registry, final, initial) * bracket


def _theta(registry, params) -> Tuple[GrassmannElement, GrassmannElement]:
    bar_label, label = params.get("theta", ("thetabar", "theta"))
    return registry.pair(bar_label, label)


def _shifted(registry, final, initial, params) -> GrassmannElement:
    """(ψ̄″ − θ̄)(ψ′ − θ)"""
    thetabar, theta = _theta(registry, params)
    g = registry.generator
    return (g(final[0][0]) - thetabar) * (g(initial[0][1]) - theta)


def _eq58(registry, final, initial, params):
    bar_label, label = params.get("theta", ("thetabar", "theta"))
    symbol = substitute(params["hamiltonian"], registry, [bar_label], [label])
    exponent = -1 * _shifted(registry, final, initial, params) - 1j * params.get("t", 0.0) * symbol
    return overlap_closed_form(registry, final, initial) * exp_even(exponent)


def _eq63(registry, final, initial, params):
    theta = [params.get("theta", ("thetabar", "theta"))]
    spec = HilbertSpec(1)
    # h = (θ̄|H|θ̄), evaluated as a matrix element rather than assumed
    h = matrix_element(
        odd_coherent_bra(registry, spec, theta), params["hamiltonian"], odd_coherent_ket(registry, spec, theta)
    )
    phase = exp_even(-1j * params.get("t", 0.0) * h)
    return overlap_closed_form(registry, final, initial) * _shifted(registry, final, initial, params) * phase


def _difference(registry, final, initial, sign: float) -> GrassmannElement:
    """½(ψ̄₁″ + sign·ψ̄₂″)(ψ₁′ + sign·ψ₂′)"""
    g = registry.generator
    left = g(final[0][0]) + sign * g(final[1][0])
    right = g(initial[0][1]) + sign * g(initial[1][1])
    return 0.5 * left * right


def _eq65(registry, final, initial, params):
    return _norm(registry, final, initial) * (1.0 + _difference(registry, final, initial, 1.0))


def _eq66(registry, final, initial, params):
    bracket = _pair(registry, final, initial, 1) * _pair(registry, final, initial, 2)
    bracket = bracket + _difference(registry, final, initial, -1.0)
    return _norm(registry, final, initial) * bracket


def _free(registry, final, initial, params):
    """⟨Ψ″|e^{−itωN_f}|Ψ′⟩"""
    phase = np.exp(-1j * params.get("omega", 1.0) * params.get("t", 0.0))
    pairing = sum((_pair(registry, final, initial, i) for i in range(1, len(final) + 1)), registry.zero())
    return _norm(registry, final, initial) * exp_even(phase * pairing)


def _bose_fermi(registry, final, initial, params):
    """
    Truncated multi-index sum: 𝒩 Σ_{m,n} δ(Σm = Σn + p) e^{−iωt(Σm+Σn)}
    conj(z″^m ψ″^n) z′^m ψ′^n / m!
    """
    z_final = np.asarray(params.get("z_final", (0.5,)), dtype=complex)
    z_initial = np.asarray(params.get("z_initial", (0.5,)), dtype=complex)
    cutoff = int(params.get("cutoff", 6))
    omega = params.get("omega", 1.0)
    t = params.get("t", 0.0)
    p = int(params.get("p", 0))
    boson_norm = float(np.exp(-0.5 * (np.sum(np.abs(z_final) ** 2) + np.sum(np.abs(z_initial) ** 2))))
    total = registry.zero()
    plain_final = [label for _, label in final]
    plain_initial = [label for _, label in initial]
    for ns in product((0, 1), repeat=len(final)):
        chosen = [i for i, n in enumerate(ns) if n]
        fermions = involute(monomial(registry, [plain_final[i] for i in chosen]))
        fermions = fermions * monomial(registry, [plain_initial[i] for i in chosen])
        for ms in product(range(cutoff + 1), repeat=len(z_final)):
            if sum(ms) != sum(ns) + p:
                continue
            weight = np.exp(-1j * omega * t * (sum(ms) + sum(ns)))
            for m, zf, zi in zip(ms, z_final, z_initial):
                weight *= np.conj(zf) ** m * zi ** m / factorial(m)
            total = total + complex(weight) * fermions
    return boson_norm * _norm(registry, final, initial) * total


ORACLES: Dict[str, Callable] = {
    "eq39": _eq39,
    "sec42": _sec42,
    "eq58": _eq58,
    "eq63": _eq63,
    "eq65": _eq65,
    "eq66": _eq66,
    "bose-fermi": _bose_fermi,
    "free": _free,
}


def oracle_closed_form(
    example_id: str,
    registry: GeneratorRegistry,
    final_labels: LabelPairs,
    initial_labels: LabelPairs,
    params: Optional[dict] = None
) -> ConstrainedKernel:
    """
    Closed-form kernel of a worked example

    Args:
        example_id: One of the keys of ORACLES
        registry: Registry holding the endpoint labels (and θ̄, θ if used)
        final_labels: (bar, plain) pairs of ⟨Ψ″|
        initial_labels: (bar, plain) pairs of |Ψ′⟩
        params: t, omega, p, z_final, z_initial, cutoff, theta and the
            Hamiltonian polynomial as each example needs

    Returns:
        ConstrainedKernel with route "closed-form"
    """
    if example_id not in ORACLES:
        raise UnknownExampleError(f"No closed form for {example_id!r}; known: {sorted(ORACLES)}")
    params = dict(params or {})
    value = ORACLES[example_id](registry, tuple(final_labels), tuple(initial_labels), params)
    extra = tuple(params.get("theta", ("thetabar", "theta"))) if example_id in ("eq58", "eq63") else ()
    logger.debug("closed form for %s with %d terms", example_id, len(value))
    return ConstrainedKernel(
        example_id, "closed-form", value, tuple(final_labels), tuple(initial_labels), extra,
        {k: v for k, v in params.items() if not isinstance(v, OperatorPolynomial)}
    )
