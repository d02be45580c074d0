"""
Verification suites
Named groups of route-agreement and invariant checks, run serially or on a
thread pool, collected into an ordered RunReport
"""

import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from threading import Lock
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from algebra.coherent import (
    coherent_bra,
    coherent_ket,
    matrix_element,
    mode_labels,
    odd_coherent_bra,
    odd_coherent_ket,
    overlap,
    overlap_closed_form,
    register_labels,
    substitute,
    identity_resolution_check,
)
from algebra.fock import (
    FockOperator,
    HilbertSpec,
    OperatorPolynomial,
    anticommutator,
    build_fermion_ops,
)
from algebra.grassmann import (
    GeneratorRegistry,
    GrassmannElement,
    exp_even,
    integrate_pairs,
    involute,
    parse,
    render,
)
from catalog.examples import example_catalog
from constraints.projectors import (
    QuadratureTooSmallError,
    anticommutator_matrix,
    classify,
    integer_spectrum,
    project_eq52,
    project_even_replacement,
    project_group_average,
    project_kernel,
    project_odd_family,
    project_odd_pair,
    rescale_odd,
)
from propagators.kernels import bose_fermi_kernel
from propagators.lattice import LatticePlan, lattice_propagate, trotter_convergence
from utils.settings import settings

logger = logging.getLogger(__name__)

TOOLKIT_VERSION = "0.1.0"
SUITES = ("grassmann", "coherent", "first-class", "second-class", "bose-fermi", "lattice")

CheckResult = Tuple[float, str]


@dataclass
class CheckRecord:
    """Outcome of one check"""

    name: str
    suite: str
    routes: str
    deviation: float
    tolerance: float
    wall_time: float = 0.0
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.deviation)) and self.deviation <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'suite': self.suite,
            'routes': self.routes,
            'deviation': float(self.deviation) if np.isfinite(self.deviation) else None,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'wall_time': self.wall_time,
            'detail': self.detail,
        }


@dataclass
class RunReport:
    """Ordered check records with a summary"""

    suite: str
    seed: int
    config_hash: str
    records: List[CheckRecord] = field(default_factory=list)
    version: str = TOOLKIT_VERSION
    wall_time: float = 0.0
    artifacts: Dict[str, Any] = field(default_factory=dict)

    @property
    def summary(self) -> Dict[str, int]:
        passed = sum(1 for r in self.records if r.passed)
        return {'total': len(self.records), 'passed': passed, 'failed': len(self.records) - passed}

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> List[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'suite': self.suite,
            'seed': self.seed,
            'version': self.version,
            'config_hash': self.config_hash,
            'summary': self.summary,
            'wall_time': self.wall_time,
            'records': [r.to_dict() for r in self.records],
        }

    def to_frame(self) -> pd.DataFrame:
        columns = ['name', 'suite', 'routes', 'deviation', 'tolerance', 'passed', 'wall_time', 'detail']
        return pd.DataFrame([r.to_dict() for r in self.records], columns=columns)

    def render_text(self) -> str:
        """Plain-text table plus summary line"""
        if not self.records:
            return f"suite {self.suite}: no checks"
        df = self.to_frame()
        df['status'] = np.where(df['passed'], 'PASS', 'FAIL')
        df['deviation'] = [
            "n/a" if value is None or pd.isna(value) else f"{value:.2e}" for value in df['deviation']
        ]
        df['tolerance'] = [f"{value:.0e}" for value in df['tolerance']]
        table = df[['status', 'suite', 'name', 'routes', 'deviation', 'tolerance']].to_string(index=False)
        s = self.summary
        return f"{table}\n\nsuite {self.suite}: {s['passed']}/{s['total']} passed, {s['failed']} failed"


@dataclass
class Check:
    """A named check; tolerance names a ToolkitSettings field"""

    name: str
    suite: str
    routes: str
    tolerance: str
    run: Callable[["SuiteContext"], CheckResult]


class SuiteContext:
    """Per-run state shared by the checks: seed, trial count, chart artifacts"""

    def __init__(self, seed: int = 0, trials: int = 20):
        self.seed = seed
        self.trials = trials
        self.artifacts: Dict[str, Any] = {}
        self._lock = Lock()

    def rng(self, name: str) -> np.random.Generator:
        """Generator seeded by the run seed and the check name"""
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def store(self, key: str, value: Any) -> None:
        with self._lock:
            self.artifacts[key] = value


# --- random inputs ----------------------------------------------------------------

def random_element(
    rng: np.random.Generator,
    registry: GeneratorRegistry,
    parity: Optional[str] = None,
    terms: int = 6
) -> GrassmannElement:
    """Random element with complex coefficients, optionally of fixed parity"""
    n = len(registry)
    masks = []
    for _ in range(terms):
        mask = int(rng.integers(0, 1 << n))
        if parity is not None and bin(mask).count("1") % 2 != (parity == "odd"):
            mask ^= 1
        masks.append(mask)
    coeffs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return GrassmannElement(registry, np.array(masks, dtype=np.uint64), coeffs)


def _algebra_registry(n_modes: int = 3) -> GeneratorRegistry:
    registry = GeneratorRegistry()
    register_labels(registry, mode_labels("", n_modes))
    return registry


# --- grassmann ----------------------------------------------------------------------

def _associativity(ctx: SuiteContext) -> CheckResult:
    rng, registry = ctx.rng("associativity"), _algebra_registry()
    worst = 0.0
    for _ in range(ctx.trials):
        a, b, c = (random_element(rng, registry) for _ in range(3))
        worst = max(worst, ((a * b) * c).max_deviation(a * (b * c)))
    return worst, f"{ctx.trials} random triples"


def _graded_commutativity(ctx: SuiteContext) -> CheckResult:
    rng, registry = ctx.rng("graded-commutativity"), _algebra_registry()
    worst = 0.0
    for _ in range(ctx.trials):
        pa, pb = rng.choice(["even", "odd"], size=2)
        a, b = random_element(rng, registry, pa), random_element(rng, registry, pb)
        sign = -1.0 if pa == pb == "odd" else 1.0
        worst = max(worst, (a * b).max_deviation(sign * (b * a)))
    return worst, "ab = (-1)^(|a||b|) ba"


def _odd_nilpotency(ctx: SuiteContext) -> CheckResult:
    rng, registry = ctx.rng("odd-nilpotency"), _algebra_registry()
    worst = 0.0
    for _ in range(ctx.trials):
        x = random_element(rng, registry, "odd")
        worst = max(worst, (x * x).max_deviation(registry.zero()))
    return worst, "x^2 = 0 for odd x"


def _gaussian_integral(ctx: SuiteContext) -> CheckResult:
    """∫Π dψ̄dψ exp(−ψ̄·A·ψ) = det A"""
    rng = ctx.rng("gaussian-integral")
    labels = mode_labels("", 3)
    registry = _algebra_registry()
    worst = 0.0
    for _ in range(ctx.trials):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        exponent = registry.zero()
        for i, (bar, _) in enumerate(labels):
            for j, (_, plain) in enumerate(labels):
                exponent = exponent - complex(a[i, j]) * registry.generator(bar) * registry.generator(plain)
        value = integrate_pairs(exp_even(exponent), labels)
        worst = max(worst, abs(value.scalar_part() - np.linalg.det(a)))
    return worst, "Berezin Gaussian against the determinant"


def _exp_inverse(ctx: SuiteContext) -> CheckResult:
    rng, registry = ctx.rng("exp-inverse"), _algebra_registry()
    one = registry.scalar(1.0)
    worst = 0.0
    for _ in range(ctx.trials):
        x = random_element(rng, registry, "even") * 0.5
        worst = max(worst, (exp_even(x) * exp_even(-1 * x)).max_deviation(one))
    return worst, "exp(x) exp(-x) = 1"


def _involution(ctx: SuiteContext) -> CheckResult:
    rng, registry = ctx.rng("involution"), _algebra_registry()
    worst = 0.0
    for _ in range(ctx.trials):
        a, b = random_element(rng, registry), random_element(rng, registry)
        worst = max(worst, involute(involute(a)).max_deviation(a))
        worst = max(worst, involute(a * b).max_deviation(involute(b) * involute(a)))
    return worst, "(ab)* = b* a*, x** = x"


def _render_parse(ctx: SuiteContext) -> CheckResult:
    rng, registry = ctx.rng("render-parse"), _algebra_registry()
    worst = 0.0
    for _ in range(ctx.trials):
        x = random_element(rng, registry)
        worst = max(worst, parse(render(x), registry).max_deviation(x))
    return worst, "canonical text form"


# --- coherent -----------------------------------------------------------------------

def _overlap_formula(n_modes: int, ctx: SuiteContext) -> CheckResult:
    spec = HilbertSpec(n_modes)
    registry = GeneratorRegistry()
    final, initial = mode_labels("f", n_modes), mode_labels("i", n_modes)
    register_labels(registry, final)
    register_labels(registry, initial)
    value = overlap(coherent_bra(registry, spec, final), coherent_ket(registry, spec, initial))
    return value.max_deviation(overlap_closed_form(registry, final, initial)), f"N={n_modes}"


def _identity_resolution(n_modes: int, ctx: SuiteContext) -> CheckResult:
    return identity_resolution_check(HilbertSpec(n_modes)), f"N={n_modes}"


def _random_normal_polynomial(rng: np.random.Generator, n_modes: int) -> OperatorPolynomial:
    items = [(complex(rng.normal()), "")]
    for i in range(1, n_modes + 1):
        for j in range(1, n_modes + 1):
            items.append((complex(rng.normal(), rng.normal()), f"fdag{i} f{j}"))
    if n_modes >= 2:
        items.append((complex(rng.normal()), "fdag1 fdag2 f2 f1"))
    return OperatorPolynomial.from_terms(items)


def _normal_order_substitution(ctx: SuiteContext) -> CheckResult:
    rng = ctx.rng("normal-order-substitution")
    spec = HilbertSpec(2)
    registry = GeneratorRegistry()
    final, initial = mode_labels("f", 2), mode_labels("i", 2)
    register_labels(registry, final)
    register_labels(registry, initial)
    bra, ket = coherent_bra(registry, spec, final), coherent_ket(registry, spec, initial)
    worst = 0.0
    for _ in range(ctx.trials):
        poly = _random_normal_polynomial(rng, 2)
        value = matrix_element(bra, poly, ket)
        expected = substitute(poly, registry, [p[0] for p in final], [p[1] for p in initial]) * overlap(bra, ket)
        worst = max(worst, value.max_deviation(expected))
    return worst, "<psi''|G|psi'> = G(psibar'', psi') <psi''|psi'>"


def _canonical_anticommutators(ctx: SuiteContext) -> CheckResult:
    spec = HilbertSpec(3)
    ops = build_fermion_ops(spec)
    identity = FockOperator.identity(spec)
    worst = 0.0
    for i, (fi, fi_dag) in enumerate(ops):
        for j, (fj, fj_dag) in enumerate(ops):
            target = identity if i == j else FockOperator.zero(spec)
            worst = max(worst, anticommutator(fi, fj_dag).max_deviation(target))
            worst = max(worst, anticommutator(fi, fj).max_deviation(FockOperator.zero(spec)))
    return worst, "{f_i, f_j^dag} = delta_ij"


def _odd_state_parity(ctx: SuiteContext) -> CheckResult:
    spec = HilbertSpec(1)
    registry = GeneratorRegistry()
    labels = [("thetabar", "theta")]
    register_labels(registry, labels)
    odd = odd_coherent_ket(registry, spec, labels).parity()
    even = coherent_ket(registry, spec, labels).parity()
    return (0.0 if (odd, even) == ("odd", "even") else 1.0), f"odd state {odd}, coherent state {even}"


def _odd_state_symbol(ctx: SuiteContext) -> CheckResult:
    """(θ̄|h0 + ω f f†|θ̄) = h0 + ω θθ̄"""
    spec = HilbertSpec(1)
    registry = GeneratorRegistry()
    labels = [("thetabar", "theta")]
    register_labels(registry, labels)
    h0, omega = 0.25, 1.0
    poly = OperatorPolynomial.from_terms([(h0, ""), (omega, "f1 fdag1")])
    value = matrix_element(odd_coherent_bra(registry, spec, labels), poly, odd_coherent_ket(registry, spec, labels))
    expected = h0 + omega * registry.generator("theta") * registry.generator("thetabar")
    return value.max_deviation(expected), "anti-normal symbol on odd states"


# --- first class --------------------------------------------------------------------

def _route_agreement(example_id: str, route_a: str, route_b: str, ctx: SuiteContext, **kwargs) -> CheckResult:
    t = kwargs.pop("t", None)
    n_slices = kwargs.pop("n_slices", 4)
    setup = example_catalog.build(example_id, **kwargs)
    _, _, deviation = example_catalog.compare(setup, route_a, route_b, t=t, n_slices=n_slices)
    return deviation, ", ".join(f"{k}={v}" for k, v in dict(kwargs, t=t).items() if v is not None)


def _projector_routes(example_id: str, ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build(example_id)
    group = project_group_average(setup.phi)
    kernel = project_kernel([setup.phi])
    eq52 = project_eq52(group)
    worst = max(group.max_deviation(kernel), group.max_deviation(eq52), group.idempotency, group.self_adjointness)
    return worst, f"rank {group.rank} by group-average, spectral-kernel and the (1-E) average"


def _sec42_complement(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("sec42")
    complement = FockOperator.identity(setup.spec) - setup.phi
    deviation = setup.projector.operator.max_deviation(complement)
    rank_error = abs(setup.projector.rank - 6)
    return max(deviation, float(rank_error)), f"E = 1 - Phi, rank {setup.projector.rank}"


def _sec42_classification(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("sec42")
    report = classify(setup.constraints)
    residual = max((f.residual for f in report.fits), default=0.0)
    if not report.first_class:
        return float("inf"), f"verdicts {report.verdicts}"
    return residual, "first class, {chi, chi^dag} = Phi recovered"


# --- second class -------------------------------------------------------------------

def _outer_route(example_id: str, ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build(example_id)
    bra, ket = setup.bra(), setup.ket()
    via_outer = setup.projector.matrix_element(bra, ket, via="outer")
    via_operator = setup.projector.matrix_element(bra, ket)
    return via_outer.max_deviation(via_operator), f"rank-one factors of E_{setup.projector.case}"


def _second_class_verdict(example_id: str, ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build(example_id)
    report = classify(setup.constraints)
    verdicts = set(report.verdicts.values())
    return (0.0 if verdicts == {"second-class"} else 1.0), f"verdicts {report.verdicts}"


def _sec62_spectrum(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("sec62")
    chi, chi_dagger = setup.odd_pairs[0]
    x = anticommutator(chi, chi_dagger)
    values = np.unique(integer_spectrum(x))
    spectrum_error = 0.0 if list(values) == [1.0, 2.0] else 1.0
    e_a = project_odd_pair(chi, "A", chi_dagger)
    e_b = project_odd_pair(chi, "B", chi_dagger)
    rank_error = float(abs(e_a.rank - 8) + abs(e_b.rank - 8))
    split = (e_a.operator + e_b.operator).max_deviation(FockOperator.identity(setup.spec))
    return max(spectrum_error, rank_error, split), f"spec(X) = {values.tolist()}, ranks {e_a.rank}+{e_b.rank}"


def _sec62_rescaled(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("sec62")
    scaled, scaled_dagger = rescale_odd(*setup.odd_pairs[0])
    bracket = anticommutator(scaled, scaled_dagger)
    return bracket.max_deviation(FockOperator.identity(setup.spec)), "{chi', chi'^dag} = 1"


def _diagonal_family(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("eq68")
    pairs = setup.odd_pairs
    chis = [op for pair in pairs for op in pair]
    w = anticommutator_matrix(chis)
    expected = np.zeros_like(w)
    for alpha in range(len(pairs)):
        expected[2 * alpha, 2 * alpha + 1] = expected[2 * alpha + 1, 2 * alpha] = 1.0
    algebra_error = float(np.max(np.abs(w - expected)))
    total = FockOperator.zero(setup.spec)
    ranks = []
    for cases in (("A", "A"), ("A", "B"), ("B", "A"), ("B", "B")):
        projector = project_odd_family(pairs, cases)
        ranks.append(projector.rank)
        total = total + projector.operator
    expected_rank = 2 ** (setup.spec.n_fermions - len(pairs))
    rank_error = float(max(abs(r - expected_rank) for r in ranks))
    split = total.max_deviation(FockOperator.identity(setup.spec))
    return max(algebra_error, rank_error, split), f"ranks {ranks}, sum = 1"


def _even_replacement(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("eq65")
    chi, chi_dagger = setup.odd_pairs[0]
    worst = 0.0
    for case in ("A", "B"):
        odd = project_odd_pair(chi, case, chi_dagger)
        even = project_even_replacement(chi, case, chi_dagger)
        worst = max(worst, odd.max_deviation(even))
    return worst, "odd-pair projectors from even averages"


# --- bose-fermi ---------------------------------------------------------------------

def _quadrature_alias(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("bose-fermi")
    try:
        bose_fermi_kernel(
            setup.registry, setup.z_final, setup.final_labels, setup.z_initial, setup.initial_labels,
            1.0, 0.0, 0, setup.spec.boson_cutoff, points=3
        )
    except QuadratureTooSmallError as e:
        return 0.0, str(e)
    return 1.0, "undersized quadrature was accepted"


# --- lattice ------------------------------------------------------------------------

def _lattice_sweep(example_id: str, t: float, ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build(example_id)
    reference = example_catalog.kernel(setup, "closed-form", t=t)
    worst = 0.0
    for n_slices in range(1, 9):
        kernel = example_catalog.kernel(setup, "lattice", t=t, n_slices=n_slices)
        worst = max(worst, kernel.deviation(reference))
    return worst, f"N_t = 1..8, t={t}"


def _multiplier_independence(ctx: SuiteContext) -> CheckResult:
    rng = ctx.rng("multiplier-independence")
    setup = example_catalog.build("eq39")
    reference = example_catalog.kernel(setup, "closed-form")
    worst = 0.0
    for _ in range(3):
        etas = rng.normal(size=4).tolist()
        plan = LatticePlan("eq39", 4, 1.0, etas, "exact")
        worst = max(worst, lattice_propagate(plan, setup).deviation(reference))
    return worst, "random eta schedules, exact slices"


def _free_exact(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("free")
    reference = example_catalog.kernel(setup, "closed-form", t=1.0)
    kernel = example_catalog.kernel(setup, "lattice", t=1.0, n_slices=4, substitution="exact")
    return kernel.deviation(reference), "exact slices compose without Trotter defect"


def _trotter_slope(ctx: SuiteContext) -> CheckResult:
    setup = example_catalog.build("free")
    reference = example_catalog.kernel(setup, "operator-side", t=1.0)
    df, fit = trotter_convergence(setup, reference, 1.0, (2, 4, 8, 16))
    ctx.store("trotter", df)
    ctx.store("trotter_fit", fit)
    return abs(fit['slope'] - settings.trotter_slope), f"slope {fit['slope']:.3f}, R2 {fit['r2_score']:.4f}"


def _config_lattice(config, ctx: SuiteContext) -> CheckResult:
    lattice = config.lattice
    setup = example_catalog.build(lattice["example"])
    reference = example_catalog.kernel(setup, "operator-side", t=lattice["t"])
    substitution = lattice["substitution"] or example_catalog.default_substitution(lattice["example"])
    plan = LatticePlan(lattice["example"], lattice["n_slices"], lattice["t"], lattice["schedule"], substitution)
    return lattice_propagate(plan, setup).deviation(reference), f"{config.name}: N_t={lattice['n_slices']}"


# --- manifest -----------------------------------------------------------------------

def build_checks(suite: str, config=None) -> List[Check]:
    """
    Checks of one suite (or of every suite for "all")

    Args:
        suite: Suite name or "all"
        config: Optional ToolkitConfig whose lattice section adds a check

    Returns:
        Ordered list of checks
    """
    if suite == "all":
        checks = [c for name in SUITES for c in build_checks(name)]
    elif suite not in SUITES:
        raise ValueError(f"Unknown suite {suite!r}; expected one of {SUITES + ('all',)}")
    else:
        checks = _MANIFEST[suite]()
    if config is not None and config.lattice is not None:
        checks.append(Check("config-lattice", "lattice", "lattice vs operator-side", "kernel_tolerance",
                            partial(_config_lattice, config)))
    return checks


def _grassmann_checks() -> List[Check]:
    items = [
        ("associativity", _associativity),
        ("graded-commutativity", _graded_commutativity),
        ("odd-nilpotency", _odd_nilpotency),
        ("gaussian-integral", _gaussian_integral),
        ("exp-inverse", _exp_inverse),
        ("involution", _involution),
        ("render-parse", _render_parse),
    ]
    return [Check(name, "grassmann", "algebra law", "kernel_tolerance", fn) for name, fn in items]


def _coherent_checks() -> List[Check]:
    checks = []
    for n in (1, 2, 3):
        checks.append(Check(f"overlap-N{n}", "coherent", "overlap vs closed-form", "kernel_tolerance",
                            partial(_overlap_formula, n)))
    for n in (1, 2, 3):
        checks.append(Check(f"identity-resolution-N{n}", "coherent", "integral vs identity",
                            "identity_resolution_tolerance", partial(_identity_resolution, n)))
    checks += [
        Check("normal-order-substitution", "coherent", "matrix element vs symbol", "kernel_tolerance",
              _normal_order_substitution),
        Check("canonical-anticommutators", "coherent", "operator algebra", "projector_tolerance",
              _canonical_anticommutators),
        Check("odd-state-parity", "coherent", "parity", "kernel_tolerance", _odd_state_parity),
        Check("odd-state-symbol", "coherent", "matrix element vs symbol", "kernel_tolerance", _odd_state_symbol),
    ]
    return checks


def _first_class_checks() -> List[Check]:
    checks = []
    for example_id in ("eq39", "sec42"):
        checks.append(Check(f"{example_id}-projector-routes", "first-class", "group-average vs spectral-kernel vs eq52",
                            "projector_tolerance", partial(_projector_routes, example_id)))
        checks.append(Check(f"{example_id}-kernel", "first-class", "operator-side vs closed-form",
                            "kernel_tolerance",
                            partial(_route_agreement, example_id, "operator-side", "closed-form")))
    checks += [
        Check("sec42-complement", "first-class", "projector vs 1 - Phi", "projector_tolerance", _sec42_complement),
        Check("sec42-classification", "first-class", "closure fit", "closure_tolerance", _sec42_classification),
    ]
    return checks


def _second_class_checks() -> List[Check]:
    checks = []
    for example_id in ("eq58", "eq63", "eq65", "eq66"):
        for t in (0.0, 0.7, 3.1):
            checks.append(Check(f"{example_id}-kernel-t{t}", "second-class", "operator-side vs closed-form",
                                "kernel_tolerance",
                                partial(_route_agreement, example_id, "operator-side", "closed-form", t=t)))
    for example_id in ("eq58", "eq63"):
        checks.append(Check(f"{example_id}-outer", "second-class", "outer product vs operator", "kernel_tolerance",
                            partial(_outer_route, example_id)))
    for example_id in ("eq58", "eq68"):
        checks.append(Check(f"{example_id}-classification", "second-class", "closure fit", "closure_tolerance",
                            partial(_second_class_verdict, example_id)))
    checks += [
        Check("sec62-spectrum", "second-class", "X spectrum and projector ranks", "projector_tolerance",
              _sec62_spectrum),
        Check("sec62-rescaled", "second-class", "rescaled anticommutator", "closure_tolerance", _sec62_rescaled),
        Check("eq68-family", "second-class", "diagonal family products", "projector_tolerance", _diagonal_family),
        Check("even-replacement", "second-class", "odd-pair vs even average", "projector_tolerance",
              _even_replacement),
    ]
    return checks


def _bose_fermi_checks() -> List[Check]:
    checks = []
    for p in (-1, 0, 1):
        for t in (0.0, 1.3):
            checks.append(Check(f"bose-fermi-p{p}-t{t}", "bose-fermi", "quadrature vs closed-form",
                                "bose_fermi_tolerance",
                                partial(_route_agreement, "bose-fermi", "quadrature", "closed-form", p=p, t=t)))
    checks += [
        Check("bose-fermi-operator", "bose-fermi", "operator-side vs closed-form", "bose_fermi_tolerance",
              partial(_route_agreement, "bose-fermi", "operator-side", "closed-form", p=1, t=0.3)),
        Check("bose-fermi-lattice", "bose-fermi", "lattice vs quadrature", "bose_fermi_tolerance",
              partial(_route_agreement, "bose-fermi", "lattice", "quadrature", p=1, t=0.3)),
        Check("bose-fermi-alias", "bose-fermi", "quadrature size guard", "bose_fermi_tolerance", _quadrature_alias),
    ]
    return checks


def _lattice_checks() -> List[Check]:
    return [
        Check("eq39-lattice", "lattice", "lattice vs closed-form", "kernel_tolerance",
              partial(_lattice_sweep, "eq39", 1.0)),
        Check("sec42-lattice", "lattice", "lattice vs closed-form", "kernel_tolerance",
              partial(_lattice_sweep, "sec42", 1.0)),
        Check("eq58-lattice", "lattice", "lattice vs closed-form", "kernel_tolerance",
              partial(_lattice_sweep, "eq58", 0.7)),
        Check("multiplier-independence", "lattice", "lattice vs closed-form", "kernel_tolerance",
              _multiplier_independence),
        Check("free-exact", "lattice", "lattice vs closed-form", "kernel_tolerance", _free_exact),
        Check("trotter-slope", "lattice", "log-log slope vs target", "trotter_slope_window", _trotter_slope),
    ]


_MANIFEST: Dict[str, Callable[[], List[Check]]] = {
    "grassmann": _grassmann_checks,
    "coherent": _coherent_checks,
    "first-class": _first_class_checks,
    "second-class": _second_class_checks,
    "bose-fermi": _bose_fermi_checks,
    "lattice": _lattice_checks,
}


def _execute(check: Check, ctx: SuiteContext) -> CheckRecord:
    start = time.perf_counter()
    try:
        deviation, detail = check.run(ctx)
        deviation = float(deviation)
    except Exception as e:
        logger.warning("check %s raised %s: %s", check.name, type(e).__name__, e)
        deviation, detail = float("inf"), f"{type(e).__name__}: {e}"
    elapsed = time.perf_counter() - start
    tolerance = float(getattr(settings, check.tolerance))
    return CheckRecord(check.name, check.suite, check.routes, deviation, tolerance, elapsed, detail)


def run_suite(
    suite: str,
    seed: int = 0,
    jobs: int = 1,
    config=None,
    config_hash: Optional[str] = None,
    trials: int = 20,
    names: Optional[Sequence[str]] = None
) -> RunReport:
    """
    Run a suite and collect its report

    Args:
        suite: Suite name or "all"
        seed: Seed for the randomized checks
        jobs: Worker threads (records keep manifest order)
        config: Optional ToolkitConfig
        config_hash: Hash stored on the report
        trials: Random trials per randomized check
        names: Optional subset of check names

    Returns:
        RunReport
    """
    checks = build_checks(suite, config)
    if names is not None:
        checks = [c for c in checks if c.name in set(names)]
    ctx = SuiteContext(seed, trials)
    start = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda c: _execute(c, ctx), checks))
    else:
        records = [_execute(c, ctx) for c in checks]
    report = RunReport(suite, seed, config_hash or "", records, wall_time=time.perf_counter() - start)
    report.artifacts = dict(ctx.artifacts)
    logger.info("suite %s: %d checks in %.2fs", suite, len(records), report.wall_time)
    return report
