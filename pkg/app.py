"""
Constrained Fermion Quantization Toolkit
Command-line front end: verification suites, example kernels and
constraint classification
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

# Add src to path
sys.path.insert(0, 'src')

from algebra.grassmann import render
from catalog.config import ConfigError, canonical_hash, load_config
from catalog.examples import example_catalog
from constraints.projectors import classify
from models.trotter import TrotterSlopeModel
from utils.explanations import generate_explanations
from utils.helpers import format_deviation, save_report, summarize_frame
from utils.settings import settings
from verification.suites import SUITES, run_suite
from visualizations.charts import create_report_figure, write_html

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

ROUTE_ALIASES = {"operator": "operator-side"}
ROUTE_CHOICES = ("operator", "operator-side", "closed-form", "quadrature", "lattice")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfq",
        description="Coherent-state kernels and projectors for constrained fermion systems"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run a verification suite")
    verify.add_argument("suite", choices=SUITES + ("all",))
    verify.add_argument("--json", dest="json_path", help="write the JSON report here")
    verify.add_argument("--html", dest="html_path", help="write a plotly deviation chart here")
    verify.add_argument("--seed", type=int, default=0, help="seed for randomized property checks")
    verify.add_argument("--config", help="JSON config (tolerances, extra lattice check)")
    verify.add_argument("--jobs", type=int, default=1, help="worker threads")
    verify.add_argument("--trials", type=int, default=20, help="random trials per randomized check")

    kernel = sub.add_parser("kernel", help="print the kernel of a catalog example")
    kernel.add_argument("example", choices=sorted(example_catalog.EXAMPLES))
    kernel.add_argument("--route", choices=ROUTE_CHOICES, default="operator-side")
    kernel.add_argument("--compare", choices=ROUTE_CHOICES, help="second route; prints the max deviation")
    kernel.add_argument("--t", type=float, help="time")
    kernel.add_argument("--p", type=int, help="integer offset of the boson-fermion constraint")
    kernel.add_argument("--omega", type=float, help="frequency")
    kernel.add_argument("--labels", help="JSON file with final/initial label pairs")
    kernel.add_argument("--n-slices", type=int, default=4, help="lattice slices")
    kernel.add_argument("--substitution", choices=("normal-symbol", "exact"),
                        help="lattice short-time rule (default: per example)")

    classify_cmd = sub.add_parser("classify", help="classify the constraints of a config")
    classify_cmd.add_argument("config")

    sub.add_parser("examples", help="list the catalog examples")
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def cmd_verify(args) -> int:
    config = None
    if args.config:
        config = load_config(args.config)
        config_hash = config.config_hash
    else:
        config_hash = canonical_hash({"suite": args.suite, "seed": args.seed})
    report = run_suite(args.suite, seed=args.seed, jobs=max(1, args.jobs), config=config,
                       config_hash=config_hash, trials=args.trials)

    print(report.render_text())
    df = report.to_frame()
    explanations = generate_explanations(df)
    if explanations:
        print("\nfailed checks:")
        print("\n".join(explanations))
    convergence = report.artifacts.get("trotter")
    if convergence is not None:
        slope_model = TrotterSlopeModel()
        fit = slope_model.fit(convergence)
        print("\n" + slope_model.get_summary())
    else:
        fit = None
    if args.json_path:
        save_report(report.to_dict(), args.json_path)
    if args.html_path:
        write_html(create_report_figure(df, convergence, fit), args.html_path)
        logger.info("chart written to %s", args.html_path)
    logger.info("per-suite summary:\n%s", summarize_frame(df).to_string(index=False))
    return EXIT_OK if report.passed else EXIT_FAILED


def _load_labels(path: str) -> dict:
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno, column=e.colno)
    labels = {}
    for side in ("final", "initial"):
        if side in data:
            pairs = data[side]
            if not isinstance(pairs, list) or not all(isinstance(p, list) and len(p) == 2 for p in pairs):
                raise ConfigError("must be a list of [bar label, label] pairs", side)
            labels[side] = [tuple(p) for p in pairs]
    return labels


def cmd_kernel(args) -> int:
    route = ROUTE_ALIASES.get(args.route, args.route)
    labels = _load_labels(args.labels) if args.labels else None
    setup = example_catalog.build(args.example, labels=labels, p=args.p, omega=args.omega)
    options = dict(t=args.t, n_slices=args.n_slices, substitution=args.substitution)
    kernel = example_catalog.kernel(setup, route, **options)
    print(render(kernel.value))
    if args.compare:
        other = example_catalog.kernel(setup, ROUTE_ALIASES.get(args.compare, args.compare), **options)
        deviation = kernel.deviation(other)
        print(f"max deviation {route} vs {other.route}: {format_deviation(deviation)}")
        tolerance = settings.bose_fermi_tolerance if args.example == "bose-fermi" else settings.kernel_tolerance
        if deviation > tolerance:
            return EXIT_FAILED
    return EXIT_OK


def cmd_classify(args) -> int:
    config = load_config(args.config)
    report = classify(config.constraints)
    print(f"config {config.name}")
    print(report.to_frame().to_string(index=False))
    for name, verdict in report.verdicts.items():
        print(f"{name}: {verdict}")
    return EXIT_OK


def cmd_examples(args) -> int:
    print(example_catalog.list_examples().to_string(index=False))
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "kernel": cmd_kernel,
    "classify": cmd_classify,
    "examples": cmd_examples,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
