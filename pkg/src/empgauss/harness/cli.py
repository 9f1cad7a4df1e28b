"""Command-line entry point.

Exit codes: 0 success, 1 bound or invariant violation, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, EmpGaussError, InvalidParameter, OutputWriteFailed
from . import experiments
from .config import ExperimentConfig, config_from_mapping, load_config
from .plotting import plot_report
from .report import write_report

log = logging.getLogger("empgauss")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _parse_family(text: str) -> dict:
    """``ou:alpha=1`` -> {"family": "ou", "alpha": 1.0}."""
    name, _, rest = text.partition(":")
    d = {"family": name.strip()}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"bad family parameter {item!r} in {text!r}")
        d[key.strip()] = float(val)
    return d


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON file with ExperimentConfig fields")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), help="report format")
    p.add_argument("--family", action="append", metavar="NAME[:k=v,...]",
                   help="family, e.g. ou:alpha=1 (repeatable; overrides config)")
    p.add_argument("--n", type=int, nargs="+", dest="n_list", help="sample sizes")
    p.add_argument("--replications", "-R", type=int, help="replications per cell")
    p.add_argument("--epsilon", help="kernel width or 'epsilon_star'")
    p.add_argument("--no-plots", action="store_true", help="skip SVG figures")
    p.add_argument("--keep-values", action="store_true",
                   help="also write per-replication sup values")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="empgauss",
        description="Monte Carlo checks of finite-sample bounds for empirical "
                    "processes of dependent Gaussian sequences.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-bounds", help="compare MC sup deviations with the bounds")
    _add_common(p)
    p = sub.add_parser("convergence", help="E sup deviation across n, with log-log slope")
    _add_common(p)
    p = sub.add_parser("tails", help="pointwise vs uniform tail probabilities")
    _add_common(p)
    p.add_argument("--threshold", type=float, action="append",
                   help="tail threshold in (0, 1) (repeatable)")
    p = sub.add_parser("tightness", help="block construction: mean sup vs √Δ/n")
    _add_common(p)
    p.add_argument("--delta-targets", nargs="+", help="Δ targets, e.g. n 4n 16n or numbers")
    p = sub.add_parser("delta", help="growth of Δ(n) and a.s.-condition partial sums")
    _add_common(p)

    p = sub.add_parser("hermite-check", help="Hermite invariants and aggregation residual tables")
    p.add_argument("--out", default="results")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--kmax", type=int, default=200, help="truncation degree K")
    p.add_argument("--epsilon", type=float, nargs="+", default=[0.05, 0.1, 0.25, 0.5])
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {
        "master_seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "format": args.format,
        "n_list": args.n_list,
        "replications": args.replications,
        "epsilon": args.epsilon,
    }
    if args.family:
        overrides["families"] = [_parse_family(f) for f in args.family]
    if args.no_plots:
        overrides["plots"] = False
    if args.keep_values:
        overrides["keep_values"] = True
    if args.epsilon not in (None, "epsilon_star"):
        try:
            overrides["epsilon"] = float(args.epsilon)
        except ValueError:
            raise ConfigError(f"bad epsilon {args.epsilon!r}") from None
    if args.config:
        return load_config(args.config, **overrides)
    return config_from_mapping({}, **overrides)


def run(args) -> int:
    if args.command == "hermite-check":
        report = experiments.run_hermite_check(K_max=args.kmax, epsilons=tuple(args.epsilon))
        out, fmt, plots = args.out, args.format, not args.no_plots
    else:
        cfg = _config(args)
        if args.command == "verify-bounds":
            report = experiments.run_bound_experiment(cfg)
        elif args.command == "convergence":
            report = experiments.run_convergence_study(cfg)
        elif args.command == "tails":
            report = experiments.run_tail_study(cfg, args.threshold)
        elif args.command == "tightness":
            report = experiments.run_remark_tightness(cfg, args.delta_targets)
        else:
            report = experiments.run_delta_diagnostics(cfg)
        out, fmt, plots = cfg.out, cfg.format, cfg.plots
    paths = write_report(report, out, fmt)
    if plots:
        paths += plot_report(report, out)
    for p in paths:
        print(p)
    for v in report.violations:
        print(f"VIOLATION: {v}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except OutputWriteFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EmpGaussError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
