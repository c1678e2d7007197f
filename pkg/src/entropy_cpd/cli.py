"""Command-line interface: ``entropy-cpd <bounds|quantile|test|simulate|scan>``.

All ``--x`` values and printed thresholds are relative entropies in nats.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from ._version import __version__
from .bounds import BetaMode, BoundSpec, Family, bound_quantile, bound_value
from .categorical import CategoricalDistribution, aggregate_series, read_series_csv
from .detect import parse_method, re_test, rolling_scan
from .exceptions import ConfigError, DataError, EntropyCPDError
from .harness import ExperimentConfig, run_experiment, sidecar_path

log = logging.getLogger("entropy_cpd")

_SIMULATIONS = {"cdf": ("cdf_envelope",), "quantiles": ("quantile_vs_n", "quantile_vs_k"),
                "power": ("power_vs_psi",), "equal-mean": ("equal_mean_power",)}


def _probs(text: str | None, k: int):
    if text is None:
        return None
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"--p must be comma-separated numbers, got {text!r}") from None
    if len(values) != k:
        raise ConfigError(f"--p has {len(values)} entries but k = {k}")
    return CategoricalDistribution(values)


def _spec_from_args(args) -> BoundSpec:
    try:
        family = Family(args.family)
    except ValueError:
        raise ConfigError(f"unknown family {args.family!r}") from None
    p = _probs(args.p, args.k)
    if p is None and family in (Family.BE_ENVELOPE, Family.BE2_QUADRATIC):
        p = CategoricalDistribution.uniform(args.k)
    mode, beta = BetaMode.UNIT, None
    if args.beta is not None:
        text = args.beta.strip().lower()
        if text == "auto":
            mode = BetaMode.REVERSE_PINSKER
            if p is None:
                raise ConfigError("--beta auto needs --p (beta is evaluated at p_hat = q_hat = p)")
        elif text != "unit":
            try:
                beta = float(text)
            except ValueError:
                raise ConfigError(f"--beta must be a number, 'auto' or 'unit', got {args.beta!r}") from None
    if args.m is not None and not family.two_sample:
        log.warning("--m ignored for one-sample family %s", family.value)
    m = args.m if family.two_sample else None
    return BoundSpec(family, n=args.n, k=args.k, m=m, beta_mode=mode, beta=beta, p=p)


def _cmd_bounds(args) -> int:
    print(repr(bound_value(args.x, _spec_from_args(args))))
    return 0


def _cmd_quantile(args) -> int:
    print(repr(bound_quantile(args.alpha, _spec_from_args(args))))
    return 0


def _read_labels(path) -> np.ndarray:
    _, values = read_series_csv(path)
    return values


def _cmd_test(args) -> int:
    first, second = _read_labels(args.first), _read_labels(args.second)
    result = re_test(first, second, args.k, args.method, args.alpha)
    print(json.dumps(result.to_dict(), indent=1))
    return 0


def _cmd_simulate(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if cfg.experiment not in _SIMULATIONS[args.kind]:
        raise ConfigError(f"config experiment {cfg.experiment!r} does not match 'simulate {args.kind}'")
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = args.out or cfg.output
    if not out:
        raise ConfigError("no output path: pass --out or set 'output' in the config")
    table = run_experiment(cfg, threads=args.threads)
    csv_path, side = table.write(out)
    for note in table.notes:
        log.info(note)
    print(f"wrote {csv_path} and {side}")
    return 0


def _cmd_scan(args) -> int:
    timestamps, values = read_series_csv(args.input)
    if args.aggregate:
        if timestamps is None:
            raise DataError("--aggregate needs a date,value input")
        timestamps, values = aggregate_series(timestamps, values, args.aggregate)
    methods = [m for m in args.methods.split(",") if m.strip()]
    for m in methods:
        parse_method(m)
    result = rolling_scan(values, args.window, args.k, preprocess=args.preprocess,
                          reference=args.reference, methods=methods, alpha=args.alpha,
                          timestamps=timestamps, step=args.step, threads=args.threads)
    result.to_csv(args.out)
    side = sidecar_path(args.out)
    result.to_json(side)
    for w in result.warnings:
        log.warning(w)
    print(f"wrote {args.out} and {side}")
    return 0


def _globals(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="master seed (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads (results do not depend on it)")


def _bound_args(p) -> None:
    p.add_argument("--family", required=True, help="bound family tag, e.g. agrawal3")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--beta", help="number, 'unit' (default) or 'auto'")
    p.add_argument("--p", help="comma-separated probabilities")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropy-cpd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate a tail bound P(D >= x)")
    _bound_args(p)
    p.add_argument("--x", type=float, required=True, help="relative entropy in nats")
    _globals(p, suppress=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("quantile", help="threshold at level alpha")
    _bound_args(p)
    p.add_argument("--alpha", type=float, required=True)
    _globals(p, suppress=True)
    p.set_defaults(func=_cmd_quantile)

    p = sub.add_parser("test", help="relative-entropy test between two label files")
    p.add_argument("--first", required=True)
    p.add_argument("--second", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", default="asymptotic2")
    p.add_argument("--alpha", type=float, default=0.05)
    _globals(p, suppress=True)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p.add_argument("kind", choices=sorted(_SIMULATIONS))
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    _globals(p, suppress=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scan", help="rolling-window scan of a series")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--preprocess", default="quantile", help="quantile | sign-triples[:merge] | labels")
    p.add_argument("--reference", default="previous", choices=["previous", "first"])
    p.add_argument("--methods", default="asymptotic2", help="comma-separated method tags")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--aggregate", choices=["daily", "weekly"])
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--out", required=True)
    _globals(p, suppress=True)
    p.set_defaults(func=_cmd_scan)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EntropyCPDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
