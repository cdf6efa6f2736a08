"""Command-line front end: ``stablegm <verb> [flags]``.

Every output starts with a comment header echoing the resolved flags (output
paths and ``--threads`` excluded, since neither changes the result).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from . import __version__
from .io import (
    FileFormatError,
    format_data_csv,
    format_table,
    model_to_dict,
    read_data_csv,
    read_labels,
    read_model_json,
    read_topology,
)
from .model import simulate, symmetrize
from .pipelines import (
    CURVE_COLUMNS,
    CV_COLUMNS,
    REPLICATE_COLUMNS,
    SUMMARY_COLUMNS,
    BenchmarkSpec,
    crossval,
    derive_seed,
    normalize_expression,
    run_benchmark,
    sgex,
)
from .scoring import REPORT_COLUMNS, default_p, lflom_terms, score_model
from .search import TRACE_COLUMNS, SearchConfig, stable_learn
from .stable import beta_from_theta, estimate, make_rng

logger = logging.getLogger("stablegm")

_UNECHOED = {"func", "output", "trace", "threads", "verbose"}

ESTIMATE_COLUMNS = (
    "variable", "alpha", "theta", "beta", "gamma",
    "alpha_boot_mean", "alpha_boot_std", "theta_boot_std", "gamma_boot_std",
)


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _UNECHOED and v is not None}


def _emit(path, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _search_config(args) -> SearchConfig:
    return SearchConfig(
        n_restarts=args.restarts,
        max_parents=args.max_parents,
        seed=args.seed,
        score_kind=args.score,
    )


# -- verbs -----------------------------------------------------------------


def cmd_sample(args):
    model = read_model_json(args.model)
    data = simulate(model, args.n, args.seed)
    _emit(args.output, format_data_csv(data, _config(args)))


def cmd_estimate(args):
    data = read_data_csv(args.data)
    names = data.variable_names if args.column is None else [args.column]
    rows = []
    for name in names:
        x = data.column(name)
        rep = estimate(x, args.p_divisor)
        rng = make_rng(derive_seed(args.seed, data.variable_names.index(name)))
        boots = []
        with warnings.catch_warnings():
            # resampled duplicates give zero differences; each call would warn
            warnings.simplefilter("ignore")
            for _ in range(args.bootstrap):
                b = estimate(x[rng.integers(0, x.size, x.size)], args.p_divisor)
                boots.append((b.alpha_hat, b.theta_hat, b.gamma_hat))
        boots = np.array(boots).reshape(-1, 3)
        sd = boots.std(axis=0, ddof=1) if len(boots) > 1 else np.full(3, np.nan)
        mean_alpha = float(boots[:, 0].mean()) if len(boots) else float("nan")
        beta = beta_from_theta(rep.theta_hat, rep.alpha_hat)
        rows.append((name, rep.alpha_hat, rep.theta_hat, beta, rep.gamma_hat, mean_alpha, sd[0], sd[1], sd[2]))
    _emit(args.output, format_table(ESTIMATE_COLUMNS, rows, _config(args)))


def cmd_learn(args):
    data = read_data_csv(args.data)
    model, trace = stable_learn(data, _search_config(args))
    meta = dict(_config(args), score=trace.best_score, alpha_hat=trace.alpha,
                orderings_visited=trace.orderings_visited, families_scored=trace.families_scored)
    _emit(args.output, json.dumps(model_to_dict(model, meta), indent=2) + "\n")
    if args.trace:
        _emit(args.trace, format_table(TRACE_COLUMNS, trace.rows(), _config(args)))


def cmd_score(args):
    model = read_model_json(args.model)
    data = read_data_csv(args.data)
    if not args.no_symmetrize:
        data = symmetrize(data)
    if args.score == "lflom":
        p = args.p if args.p is not None else default_p(model.alpha)
        terms = lflom_terms(model, data, p)
        rows = [(name, t) for name, t in zip(model.names, terms)]
        rows.append(("TOTAL", float(sum(terms))))
        _emit(args.output, format_table(("node", "lflom"), rows, _config(args)))
        return
    report = score_model(model, data, args.score, args.p)
    _emit(args.output, format_table(REPORT_COLUMNS, report.rows(), _config(args)))


def cmd_benchmark(args):
    spec = BenchmarkSpec(
        topology=read_topology(args.topology),
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        rho=args.rho,
        n_samples=args.n,
        n_replicates=args.replicates,
        seed=args.seed,
    )
    report = run_benchmark(spec, args.score, _search_config(args), threads=args.threads)
    cfg = _config(args)
    prefix = args.output or "benchmark"
    _emit(f"{prefix}.summary.tsv", format_table(SUMMARY_COLUMNS, report.summary_rows(), cfg))
    _emit(f"{prefix}.curve.csv", format_table(CURVE_COLUMNS, report.curve_rows(), cfg, delimiter=","))
    _emit(f"{prefix}.replicates.tsv", format_table(REPLICATE_COLUMNS, report.replicate_rows(), cfg))


def cmd_crossval(args):
    data = read_data_csv(args.data)
    report = crossval(data, args.folds, _search_config(args), threads=args.threads)
    _emit(args.output, format_table(CV_COLUMNS, report.rows(), _config(args)))


def cmd_sgex(args):
    data = read_data_csv(args.data)
    labels = read_labels(args.groups)
    de = sgex(data, labels, _search_config(args), threads=args.threads, p_divisor=args.p_divisor)
    _emit(args.output, format_table(de.columns, de.rows(), _config(args)))


def cmd_normalize(args):
    data = read_data_csv(args.data)
    _emit(args.output, format_data_csv(normalize_expression(data, args.top_k), _config(args)))


# -- parser ----------------------------------------------------------------


def _search_flags(p, score_choices=("mdc", "ols")):
    p.add_argument("--score", choices=score_choices, default="mdc")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablegm", description="alpha-stable graphical models")
    parser.add_argument("--version", action="version", version=f"stablegm {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent work items")
    common.add_argument(
        "--output", "-o", default=None, help="output path (default stdout; benchmark: file prefix)"
    )
    common.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="verb", required=True)

    p = sub.add_parser("sample", parents=[common], help="simulate data from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", parents=[common], help="per-column alpha, theta, gamma with bootstrap spread")
    p.add_argument("--data", required=True)
    p.add_argument("--column", default=None)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--p-divisor", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("learn", parents=[common], help="learn a model by ordering search")
    p.add_argument("--data", required=True)
    p.add_argument("--trace", default=None, help="optional path for the restart trace")
    _search_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("score", parents=[common], help="score a model on data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--score", choices=("mdc", "ols", "ols-lognorm", "lflom"), default="mdc")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--no-symmetrize", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("benchmark", parents=[common], help="synthetic structure-recovery benchmark")
    p.add_argument("--topology", required=True, help="edge-list file or bundled name (child)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--replicates", type=int, default=100)
    _search_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("crossval", parents=[common], help="k-fold LFLOM against the empty model")
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=10)
    _search_flags(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sgex", parents=[common], help="held-out-group differential dispersion")
    p.add_argument("--data", required=True)
    p.add_argument("--groups", required=True, help="file with one group label per data row")
    p.add_argument("--p-divisor", type=float, default=1.01)
    _search_flags(p)
    p.set_defaults(func=cmd_sgex)

    p = sub.add_parser("normalize", parents=[common], help="median-center, select by variance, exponentiate")
    p.add_argument("--data", required=True)
    p.add_argument("--top-k", type=int, required=True)
    p.set_defaults(func=cmd_normalize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        args.func(args)
    except FileFormatError as exc:
        print(f"stablegm: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"stablegm: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
