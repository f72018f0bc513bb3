"""Command-line interface: fit | predict | cv | simulate | bench | verify.

Exit codes: 0 success, 1 usage error or failed verification, 2 data error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .classifiers import (
    fit_diagonal_lda,
    fit_lda,
    fit_pcalda,
    fit_spcalda,
    fit_srrlda,
    predict,
)
from .exceptions import ConfigError, SpcaldaError
from .linalg import GAMMA_INF
from .model_selection import CVGrid, cv_select, format_error_table
from .scenarios import (
    BENCH_METHODS,
    ScenarioSpec,
    default_specs,
    generate_scenario,
    run_benchmark,
)
from .theory import builtin_battery, format_battery

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_gamma(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return GAMMA_INF
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"--gamma expects a number or 'inf', got {text!r}") from None
    if not value > 0:
        raise ConfigError(f"--gamma must be positive, got {value}")
    return value


def _parse_int_list(text: str, flag: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part and not part.startswith("-"):
            lo, hi = part.split("-", 1)
            try:
                out.extend(range(int(lo), int(hi) + 1))
            except ValueError:
                raise ConfigError(f"{flag}: cannot parse range {part!r}") from None
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise ConfigError(f"{flag}: cannot parse {part!r}") from None
    if not out:
        raise ConfigError(f"{flag}: empty list")
    return out


def _parse_gamma_list(text: str) -> list:
    return [_parse_gamma(part) for part in text.split(",") if part.strip()]


def build_parser() -> _Parser:
    parser = _Parser(prog="spcalda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a classifier on a CSV dataset")
    fit.add_argument("--method", required=True,
                     choices=["spcalda", "pcalda", "srrlda", "ir", "lda"])
    fit.add_argument("--gamma", help="weight on the between-class scatter, or 'inf'")
    fit.add_argument("--q", type=int, help="number of projection directions")
    fit.add_argument("--input", required=True)
    fit.add_argument("--label", required=True, help="name of the label column")
    fit.add_argument("--priors", choices=["empirical", "equal"], default="empirical")
    fit.add_argument("--out", required=True, help="model file (json)")

    pred = sub.add_parser("predict", help="predict labels with a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--input", required=True)
    pred.add_argument("--out", required=True, help="predictions file (csv)")

    cv = sub.add_parser("cv", help="cross-validated (gamma, q) selection")
    cv.add_argument("--method", choices=["spcalda", "pcalda"], default="spcalda")
    cv.add_argument("--input", required=True)
    cv.add_argument("--label", required=True)
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--gamma-grid", help="comma list, e.g. 0.25,1,4,inf")
    cv.add_argument("--q-grid", help="comma list or range, e.g. 1-10")
    cv.add_argument("--priors", choices=["empirical", "equal"], default="empirical")
    cv.add_argument("--out", help="report file (json)")

    sim = sub.add_parser("simulate", help="write one scenario draw as train/test CSVs")
    sim.add_argument("--scenario", type=int, required=True, choices=range(1, 7))
    sim.add_argument("--p", type=int, default=500)
    sim.add_argument("--train-per-class", type=int, default=25)
    sim.add_argument("--test-per-class", type=int, default=25)
    sim.add_argument("--mean-scale", type=float)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out-prefix", required=True)

    bench = sub.add_parser("bench", help="Monte-Carlo benchmark over the six scenarios")
    bench.add_argument("--scenarios", default="1-6", help="e.g. 1-6 or 1,3,5")
    bench.add_argument("--replicates", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--p", type=int, default=500)
    bench.add_argument("--train-per-class", type=int, default=25)
    bench.add_argument("--test-per-class", type=int, default=25)
    bench.add_argument("--mean-scale", type=float)
    bench.add_argument("--folds", type=int, default=5)
    bench.add_argument("--methods", default=",".join(BENCH_METHODS))
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out-prefix", help="write <prefix>.txt and <prefix>.csv")

    verify = sub.add_parser("verify", help="run the built-in verifier battery")
    verify.add_argument("--seed", type=int, default=20240601)
    return parser


def _cmd_fit(args) -> int:
    csv_ds = io.load_csv(args.input, args.label)
    ds = csv_ds.dataset
    method = args.method
    if method == "spcalda":
        if args.gamma is None or args.q is None:
            raise ConfigError("--method spcalda requires --gamma and --q")
        model = fit_spcalda(ds, _parse_gamma(args.gamma), args.q, args.priors)
    elif method == "pcalda":
        if args.q is None:
            raise ConfigError("--method pcalda requires --q")
        if args.gamma is not None:
            raise ConfigError("--gamma is fixed to 1 for pcalda")
        model = fit_pcalda(ds, args.q, args.priors)
    else:
        if args.gamma is not None or args.q is not None:
            raise ConfigError(f"--gamma/--q do not apply to method {method}")
        fitter = {"srrlda": fit_srrlda, "ir": fit_diagonal_lda, "lda": fit_lda}[method]
        model = fitter(ds, args.priors)
    model.label_names = csv_ds.label_names
    model.label_column = csv_ds.label_column
    io.save_model(args.out, model)
    print(f"saved {model.method_tag} model to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = io.load_model(args.model)
    drop = [model.label_column] if model.label_column else []
    data, _ = io.load_feature_matrix(args.input, drop_columns=drop)
    labels, scores = predict(model, data)
    names = model.label_names
    if names is not None:
        out_labels = [names[model.class_labels.tolist().index(lab)] for lab in labels]
    else:
        out_labels = labels.tolist()
    io.save_predictions_csv(args.out, out_labels, scores, names)
    print(f"wrote {len(out_labels)} predictions to {args.out}")
    return 0


def _cmd_cv(args) -> int:
    csv_ds = io.load_csv(args.input, args.label)
    ds = csv_ds.dataset
    default = CVGrid.default_for(ds, folds=args.folds, seed=args.seed)
    gammas = _parse_gamma_list(args.gamma_grid) if args.gamma_grid else default.gamma_grid
    qs = _parse_int_list(args.q_grid, "--q-grid") if args.q_grid else default.q_grid
    grid = CVGrid(gammas, qs, folds=args.folds, seed=args.seed)
    report = cv_select(ds, grid, method=args.method.upper(), priors_mode=args.priors)
    report.model.label_names = csv_ds.label_names
    report.model.label_column = csv_ds.label_column
    print(format_error_table(report))
    if args.out:
        io.save_cv_report(args.out, report)
        print(f"saved report to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec(
        scenario_id=args.scenario,
        p=args.p,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        mean_scale=args.mean_scale,
        seed=args.seed,
    )
    train, test, _ = generate_scenario(spec)
    train_path = f"{args.out_prefix}_train.csv"
    test_path = f"{args.out_prefix}_test.csv"
    io.save_dataset_csv(train_path, train)
    io.save_dataset_csv(test_path, test)
    print(f"scenario {args.scenario}: wrote {train_path} ({train.n} rows) "
          f"and {test_path} ({test.n} rows)")
    return 0


def _cmd_bench(args) -> int:
    ids = _parse_int_list(args.scenarios, "--scenarios")
    for i in ids:
        if i not in range(1, 7):
            raise ConfigError(f"--scenarios entries must be 1..6, got {i}")
    methods = tuple(m.strip().upper() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in BENCH_METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {BENCH_METHODS}")
    specs = default_specs(
        ids,
        p=args.p,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        mean_scale=args.mean_scale,
    )
    report = run_benchmark(
        specs,
        methods=methods,
        replicates=args.replicates,
        master_seed=args.seed,
        folds=args.folds,
        workers=args.workers,
    )
    text = report.to_text()
    print(text, end="")
    if args.out_prefix:
        Path(f"{args.out_prefix}.txt").write_text(text)
        Path(f"{args.out_prefix}.csv").write_text(report.to_csv())
        print(f"wrote {args.out_prefix}.txt and {args.out_prefix}.csv")
    return 0


def _cmd_verify(args) -> int:
    results = builtin_battery(seed=args.seed)
    print(format_battery(results))
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "fit": _cmd_fit,
            "predict": _cmd_predict,
            "cv": _cmd_cv,
            "simulate": _cmd_simulate,
            "bench": _cmd_bench,
            "verify": _cmd_verify,
        }[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except SpcaldaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
