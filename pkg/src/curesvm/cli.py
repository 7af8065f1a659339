"""Command-line interface.

Subcommands:

* ``simulate``  -- write a scenario dataset as CSV
* ``fit``       -- fit the mixture cure model to a CSV file (JSONL output)
* ``bootstrap`` -- fit plus bootstrap standard errors and p-values
* ``reproduce`` -- desk-scale Monte Carlo comparison tables

Every output file embeds the resolved configuration and seed, either as a
leading ``#`` comment (CSV) or as a ``config`` record (JSONL), so a run
can be reproduced exactly from its own output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .data import ColumnSchema, load_dataset, standardize_covariates, write_dataset
from .em import EMConfig, bootstrap_se, fit_em
from .errors import CureSvmError
from .latency import LatencyParams
from .metrics import monte_carlo_study
from .simulate import ScenarioSpec, generate_dataset
from .svm import DEFAULT_C_GRID, DEFAULT_SIGMA2_GRID, HyperParams

REPRODUCE_MAX_ITER = 50   # desk-scale default; studies are iteration-stable


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v)


def _add_em_flags(parser, max_iter_default=200):
    parser.add_argument("--incidence", choices=("svm", "logistic"), default="svm")
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument("--max-iter", type=int, default=max_iter_default)
    parser.add_argument("--imputations", type=int, default=5)
    parser.add_argument("--grid-c", type=_float_list, default=DEFAULT_C_GRID,
                        help="comma-separated C grid")
    parser.add_argument("--grid-sigma2", type=_float_list, default=DEFAULT_SIGMA2_GRID,
                        help="comma-separated sigma^2 grid")
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)


def _em_config(args, bootstrap_b=300):
    grid = tuple(
        HyperParams(C=c, sigma2=s) for c in args.grid_c for s in args.grid_sigma2
    )
    return EMConfig(
        incidence=args.incidence,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        n_impute=args.imputations,
        hyper_grid=grid,
        folds=args.folds,
        bootstrap_b=bootstrap_b,
        seed=args.seed,
    )


def _config_json(args, extra=None):
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if extra:
        payload.update(extra)
    return json.dumps(payload, sort_keys=True)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="curesvm",
        description="SVM-based mixture cure rate models for interval-censored data",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_sim = sub.add_parser("simulate", help="generate a scenario dataset")
    p_sim.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--alpha", type=float, default=0.5)
    p_sim.add_argument("--gamma", type=_float_list, default=(1.0, 0.5))
    p_sim.add_argument("--censor-upper", type=float, default=20.0)
    p_sim.add_argument("--output", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit the mixture cure model to a CSV file")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--schema", type=ColumnSchema.parse, default=None,
                       help="column mapping, e.g. L=lo,R=hi,delta=d,x=a+b,z=a+b")
    _add_em_flags(p_fit)
    p_fit.add_argument("--output", required=True)
    p_fit.set_defaults(func=_cmd_fit)

    p_boot = sub.add_parser("bootstrap", help="fit plus bootstrap standard errors")
    p_boot.add_argument("--input", required=True)
    p_boot.add_argument("--schema", type=ColumnSchema.parse, default=None)
    _add_em_flags(p_boot)
    p_boot.add_argument("--bootstrap", type=int, default=300, metavar="B")
    p_boot.add_argument("--jobs", type=int, default=os.cpu_count())
    p_boot.add_argument("--output", required=True)
    p_boot.set_defaults(func=_cmd_bootstrap)

    p_rep = sub.add_parser("reproduce", help="desk-scale comparison tables")
    p_rep.add_argument("table", choices=("table1", "table2", "table3"))
    p_rep.add_argument("--runs", type=int, default=100)
    p_rep.add_argument("--n", type=int, default=None,
                       help="sample size per run (default 300; 400 for table3)")
    _add_em_flags(p_rep, max_iter_default=REPRODUCE_MAX_ITER)
    p_rep.add_argument("--jobs", type=int, default=os.cpu_count())
    p_rep.add_argument("--output", required=True, help="output directory")
    p_rep.set_defaults(func=_cmd_reproduce)
    return parser


def _cmd_simulate(args):
    spec = ScenarioSpec(
        id=args.scenario,
        n=args.n,
        latency_truth=LatencyParams(alpha=args.alpha, gamma=np.asarray(args.gamma)),
        censor_upper=args.censor_upper,
    )
    dataset = generate_dataset(spec, np.random.default_rng(args.seed))
    write_dataset(dataset, args.output, header_comments=[f"config: {_config_json(args)}"])
    return 0


def _fit_records(dataset, result):
    yield {"record": "estimates",
           "alpha": result.latency.alpha,
           "gamma": [float(g) for g in result.latency.gamma],
           "converged": result.converged,
           "iterations": result.iterations,
           "mean_pi": float(np.mean(result.pi_hat))}
    if result.hyperparams is not None:
        yield {"record": "hyperparams",
               "C": result.hyperparams.C, "sigma2": result.hyperparams.sigma2}
    for entry in result.trace:
        yield {"record": "trace", "iteration": entry.iteration,
               "mean_pi": entry.mean_pi, "alpha": entry.alpha,
               "gamma": [float(g) for g in entry.gamma],
               "criterion": entry.criterion}
    for i in range(dataset.n):
        yield {"record": "pi", "index": i,
               "pi_hat": float(result.pi_hat[i]),
               "weight": float(result.weights[i])}
    yield {"record": "diagnostics", **result.diagnostics}


def _cmd_fit(args):
    dataset = standardize_covariates(load_dataset(args.input, schema=args.schema))
    result = fit_em(dataset, _em_config(args))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record": "config",
                             "config": json.loads(_config_json(args))}) + "\n")
        for record in _fit_records(dataset, result):
            fh.write(json.dumps(record) + "\n")
    return 0


def _two_sided_p(estimate, se):
    if se <= 0:
        return 0.0 if estimate != 0 else 1.0
    return math.erfc(abs(estimate) / (se * math.sqrt(2.0)))


def _cmd_bootstrap(args):
    dataset = standardize_covariates(load_dataset(args.input, schema=args.schema))
    config = _em_config(args, bootstrap_b=args.bootstrap)
    result = fit_em(dataset, config)
    boot = bootstrap_se(dataset, config, jobs=args.jobs)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record": "config",
                             "config": json.loads(_config_json(args))}) + "\n")
        for record in _fit_records(dataset, result):
            fh.write(json.dumps(record) + "\n")
        fh.write(json.dumps({
            "record": "se",
            "alpha_se": boot.alpha_se,
            "gamma_se": [float(s) for s in boot.gamma_se],
            "mean_pi_se": boot.mean_pi_se,
            "replicates": int(boot.replicates.shape[0]),
            "failed": boot.n_failed,
            "nonconverged": boot.n_nonconverged,
        }) + "\n")
        pvals = [
            _two_sided_p(float(g), float(s))
            for g, s in zip(result.latency.gamma, boot.gamma_se)
        ]
        fh.write(json.dumps({
            "record": "pvalues",
            "gamma": pvals,
        }) + "\n")
    return 0


def _write_table(path, config_line, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config: {config_line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _cmd_reproduce(args):
    os.makedirs(args.output, exist_ok=True)
    n = args.n if args.n is not None else (400 if args.table == "table3" else 300)
    config = _em_config(args)
    config_line = _config_json(args, extra={"resolved_n": n})
    results = {}
    for scenario_id in (1, 2, 3):
        spec = ScenarioSpec(id=scenario_id, n=n)
        results[scenario_id] = monte_carlo_study(spec, config, args.runs, jobs=args.jobs)

    fmt = "{:.6f}".format
    if args.table == "table1":
        rows = []
        for sid, summaries in results.items():
            for model in ("svm", "logistic"):
                s = summaries[model]
                rows.append([sid, n, model, fmt(s.bias_pi), fmt(s.mse_pi),
                             fmt(s.bias_su), fmt(s.mse_su)])
        _write_table(
            os.path.join(args.output, "table1.csv"), config_line,
            ["scenario", "n", "model", "bias_pi", "mse_pi", "bias_su", "mse_su"], rows,
        )
    elif args.table == "table2":
        rows = []
        for sid, summaries in results.items():
            for model in ("svm", "logistic"):
                for name, stats in summaries[model].params.items():
                    rows.append([sid, n, model, name, fmt(stats["bias"]),
                                 fmt(stats["sd"]), fmt(stats["mse"])])
        _write_table(
            os.path.join(args.output, "table2.csv"), config_line,
            ["scenario", "n", "model", "parameter", "bias", "sd", "mse"], rows,
        )
    else:
        rows = []
        for sid, summaries in results.items():
            for model in ("svm", "logistic"):
                s = summaries[model]
                rows.append([sid, n, model, fmt(s.auc)])
                roc_path = os.path.join(args.output, f"roc_scenario{sid}_{model}.csv")
                _write_table(
                    roc_path, config_line, ["fpr", "tpr"],
                    [[fmt(fpr), fmt(tpr)] for fpr, tpr in s.roc],
                )
        _write_table(
            os.path.join(args.output, "table3.csv"), config_line,
            ["scenario", "n", "model", "auc"], rows,
        )
    return 0


def run_cli(argv):
    """Parse arguments and execute; returns the process exit status."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CureSvmError as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}
        ) + "\n")
        return 2


def main():
    raise SystemExit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
