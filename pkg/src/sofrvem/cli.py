"""Command-line front end.

Subcommands::

    sofrvem fit CONFIG --out DIR [--partial]
    sofrvem simulate --study {1,2,3} --n N --sigma2 S2 --S S --seed SEED --out DIR
    sofrvem replicate --study {1,2,3} --n N [N ...] --sigma2 S2 [S2 ...] --S S --seed SEED --out DIR
    sofrvem select-basis CONFIG --K-list K [K ...] --out DIR

Exit status: 0 on success (including a fit that hit ``max_iter``), 2 for
malformed input, 3 for numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .errors import InputError, NumericalError

logger = logging.getLogger("sofrvem")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def cmd_fit(args):
    from .pipeline import fit_dataset

    config = io.load_config(args.config)
    if args.partial:
        config.partial = True
    if args.K is not None:
        config.K_list = [args.K]
    dataset = io.load_dataset(config)
    fit = fit_dataset(dataset, config.fit_config())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "fit.json", io.fit_to_dict(fit, config.K))
    io.write_curves(out / "curves.csv", fit)
    (out / "summary.txt").write_text(io.summary_text(fit, config.K), encoding="utf-8")
    if not fit.converged:
        logger.warning("ELBO did not converge within max_iter=%d", config.prior.max_iter)
    print(io.summary_text(fit, config.K), end="")
    return EXIT_OK


def export_replicate(directory, dataset, truth, scenario, fit_config):
    """Write one simulated dataset in the ``fit`` input format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    io.write_response(directory / "y.csv", dataset.y)
    files = []
    for j, cov in enumerate(dataset.covariates, start=1):
        name = f"X{j}.csv"
        io.write_functional(directory / name, cov)
        files.append(name)
    config = {
        "response": "y.csv",
        "covariates": files,
        "K": fit_config.K,
        "priors": {
            "delta1": fit_config.prior.delta1,
            "delta2": fit_config.prior.delta2,
            "lambda2_init": float(fit_config.prior.lambda2_init),
            "sigma2_init": float(scenario.sigma2),
        },
        "tol": fit_config.prior.tol,
        "max_iter": fit_config.prior.max_iter,
        "n_restarts": fit_config.n_restarts,
        "seed": fit_config.seed,
        "partial": fit_config.partial,
    }
    if dataset.q:
        io.write_scalars(directory / "scalars.csv", dataset.scalar_names, dataset.scalar_covariates)
        config["scalar_covariates"] = "scalars.csv"
    io.write_json(directory / "config.json", config)
    io.write_json(directory / "truth.json", truth.to_dict())


def cmd_simulate(args):
    from .simulate import ScenarioSpec, default_fit_config

    scenario = ScenarioSpec(args.study, args.n, args.sigma2, S=args.S, seed=args.seed,
                            truth_seed=args.truth_seed, custom=args.custom)
    out = Path(args.out)
    for s in range(scenario.S):
        dataset, truth = scenario.generate(s)
        cfg = default_fit_config(scenario, seed=scenario.seed + s)
        export_replicate(out / f"rep_{s:03d}", dataset, truth, scenario, cfg)
    print(f"wrote {scenario.S} replicate(s) to {out}")
    return EXIT_OK


def _table_value(x, digits):
    return f"{x:.{digits}f}"


def replication_tables(study, reports):
    """CSV text of the estimation and selection tables for one study.

    Returns ``{filename: text}``.  Studies 1 and 3 place scenarios in columns;
    study 2 uses one row per (n, sigma2, metric) like its published layout.
    """
    est_name = {1: "table1_sim1_estimation.csv", 2: "table3_sim2_estimation.csv",
                3: "table5_sim3_estimation.csv"}[study]
    sel_name = {1: "table2_sim1_selection.csv", 2: "table4_sim2_selection.csv",
                3: "table6_sim3_selection.csv"}[study]
    p = len(reports[0].emise)
    if study == 2:
        est = ["n,sigma2,metric,VEM"]
        sel = ["n,sigma2,covariate,VEM"]
        for r in reports:
            n, s2 = r.scenario.n, r.scenario.sigma2
            est.append(f"{n},{s2},MSE,{_table_value(r.mean_mse, 4)}")
            for j, e in enumerate(r.emise, start=1):
                est.append(f"{n},{s2},EMISE_{j},{_table_value(e, 4)}")
            for j, v in enumerate(r.selection_proportions, start=1):
                sel.append(f"{n},{s2},{j},{_table_value(v, 2)}")
        return {est_name: "\n".join(est) + "\n", sel_name: "\n".join(sel) + "\n"}
    header = "metric," + ",".join(f"sigma2={r.scenario.sigma2};n={r.scenario.n}" for r in reports)
    est = [header, "MSE," + ",".join(_table_value(r.mean_mse, 4) for r in reports)]
    for j in range(p):
        est.append(f"EMISE_{j + 1}," + ",".join(_table_value(r.emise[j], 4) for r in reports))
    sel = ["covariate" + header[len("metric"):]]
    label = "Functional Covariate" if study == 3 else "Covariate"
    for j in range(p):
        sel.append(f"{label} {j + 1}," + ",".join(_table_value(r.selection_proportions[j], 2) for r in reports))
    if study == 3:
        for l in range(len(reports[0].scalar_selection_proportions)):
            sel.append(f"Scalar Covariate {l + 1}," + ",".join(
                _table_value(r.scalar_selection_proportions[l], 2) for r in reports))
    return {est_name: "\n".join(est) + "\n", sel_name: "\n".join(sel) + "\n"}


def cmd_replicate(args):
    from .simulate import ScenarioSpec, replicate

    reports = []
    for s2 in args.sigma2:
        for n in args.n:
            scenario = ScenarioSpec(args.study, n, s2, S=args.S, seed=args.seed,
                                    truth_seed=args.truth_seed, custom=args.custom)
            logger.info("study %d, n=%d, sigma2=%g: %d replicates", args.study, n, s2, args.S)
            reports.append(replicate(scenario, workers=args.workers))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in replication_tables(args.study, reports).items():
        (out / name).write_text(text, encoding="utf-8")
    io.write_json(out / "summary.json", {"scenarios": [r.summary() for r in reports]})
    for r in reports:
        sm = r.summary()
        print(f"n={sm['n']} sigma2={sm['sigma2']}: MSE={sm['mean_mse']:.4f} "
              f"selection={np.round(sm['selection'], 2).tolist()}")
    return EXIT_OK


def cmd_select_basis(args):
    from .data import build_design
    from .metrics import elbow_select, gcv
    from .pipeline import fit_dataset

    config = io.load_config(args.config)
    K_list = args.K_list if args.K_list else config.K_list
    dataset = io.load_dataset(config)
    values = []
    for K in K_list:
        fit = fit_dataset(dataset, replace(config.fit_config(K), bands=None))
        std = fit.record.apply(dataset)
        design = build_design(std, fit.bases)
        Xs = std.scalar_matrix() if std.q else None
        values.append(gcv(fit, dataset.y, design.W, Xs))
    chosen = elbow_select(K_list, values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "gcv.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("K,gcv\n")
        for K, v in zip(K_list, values):
            fh.write(f"{K},{io.fmt(v)}\n")
    io.write_json(out / "selected_K.json", {"K": chosen, "K_list": list(K_list),
                                            "gcv": [float(v) for v in values]})
    print(f"selected K = {chosen}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sofrvem",
        description="Variational EM variable selection for scalar-on-function regression.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model described by a JSON config")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--partial", action="store_true", help="fit the partially functional model")
    p.add_argument("--K", type=int, default=None, help="override the number of basis functions")
    p.set_defaults(func=cmd_fit)

    def scenario_args(p, many):
        p.add_argument("--study", type=int, required=True, choices=(1, 2, 3))
        nargs = "+" if many else None
        p.add_argument("--n", type=int, nargs=nargs, required=True)
        p.add_argument("--sigma2", type=float, nargs=nargs, required=True)
        p.add_argument("--S", type=int, default=1, help="replicates per scenario")
        p.add_argument("--seed", type=int, default=0, help="seed of replicate 0")
        p.add_argument("--truth-seed", type=int, default=0, help="seed of the shared true curves")
        p.add_argument("--custom", action="store_true", help="allow n/sigma2 outside the published grid")
        p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="write simulated datasets in the fit input format")
    scenario_args(p, many=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replicate", help="run a replication study and write result tables")
    scenario_args(p, many=True)
    p.add_argument("--workers", type=int, default=1, help="process-pool size")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("select-basis", help="choose K by the elbow of the GCV curve")
    p.add_argument("config")
    p.add_argument("--K-list", type=int, nargs="+", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_basis)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if getattr(exc, "terms", None):
            for k, v in exc.terms.items():
                print(f"  {k}: {v!r}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
