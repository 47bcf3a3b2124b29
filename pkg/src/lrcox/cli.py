"""Batch command line: simulate, fit, cv, evaluate, benchmark.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 the solver
hit its penalty cap (the artifact is still written), 5 internal failure.
Every command takes ``--seed`` where randomness is involved and writes
self-describing artifacts; rerunning with the same flags and seed
reproduces the output bytes exactly.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io
from .baselines import (
    ConvexConfig,
    SeparateConfig,
    fit_convex,
    fit_separate,
    project_separate,
)
from .bench import (
    BENCHMARK_METHODS,
    METRIC_COLUMNS,
    MethodSettings,
    run_benchmark,
    tune_convex,
    tune_projected_rank,
    tune_separate,
)
from .coxph import SurvivalDataset
from .crossval import CVConfig, select
from .errors import ConfigError, DataError, NumericalError
from .linalg import Constraints, svd_factorization
from .metrics import (
    breslow_baseline,
    brier_score,
    c_index_censored,
    c_index_uncensored,
    factor_transfer,
    model_error,
    quantile_lower,
)
from .simulate import SimulationSpec, generate_benchmark
from .solver import FitConfig, fit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RHO_CAP = 4
EXIT_INTERNAL = 5

logger = logging.getLogger(__name__)


def _parse_int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.split(",") if tok)
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from None


def _parse_float_list(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok)
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}") from None


def _spec_from_args(args: argparse.Namespace) -> SimulationSpec:
    if args.spec is not None:
        payload = io.read_json(args.spec)
        try:
            payload["n_pattern"] = tuple(payload.get("n_pattern", (100, 200, 300)))
            if payload.get("baseline_locations") is not None:
                payload["baseline_locations"] = tuple(payload["baseline_locations"])
            spec = SimulationSpec(**payload)
        except TypeError as exc:
            raise ConfigError(f"bad spec file: {exc}") from exc
    else:
        spec = SimulationSpec(
            p=args.p,
            n_populations=args.populations,
            n_pattern=_parse_int_list(args.sizes),
            r_star=args.rank,
            s_star=args.sparsity,
            censor_quantile=args.tau,
            corr_decay=args.corr_decay,
            n_validation=args.n_val,
            n_test=args.n_test,
            seed=args.seed,
        )
    spec.validate()
    return spec


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    outdir = Path(args.out)
    train, validation, test, truth = generate_benchmark(spec)

    predictor_names = train.predictor_names
    population_entries = []
    for pop_train, pop_val, pop_test in zip(
        train.populations, validation.populations, test.populations
    ):
        name = pop_train.name
        files = {
            "train": f"{name}_train.csv",
            "validation": f"{name}_validation.csv",
            "test": f"{name}_test.csv",
        }
        io.write_dataset_csv(
            outdir / files["train"],
            pop_train.times,
            pop_train.status,
            pop_train.covariates,
            predictor_names,
        )
        io.write_dataset_csv(
            outdir / files["validation"],
            pop_val.times,
            pop_val.status,
            pop_val.covariates,
            predictor_names,
        )
        io.write_dataset_csv(
            outdir / files["test"],
            pop_test.times,
            pop_test.status,
            pop_test.covariates,
            predictor_names,
        )
        population_entries.append({"name": name, **files})

    io.write_manifest(outdir / "manifest.json", population_entries, predictor_names)
    io.write_coefficients_csv(
        outdir / "truth_B.csv",
        truth.B_star,
        predictor_names,
        [e["name"] for e in population_entries],
    )
    io.write_json(
        outdir / "truth_sigma.json",
        {"type": "ar1", "decay": spec.corr_decay, "p": spec.p},
    )
    spec_payload = asdict(spec)
    spec_payload.pop("cholesky", None)
    io.write_json(outdir / "spec.json", spec_payload)
    print(f"wrote {len(population_entries)} populations to {outdir}")
    return EXIT_OK


def _fit_config_from_args(args: argparse.Namespace, p: int, n_pops: int) -> FitConfig:
    if args.rank is None or args.sparsity is None:
        raise ConfigError("--rank and --sparsity are required for method lrcox")
    config = FitConfig(
        mu=args.mu,
        constraints=Constraints(max_rank=args.rank, max_rows=args.sparsity),
        rho0=args.rho0,
        incr_factor=args.incr,
        k_max=args.kmax,
        feas_tol=args.eps,
        max_rho_steps=args.max_rho_steps,
        tie_mode=args.tie_mode,
    )
    config.validate(p, n_pops)
    return config


def _config_echo(args: argparse.Namespace, keys: list[str]) -> dict:
    return {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}


def _write_fit_artifact(
    outdir: Path,
    method: str,
    B: np.ndarray,
    data: SurvivalDataset,
    rank_for_factors: int,
    config_echo: dict,
    termination: str,
    extra: dict,
) -> None:
    population_names = list(data.population_names())
    io.write_coefficients_csv(
        outdir / "coefficients.csv", B, data.predictor_names, population_names
    )
    fact = svd_factorization(B, rank_for_factors)
    files = io.write_factorization_csvs(
        outdir, fact, data.predictor_names, population_names
    )
    files["coefficients"] = "coefficients.csv"
    support = [
        data.predictor_names[i]
        for i in np.flatnonzero(np.linalg.norm(B, axis=1) > 0.0)
    ]
    io.write_json(
        outdir / "fit.json",
        {
            "method": method,
            "config": config_echo,
            "termination": termination,
            "support": support,
            "files": files,
            **extra,
        },
    )


def cmd_fit(args: argparse.Namespace) -> int:
    data = io.load_dataset(args.manifest, split="train")
    outdir = Path(args.out)
    method = args.method
    echo_keys = [
        "method",
        "mu",
        "rank",
        "sparsity",
        "rho0",
        "incr",
        "kmax",
        "eps",
        "max_rho_steps",
        "tie_mode",
        "lam",
        "alpha",
        "lambda_nuc",
        "gamma_row",
        "max_iters",
        "rel_tol",
        "tune_validation",
    ]
    echo = _config_echo(args, echo_keys)
    exit_code = EXIT_OK

    if method == "lrcox":
        config = _fit_config_from_args(args, data.p, data.n_populations)
        result = fit(data, config)
        if result.termination == "rho-cap-hit":
            exit_code = EXIT_RHO_CAP
        last = result.trace[-1] if result.trace else None
        extra = {
            "selected": {"sparsity": args.sparsity, "rank": args.rank},
            "final_rho": result.final_rho,
            "trace_summary": {
                "rho_steps": len({row.rho for row in result.trace}),
                "inner_iterations": len(result.trace),
                "final_objective": last.objective if last else None,
                "final_dist2_rank": result.final_distances[0],
                "final_dist2_rows": result.final_distances[1],
                "projection_shift": result.projection_shift,
            },
        }
        _write_fit_artifact(
            outdir,
            method,
            result.estimate,
            data,
            args.rank,
            echo,
            result.termination,
            extra,
        )
        print(f"{method}: termination={result.termination} support={len(result.support)}")
        return exit_code

    if method == "convex":
        if args.tune_validation:
            validation = io.load_dataset(args.manifest, split="validation")
            B, (lam, gam) = tune_convex(
                data, validation, args.tie_mode, args.max_iters, args.rel_tol
            )
            extra = {"selected": {"lambda_nuc": lam, "gamma_row": gam}}
            termination = "tuned"
        else:
            if args.lambda_nuc is None or args.gamma_row is None:
                raise ConfigError(
                    "--lambda-nuc and --gamma-row are required for method convex "
                    "(or pass --tune-validation)"
                )
            config = ConvexConfig(
                lambda_nuc=args.lambda_nuc,
                gamma_row=args.gamma_row,
                max_iters=args.max_iters,
                rel_tol=args.rel_tol,
            )
            result = fit_convex(data, config, args.tie_mode)
            B = result.estimate
            termination = result.termination
            extra = {"iterations": result.iterations}
        _write_fit_artifact(
            outdir, method, B, data, min(data.p, data.n_populations), echo, termination, extra
        )
        print(f"{method}: termination={termination}")
        return EXIT_OK

    penalty = {
        "sep-ridge": "ridge",
        "proj-sep-ridge": "ridge",
        "sep-lasso": "lasso",
        "proj-sep-lasso": "lasso",
        "sep-enet": "elastic-net",
    }[method]
    extra = {}
    if args.tune_validation:
        validation = io.load_dataset(args.manifest, split="validation")
        B, lambdas = tune_separate(
            data,
            validation,
            penalty,
            alpha=args.alpha,
            tie_mode=args.tie_mode,
            max_iters=args.max_iters,
            rel_tol=args.rel_tol,
        )
        extra["selected"] = {"lambdas": lambdas}
    else:
        if args.lam is None:
            raise ConfigError(
                f"--lambda is required for method {method} (or pass --tune-validation)"
            )
        lams = _parse_float_list(args.lam)
        lambdas = list(lams) if len(lams) > 1 else float(lams[0])
        config = SeparateConfig(
            penalty=penalty,
            lambdas=lambdas,
            alpha=args.alpha,
            max_iters=args.max_iters,
            rel_tol=args.rel_tol,
        )
        B = fit_separate(data, config, args.tie_mode)
    rank_for_factors = min(data.p, data.n_populations)
    if method.startswith("proj-"):
        if args.rank is not None:
            B = project_separate(B, args.rank)
            extra["projected_rank"] = args.rank
            rank_for_factors = args.rank
        elif args.tune_validation:
            B, chosen_rank = tune_projected_rank(B, validation)
            extra["projected_rank"] = chosen_rank
            rank_for_factors = chosen_rank
        else:
            raise ConfigError(f"--rank is required for method {method}")
    _write_fit_artifact(outdir, method, B, data, rank_for_factors, echo, "complete", extra)
    print(f"{method}: complete")
    return EXIT_OK


def cmd_cv(args: argparse.Namespace) -> int:
    data = io.load_dataset(args.manifest, split="train")
    fit_config = FitConfig(
        mu=args.mu,
        constraints=Constraints(max_rank=1, max_rows=1),
        rho0=args.rho0,
        incr_factor=args.incr,
        k_max=args.kmax,
        feas_tol=args.eps,
        max_rho_steps=args.max_rho_steps,
        tie_mode=args.tie_mode,
    )
    cv_config = CVConfig(
        folds=args.folds,
        s_grid=_parse_int_list(args.s_grid),
        r_grid=_parse_int_list(args.r_grid),
        weights=args.weights,
        seed=args.seed,
    )
    result = select(data, cv_config, fit_config)
    outdir = Path(args.out)
    s_hat, r_hat = result.selected
    io.write_json(
        outdir / "cv.json",
        {
            "config": {
                "mu": args.mu,
                "rho0": args.rho0,
                "incr": args.incr,
                "kmax": args.kmax,
                "eps": args.eps,
                "tie_mode": args.tie_mode,
                "folds": args.folds,
                "seed": args.seed,
                "weights": args.weights,
            },
            "s_grid": list(result.s_grid),
            "r_grid": list(result.r_grid),
            "scores": [
                [None if not np.isfinite(v) else v for v in row]
                for row in result.scores
            ],
            "selected": {"sparsity": s_hat, "rank": r_hat},
            "failed_cells": [
                {"sparsity": s, "rank": r, "error": msg}
                for s, r, msg in result.failed_cells
            ],
            "fold_assignments": {
                pop.name: [int(k) for k in labels]
                for pop, labels in zip(data.populations, result.fold_assignments)
            },
        },
    )

    refit_config = replace(
        fit_config, constraints=Constraints(max_rank=r_hat, max_rows=s_hat)
    )
    refit = fit(data, refit_config)
    exit_code = EXIT_RHO_CAP if refit.termination == "rho-cap-hit" else EXIT_OK
    last = refit.trace[-1] if refit.trace else None
    extra = {
        "selected": {"sparsity": s_hat, "rank": r_hat},
        "final_rho": refit.final_rho,
        "trace_summary": {
            "rho_steps": len({row.rho for row in refit.trace}),
            "inner_iterations": len(refit.trace),
            "final_objective": last.objective if last else None,
            "final_dist2_rank": refit.final_distances[0],
            "final_dist2_rows": refit.final_distances[1],
            "projection_shift": refit.projection_shift,
        },
    }
    echo = {
        "method": "lrcox",
        "mu": args.mu,
        "rho0": args.rho0,
        "incr": args.incr,
        "kmax": args.kmax,
        "eps": args.eps,
        "tie_mode": args.tie_mode,
    }
    _write_fit_artifact(
        outdir, "lrcox", refit.estimate, data, r_hat, echo, refit.termination, extra
    )
    print(f"selected sparsity={s_hat} rank={r_hat} ({refit.termination})")
    return exit_code


def _check_predictors(expected: list[str], got: list[str], where: str) -> None:
    if list(expected) != list(got):
        diffs = [
            f"position {i}: expected {a!r}, got {b!r}"
            for i, (a, b) in enumerate(zip(expected, got))
            if a != b
        ]
        if len(expected) != len(got):
            diffs.append(f"expected {len(expected)} predictors, got {len(got)}")
        raise DataError(f"predictor mismatch in {where}: " + "; ".join(diffs))


def cmd_evaluate(args: argparse.Namespace) -> int:
    test = io.load_dataset(args.manifest, split="test")
    outdir = Path(args.out)

    if args.transfer_factors is not None:
        return _evaluate_transfer(args, test, outdir)

    artifact = io.read_json(args.artifact)
    artifact_dir = Path(args.artifact).parent
    coeff_file = artifact.get("files", {}).get("coefficients", "coefficients.csv")
    B, predictor_names, population_names = io.load_coefficients_csv(
        artifact_dir / coeff_file
    )
    _check_predictors(list(test.predictor_names), predictor_names, "fit artifact")
    if population_names != list(test.population_names()):
        raise DataError(
            "population mismatch between artifact and manifest: "
            f"{population_names} vs {list(test.population_names())}"
        )
    method = artifact.get("method", "unknown")

    metrics: dict[str, object] = {}
    per_population: dict[str, dict[str, float | None]] = {}
    if args.truth_b is not None:
        truth_B, truth_names, _ = io.load_coefficients_csv(args.truth_b)
        _check_predictors(list(test.predictor_names), truth_names, "truth file")
        sigma_desc = io.read_json(args.truth_sigma) if args.truth_sigma else None
        if sigma_desc is None:
            raise ConfigError("--truth-sigma is required together with --truth-b")
        if sigma_desc.get("type") != "ar1":
            raise DataError(f"unsupported Sigma descriptor {sigma_desc.get('type')!r}")
        idx = np.arange(int(sigma_desc["p"]))
        Sigma = float(sigma_desc["decay"]) ** np.abs(idx[:, None] - idx[None, :])
        metrics["model_error"] = model_error(B, truth_B, Sigma)

    uncensored = all(int(pop.status.sum()) == pop.n for pop in test.populations)
    train = io.load_dataset(args.manifest, split="train")
    c_strict = []
    c_harrell = []
    briers = {0.25: [], 0.5: [], 0.75: []}
    for j, pop_test in enumerate(test.populations):
        eta = pop_test.covariates @ B[:, j]
        row: dict[str, float | None] = {}
        harrell = c_index_censored(pop_test.times, pop_test.status, eta)
        row["c_index_censored"] = harrell
        if harrell is not None:
            c_harrell.append(harrell)
        if uncensored:
            strict = c_index_uncensored(pop_test.times, eta)
            c_strict.append(strict)
            row["c_index"] = strict
            baseline = breslow_baseline(train.populations[j], B[:, j])
            for q in briers:
                t_q = quantile_lower(pop_test.times, q)
                briers[q].append(brier_score(pop_test.times, eta, baseline, t_q))
            row["brier_q50"] = briers[0.5][-1]
        per_population[pop_test.name] = row
    if c_harrell:
        metrics["c_index_censored"] = float(np.mean(c_harrell))
    if uncensored:
        metrics["c_index"] = float(np.mean(c_strict))
        metrics["brier"] = {
            "q25": float(np.mean(briers[0.25])),
            "q50": float(np.mean(briers[0.5])),
            "q75": float(np.mean(briers[0.75])),
        }

    io.write_json(
        outdir / "report.json",
        {"method": method, "metrics": metrics, "per_population": per_population},
    )
    lines = ["method,metric,population,value"]
    for name, row in per_population.items():
        for metric, value in row.items():
            if value is None:
                continue
            lines.append(f"{method},{metric},{name},{io.format_float(value)}")
    for metric, value in metrics.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                lines.append(f"{method},{metric}_{sub},all,{io.format_float(v)}")
        else:
            lines.append(f"{method},{metric},all,{io.format_float(value)}")
    io.atomic_write(outdir / "plotdata.csv", "\n".join(lines) + "\n")
    print(f"evaluated {method} on {test.n_populations} populations")
    return EXIT_OK


def _evaluate_transfer(
    args: argparse.Namespace, test: SurvivalDataset, outdir: Path
) -> int:
    U, u_names = io.load_factor_weights_csv(args.transfer_factors)
    train = io.load_dataset(args.manifest, split="train")
    _check_predictors(list(train.predictor_names), u_names, "factor weights")
    per_population: dict[str, dict[str, float | None]] = {}
    cs = []
    for pop_train, pop_test in zip(train.populations, test.populations):
        model = factor_transfer(
            U,
            pop_train.times,
            pop_train.status,
            pop_train.covariates,
            feature_names=list(train.predictor_names),
            factor_feature_names=u_names,
        )
        eta = model.predict(pop_test.covariates)
        c = c_index_censored(pop_test.times, pop_test.status, eta)
        per_population[pop_test.name] = {"c_index_censored": c}
        if c is not None:
            cs.append(c)
    metrics = {"c_index_censored": float(np.mean(cs)) if cs else None}
    io.write_json(
        outdir / "report.json",
        {
            "method": "factor-transfer",
            "factors": int(U.shape[1]),
            "metrics": metrics,
            "per_population": per_population,
        },
    )
    lines = ["method,metric,population,value"]
    for name, row in per_population.items():
        for metric, value in row.items():
            if value is not None:
                lines.append(
                    f"factor-transfer,{metric},{name},{io.format_float(value)}"
                )
    if metrics["c_index_censored"] is not None:
        lines.append(
            "factor-transfer,c_index_censored,all,"
            + io.format_float(metrics["c_index_censored"])
        )
    io.atomic_write(outdir / "plotdata.csv", "\n".join(lines) + "\n")
    print(f"factor transfer evaluated with r={U.shape[1]} factors")
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for method in methods:
        if method not in BENCHMARK_METHODS:
            raise ConfigError(f"--methods entry {method!r} not in {BENCHMARK_METHODS}")
    settings = MethodSettings(
        mu=args.mu,
        rho0=args.rho0,
        tie_mode=args.tie_mode,
        lrcox_rank=args.lrcox_rank,
        lrcox_sparsity=args.lrcox_sparsity,
        cv_s_grid=_parse_int_list(args.cv_s_grid) if args.cv_s_grid else None,
        cv_r_grid=_parse_int_list(args.cv_r_grid) if args.cv_r_grid else None,
        cv_folds=args.folds,
    )
    rows, summaries, failures = run_benchmark(spec, methods, args.replications, settings)
    outdir = Path(args.out)
    header = ["replication", "method", "n_reps", *METRIC_COLUMNS]
    lines = [",".join(header)]
    for row in rows + summaries:
        cells = []
        for col in header:
            value = row.get(col, "")
            if isinstance(value, float):
                value = io.format_float(value)
            cells.append(str(value))
        lines.append(",".join(cells))
    io.atomic_write(outdir / "benchmark.csv", "\n".join(lines) + "\n")
    io.write_json(
        outdir / "benchmark_meta.json",
        {
            "methods": methods,
            "replications": args.replications,
            "failed_replications": failures,
            "seed": spec.seed,
        },
    )
    print(
        f"benchmark complete: {len(rows)} rows, {failures} failed replications"
    )
    return EXIT_OK


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", default=None, help="spec JSON; overrides the flags")
    parser.add_argument("--p", type=int, default=250)
    parser.add_argument("--populations", type=int, default=12)
    parser.add_argument("--sizes", default="100,200,300", help="repeating size pattern")
    parser.add_argument("--rank", type=int, default=3, help="true rank")
    parser.add_argument("--sparsity", type=int, default=20, help="true nonzero rows")
    parser.add_argument("--tau", type=float, default=0.35, help="censoring quantile")
    parser.add_argument("--corr-decay", type=float, default=0.7, dest="corr_decay")
    parser.add_argument("--n-val", type=int, default=150, dest="n_val")
    parser.add_argument("--n-test", type=int, default=1000, dest="n_test")
    parser.add_argument("--seed", type=int, default=0)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mu", type=float, default=0.1)
    parser.add_argument("--rho0", type=float, default=5.0)
    parser.add_argument("--incr", type=float, default=1.2)
    parser.add_argument("--kmax", type=int, default=10)
    parser.add_argument("--eps", type=float, default=1e-6)
    parser.add_argument("--max-rho-steps", type=int, default=200, dest="max_rho_steps")
    parser.add_argument(
        "--tie-mode",
        choices=("breslow", "tie-weighted"),
        default="breslow",
        dest="tie_mode",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrcox",
        description=(
            "Joint survival modeling across populations with shared low-rank, "
            "row-sparse coefficients"
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic datasets")
    _add_sim_flags(p_sim)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit one estimator")
    p_fit.add_argument("--manifest", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument(
        "--method", choices=BENCHMARK_METHODS, default="lrcox"
    )
    p_fit.add_argument("--rank", type=int, default=None)
    p_fit.add_argument("--sparsity", type=int, default=None)
    _add_solver_flags(p_fit)
    p_fit.add_argument("--lambda", dest="lam", default=None, help="penalty weight(s)")
    p_fit.add_argument("--alpha", type=float, default=0.5)
    p_fit.add_argument("--lambda-nuc", type=float, default=None, dest="lambda_nuc")
    p_fit.add_argument("--gamma-row", type=float, default=None, dest="gamma_row")
    p_fit.add_argument("--max-iters", type=int, default=1000, dest="max_iters")
    p_fit.add_argument("--rel-tol", type=float, default=1e-7, dest="rel_tol")
    p_fit.add_argument(
        "--tune-validation",
        action="store_true",
        dest="tune_validation",
        help="tune penalty weights on the manifest's validation split",
    )
    p_fit.set_defaults(func=cmd_fit)

    p_cv = sub.add_parser("cv", help="cross-validate the (sparsity, rank) grid")
    p_cv.add_argument("--manifest", required=True)
    p_cv.add_argument("--out", required=True)
    p_cv.add_argument("--s-grid", required=True, dest="s_grid")
    p_cv.add_argument("--r-grid", required=True, dest="r_grid")
    p_cv.add_argument("--folds", type=int, default=5)
    p_cv.add_argument("--seed", type=int, default=0)
    p_cv.add_argument(
        "--weights", choices=("uniform", "inverse-size"), default="inverse-size"
    )
    _add_solver_flags(p_cv)
    p_cv.set_defaults(func=cmd_cv)

    p_eval = sub.add_parser("evaluate", help="score a fit artifact on test data")
    p_eval.add_argument("--artifact", default=None, help="fit.json path")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--truth-b", default=None, dest="truth_b")
    p_eval.add_argument("--truth-sigma", default=None, dest="truth_sigma")
    p_eval.add_argument(
        "--transfer-factors",
        default=None,
        dest="transfer_factors",
        help="factor-weight CSV; fit on train factors, score on test",
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser("benchmark", help="simulate/fit/evaluate loop")
    _add_sim_flags(p_bench)
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--replications", type=int, default=20)
    p_bench.add_argument("--methods", default="lrcox,sep-ridge")
    p_bench.add_argument("--mu", type=float, default=0.1)
    p_bench.add_argument("--rho0", type=float, default=5.0)
    p_bench.add_argument(
        "--tie-mode",
        choices=("breslow", "tie-weighted"),
        default="breslow",
        dest="tie_mode",
    )
    p_bench.add_argument("--lrcox-rank", type=int, default=None, dest="lrcox_rank")
    p_bench.add_argument(
        "--lrcox-sparsity", type=int, default=None, dest="lrcox_sparsity"
    )
    p_bench.add_argument("--cv-s-grid", default=None, dest="cv_s_grid")
    p_bench.add_argument("--cv-r-grid", default=None, dest="cv_r_grid")
    p_bench.add_argument("--folds", type=int, default=5)
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
