"""Command-line interface.

Verbs: simulate, extract, filter, evaluate, sweep, and pipeline
(simulate -> filter -> evaluate). A JSON config file may preset any flag of
the chosen verb; explicit flags take precedence. The only environment
variable honored is CIRCAPHASE_SEED, which overrides the default seed.

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 configuration error.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import io
from .errors import (
    ConfigurationError,
    InputDomainError,
    NumericalError,
    ValidationError,
)
from .hrmcmc import MCMCConfig
from .lskf import ProcessNoise
from .metrics import ncr as ncr_metric
from .metrics import rmse as rmse_metric
from .phasemap import PhasePosterior
from .pipeline import (
    RunConfig,
    evaluate_run,
    extract_measurements,
    run,
    sweep,
)
from .scenarios import ScenarioConfig, gen_dataset

logger = logging.getLogger(__name__)


def _default_seed():
    return int(os.environ.get("CIRCAPHASE_SEED", "0"))


def _add_run_flags(p):
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--sigma-k", type=float, default=None,
                   help="isotropic process noise magnitude")
    p.add_argument("--sigma-p", type=float, default=None,
                   help="pacemaker process noise (with --sigma-l)")
    p.add_argument("--sigma-l", type=float, default=None,
                   help="light-processor process noise (with --sigma-p)")
    p.add_argument("--estimator", choices=("filter", "model-only", "hr-only"),
                   default="filter")
    p.add_argument("--phi-ref", type=float, default=-1.0)
    p.add_argument("--init-mean", type=str, default="1,0,0.5",
                   help="comma-separated initial mean state")
    p.add_argument("--init-cov", type=float, default=0.1)
    p.add_argument("--mc-samples", type=int, default=10000)
    p.add_argument("--walkers", type=int, default=32)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--window-days", type=int, default=1)
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--atol", type=float, default=1e-8)


def _run_config(args):
    try:
        init_mean = tuple(float(v) for v in args.init_mean.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad --init-mean {args.init_mean!r}") from exc
    if len(init_mean) != 3:
        raise ConfigurationError("--init-mean needs exactly 3 components")
    if args.sigma_p is not None or args.sigma_l is not None:
        if args.sigma_k is not None:
            raise ConfigurationError("give either --sigma-k or --sigma-p/--sigma-l")
        noise = ProcessNoise(args.sigma_p or 0.0, args.sigma_l or 0.0)
    else:
        noise = ProcessNoise.isotropic(args.sigma_k if args.sigma_k is not None else 1e-2)
    return RunConfig(
        initial_mean=init_mean,
        initial_cov_scale=args.init_cov,
        noise=noise,
        phi_ref=args.phi_ref,
        mcmc=MCMCConfig(n_walkers=args.walkers, n_sweeps=args.sweeps),
        mc_samples=args.mc_samples,
        rtol=args.rtol,
        atol=args.atol,
        seed=args.seed,
        estimator=args.estimator,
        window_days=args.window_days,
    )


def _build_parser():
    parser = argparse.ArgumentParser(prog="circaphase")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic wearable data")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--days", type=int, default=20)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.add_argument("--meta-out", default=None, help="JSON sidecar with config and truth")
    p.add_argument("--config", default=None)

    p = sub.add_parser("extract", help="per-day heart-rate phase estimates")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_run_flags(p)

    p = sub.add_parser("filter", help="run an estimator over a record")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv-out", default=None)
    p.add_argument("--samples-out", default=None,
                   help="sidecar JSON with posterior samples")
    p.add_argument("--truth", type=float, default=None,
                   help="true phase (hours); adds an evaluation block")
    p.add_argument("--config", default=None)
    _add_run_flags(p)

    p = sub.add_parser("evaluate", help="score a result file against a truth")
    p.add_argument("--result", required=True)
    p.add_argument("--truth", type=float, default=4.0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)

    p = sub.add_parser("sweep", help="grid of runs over process-noise magnitudes")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--days", type=int, default=20)
    p.add_argument("--sigmas", required=True,
                   help="comma-separated noise magnitudes")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--noise-axis", choices=("iso", "pacemaker", "light"), default="iso")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_run_flags(p)

    p = sub.add_parser("pipeline", help="simulate, filter and evaluate in one go")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--days", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--csv-out", default=None)
    p.add_argument("--data-out", default=None, help="also write the simulated CSV")
    p.add_argument("--config", default=None)
    _add_run_flags(p)
    return parser


def _apply_config_file(parser, argv):
    """Preset subcommand defaults from a JSON config; flags still win."""
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigurationError("--config needs a file path")
    path = argv[idx + 1]
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigurationError("config file must hold a JSON object")
    command = next((a for a in argv if not a.startswith("-")), None)
    sub_actions = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    if command not in sub_actions.choices:
        return
    subparser = sub_actions.choices[command]
    valid = {a.dest for a in subparser._actions}
    unknown = {k for k in values if k.replace("-", "_") not in valid}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    subparser.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})


def _cmd_simulate(args):
    cfg = ScenarioConfig.preset(args.scenario, n_days=args.days, seed=args.seed)
    dataset = gen_dataset(cfg)
    io.write_records_csv(args.out, dataset.times_min, dataset.hr, dataset.steps)
    if args.meta_out:
        io.write_json(args.meta_out, {
            "scenario": cfg.scenario,
            "n_days": cfg.n_days,
            "seed": cfg.seed,
            "true_phase": cfg.true_phase,
            "sleep_offsets": dataset.sleep_offsets,
            "sleep_onsets": dataset.sleep_onsets,
        })
    logger.info("wrote %s (%d days)", args.out, cfg.n_days)
    return 0


def _cmd_extract(args):
    series = io.ingest(args.data)
    cfg = _run_config(args)
    measurements = extract_measurements(series, cfg)
    doc = {
        "schema_version": io.SCHEMA_VERSION,
        "gap_report": series.gap_report().to_dict(),
        "estimates": {
            str(day): None if est is None else est.to_dict()
            for day, est in measurements.items()
        },
    }
    io.write_json(args.out, doc)
    return 0


def _cmd_filter(args):
    series = io.ingest(args.data)
    cfg = _run_config(args)
    results = run(series, cfg)
    evaluation = None
    if args.truth is not None:
        evaluation = evaluate_run(results, args.truth,
                                  metadata={"truth": args.truth, "seed": cfg.seed})
    doc = io.run_result_dict(cfg, results, evaluation)
    io.write_json(args.out, doc)
    if args.csv_out:
        io.write_daily_csv(args.csv_out, results)
    if args.samples_out:
        io.write_json(args.samples_out, {
            "schema_version": io.SCHEMA_VERSION,
            "days": [r.to_dict(include_samples=True) for r in results],
        })
    return 0


def _cmd_evaluate(args):
    with open(args.result, encoding="utf-8") as fh:
        doc = json.load(fh)
    estimates = []
    for day in doc.get("days", []):
        post = day.get("posterior")
        if post is None:
            continue
        estimates.append(PhasePosterior(
            day_index=day["day_index"],
            mean=post["mean_hours"],
            sd=post["sd_hours"],
            ci_lower=post["ci_lower"],
            ci_upper=post["ci_upper"],
        ))
    if not estimates:
        raise ValidationError("result file has no posterior days")
    out = {
        "schema_version": io.SCHEMA_VERSION,
        "truth": args.truth,
        "n_days": len(estimates),
        "rmse_hours": rmse_metric(estimates, args.truth),
        "ncr": ncr_metric(estimates, args.truth),
    }
    io.write_json(args.out, out)
    return 0


def _cmd_sweep(args):
    scenario_cfg = ScenarioConfig.preset(args.scenario, n_days=args.days, seed=args.seed)
    run_cfg = _run_config(args)
    try:
        sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad --sigmas {args.sigmas!r}") from exc
    result = sweep(scenario_cfg, run_cfg, sigmas, replicates=args.replicates,
                   noise_axis=args.noise_axis)
    io.write_sweep_csv(args.out, result.rows)
    return 0


def _cmd_pipeline(args):
    scenario_cfg = ScenarioConfig.preset(args.scenario, n_days=args.days, seed=args.seed)
    dataset = gen_dataset(scenario_cfg)
    if args.data_out:
        io.write_records_csv(args.data_out, dataset.times_min, dataset.hr, dataset.steps)
    cfg = _run_config(args)
    results = run(dataset, cfg)
    evaluation = evaluate_run(results, dataset.true_phases,
                              metadata={"scenario": args.scenario, "seed": cfg.seed})
    doc = io.run_result_dict(cfg, results, evaluation)
    io.write_json(args.out, doc)
    if args.csv_out:
        io.write_daily_csv(args.csv_out, results)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "extract": _cmd_extract,
    "filter": _cmd_filter,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "pipeline": _cmd_pipeline,
}


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        return _COMMANDS[args.command](args)
    except (ValidationError, InputDomainError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
