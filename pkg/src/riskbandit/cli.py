"""Command-line entry point: ``riskbandit {run,reproduce,gradcheck,instances}``.

Exit codes: 0 success, 1 verification or run failure, 2 usage error.
Machine-readable ``key=value`` summaries go to stdout, prose to stderr.

``run`` accepts ``--config FILE``, a JSON object whose keys are the long flag
names with dashes replaced by underscores (``instance``, ``algo``,
``lambda_sigma``, ``lambda_mu``, ``batch``, ``rho``, ``rho0``, ``alpha``,
``steps``, ``runs``, ``seed``, ``out``, ``threads``). Flags given on the
command line override file values. ``instance`` is a registered name or the
path of an instance file written by ``instances --emit``, which looks like::

    {"arms": [{"kind": "gaussian", "mu": 0.0, "std": 1.0},
              {"kind": "bernoulli", "p": 0.3, "lo": 0.0, "hi": 1.0}]}

Other arm kinds: ``truncated_gaussian`` (mu, std, bound), ``uniform``
(lo, hi), ``discrete`` (values, probs).

The output directory defaults to ``$RISKBANDIT_OUT`` and then ``results``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .env import INSTANCE_NAMES, BanditInstance, named_instance
from .estimators import RiskWeights
from .experiment import FIGURES, ExperimentConfig, aggregate, reproduce_figure, run_experiment, write_results
from .gradcheck import run_gradcheck
from .learner import LearnerConfig
from .policy import Constant, PowerDecay

OUT_ENV = "RISKBANDIT_OUT"

RUN_DEFAULTS: dict[str, Any] = {
    "instance": "toy2",
    "algo": "variance",
    "lambda_sigma": 1.0,
    "lambda_mu": 0.0,
    "batch": 2,
    "rho": None,
    "rho0": None,
    "alpha": None,
    "steps": 200,
    "runs": 100,
    "seed": 0,
    "out": None,
    "threads": 1,
}


class UsageError(Exception):
    pass


def _emit(**pairs) -> None:
    print(" ".join(f"{k}={_fmt(v)}" for k, v in pairs.items()))


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(float(x)) for x in v)
    return str(v)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out_dir(flag: Optional[str]) -> Path:
    return Path(flag or os.environ.get(OUT_ENV) or "results")


def _load_instance(value: str) -> tuple[str | BanditInstance, int]:
    if value in INSTANCE_NAMES:
        return value, 2 if value == "toy2" else 10
    path = Path(value)
    if not path.is_file():
        raise UsageError(f"instance must be one of {INSTANCE_NAMES} or an instance file, got {value!r}")
    inst = BanditInstance.from_dict(json.loads(path.read_text()))
    return inst, inst.k


def _merge_run_options(args: argparse.Namespace) -> dict[str, Any]:
    opts = dict(RUN_DEFAULTS)
    if args.config:
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - set(RUN_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update(data)
    for key in RUN_DEFAULTS:
        value = getattr(args, key)
        if value is not None:
            opts[key] = value
    return opts


def build_run_config(opts: dict[str, Any]) -> ExperimentConfig:
    instance, k = _load_instance(str(opts["instance"]))
    if opts["algo"] == "variance":
        if int(opts["batch"]) != 2:
            raise UsageError("variance mode requires batch=2")
        if (float(opts["lambda_sigma"]), float(opts["lambda_mu"])) != (1.0, 0.0):
            raise UsageError("variance mode requires lambda-sigma=1 and lambda-mu=0")
    if opts["rho"] is not None and (opts["rho0"] is not None or opts["alpha"] is not None):
        raise UsageError("give either --rho or --rho0/--alpha, not both")
    if opts["rho"] is not None:
        schedule = Constant(float(opts["rho"]))
    elif opts["rho0"] is not None:
        schedule = PowerDecay(float(opts["rho0"]), float(opts["alpha"] or 0.0))
    else:
        raise UsageError("a learning rate is required: --rho, or --rho0 with --alpha")
    learner = LearnerConfig(
        k=k,
        algorithm=opts["algo"],
        weights=RiskWeights(float(opts["lambda_sigma"]), float(opts["lambda_mu"])),
        batch_size=int(opts["batch"]),
        schedule=schedule,
    )
    return ExperimentConfig(instance, learner, int(opts["steps"]), int(opts["runs"]), int(opts["seed"]))


def cmd_run(args: argparse.Namespace) -> int:
    try:
        opts = _merge_run_options(args)
        config = build_run_config(opts)
    except (UsageError, ValueError) as exc:
        args.parser.error(str(exc))
    t0 = time.perf_counter()
    records = run_experiment(config, workers=int(opts["threads"]))
    failed = sum(r.failed for r in records)
    if failed == len(records):
        _say(f"all {failed} runs diverged")
        _emit(runs=len(records), failed=failed)
        return 1
    curves = aggregate(records)
    path = write_results(curves, config, _out_dir(opts["out"]), "run")
    _say(f"{len(records)} runs x {config.steps} steps in {time.perf_counter() - t0:.1f}s -> {path}")
    _emit(**curves.final_summary(), csv=str(path))
    return 1 if failed else 0


def cmd_reproduce(args: argparse.Namespace) -> int:
    if args.figure not in FIGURES:
        args.parser.error(f"unknown figure {args.figure!r}; choose from {', '.join(FIGURES)}")
    t0 = time.perf_counter()
    curves, path = reproduce_figure(
        args.figure, _out_dir(args.out), seed=args.seed, workers=args.threads, runs=args.runs
    )
    _say(f"{args.figure}: {curves.n_runs} runs in {time.perf_counter() - t0:.1f}s -> {path}")
    _emit(figure=args.figure, **curves.final_summary(), csv=str(path))
    return 1 if curves.n_failed else 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.samples < 10_000:
        args.parser.error("--samples must be at least 10000")
    report = run_gradcheck(
        seed=args.seed,
        samples=args.samples,
        instances=args.instance,
        baselines=args.baseline,
        sign=-1.0 if args.corrupt_sign else 1.0,
    )
    ok = report.passed()
    _say(
        f"{report.n_checks} unbiasedness checks, worst deviation {report.max_z:.2f} SE (limit 4); "
        f"jacobian max deviation {report.jacobian_max_dev:.2e} (limit 1e-6)"
    )
    _emit(
        checks=report.n_checks,
        max_dev_se=report.max_z,
        mean_se=report.mean_se,
        jacobian_max_dev=report.jacobian_max_dev,
        passed=int(ok),
    )
    return 0 if ok else 1


def cmd_instances(args: argparse.Namespace) -> int:
    try:
        weights = RiskWeights(args.lambda_sigma, args.lambda_mu)
    except ValueError as exc:
        args.parser.error(str(exc))
    names = args.name or list(INSTANCE_NAMES)
    for name in names:
        env = named_instance(name, np.random.default_rng(args.seed))
        _emit(
            name=name,
            k=env.k,
            means=env.true_means(),
            variances=env.true_variances(),
            optimal_arm=env.optimal_arm(*weights),
        )
        if args.emit:
            target = Path(args.emit)
            if len(names) > 1:
                target = target.with_name(f"{target.stem}_{name}{target.suffix or '.json'}")
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(json.dumps(env.to_dict(), indent=2) + "\n")
            _say(f"wrote {target}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskbandit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment and write CSV + metadata")
    run.add_argument("--config", help="JSON file with default values for the flags below")
    run.add_argument("--instance", help=f"one of {', '.join(INSTANCE_NAMES)} or an instance JSON file")
    run.add_argument("--algo", choices=("variance", "risk"))
    run.add_argument("--lambda-sigma", type=float)
    run.add_argument("--lambda-mu", type=float)
    run.add_argument("--batch", type=int)
    run.add_argument("--rho", type=float, help="constant learning rate")
    run.add_argument("--rho0", type=float, help="decaying rate rho0 / t**alpha")
    run.add_argument("--alpha", type=float)
    run.add_argument("--steps", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--threads", type=int)
    run.set_defaults(func=cmd_run, parser=run)

    rep = sub.add_parser("reproduce", help="rerun a stored figure configuration")
    rep.add_argument("figure", help=", ".join(FIGURES))
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--runs", type=int, help="override the number of realisations")
    rep.add_argument("--out")
    rep.add_argument("--threads", type=int, default=1)
    rep.set_defaults(func=cmd_reproduce, parser=rep)

    grad = sub.add_parser("gradcheck", help="Monte Carlo unbiasedness + finite-difference Jacobian check")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--samples", type=int, default=100_000)
    grad.add_argument("--instance", nargs="+", default=["toy2"], choices=INSTANCE_NAMES)
    grad.add_argument("--baseline", nargs="+", type=float, default=[0.0])
    grad.add_argument("--corrupt-sign", action="store_true", help="flip the estimate (negative control)")
    grad.set_defaults(func=cmd_gradcheck, parser=grad)

    inst = sub.add_parser("instances", help="show instance moments and the optimal arm")
    inst.add_argument("--name", nargs="+", choices=INSTANCE_NAMES)
    inst.add_argument("--seed", type=int, default=0)
    inst.add_argument("--lambda-sigma", type=float, default=1.0)
    inst.add_argument("--lambda-mu", type=float, default=0.0)
    inst.add_argument("--emit", help="write the instance as JSON to this path")
    inst.set_defaults(func=cmd_instances, parser=inst)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
