"""
Command line interface for the ptx library and experiment harness.

Usage:
ptx figure4 --config playground/figure4_config.json --out results/figure4.csv --jobs 8
ptx gamma-sweep --config playground/gamma_sweep_config.json --out results/gamma.csv
ptx eigspec --in features.csv --out eig.csv [--no-header] [--no-center] [--top-k 5]
ptx attack --k 6 --rho 1 --sigma 1 --n2 100 --trials 100 --mechanism dpsgd --eps 1 --delta 1e-5
ptx accountant --steps 750 --q 0.064 --eps 1.1 --delta 1e-5
ptx two-phase --public public.csv --private private.csv --k 5 --config dp.json --eps 1.1
ptx private-regress --data private.csv --config dp.json --eps 1.1
ptx synth --d 25 --k 5 --t 100 --n1 2000 --n2 500 --out-dir data/
ptx sizes --d 25 --k 5 --gamma 0.5 --err 0.1 --eps 1
ptx summarize --in results/figure4.csv

`python3 -m ptx ...` works the same way.
"""
import argparse
import json
import math
import os
import sys

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ptx.attack.tracing import (
    AttackInstance,
    default_attack_dp_config,
    make_mechanism,
    membership_experiment,
)
from ptx.constants import DEFAULT_DELTA, DEFAULT_JOBS, ErrorCode
from ptx.data.dataset import LabeledDataset
from ptx.data.synth import (
    diversity_stats,
    random_instance,
    sample_private,
    sample_public,
)
from ptx.errors import ConfigError, PtxError
from ptx.harness.eigspec import run_eigspec
from ptx.harness.experiment import run_figure4, run_gamma_sweep, write_results
from ptx.harness.summary import load_results, summarize
from ptx.linalg.subspace import perturbed_basis
from ptx.model.dp_linreg import dpsgd_fit, ols_fit, required_private_samples
from ptx.model.mom import required_public_samples
from ptx.model.two_phase import two_phase_transfer
from ptx.privacy.accountant import (
    MechanismSchedule,
    PrivacyBudget,
    calibrate_noise,
    epsilon_spent,
)
from ptx.protocol.api_protocol import (
    AccountantOutput,
    DpSgdConfigModel,
    ExperimentConfig,
    FitResultModel,
    InstanceModel,
    MembershipReportModel,
    SampleSizes,
    TwoPhaseResultModel,
)
from ptx.utils import build_logger, make_rng

logger = None


def emit(model, out=None):
    """Print a pydantic model as JSON, or write it to `out`."""
    text = model.json(indent=2)
    if out:
        dirname = os.path.dirname(out)
        if dirname:
            os.makedirs(dirname, exist_ok=True)
        with open(out, "w") as fout:
            fout.write(text + "\n")
        logger.info(f"Wrote {out}")
    else:
        print(text)


def load_experiment_config(args) -> ExperimentConfig:
    try:
        with open(args.config) as fin:
            raw = json.load(fin)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {args.config}: {e}") from e
    if args.seed is not None:
        raw["base_seed"] = args.seed
    return ExperimentConfig.parse_obj(raw)


def load_dp_config(path):
    if path is None:
        return DpSgdConfigModel().to_config()
    try:
        return DpSgdConfigModel.parse_file(path).to_config()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e


def target_budget(args):
    if args.eps is None:
        return None
    return PrivacyBudget(args.eps, args.delta)


def _run_grid(args, runner, command):
    cfg = load_experiment_config(args)
    df = write_results(
        runner(cfg, jobs=args.jobs),
        args.out,
        cfg,
        command=command,
        timing=not args.no_timing,
    )
    failed = int((df["error"].fillna("") != "").sum())
    logger.info(f"Wrote {len(df)} rows to {args.out} ({failed} failed)")
    return ErrorCode.PARTIAL_FAILURE if failed else ErrorCode.OK


def cmd_figure4(args):
    return _run_grid(args, run_figure4, "figure4")


def cmd_gamma_sweep(args):
    return _run_grid(args, run_gamma_sweep, "gamma-sweep")


def cmd_eigspec(args):
    run_eigspec(
        args.input,
        args.out,
        header=not args.no_header,
        center=not args.no_center,
        top_k=args.top_k,
    )
    return ErrorCode.OK


def cmd_attack(args):
    seed = 0 if args.seed is None else args.seed
    inst = AttackInstance.synthetic(args.k, args.rho, args.sigma)
    cfg = default_attack_dp_config()
    if args.dp_config:
        cfg = load_dp_config(args.dp_config)
    mechanism = make_mechanism(args.mechanism, args.eps, args.delta, cfg)
    report = membership_experiment(
        inst, mechanism, args.n2, args.trials, make_rng(seed)
    )
    emit(MembershipReportModel.from_report(report), args.out)
    return ErrorCode.OK


def cmd_accountant(args):
    if (args.eps is None) == (args.noise_multiplier is None):
        raise ConfigError("give exactly one of --eps and --noise-multiplier")
    if args.eps is not None:
        sigma = calibrate_noise(PrivacyBudget(args.eps, args.delta), args.steps, args.q)
    elif args.noise_multiplier > 0:
        sigma = args.noise_multiplier
    else:
        raise ConfigError("--noise-multiplier must be positive")
    eps = epsilon_spent(MechanismSchedule(args.steps, args.q, sigma), args.delta)
    emit(
        AccountantOutput(
            epsilon=eps,
            delta=args.delta,
            noise_multiplier=sigma,
            steps=args.steps,
            q=args.q,
        ),
        args.out,
    )
    return ErrorCode.OK


def load_instance(path):
    try:
        return InstanceModel.parse_file(path).to_instance()
    except OSError as e:
        raise ConfigError(f"cannot read instance {path}: {e}") from e


def cmd_two_phase(args):
    seed = 0 if args.seed is None else args.seed
    rng = make_rng(seed)
    inst = load_instance(args.instance) if args.instance else None
    if args.oracle_gamma is not None:
        if inst is None:
            raise ConfigError("--oracle-gamma needs --instance for the true subspace")
        public = perturbed_basis(inst.basis, args.oracle_gamma, rng)
    elif args.public:
        public = LabeledDataset.from_csv(args.public)
    else:
        raise ConfigError("give --public or --oracle-gamma")
    private = LabeledDataset.from_csv(args.private)
    result = two_phase_transfer(
        public,
        private,
        args.k,
        None if args.ols else load_dp_config(args.config),
        target=target_budget(args),
        inst=inst,
        rng=rng,
    )
    emit(TwoPhaseResultModel.from_result(result), args.out)
    return ErrorCode.OK


def cmd_private_regress(args):
    seed = 0 if args.seed is None else args.seed
    data = LabeledDataset.from_csv(args.data)
    if args.ols:
        fit = ols_fit(data)
    else:
        fit = dpsgd_fit(
            data, load_dp_config(args.config), target=target_budget(args), rng=make_rng(seed)
        )
    emit(FitResultModel.from_fit(fit), args.out)
    return ErrorCode.OK


def cmd_synth(args):
    seed = 0 if args.seed is None else args.seed
    rng = make_rng(seed)
    inst = random_instance(args.d, args.k, args.t, args.noise_std, args.task_norm, rng)
    os.makedirs(args.out_dir, exist_ok=True)
    emit(
        InstanceModel.from_instance(inst, diversity_stats(inst)),
        os.path.join(args.out_dir, "instance.json"),
    )
    if args.n1:
        sample_public(inst, args.n1, rng).to_csv(os.path.join(args.out_dir, "public.csv"))
    if args.n2:
        sample_private(inst, args.n2, rng).to_csv(
            os.path.join(args.out_dir, "private.csv")
        )
    return ErrorCode.OK


def cmd_sizes(args):
    sizes = SampleSizes()
    if args.gamma is not None:
        sizes.n1 = required_public_samples(args.d, args.k, args.gamma)
    if args.err is not None:
        eps = math.inf if args.eps is None else args.eps
        sizes.n2 = required_private_samples(args.k, args.err, eps)
    emit(sizes, args.out)
    return ErrorCode.OK


def cmd_summarize(args):
    table_df = summarize(load_results(args.input), metric=args.metric)
    table = Table(title=f"{args.metric} by cell")
    for col in table_df.columns:
        table.add_column(str(col))
    for _, row in table_df.iterrows():
        table.add_row(
            *[f"{v:.4g}" if isinstance(v, float) else str(v) for v in row.tolist()]
        )
    Console().print(table)
    return ErrorCode.OK


def add_grid_args(parser):
    parser.add_argument("--config", type=str, required=True, help="Experiment config JSON.")
    parser.add_argument("--out", type=str, required=True, help="Results CSV path.")
    parser.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    parser.add_argument("--seed", type=int, help="Overrides base_seed in the config.")
    parser.add_argument(
        "--no-timing",
        action="store_true",
        help="Write wall_ms as 0 so reruns produce identical bytes.",
    )


def add_privacy_args(parser, eps_required=False):
    parser.add_argument("--eps", type=float, required=eps_required)
    parser.add_argument("--delta", type=float, default=DEFAULT_DELTA)


def build_parser():
    parser = argparse.ArgumentParser(prog="ptx")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("figure4", help="Run the simulated study grid.")
    add_grid_args(p)
    p.set_defaults(func=cmd_figure4)

    p = sub.add_parser("gamma-sweep", help="Oracle subspaces at fixed gamma.")
    add_grid_args(p)
    p.set_defaults(func=cmd_gamma_sweep)

    p = sub.add_parser("eigspec", help="Eigenspectrum of a feature covariance.")
    p.add_argument("--in", dest="input", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--top-k", type=int, help="Log the variance mass of the top k.")
    p.set_defaults(func=cmd_eigspec)

    p = sub.add_parser("attack", help="Tracing-attack membership experiment.")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument(
        "--mechanism", type=str, choices=["oracle", "ols", "dpsgd"], default="dpsgd"
    )
    p.add_argument("--dp-config", type=str, help="DP-SGD config JSON.")
    add_privacy_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("accountant", help="RDP accounting or noise calibration.")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--q", type=float, required=True, help="Sampling rate.")
    p.add_argument("--noise-multiplier", type=float)
    add_privacy_args(p)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_accountant)

    p = sub.add_parser("two-phase", help="Two-phase transfer on CSV data.")
    p.add_argument("--public", type=str, help="Public dataset CSV.")
    p.add_argument("--oracle-gamma", type=float)
    p.add_argument("--instance", type=str, help="Instance JSON from `ptx synth`.")
    p.add_argument("--private", type=str, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--config", type=str, help="DP-SGD config JSON.")
    p.add_argument("--ols", action="store_true", help="Nonprivate k-dim fit.")
    add_privacy_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_two_phase)

    p = sub.add_parser("private-regress", help="DP-SGD regression on a CSV.")
    p.add_argument("--data", type=str, required=True)
    p.add_argument("--config", type=str, help="DP-SGD config JSON.")
    p.add_argument("--ols", action="store_true", help="Nonprivate least squares.")
    add_privacy_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_private_regress)

    p = sub.add_parser("synth", help="Write a random instance and datasets.")
    p.add_argument("--d", type=int, default=25)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--t", type=int, default=100)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--task-norm", type=float, default=1.0)
    p.add_argument("--n1", type=int, default=0)
    p.add_argument("--n2", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", type=str, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sizes", help="Sample-size calculator.")
    p.add_argument("--d", type=int, default=25)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--gamma", type=float)
    p.add_argument("--err", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_sizes)

    p = sub.add_parser("summarize", help="Summarize a results CSV.")
    p.add_argument("--in", dest="input", type=str, required=True)
    p.add_argument("--metric", type=str, default="l2_param_error")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None):
    global logger
    logger = build_logger("ptx_cli", "ptx_cli.log")
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except (ConfigError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        return int(ErrorCode.CONFIG_ERROR)
    except PtxError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return int(e.error_code)
    except OSError as e:
        logger.error(f"Cannot read or write {e.filename}: {e.strerror}")
        return int(ErrorCode.CONFIG_ERROR)


if __name__ == "__main__":
    sys.exit(main())
