"""Command-line entry point: ``levymax <subcommand> [flags]``.

Every :class:`~levymax.bench.ExperimentConfig` field is available as a flag
(``--burn-in 500``); ``--config file.toml`` supplies any of them from a
key-value file and explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import bench
from .bench import EXIT_CONFIG, EXIT_FAILURES, EXIT_OK, ExperimentConfig, fmt
from .data import IngestionError, generate_synthetic, write_csv
from .mlmc import stream
from .pmmh import ConfigError


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML key-value file with config fields")
    parser.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                        help="start from T=200, burn-in 10000, 50 repeats")
    group = parser.add_argument_group("experiment fields")
    for f in dataclasses.fields(ExperimentConfig):
        default = f.default
        shown = ",".join(map(str, default)) if isinstance(default, tuple) else default
        group.add_argument("--" + f.name.replace("_", "-"), dest=f.name,
                           default=argparse.SUPPRESS, metavar=f.name.upper(),
                           help=f"(default: {shown!s})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levymax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": "simulate a synthetic dataset and its latent path",
        "run-pmmh": "repeat single-level PMMH and score it against a reference",
        "run-ml": "repeat the multilevel estimator and score it against a reference",
        "rates": "cost-versus-MSE curves and fitted rates",
        "diagnostics": "trace, histogram and ACF files for a chain CSV",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_config_flags(p)
        if name == "diagnostics":
            p.add_argument("--chain", required=True, help="chain CSV written by run-pmmh")
            p.add_argument("--bins", type=int, default=50)
            p.add_argument("--max-lag", type=int, default=100)
    return parser


def make_config(args: argparse.Namespace, **forced) -> ExperimentConfig:
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = bench.load_config_file(args.config) if args.config else {}
    values.update({k: v for k, v in vars(args).items() if k in names})
    values.update(forced)
    if args.full_scale:
        return ExperimentConfig.full_scale(**values)
    return ExperimentConfig(**values)


def _print_rows(header, rows, out=None) -> None:
    out = out or sys.stdout
    print(",".join(header), file=out)
    for row in rows:
        print(",".join(fmt(v) for v in row), file=out)


def cmd_generate(config: ExperimentConfig) -> int:
    outdir = config.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    data, latent = generate_synthetic(config.theta(), config.T, config.m_truth, config.x0,
                                      stream(config.seed, bench.DATA_KEY))
    write_csv(data, outdir / "dataset.csv")
    bench.write_table(outdir / "latent.csv", ["n", "x", "xbar"],
                      [(n, x, xb) for n, (x, xb) in enumerate(latent, start=1)])
    bench.write_manifest(outdir, bench._manifest(config, "generate", meta=data.meta))
    print(outdir / "dataset.csv")
    return EXIT_OK


def cmd_experiment(config: ExperimentConfig) -> int:
    result = bench.run_experiment(config)
    _print_rows(["estimator", "param", "repeats_ok", "mse", "cost"], result.aggregate)
    if result.exit_code != EXIT_OK:
        print(f"{result.failures} of {config.repeats} repeats failed", file=sys.stderr)
    return result.exit_code


def cmd_rates(config: ExperimentConfig) -> int:
    result = bench.run_rates(config)
    _print_rows(["method", "param", "slope", "intercept"],
                [(m, p, f.slope, f.intercept) for (m, p), f in result.fits.items()])
    return result.exit_code


def cmd_diagnostics(config: ExperimentConfig, args) -> int:
    if not Path(args.chain).is_file():
        raise ConfigError(f"chain file {args.chain!r} does not exist")
    columns = bench.read_chain_csv(args.chain)
    summary = bench.export_diagnostics(columns, config.output_dir(), params=config.params,
                                       bins=args.bins, max_lag=args.max_lag,
                                       burn_in=config.burn_in)
    _print_rows(["param", "mean", "sd", "q025", "q975", "iact"],
                [(p, s["mean"], s["sd"], s["q025"], s["q975"], s["iact"])
                 for p, s in summary.items()])
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run-pmmh":
            return cmd_experiment(make_config(args, estimator="single"))
        if args.command == "run-ml":
            return cmd_experiment(make_config(args, estimator="multilevel"))
        config = make_config(args)
        if args.command == "generate":
            return cmd_generate(config)
        if args.command == "rates":
            return cmd_rates(config)
        # a chain file's burn-in is usually already dropped
        if "burn_in" not in vars(args):
            config = dataclasses.replace(config, burn_in=0)
        return cmd_diagnostics(config, args)
    except (ConfigError, IngestionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except bench.RunFailure as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
