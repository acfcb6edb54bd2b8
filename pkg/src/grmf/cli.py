"""Command-line interface.

Subcommands: ``factorize``, ``corrupt``, ``sweep``, ``synth``.  Every
flag has a config-file equivalent (flat TOML key/value, flag spelling
with underscores); explicit flags override config values.  Exit codes:
0 success, 1 usage error, 2 data/parse error, 3 numerical failure.
"""

import argparse
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import GRMF, NumericalError, normalize_variant
from .baselines import truncated_svd
from .factorizer import default_image_hyper, fit, fit_grown, init_factors, reconstruct
from .harness import (
    CorruptionSpec,
    FactorPair,
    ParseError,
    SweepConfig,
    SynthSpec,
    corrupt_salt_pepper,
    count_groups,
    load_matrix,
    relative_mae,
    run_sweep,
    save_csv_matrix,
    save_pgm,
    sparsity_fraction,
    synth_lowrank,
)

import numpy as np

# HyperParams mirror accepted in config files (and, for the lambda/tau
# entries, as factorize flags).
_HYPER_KEYS = {
    "lambda1": "lam1",
    "lambda2": "lam2",
    "lambda3": "lam3",
    "tau1": "tau1",
    "tau2": "tau2",
    "eps": "eps",
    "nu0": "nu0",
    "rho": "rho",
    "outer_rel_tol": "outer_rel_tol",
    "dc_tol": "dc_tol",
    "admm_tol": "admm_tol",
    "max_alt": "max_alt",
    "max_dc": "max_dc",
    "max_admm": "max_admm",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(path):
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _setting(args, config, key, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _hyper_overrides(args, config):
    overrides = {}
    for key, field in _HYPER_KEYS.items():
        value = _setting(args, config, key)
        if value is not None:
            overrides[field] = value
    return overrides


def _save_matrix(path, matrix):
    if str(path).lower().endswith((".pgm", ".pnm")):
        save_pgm(path, matrix)
    else:
        save_csv_matrix(path, matrix)


def _cmd_factorize(args):
    config = _load_config(args.config)
    y = load_matrix(_require(args, config, "input"))
    rank = int(_require(args, config, "rank"))
    variant = str(_setting(args, config, "variant", GRMF)).lower().replace("_", "-")
    strategy = _setting(args, config, "init", "svd")
    seed = _setting(args, config, "seed", 0)
    overrides = _hyper_overrides(args, config)
    if variant == "tsvd":
        res = truncated_svd(y, rank)
        root = np.sqrt(res.singular_values)
        factors = FactorPair(res.left * root, res.right * root)
        iterations = 0
        tau_group = default_image_hyper(y).tau2
    else:
        hyper = default_image_hyper(y, normalize_variant(variant), **overrides)
        if strategy == "grow":  # config-file protocol for heavy corruption
            factors, trace = fit_grown(y, rank, hyper, seed=int(seed))
        else:
            start = init_factors(y, rank, strategy, seed=int(seed))
            factors, trace = fit(y, rank, hyper, init=start)
        iterations = trace.iterations
        tau_group = hyper.tau2
    if args.out_u:
        save_csv_matrix(args.out_u, factors.u)
    if args.out_v:
        save_csv_matrix(args.out_v, factors.v)
    if args.metrics:
        metrics = {
            "variant": variant,
            "rank": rank,
            "relative_mae_vs_input": relative_mae(y, reconstruct(factors)),
            "groups_mean": count_groups(factors, tau_group),
            "sparsity_fraction": sparsity_fraction(factors),
            "iterations": iterations,
        }
        with open(args.metrics, "w", encoding="ascii") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_corrupt(args):
    config = _load_config(args.config)
    y = load_matrix(_require(args, config, "input"))
    spec = CorruptionSpec(
        ratio=float(_require(args, config, "ratio")),
        seed=int(_setting(args, config, "seed", 0)),
    )
    _save_matrix(_require(args, config, "output"), corrupt_salt_pepper(y, spec))
    return 0


def _cmd_synth(args):
    config = _load_config(args.config)
    y, truth = synth_lowrank(
        d=int(_setting(args, config, "d", 64)),
        n=int(_setting(args, config, "n", 64)),
        r=int(_setting(args, config, "rank", 4)),
        groups=int(_setting(args, config, "groups", 2)),
        zero_frac=float(_setting(args, config, "zero-frac", 0.25)),
        jitter=float(_setting(args, config, "jitter", 0.0)),
        seed=int(_setting(args, config, "seed", 7)),
        level_low=float(_setting(args, config, "level-low", 0.2)),
    )
    _save_matrix(_require(args, config, "out"), y)
    if args.truth_u:
        save_csv_matrix(args.truth_u, truth.u)
    if args.truth_v:
        save_csv_matrix(args.truth_v, truth.v)
    return 0


def _cmd_sweep(args):
    config = _load_config(args.config)
    synth = SynthSpec(
        d=int(config.get("synth_d", 64)),
        n=int(config.get("synth_n", 64)),
        rank=int(config.get("synth_rank", 4)),
        groups=int(config.get("synth_groups", 2)),
        zero_frac=float(config.get("synth_zero_frac", 0.25)),
        jitter=float(config.get("synth_jitter", 0.0)),
        seed=int(config.get("synth_seed", 7)),
        level_low=float(config.get("synth_level_low", 0.2)),
    )
    overrides = _hyper_overrides(args, config)
    sweep = SweepConfig(
        variants=tuple(config.get("variants", ["grmf", "tsvd"])),
        ranks=tuple(int(r) for r in config.get("ranks", [4])),
        ratios=tuple(float(c) for c in config.get("ratios", [0.0, 0.5])),
        seeds=tuple(int(s) for s in config.get("seeds", [0, 1, 2, 3, 4])),
        input_path=str(_setting(args, config, "input", "")),
        synth=synth,
        init=str(config.get("init", "svd")),
        init_seed=int(config.get("init_seed", 0)),
        hyper_overrides=overrides,
        zero_tol=float(config.get("zero_tol", 1e-6)),
        group_tau=float(config.get("group_tau", 0.0)),
        workers=int(_setting(args, config, "workers", 1)),
    )
    run_sweep(sweep, csv_path=args.out, summary_path=args.summary)
    return 0


def _require(args, config, key):
    value = _setting(args, config, key)
    if value is None:
        raise _UsageError(f"missing required option --{key}")
    return value


def build_parser():
    parser = _Parser(prog="grmf", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    fac = sub.add_parser("factorize", help="factorize a PGM/CSV matrix")
    fac.add_argument("--input")
    fac.add_argument("--rank", type=int)
    fac.add_argument("--variant", choices=["grmf", "ngrmf", "gmf-l2", "tsvd"])
    for flag in ("lambda1", "lambda2", "lambda3", "tau1", "tau2"):
        fac.add_argument(f"--{flag}", type=float)
    fac.add_argument("--init", choices=["svd", "random"])
    fac.add_argument("--seed", type=int)
    fac.add_argument("--out-u")
    fac.add_argument("--out-v")
    fac.add_argument("--metrics")
    fac.add_argument("--config")
    fac.set_defaults(func=_cmd_factorize)

    cor = sub.add_parser("corrupt", help="apply salt-and-pepper corruption")
    cor.add_argument("--input")
    cor.add_argument("--ratio", type=float)
    cor.add_argument("--seed", type=int)
    cor.add_argument("--output")
    cor.add_argument("--config")
    cor.set_defaults(func=_cmd_corrupt)

    swp = sub.add_parser("sweep", help="run a benchmark sweep from a config file")
    swp.add_argument("--config")
    swp.add_argument("--input")
    swp.add_argument("--workers", type=int)
    swp.add_argument("--out", required=False)
    swp.add_argument("--summary", required=False)
    swp.set_defaults(func=_cmd_sweep)

    syn = sub.add_parser("synth", help="generate a synthetic low-rank matrix")
    syn.add_argument("--d", type=int)
    syn.add_argument("--n", type=int)
    syn.add_argument("--rank", type=int)
    syn.add_argument("--groups", type=int)
    syn.add_argument("--zero-frac", type=float)
    syn.add_argument("--jitter", type=float)
    syn.add_argument("--seed", type=int)
    syn.add_argument("--out")
    syn.add_argument("--truth-u")
    syn.add_argument("--truth-v")
    syn.add_argument("--config")
    syn.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
