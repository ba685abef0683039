"""Command-line interface.

Subcommands: simulate, bias, mmle, posterior, credible, coverage, negative,
rate, diagnostics. Harness subcommands read an ExperimentConfig JSON via
--config; --seed, --out-dir and --threads override the config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bias import PolishedTailParams, bias_profile, check_polished_tail
from .credible import build_ball, covers, diameter_proxy
from .families import make_family
from .harness import ExperimentConfig, run_coverage, run_diagnostics, run_negative, run_rate
from .inference import (
    k_posterior,
    marginal_table,
    mmle,
    posterior_center,
    sample_given_k,
    sample_hierarchical,
)
from .mcmc import McmcSettings
from .priors import prior_from_config
from .truths import generate_truth, truth_to_json


def _add_common(parser):
    parser.add_argument("--family", default="regression",
                        choices=["regression", "histogram", "loglinear", "classification"])
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--L0", type=float, default=1.0)
    parser.add_argument("--generator", default="self_similar",
                        choices=["self_similar", "sobolev_draw"])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=None)


def _build_problem(args):
    family = make_family(args.family, n=args.n)
    truth = generate_truth(args.generator, args.beta, args.L0, seed=args.seed,
                           family_tag=args.family)
    prior = prior_from_config({}, args.family, args.n)
    return family, truth, prior


def _out_path(args, name):
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def cmd_simulate(args):
    family, truth, _ = _build_problem(args)
    data = family.simulate(truth, args.n, args.seed)
    data.to_csv(_out_path(args, "dataset.csv"))
    truth_to_json(truth, _out_path(args, "truth.json"))
    print(f"wrote dataset.csv and truth.json (n={args.n}, family={args.family})")
    return 0


def cmd_bias(args):
    family, truth, prior = _build_problem(args)
    k_max = args.k_max or prior.hyper.k_cap
    profile = bias_profile(truth, family, k_max, args.n)
    profile.to_csv(_out_path(args, "bias.csv"))
    with open(_out_path(args, "bias.json"), "w") as fh:
        fh.write(profile.to_json())
    summary = {"k_n": profile.k_n, "beyond_range": profile.beyond_range}
    params = PolishedTailParams(r0=args.r0, k0=args.k0, tau=args.tau)
    try:
        report = check_polished_tail(profile, params)
        summary["polished_tail"] = {"holds": report.holds,
                                    "first_violation": report.first_violation}
    except ValueError as err:
        summary["polished_tail"] = {"holds": None, "error": str(err)}
    print(json.dumps(summary))
    return 0


def cmd_mmle(args):
    family, truth, prior = _build_problem(args)
    data = family.simulate(truth, args.n, args.seed)
    table = marginal_table(family, prior, data, seed=args.seed)
    table.to_csv(_out_path(args, "marginal_likelihoods.csv"))
    print(json.dumps({"k_hat": mmle(table)}))
    return 0


def cmd_posterior(args):
    family, truth, prior = _build_problem(args)
    data = family.simulate(truth, args.n, args.seed)
    mcmc = McmcSettings(burn_in=args.burn_in)
    if args.k is not None:
        draws = sample_given_k(family, prior.conditional, data, args.k, args.count,
                               args.seed, mcmc=mcmc)
    else:
        draws = sample_hierarchical(family, prior, data, args.count, args.seed, mcmc=mcmc)
    payload = {"k_counts": draws.k_counts(), "diagnostics": draws.diagnostics}
    with open(_out_path(args, "sampler_diagnostics.json"), "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True))
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_credible(args):
    family, truth, prior = _build_problem(args)
    data = family.simulate(truth, args.n, args.seed)
    mcmc = McmcSettings(burn_in=args.burn_in)
    table = marginal_table(family, prior, data, seed=args.seed)
    if args.mode == "empirical":
        k_hat = mmle(table)
        draws = sample_given_k(family, prior.conditional, data, k_hat, args.count,
                               args.seed, mcmc=mcmc)
    else:
        k_hat = None
        draws = sample_hierarchical(family, prior, data, args.count, args.seed,
                                    mcmc=mcmc, table=table)
    center = posterior_center(draws, family)
    ball = build_ball(args.mode, draws, center, family, args.alpha, args.L, args.n,
                      k_hat=k_hat)
    covered, d = covers(ball, truth, family)
    print(json.dumps({
        "mode": args.mode,
        "r_alpha": ball.r_alpha,
        "inflation": ball.inflation,
        "diameter": diameter_proxy(ball),
        "k_hat": k_hat,
        "d_truth_center": d,
        "covers_truth": covered,
    }))
    return 0


def _load_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    return config


def cmd_coverage(args):
    report = run_coverage(_load_config(args))
    print(json.dumps({"cells": report.cells}, sort_keys=True))
    return 0


def cmd_negative(args):
    report = run_negative(_load_config(args))
    print(json.dumps({"cells": report.cells}, sort_keys=True))
    return 0


def cmd_rate(args):
    report = run_rate(_load_config(args))
    print(json.dumps({k: report[k] for k in ("slope", "stderr", "target")}, sort_keys=True))
    return 0


def cmd_diagnostics(args):
    report = run_diagnostics(_load_config(args))
    print(json.dumps({"per_n": report["per_n"]}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sievecred")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a generated truth")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bias", help="bias profile b(k), k_n, polished-tail check")
    _add_common(p)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--r0", type=int, default=2)
    p.add_argument("--k0", type=int, default=2)
    p.add_argument("--tau", type=float, default=0.5)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("mmle", help="marginal likelihood table and the MMLE")
    _add_common(p)
    p.set_defaults(func=cmd_mmle)

    p = sub.add_parser("posterior", help="posterior draws and sampler diagnostics")
    _add_common(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("credible", help="build a credible ball and check coverage")
    _add_common(p)
    p.add_argument("--mode", default="hierarchical", choices=["hierarchical", "empirical"])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--L", type=float, default=2.0)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.set_defaults(func=cmd_credible)

    for name, fn in (
        ("coverage", cmd_coverage),
        ("negative", cmd_negative),
        ("rate", cmd_rate),
        ("diagnostics", cmd_diagnostics),
    ):
        p = sub.add_parser(name, help=f"run the {name} experiment from a config")
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
