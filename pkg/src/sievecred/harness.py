"""End-to-end Monte Carlo experiments: coverage, negative result, rates, diagnostics.

A run fixes one truth (generated from the base seed), simulates `replicates`
datasets (replicate r uses seed base + r, replicates are 1-based), runs the
requested inference mode(s) once per replicate, and evaluates coverage for the
whole inflation grid post hoc from the stored (distance, radius) pairs.
Replicates can execute in a process pool; aggregation folds results in
replicate order so reports are byte-identical for a fixed config and seed.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bias import BiasProfile, PolishedTailParams, bias_profile, check_polished_tail, tradeoff_set
from .credible import CoverageRecord, wilson_interval
from .families import make_family
from .inference import (
    McmcSettings,
    k_posterior,
    marginal_table,
    mmle,
    posterior_center,
    sample_given_k,
    sample_hierarchical,
)
from .priors import prior_from_config
from .truths import generate_truth

ERROR_BUDGET = 0.02


@dataclass
class ExperimentConfig:
    family: str = "regression"
    beta: float = 1.0
    L0: float = 1.0
    generator: str = "self_similar"
    truth_coefficients: tuple = ()  # used when generator == "explicit"
    truth_length: int = 4096
    n_grid: tuple = (2000,)
    replicates: int = 200
    alpha: float = 0.05
    L_grid: tuple = (0.5, 1.0, 2.0, 4.0)
    mode: str = "both"  # hierarchical | empirical | both
    prior: dict = field(default_factory=dict)
    seed: int = 20260808
    out_dir: Optional[str] = None
    threads: int = 1
    draws: int = 1500
    mcmc_burn_in: int = 800
    mcmc_thin: int = 1
    basis: str = "trigonometric"
    marginal_method: str = "auto"
    m_n_exponent: float = -0.25
    control_L: float = 2.0
    tradeoff_M: tuple = (2, 4, 8)
    tail_r0: int = 2
    tail_k0: int = 2
    tail_tau: float = 0.5

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.L_grid = tuple(float(L) for L in self.L_grid)
        self.tradeoff_M = tuple(self.tradeoff_M)
        self.truth_coefficients = tuple(float(c) for c in self.truth_coefficients)
        if self.generator == "explicit" and not self.truth_coefficients:
            raise ValueError("explicit truths need truth_coefficients")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if list(self.n_grid) != sorted(self.n_grid):
            raise ValueError("n_grid must be ascending")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.mode not in ("hierarchical", "empirical", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def modes(self) -> tuple:
        return ("hierarchical", "empirical") if self.mode == "both" else (self.mode,)

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def cache_key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _Context:
    """Per-(config, n) state rebuilt inside each worker process."""

    def __init__(self, cfg: ExperimentConfig, n: int):
        self.cfg = cfg
        self.n = n
        self.family = make_family(cfg.family, n=n, basis_tag=cfg.basis)
        self.truth = generate_truth(
            cfg.generator,
            cfg.beta,
            cfg.L0,
            length=cfg.truth_length,
            seed=cfg.seed,
            family_tag=cfg.family,
            basis_tag=cfg.basis,
            coefficients=cfg.truth_coefficients or None,
        )
        self.prior = prior_from_config(cfg.prior, cfg.family, n)
        self.mcmc = McmcSettings(burn_in=cfg.mcmc_burn_in, thin=cfg.mcmc_thin)
        self._profile: Optional[BiasProfile] = None
        self._tradeoff: dict[float, set] = {}
        self._tail = "unset"

    @property
    def profile(self) -> BiasProfile:
        if self._profile is None:
            self._profile = bias_profile(self.truth, self.family, self.prior.hyper.k_cap, self.n)
        return self._profile

    def tradeoff(self, M: float) -> set:
        if M not in self._tradeoff:
            if self.profile.k_n is None:
                self._tradeoff[M] = set()
            else:
                self._tradeoff[M] = tradeoff_set(self.profile, M)
        return self._tradeoff[M]

    def tail_verdict(self):
        if self._tail != "unset":
            return self._tail
        cfg = self.cfg
        params = PolishedTailParams(r0=cfg.tail_r0, k0=cfg.tail_k0, tau=cfg.tail_tau)
        profile = self.profile
        try:
            if profile.k_n is not None and profile.k_n * params.r0 > profile.k_max:
                k_max = min(profile.k_n * params.r0, getattr(self.family, "max_k", 10**9))
                profile = bias_profile(self.truth, self.family, k_max, self.n)
            report = check_polished_tail(profile, params)
            self._tail = {"holds": report.holds, "first_violation": report.first_violation}
        except ValueError as err:
            self._tail = {"holds": None, "error": str(err)}
        return self._tail


def _run_replicate(ctx: _Context, rep_id: int) -> dict:
    cfg = ctx.cfg
    data = ctx.family.simulate(ctx.truth, ctx.n, cfg.seed + rep_id)
    table = marginal_table(
        ctx.family, ctx.prior, data, method=cfg.marginal_method, seed=[cfg.seed, rep_id, 1]
    )
    truth_emb = ctx.family.truth_embedding(ctx.truth)
    metric = ctx.family.metric()
    modes_out = {}
    for mode in cfg.modes:
        if mode == "empirical":
            k_hat = mmle(table)
            draws = sample_given_k(
                ctx.family,
                ctx.prior.conditional,
                data,
                k_hat,
                cfg.draws,
                [cfg.seed, rep_id, 2],
                mcmc=ctx.mcmc,
            )
            k_sel = k_hat
            mass = None
        else:
            draws = sample_hierarchical(
                ctx.family,
                ctx.prior,
                data,
                cfg.draws,
                [cfg.seed, rep_id, 3],
                mcmc=ctx.mcmc,
                table=table,
            )
            kpost = k_posterior(table, ctx.prior.hyper)
            k_sel = kpost.mode()
            mass = {str(M): kpost.set_mass(ctx.tradeoff(M)) for M in cfg.tradeoff_M}
        center = posterior_center(draws, ctx.family)
        distances = ctx.family.draw_distances(draws, center)
        rank = min(max(math.ceil((1.0 - cfg.alpha) * distances.size), 1), distances.size)
        r_alpha = float(np.partition(distances, rank - 1)[rank - 1])
        d = float(metric.distance(truth_emb, ctx.family.center_embedding(center)))
        modes_out[mode] = {
            "k": int(k_sel),
            "r_alpha": r_alpha,
            "d": d,
            "in_K": {str(M): bool(k_sel in ctx.tradeoff(M)) for M in cfg.tradeoff_M},
            "mass_K": mass,
        }
    return {"replicate_id": rep_id, "n": ctx.n, "modes": modes_out, "error": None}


_WORKER_CTX: dict = {}


def _worker(cfg_key: str, n: int, rep_id: int) -> dict:
    key = (cfg_key, n)
    ctx = _WORKER_CTX.get(key)
    if ctx is None:
        cfg = ExperimentConfig.from_dict(json.loads(cfg_key))
        ctx = _Context(cfg, n)
        _WORKER_CTX.clear()
        _WORKER_CTX[key] = ctx
    try:
        return _run_replicate(ctx, rep_id)
    except Exception as err:  # recorded, excluded, budgeted
        return {"replicate_id": rep_id, "n": n, "modes": {}, "error": f"{type(err).__name__}: {err}"}


def _collect_replicates(cfg: ExperimentConfig) -> list[dict]:
    jobs = [(n, rep) for n in cfg.n_grid for rep in range(1, cfg.replicates + 1)]
    cfg_key = cfg.cache_key()
    if cfg.threads <= 1:
        results = []
        for n, rep in jobs:
            results.append(_worker(cfg_key, n, rep))
    else:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [pool.submit(_worker, cfg_key, n, rep) for n, rep in jobs]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: (r["n"], r["replicate_id"]))
    errors = [r for r in results if r["error"] is not None]
    if len(errors) > ERROR_BUDGET * len(results):
        raise RuntimeError(
            f"{len(errors)}/{len(results)} replicates failed, exceeding the "
            f"{ERROR_BUDGET:.0%} budget; first: {errors[0]['error']}"
        )
    return results


@dataclass
class CoverageReport:
    op: str
    config: dict
    cells: list
    rows: list
    errors: list
    extras: dict = field(default_factory=dict)

    def cell(self, **query) -> dict:
        for cell in self.cells:
            if all(cell.get(k) == v for k, v in query.items()):
                return cell
        raise KeyError(f"no cell matching {query}")

    def records(self, **query) -> list[CoverageRecord]:
        out = []
        for row in self.rows:
            if all(row.get(k) == v for k, v in query.items()):
                out.append(
                    CoverageRecord(
                        replicate_id=row["replicate_id"],
                        covered=row["covered"],
                        d_truth_center=row["d_truth_center"],
                        r_alpha=row["r_alpha"],
                        inflation=row["inflation"],
                        k_hat=row["k_hat"],
                        diameter_proxy=row["diameter"],
                    )
                )
        return out

    def to_json(self) -> str:
        payload = {
            "op": self.op,
            "config": self.config,
            "cells": self.cells,
            "errors": self.errors,
            **self.extras,
        }
        return json.dumps(payload, sort_keys=True)

    def write(self, out_dir) -> dict:
        os.makedirs(out_dir, exist_ok=True)
        json_path = os.path.join(out_dir, f"{self.op}_report.json")
        csv_path = os.path.join(out_dir, f"{self.op}_replicates.csv")
        with open(json_path, "w") as fh:
            fh.write(self.to_json())
        columns = [
            "n",
            "mode",
            "L",
            "replicate_id",
            "covered",
            "d_truth_center",
            "r_alpha",
            "inflation",
            "k_hat",
            "diameter",
        ]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in self.rows:
                writer.writerow([_csv_value(row[c]) for c in columns])
        return {"json": json_path, "csv": csv_path}


def _csv_value(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _arm_rows_and_cells(cfg: ExperimentConfig, results: list[dict], arms) -> tuple[list, list]:
    """arms: list of (mode, arm_label, L_value, inflation_by_n)."""
    rows, cells = [], []
    for n in cfg.n_grid:
        per_n = [r for r in results if r["n"] == n and r["error"] is None]
        for mode, label, L_value, inflation_fn in arms:
            inflation = inflation_fn(n)
            covered_flags, diam, khist = [], [], {}
            in_k = {str(M): [] for M in cfg.tradeoff_M}
            mass_k = {str(M): [] for M in cfg.tradeoff_M}
            for r in per_n:
                m = r["modes"].get(mode)
                if m is None:
                    continue
                covered = m["d"] <= inflation * m["r_alpha"]
                covered_flags.append(covered)
                diam.append(2.0 * m["r_alpha"])
                khist[m["k"]] = khist.get(m["k"], 0) + 1
                for M in cfg.tradeoff_M:
                    in_k[str(M)].append(m["in_K"][str(M)])
                    if m["mass_K"] is not None:
                        mass_k[str(M)].append(m["mass_K"][str(M)])
                rows.append(
                    {
                        "n": n,
                        "mode": label,
                        "L": L_value,
                        "replicate_id": r["replicate_id"],
                        "covered": covered,
                        "d_truth_center": m["d"],
                        "r_alpha": m["r_alpha"],
                        "inflation": inflation,
                        "k_hat": m["k"],
                        "diameter": 2.0 * m["r_alpha"],
                    }
                )
            used = len(covered_flags)
            coverage = float(np.mean(covered_flags)) if used else float("nan")
            ci_lo, ci_hi = wilson_interval(int(np.sum(covered_flags)), used)
            diam_arr = np.array(diam) if diam else np.array([np.nan])
            cells.append(
                {
                    "n": n,
                    "mode": label,
                    "L": L_value,
                    "coverage": coverage,
                    "ci_lo": ci_lo,
                    "ci_hi": ci_hi,
                    "mean_diam": float(np.mean(diam_arr)),
                    "diam_q10": float(np.quantile(diam_arr, 0.1)),
                    "diam_q50": float(np.quantile(diam_arr, 0.5)),
                    "diam_q90": float(np.quantile(diam_arr, 0.9)),
                    "k_hist": {str(k): khist[k] for k in sorted(khist)},
                    "frac_in_tradeoff": {
                        M: (float(np.mean(flags)) if flags else None) for M, flags in in_k.items()
                    },
                    "mean_mass_in_tradeoff": {
                        M: (float(np.mean(v)) if v else None) for M, v in mass_k.items()
                    },
                    "replicates_used": used,
                }
            )
    return rows, cells


def run_coverage(config: ExperimentConfig) -> CoverageReport:
    """Coverage and size over (n, L, mode) cells; inflation is L sqrt(log n)."""
    results = _collect_replicates(config)
    arms = []
    for mode in config.modes:
        for L in config.L_grid:
            arms.append((mode, mode, L, lambda n, L=L: L * math.sqrt(math.log(n))))
    rows, cells = _arm_rows_and_cells(config, results, arms)
    errors = [
        {"n": r["n"], "replicate_id": r["replicate_id"], "error": r["error"]}
        for r in results
        if r["error"] is not None
    ]
    report = CoverageReport("coverage", config.to_dict(), cells, rows, errors)
    if config.out_dir:
        report.write(config.out_dir)
    return report


def run_negative(config: ExperimentConfig) -> CoverageReport:
    """Empirical-Bayes coverage with vanishing inflation m_n sqrt(log n) vs a control arm."""
    if config.family != "regression":
        raise ValueError("the negative-result experiment is a regression experiment")
    cond = config.prior.get("conditional", {}).get("kind", "gaussian")
    if cond not in ("gaussian", "laplace"):
        raise ValueError("negative run requires a gaussian or laplace conditional prior")
    cfg = ExperimentConfig.from_dict({**config.to_dict(), "mode": "empirical"})
    results = _collect_replicates(cfg)
    expo = cfg.m_n_exponent

    def m_n(n):
        return math.log(n) ** expo

    arms = [
        ("empirical", "negative", float("nan"), lambda n: m_n(n) * math.sqrt(math.log(n))),
        ("empirical", "control", cfg.control_L, lambda n: cfg.control_L * math.sqrt(math.log(n))),
    ]
    rows, cells = _arm_rows_and_cells(cfg, results, arms)
    for row in rows:
        if row["mode"] == "negative":
            row["L"] = m_n(row["n"])
    for cell in cells:
        if cell["mode"] == "negative":
            cell["L"] = m_n(cell["n"])
            cell["m_n"] = m_n(cell["n"])
    errors = [
        {"n": r["n"], "replicate_id": r["replicate_id"], "error": r["error"]}
        for r in results
        if r["error"] is not None
    ]
    report = CoverageReport("negative", cfg.to_dict(), cells, rows, errors)
    if cfg.out_dir:
        report.write(cfg.out_dir)
    return report


def fit_rate(ns, mean_log_diams):
    """Least-squares slope of mean log diameter against log(n / log n)."""
    x = np.array([math.log(n / math.log(n)) for n in ns])
    y = np.asarray(mean_log_diams, dtype=float)
    if x.size < 3:
        raise ValueError("rate fit needs at least 3 sample sizes")
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = max(x.size - 2, 1)
    se = float(np.sqrt((resid @ resid) / dof / (xc @ xc)))
    return slope, se


def run_rate(config: ExperimentConfig) -> dict:
    """Fit the size rate: slope of mean log diameter vs log(n/log n)."""
    if len(config.n_grid) < 3:
        raise ValueError("rate check needs at least 3 sample sizes")
    mode = "empirical" if config.mode == "both" else config.mode
    cfg = ExperimentConfig.from_dict({**config.to_dict(), "mode": mode})
    results = _collect_replicates(cfg)
    points = []
    for n in cfg.n_grid:
        logs = [
            math.log(2.0 * r["modes"][mode]["r_alpha"])
            for r in results
            if r["n"] == n and r["error"] is None
        ]
        points.append({"n": n, "mean_log_diam": float(np.mean(logs)), "replicates": len(logs)})
    slope, se = fit_rate([p["n"] for p in points], [p["mean_log_diam"] for p in points])
    target = -cfg.beta / (1.0 + 2.0 * cfg.beta)
    report = {
        "op": "rate",
        "config": cfg.to_dict(),
        "mode": mode,
        "slope": slope,
        "stderr": se,
        "target": target,
        "points": points,
    }
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, "rate_report.json"), "w") as fh:
            fh.write(json.dumps(report, sort_keys=True))
    return report


def run_diagnostics(config: ExperimentConfig) -> dict:
    """Model-selection localization and the truth's tail diagnostics."""
    results = _collect_replicates(config)
    per_n = {}
    for n in config.n_grid:
        ctx = _Context(config, n)
        per_n[str(n)] = {
            "k_n": ctx.profile.k_n,
            "k_n_beyond_range": ctx.profile.beyond_range,
            "polished_tail": ctx.tail_verdict(),
            "tradeoff_sets": {str(M): sorted(ctx.tradeoff(M)) for M in config.tradeoff_M},
        }
    per_mode: dict = {}
    rows = []
    for r in results:
        if r["error"] is not None:
            continue
        for mode, m in r["modes"].items():
            stats = per_mode.setdefault(
                mode,
                {
                    "k_hist": {},
                    "in_K": {str(M): [] for M in config.tradeoff_M},
                    "mass_K": {str(M): [] for M in config.tradeoff_M},
                },
            )
            stats["k_hist"][m["k"]] = stats["k_hist"].get(m["k"], 0) + 1
            for M in config.tradeoff_M:
                stats["in_K"][str(M)].append(m["in_K"][str(M)])
                if m["mass_K"] is not None:
                    stats["mass_K"][str(M)].append(m["mass_K"][str(M)])
            rows.append(
                {
                    "n": r["n"],
                    "mode": mode,
                    "replicate_id": r["replicate_id"],
                    "k_hat": m["k"],
                    **{f"in_K_{M}": m["in_K"][str(M)] for M in config.tradeoff_M},
                }
            )
    mode_summaries = {}
    for mode, stats in per_mode.items():
        mode_summaries[mode] = {
            "k_hist": {str(k): stats["k_hist"][k] for k in sorted(stats["k_hist"])},
            "frac_in_tradeoff": {M: float(np.mean(v)) for M, v in stats["in_K"].items() if v},
            "mean_mass_in_tradeoff": {
                M: (float(np.mean(v)) if v else None) for M, v in stats["mass_K"].items()
            },
        }
    report = {
        "op": "diagnostics",
        "config": config.to_dict(),
        "per_n": per_n,
        "modes": mode_summaries,
        "errors": [
            {"n": r["n"], "replicate_id": r["replicate_id"], "error": r["error"]}
            for r in results
            if r["error"] is not None
        ],
    }
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        with open(os.path.join(config.out_dir, "diagnostics_report.json"), "w") as fh:
            fh.write(json.dumps(report, sort_keys=True))
        with open(os.path.join(config.out_dir, "diagnostics_replicates.csv"), "w", newline="") as fh:
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _csv_value(v) for k, v in row.items()})
    return report
