"""Marginal likelihoods m_n(k), the MMLE, the posterior over k, and samplers.

Exact routes: Gaussian linear-model evidence for regression with a gaussian
product prior, and the Dirichlet-multinomial formula for histograms. Everything
else goes through a Laplace approximation at the posterior mode, optionally
corrected by importance sampling with the Laplace Gaussian as proposal.
Within-model sampling is exact where conjugacy allows and otherwise uses
adaptive random-walk Metropolis preconditioned by the Laplace-mode Hessian.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from .families import CenterPoint, Dataset
from .mcmc import McmcSettings, adaptive_rwm
from .optimize import damped_newton
from .priors import (
    ConditionalPrior,
    SievePrior,
    log_prior_density,
    log_prior_rows,
    sample_prior,
)

_LOG2PI = float(np.log(2.0 * np.pi))

CONJUGATE_EXACT = "conjugate_exact"
DIRICHLET_EXACT = "dirichlet_exact"
LAPLACE_APPROX = "laplace_approx"
IMPORTANCE_SAMPLING = "importance_sampling"

_ABS_SMOOTHING = 1e-8  # softened |x| used only inside Newton for laplace priors


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


@dataclass
class MarginalLikelihoodTable:
    log_m: dict[int, float]
    method: dict[int, str]
    ess: dict[int, Optional[float]] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.log_m.items():
            if not np.isfinite(v):
                raise ValueError(f"non-finite log marginal likelihood at k={k}")

    @property
    def ks(self) -> list[int]:
        return sorted(self.log_m)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "log_m", "method", "ess"])
            for k in self.ks:
                ess = self.ess.get(k)
                writer.writerow([k, repr(self.log_m[k]), self.method[k], "" if ess is None else repr(ess)])


@dataclass
class PosteriorDraws:
    family_tag: str
    ks: np.ndarray
    blocks: dict[int, np.ndarray]
    weights: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ks = np.asarray(self.ks, dtype=int)
        sizes = sum(b.shape[0] for b in self.blocks.values())
        if sizes != self.ks.size:
            raise ValueError("block sizes do not match the k sequence")

    @property
    def count(self) -> int:
        return int(self.ks.size)

    def k_counts(self) -> dict[int, int]:
        ks, counts = np.unique(self.ks, return_counts=True)
        return {int(k): int(c) for k, c in zip(ks, counts)}


@dataclass
class KPosterior:
    log_mass: dict[int, float]

    def __post_init__(self):
        logs = np.array([self.log_mass[k] for k in sorted(self.log_mass)])
        norm = logsumexp(logs)
        self.log_mass = {k: float(self.log_mass[k] - norm) for k in sorted(self.log_mass)}

    def mass(self) -> dict[int, float]:
        return {k: float(np.exp(v)) for k, v in self.log_mass.items()}

    def mode(self) -> int:
        ks = sorted(self.log_mass)
        values = np.array([self.log_mass[k] for k in ks])
        return int(ks[int(np.argmax(values))])

    def set_mass(self, ks) -> float:
        inside = [self.log_mass[k] for k in ks if k in self.log_mass]
        if not inside:
            return 0.0
        return float(np.exp(logsumexp(np.array(inside))))


# ---------------------------------------------------------------------------
# exact evidence formulas


def _regression_conjugate(family, g, data: Dataset, k: int):
    """Posterior (mean, cholesky-of-precision) and evidence for gaussian priors."""
    tau2 = g.scale**2
    m0 = np.full(k, g.location)
    phi = family.design.phi(k)
    prec = phi.T @ phi + np.eye(k) / tau2
    b = phi.T @ data.y + m0 / tau2
    c = float(data.y @ data.y) + float(m0 @ m0) / tau2
    chol = np.linalg.cholesky(prec)
    half = np.linalg.solve(chol, b)
    mean = np.linalg.solve(chol.T, half)
    log_det = 2.0 * float(np.log(np.diag(chol)).sum())
    log_m = (
        -0.5 * data.n * _LOG2PI
        - k * np.log(g.scale)
        - 0.5 * log_det
        + 0.5 * (float(half @ half) - c)
    )
    return mean, chol, float(log_m)


def _dirichlet_log_m(family, prior: ConditionalPrior, data: Dataset, k: int) -> float:
    alphas = prior.alphas(k)
    counts = family.counts(data, k)
    log_m = (
        data.n * np.log(k)
        + gammaln(alphas + counts).sum()
        - gammaln(alphas.sum() + data.n)
        - gammaln(alphas).sum()
        + gammaln(alphas.sum())
    )
    return float(log_m)


# ---------------------------------------------------------------------------
# Laplace machinery for the non-conjugate routes


def _neg_log_post_parts(family, g, data: Dataset, k: int):
    """Callable theta -> (value, grad, hess) of -(loglik + logprior), unscaled."""
    tag = family.tag
    if tag == "regression":
        phi = family.design.phi(k)
        gram = phi.T @ phi
        phi_y = phi.T @ data.y
        yy = float(data.y @ data.y)
        const = -0.5 * data.n * _LOG2PI

        def lik_parts(theta):
            grad = phi_y - gram @ theta
            value = const - 0.5 * (yy - 2.0 * float(theta @ phi_y) + float(theta @ gram @ theta))
            return value, grad, -gram

    elif tag == "loglinear":
        t_stats = family.suff_stats(data, k)
        n = data.n

        def lik_parts(theta):
            c, mean, cov = family.log_norm_parts(theta)
            value = float(theta @ t_stats) - n * c
            return value, t_stats - n * mean, -n * cov

    elif tag == "classification":
        phi = family.design.phi(k)
        y = data.y

        def lik_parts(theta):
            f = phi @ theta
            q = expit(f)
            value = float(y @ f - np.logaddexp(0.0, f).sum())
            grad = phi.T @ (y - q)
            hess = -(phi * (q * (1.0 - q))[:, None]).T @ phi
            return value, grad, hess

    else:
        raise ValueError(f"laplace route not available for family {tag!r}")

    if g.base == "gaussian":
        s2 = g.scale**2

        def prior_parts(theta):
            d = theta - g.location
            value = -0.5 * k * np.log(2.0 * np.pi * s2) - 0.5 * float(d @ d) / s2
            return value, -d / s2, -np.eye(k) / s2

    else:

        def prior_parts(theta):
            d = theta - g.location
            soft = np.sqrt(d**2 + _ABS_SMOOTHING**2)
            value = -k * np.log(2.0 * g.scale) - float(soft.sum()) / g.scale
            grad = -(d / soft) / g.scale
            hess = -np.diag(_ABS_SMOOTHING**2 / soft**3) / g.scale
            return value, grad, hess

    def parts(theta):
        lv, lg, lh = lik_parts(theta)
        pv, pg, ph = prior_parts(theta)
        return -(lv + pv), -(lg + pg), -(lh + ph)

    return parts


def _laplace_fit(family, g, data: Dataset, k: int):
    """Posterior mode, neg-hessian cholesky and Laplace log evidence."""
    parts = _neg_log_post_parts(family, g, data, k)
    scale = 1.0 / max(data.n, 1)

    def scaled(theta):
        v, gr, h = parts(theta)
        return v * scale, gr * scale, h * scale

    mode, info = damped_newton(scaled, np.zeros(k), tol=1e-9)
    value, _, hess = parts(mode)
    chol = np.linalg.cholesky(hess)
    log_det = 2.0 * float(np.log(np.diag(chol)).sum())
    loglik = family.make_loglik(data, k)
    exact_value = loglik(mode) + log_prior_density(ConditionalPrior("product", g=g), mode)
    log_m = exact_value + 0.5 * k * _LOG2PI - 0.5 * log_det
    return mode, chol, float(log_m), info


def _importance_product(family, g, data, k, mode, chol, particles, ess_floor, rng):
    """IS evidence using N(mode, H^-1 scale^2) as proposal; retries once wider."""
    prior = ConditionalPrior("product", g=g)
    loglik = family.make_loglik_batch(data, k)
    log_det_h = 2.0 * float(np.log(np.diag(chol)).sum())
    for scale in (1.0, 2.0):
        z = rng.standard_normal((particles, k))
        thetas = mode + scale * np.linalg.solve(chol.T, z.T).T
        log_q = (
            0.5 * log_det_h
            - k * np.log(scale)
            - 0.5 * k * _LOG2PI
            - 0.5 * (z**2).sum(axis=1)
        )
        log_w = loglik(thetas) + log_prior_rows(prior, thetas) - log_q
        log_m, ess, se = _log_mean_weights(log_w)
        if ess >= ess_floor:
            return log_m, ess, se
    raise RuntimeError(f"importance sampling ESS {ess:.1f} below floor {ess_floor}")


def _importance_dirichlet(family, prior, data, k, particles, ess_floor, rng):
    """IS evidence for histograms with a flattened-posterior Dirichlet proposal."""
    alphas = prior.alphas(k)
    counts = family.counts(data, k)
    loglik = family.make_loglik_batch(data, k)
    for flatten in (0.5, 0.25):
        nu = flatten * (alphas + counts) + (1.0 - flatten)
        thetas = rng.dirichlet(nu, size=particles)
        proposal = ConditionalPrior("dirichlet", alpha_rule=lambda kk, nu=nu: nu)
        log_w = loglik(thetas) + log_prior_rows(prior, thetas) - log_prior_rows(proposal, thetas)
        log_m, ess, se = _log_mean_weights(log_w)
        if ess >= ess_floor:
            return log_m, ess, se
    raise RuntimeError(f"importance sampling ESS {ess:.1f} below floor {ess_floor}")


def _log_mean_weights(log_w: np.ndarray):
    log_w = np.asarray(log_w, dtype=float)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise RuntimeError("all importance weights vanished")
    m = float(log_w[finite].max())
    w = np.zeros_like(log_w)
    w[finite] = np.exp(log_w[finite] - m)
    mean = w.mean()
    log_m = m + np.log(mean)
    ess = float(w.sum() ** 2 / (w**2).sum())
    se = float(w.std(ddof=1) / (np.sqrt(w.size) * mean))
    return float(log_m), ess, se


# ---------------------------------------------------------------------------
# public operations


def marginal_likelihood(
    family,
    prior: ConditionalPrior,
    data: Dataset,
    k: int,
    method: str = "auto",
    seed=0,
    is_particles: int = 2048,
    ess_floor: float = 64.0,
):
    """log m_n(k) with the route taken and diagnostics.

    The e^{-l_n(theta_0)} normalization used in proofs is omitted: it cancels in
    the argmax and in the posterior over k.
    """
    if method == "auto":
        if family.tag == "regression" and prior.kind == "product" and prior.g.base == "gaussian":
            method = "conjugate"
        elif family.tag == "histogram" and prior.kind == "dirichlet":
            method = "dirichlet"
        elif prior.kind == "product":
            method = "laplace"
        else:
            raise ValueError(f"no marginal likelihood route for {family.tag} + {prior.kind}")
    if data.n == 0:
        name = {
            "conjugate": CONJUGATE_EXACT,
            "dirichlet": DIRICHLET_EXACT,
            "laplace": LAPLACE_APPROX,
            "importance": IMPORTANCE_SAMPLING,
        }[method]
        return 0.0, name, {}
    if method == "conjugate":
        _, _, log_m = _regression_conjugate(family, prior.g, data, k)
        return log_m, CONJUGATE_EXACT, {}
    if method == "dirichlet":
        return _dirichlet_log_m(family, prior, data, k), DIRICHLET_EXACT, {}
    if method == "laplace":
        _, _, log_m, info = _laplace_fit(family, prior.g, data, k)
        return log_m, LAPLACE_APPROX, {"newton": info}
    if method == "importance":
        rng = np.random.default_rng(_seed_list(seed))
        if family.tag == "histogram":
            log_m, ess, se = _importance_dirichlet(
                family, prior, data, k, is_particles, ess_floor, rng
            )
        else:
            mode, chol, _, _ = _laplace_fit(family, prior.g, data, k)
            log_m, ess, se = _importance_product(
                family, prior.g, data, k, mode, chol, is_particles, ess_floor, rng
            )
        return log_m, IMPORTANCE_SAMPLING, {"ess": ess, "se_log_m": se}
    raise ValueError(f"unknown method {method!r}")


def marginal_table(
    family,
    prior: SievePrior,
    data: Dataset,
    method: str = "auto",
    seed=0,
    is_particles: int = 2048,
    ess_floor: float = 64.0,
) -> MarginalLikelihoodTable:
    log_m, methods, ess = {}, {}, {}
    base = _seed_list(seed)
    for k in range(1, prior.hyper.k_cap + 1):
        value, used, diag = marginal_likelihood(
            family,
            prior.conditional,
            data,
            k,
            method=method,
            seed=base + [k],
            is_particles=is_particles,
            ess_floor=ess_floor,
        )
        log_m[k] = value
        methods[k] = used
        ess[k] = diag.get("ess")
    return MarginalLikelihoodTable(log_m=log_m, method=methods, ess=ess)


def mmle(table: MarginalLikelihoodTable) -> int:
    """argmax_k log m(k), ties broken to the smallest k."""
    ks = table.ks
    values = np.array([table.log_m[k] for k in ks])
    return int(ks[int(np.argmax(values))])


def k_posterior(table: MarginalLikelihoodTable, hyper) -> KPosterior:
    return KPosterior({k: hyper.log_mass(k) + table.log_m[k] for k in table.ks})


def sample_given_k(
    family,
    prior: ConditionalPrior,
    data: Dataset,
    k: int,
    count: int,
    seed,
    mcmc: Optional[McmcSettings] = None,
) -> PosteriorDraws:
    """Exact draws where conjugacy allows, preconditioned RWM otherwise."""
    rng = np.random.default_rng(_seed_list(seed))
    ks = np.full(count, k, dtype=int)
    if data.n == 0:
        block = sample_prior(prior, k, count, rng)
        diag = {"sampler": "prior"}
    elif family.tag == "regression" and prior.kind == "product" and prior.g.base == "gaussian":
        mean, chol, _ = _regression_conjugate(family, prior.g, data, k)
        z = rng.standard_normal((count, k))
        block = mean + np.linalg.solve(chol.T, z.T).T
        diag = {"sampler": "conjugate"}
    elif family.tag == "histogram" and prior.kind == "dirichlet":
        block = rng.dirichlet(prior.alphas(k) + family.counts(data, k), size=count)
        diag = {"sampler": "dirichlet"}
    elif prior.kind == "product":
        settings = mcmc or McmcSettings()
        settings = replace(settings, keep=count)
        mode, chol, _, _ = _laplace_fit(family, prior.g, data, k)
        # proposal covariance = inverse curvature at the mode
        cov_chol = np.linalg.inv(chol).T
        loglik = family.make_loglik(data, k)

        def log_target(theta):
            return loglik(theta) + log_prior_density(prior, theta)

        block, diag = adaptive_rwm(log_target, mode, cov_chol, settings, rng)
        diag["sampler"] = "rwm"
    else:
        raise ValueError(f"no sampler for {family.tag} + {prior.kind}")
    return PosteriorDraws(family.tag, ks, {k: block}, diagnostics=diag)


def sample_hierarchical(
    family,
    prior: SievePrior,
    data: Dataset,
    count: int,
    seed,
    mcmc: Optional[McmcSettings] = None,
    table: Optional[MarginalLikelihoodTable] = None,
    method: str = "auto",
) -> PosteriorDraws:
    """Composition sampling: k from the k-posterior, then theta given k."""
    base = _seed_list(seed)
    if table is None:
        table = marginal_table(family, prior, data, method=method, seed=base + [0])
    kpost = k_posterior(table, prior.hyper)
    support = np.array(sorted(kpost.log_mass))
    probs = np.array([np.exp(kpost.log_mass[k]) for k in support])
    probs /= probs.sum()
    rng = np.random.default_rng(base + [104729])
    ks = rng.choice(support, size=count, p=probs)
    exact = (
        data.n == 0
        or (family.tag == "regression" and prior.conditional.kind == "product"
            and prior.conditional.g.base == "gaussian")
        or (family.tag == "histogram" and prior.conditional.kind == "dirichlet")
    )
    min_chain = 1 if exact else 256  # short MCMC chains mix and diagnose poorly
    blocks: dict[int, np.ndarray] = {}
    samplers = {}
    for k in np.unique(ks):
        c_k = int((ks == k).sum())
        child = sample_given_k(
            family, prior.conditional, data, int(k), max(c_k, min_chain),
            base + [int(k)], mcmc=mcmc,
        )
        block = child.blocks[int(k)]
        if block.shape[0] > c_k:
            idx = np.linspace(0, block.shape[0] - 1, c_k).round().astype(int)
            block = block[idx]
        blocks[int(k)] = block
        samplers[int(k)] = child.diagnostics
    diagnostics = {"k_posterior": kpost.mass(), "samplers": samplers}
    return PosteriorDraws(family.tag, ks, blocks, diagnostics=diagnostics)


def posterior_center(draws: PosteriorDraws, family) -> CenterPoint:
    """Posterior mean in the family's natural embedding."""
    if draws.count == 0:
        raise ValueError("no draws")
    return family.center(draws)
