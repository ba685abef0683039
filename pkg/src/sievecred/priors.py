"""Sieve priors: a hyperprior on the dimension k and conditional priors on Theta(k).

The hyperprior is geometric or Poisson restricted to {1, ..., k_cap} and
renormalized. Conditional priors are either an iid product of a base density g
(gaussian or laplace, both inside the exponential tail envelope with q = 2 and
q = 1 respectively) or a Dirichlet on the simplex for histograms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, logsumexp


@dataclass(frozen=True)
class GSpec:
    base: str = "gaussian"
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.base not in ("gaussian", "laplace"):
            raise ValueError(f"unknown base density {self.base!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def tail_q(self) -> float:
        return 2.0 if self.base == "gaussian" else 1.0

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.base == "gaussian":
            return -0.5 * np.log(2.0 * np.pi * self.scale**2) - (x - self.location) ** 2 / (
                2.0 * self.scale**2
            )
        return -np.log(2.0 * self.scale) - np.abs(x - self.location) / self.scale


@dataclass(frozen=True)
class ConditionalPrior:
    kind: str  # "product" or "dirichlet"
    g: Optional[GSpec] = None
    alpha: float = 1.0
    alpha_rule: Optional[Callable[[int], np.ndarray]] = None

    def __post_init__(self):
        if self.kind == "product":
            if self.g is None:
                raise ValueError("product prior requires a GSpec")
        elif self.kind == "dirichlet":
            if self.alpha_rule is None and self.alpha <= 0:
                raise ValueError("dirichlet prior requires positive alpha")
        else:
            raise ValueError(f"unknown conditional prior kind {self.kind!r}")

    def alphas(self, k: int) -> np.ndarray:
        if self.alpha_rule is not None:
            return np.asarray(self.alpha_rule(k), dtype=float)
        return np.full(k, self.alpha)


def gaussian_prior(location: float = 0.0, scale: float = 1.0) -> ConditionalPrior:
    return ConditionalPrior("product", g=GSpec("gaussian", location, scale))


def laplace_prior(location: float = 0.0, scale: float = 1.0) -> ConditionalPrior:
    return ConditionalPrior("product", g=GSpec("laplace", location, scale))


def dirichlet_prior(alpha: float = 1.0, alpha_rule=None) -> ConditionalPrior:
    return ConditionalPrior("dirichlet", alpha=alpha, alpha_rule=alpha_rule)


def log_prior_density(prior: ConditionalPrior, theta) -> float:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if prior.kind == "product":
        return float(prior.g.logpdf(theta).sum())
    if np.any(theta < 0) or abs(float(theta.sum()) - 1.0) > 1e-10:
        raise ValueError("dirichlet density requires a point on the simplex")
    alphas = prior.alphas(theta.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(alphas == 1.0, 0.0, (alphas - 1.0) * np.log(theta))
    if np.any(np.isnan(terms)):
        return -np.inf
    norm = gammaln(alphas.sum()) - gammaln(alphas).sum()
    return float(norm + terms.sum())


def log_prior_rows(prior: ConditionalPrior, thetas: np.ndarray) -> np.ndarray:
    """log_prior_density applied to each row of a (count, k) array."""
    thetas = np.asarray(thetas, dtype=float)
    if prior.kind == "product":
        return prior.g.logpdf(thetas).sum(axis=1)
    alphas = prior.alphas(thetas.shape[1])
    norm = gammaln(alphas.sum()) - gammaln(alphas).sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(alphas == 1.0, 0.0, (alphas - 1.0) * np.log(thetas))
    out = norm + terms.sum(axis=1)
    out[np.isnan(out)] = -np.inf
    return out


def sample_prior(prior: ConditionalPrior, k: int, count: int, seed) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if prior.kind == "product":
        g = prior.g
        if g.base == "gaussian":
            return rng.normal(g.location, g.scale, size=(count, k))
        return rng.laplace(g.location, g.scale, size=(count, k))
    return rng.dirichlet(prior.alphas(k), size=count)


@dataclass(frozen=True)
class HyperPrior:
    kind: str  # "geometric" or "poisson"
    param: float
    k_cap: int
    _log_pmf: np.ndarray = field(repr=False)

    def log_mass(self, k: int) -> float:
        if not 1 <= k <= self.k_cap:
            raise ValueError(f"k={k} outside the hyperprior support 1..{self.k_cap}")
        return float(self._log_pmf[k - 1])

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.k_cap + 1)


def hyper_prior(kind: str, param: float, k_cap: int) -> HyperPrior:
    if k_cap < 1:
        raise ValueError("k_cap must be >= 1")
    ks = np.arange(1, k_cap + 1, dtype=float)
    if kind == "geometric":
        if not 0.0 < param < 1.0:
            raise ValueError("geometric parameter must lie in (0, 1)")
        raw = np.log(param) + (ks - 1.0) * np.log1p(-param)
    elif kind == "poisson":
        if param <= 0:
            raise ValueError("poisson rate must be positive")
        raw = ks * np.log(param) - gammaln(ks + 1.0) - param
    else:
        raise ValueError(f"unknown hyperprior kind {kind!r}")
    return HyperPrior(kind=kind, param=param, k_cap=k_cap, _log_pmf=raw - logsumexp(raw))


def hyper_log_mass(hp: HyperPrior, k: int) -> float:
    return hp.log_mass(k)


def default_k_cap(n: int, exponent: float = 0.4) -> int:
    return max(1, math.ceil(n**exponent))


@dataclass(frozen=True)
class SievePrior:
    hyper: HyperPrior
    conditional: ConditionalPrior


def prior_from_config(config: dict, family_tag: str, n: int) -> SievePrior:
    """Build a SievePrior from the JSON config schema.

    {"hyper": {"kind": "geometric", "p": 0.5},
     "conditional": {"kind": "gaussian", "scale": 1.0},
     "k_cap_exponent": 0.4}
    """
    config = dict(config or {})
    hyper_cfg = dict(config.get("hyper", {"kind": "geometric", "p": 0.5}))
    kind = hyper_cfg.pop("kind", "geometric")
    param = hyper_cfg.get("p", hyper_cfg.get("lambda", 0.5))
    k_cap = config.get("k_cap", default_k_cap(n, config.get("k_cap_exponent", 0.4)))
    cond_cfg = dict(config.get("conditional", {}))
    cond_kind = cond_cfg.get("kind", "dirichlet" if family_tag == "histogram" else "gaussian")
    if cond_kind == "dirichlet":
        conditional = dirichlet_prior(alpha=cond_cfg.get("alpha", 1.0))
    elif cond_kind in ("gaussian", "laplace"):
        g = GSpec(cond_kind, cond_cfg.get("location", 0.0), cond_cfg.get("scale", 1.0))
        conditional = ConditionalPrior("product", g=g)
    else:
        raise ValueError(f"unknown conditional prior {cond_kind!r}")
    return SievePrior(hyper=hyper_prior(kind, param, k_cap), conditional=conditional)


def g_envelope_constants(g: GSpec) -> dict:
    """Constants G1..G4 with G1 e^{-G2 |x|^q} <= g(x) <= G3 e^{-G4 |x|^q}.

    For centered densities the bounds are exact; a nonzero location is absorbed
    into the constants via |x - mu|^q <=> |x|^q comparisons.
    """
    mu, s, q = g.location, g.scale, g.tail_q
    if g.base == "gaussian":
        peak = 1.0 / math.sqrt(2.0 * math.pi * s**2)
        if mu == 0.0:
            return {"G1": peak, "G2": 1.0 / (2 * s**2), "G3": peak, "G4": 1.0 / (2 * s**2), "q": q}
        # (x-mu)^2 <= 2x^2 + 2mu^2 and (x-mu)^2 >= x^2/2 - mu^2
        return {
            "G1": peak * math.exp(-(mu**2) / s**2),
            "G2": 1.0 / s**2,
            "G3": peak * math.exp(mu**2 / (2 * s**2)),
            "G4": 1.0 / (4 * s**2),
            "q": q,
        }
    peak = 1.0 / (2.0 * s)
    shift = math.exp(abs(mu) / s)
    return {"G1": peak / shift, "G2": 1.0 / s, "G3": peak * shift, "G4": 1.0 / s, "q": q}


def check_g_envelope(g: GSpec, xs=None) -> bool:
    if xs is None:
        xs = np.linspace(-20.0, 20.0, 4001)
    consts = g_envelope_constants(g)
    log_g = g.logpdf(xs)
    lower = np.log(consts["G1"]) - consts["G2"] * np.abs(xs) ** consts["q"]
    upper = np.log(consts["G3"]) - consts["G4"] * np.abs(xs) ** consts["q"]
    return bool(np.all(lower <= log_g + 1e-12) and np.all(log_g <= upper + 1e-12))


def hyper_envelope_report(hp: HyperPrior) -> dict:
    """Fitted constants for e^{-c2 k log k} <~ pi_k(k) <~ e^{-c1 k} over the support."""
    ks = hp.support.astype(float)
    log_pmf = hp._log_pmf
    c1 = float(np.min(-log_pmf / ks))
    big = ks >= 2
    c2 = float(np.max(-log_pmf[big] / (ks[big] * np.log(ks[big])))) if big.any() else 0.0
    return {"c1": c1, "c2": c2, "valid": bool(c1 > 0 and np.isfinite(c2))}
