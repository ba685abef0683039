"""Adaptive sieve-prior Bayesian inference with credible-ball coverage experiments."""

from .basis import DesignGrid, basis_matrix, eval_series, midpoint_design
from .bias import (
    BiasProfile,
    PolishedTailParams,
    bias_profile,
    check_bias_sandwich,
    check_polished_tail,
    l2_bias_profile,
    project,
    tradeoff_set,
)
from .credible import (
    CredibleBall,
    CoverageRecord,
    build_ball,
    covers,
    credible_radius,
    diameter_proxy,
    wilson_interval,
)
from .families import CenterPoint, Dataset, make_family
from .harness import (
    CoverageReport,
    ExperimentConfig,
    fit_rate,
    run_coverage,
    run_diagnostics,
    run_negative,
    run_rate,
)
from .inference import (
    KPosterior,
    MarginalLikelihoodTable,
    PosteriorDraws,
    k_posterior,
    marginal_likelihood,
    marginal_table,
    mmle,
    posterior_center,
    sample_given_k,
    sample_hierarchical,
)
from .mcmc import AdaptationError, McmcSettings, adaptive_rwm
from .metrics import SemiMetric, hellinger_hist_vs_density, hellinger_histograms
from .priors import (
    ConditionalPrior,
    GSpec,
    HyperPrior,
    SievePrior,
    default_k_cap,
    dirichlet_prior,
    gaussian_prior,
    hyper_log_mass,
    hyper_prior,
    laplace_prior,
    log_prior_density,
    prior_from_config,
    sample_prior,
)
from .quadrature import DEFAULT_RULE, QuadratureRule, gauss_legendre_rule
from .truths import TruthSpec, generate_truth, sobolev_norm_sq, truth_from_json, truth_to_json

__version__ = "0.1.0"
