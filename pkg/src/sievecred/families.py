"""The four observation models: simulation, likelihoods, projections, embeddings.

Each family bundles the parameterization theta -> observable, a simulator for
data from a truth, exact log-likelihoods, the projection of a truth onto the
k-dimensional model, and the semi-metric in which credible balls are built.
Density families (histogram, log-linear) share a fixed quadrature grid; design
families (regression, classification) are bound to a midpoint design of size n.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .basis import DesignGrid, basis_matrix, eval_series, midpoint_design
from .metrics import SemiMetric, hellinger_hist_vs_density, hist_cell_integrals
from .optimize import damped_newton
from .quadrature import DEFAULT_RULE, QuadratureRule
from .truths import TruthSpec

FAMILY_TAGS = ("regression", "histogram", "loglinear", "classification")

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Dataset:
    family_tag: str
    y: np.ndarray
    design: Optional[DesignGrid]
    n: int
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            xs = self.design.points if self.design is not None else [""] * self.n
            for x, y in zip(xs, self.y):
                writer.writerow([x if x == "" else repr(float(x)), repr(float(y))])


@dataclass(frozen=True)
class CenterPoint:
    """A posterior summary in the family's natural embedding.

    kind 'coefficients': padded coefficient vector (regression).
    kind 'density': density values on the quadrature grid (histogram, log-linear).
    kind 'probability': success probabilities on the design (classification).
    """

    family_tag: str
    kind: str
    values: np.ndarray
    hist_k: Optional[int] = None
    hist_theta: Optional[np.ndarray] = None


def _simplex_check(theta: np.ndarray):
    if np.any(theta < 0):
        raise ValueError("histogram parameter has negative entries")
    if abs(float(theta.sum()) - 1.0) > 1e-8:
        raise ValueError("histogram parameter does not sum to one")


def _inverse_cdf_sample(density_values: np.ndarray, grid: np.ndarray, n: int, rng):
    # piecewise-linear CDF table, inverted by interpolation
    increments = 0.5 * (density_values[1:] + density_values[:-1]) * np.diff(grid)
    cdf = np.concatenate([[0.0], np.cumsum(increments)])
    cdf /= cdf[-1]
    return np.interp(rng.random(n), cdf, grid)


class Regression:
    """Fixed-design Gaussian regression, unit noise."""

    tag = "regression"

    def __init__(self, n: int, basis_tag: str = "trigonometric", k_max: int = 64,
                 design: Optional[DesignGrid] = None):
        self.design = design if design is not None else midpoint_design(
            n, basis_tag=basis_tag, k_design=k_max
        )
        self.basis_tag = self.design.basis_tag
        self._truth_cache: dict[bytes, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def max_k(self) -> int:
        return self.design.k_design

    def truth_embedding(self, truth: TruthSpec) -> np.ndarray:
        key = truth.coefficients.tobytes()
        if key not in self._truth_cache:
            self._truth_cache[key] = eval_series(
                self.design.points, truth.coefficients, self.basis_tag
            )
        return self._truth_cache[key]

    def simulate(self, truth: TruthSpec, n: int, seed: int) -> Dataset:
        if truth.family_tag != self.tag:
            raise ValueError(
                f"truth is for family {truth.family_tag!r}, not {self.tag!r}"
            )
        if n != self.n:
            raise ValueError(f"family was built for n={self.n}, got {n}")
        rng = np.random.default_rng(seed)
        y = self.truth_embedding(truth) + rng.standard_normal(n)
        return Dataset(self.tag, y, self.design, n, seed)

    def log_likelihood(self, theta, data: Dataset) -> float:
        if data.n == 0:
            return 0.0
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        r = data.y - self.design.phi(theta.size) @ theta
        return -0.5 * data.n * _LOG2PI - 0.5 * float(r @ r)

    def make_loglik(self, data: Dataset, k: int):
        if data.n == 0:
            return lambda theta: 0.0
        phi = self.design.phi(k)
        gram = phi.T @ phi
        phi_y = phi.T @ data.y
        yy = float(data.y @ data.y)
        const = -0.5 * data.n * _LOG2PI

        def loglik(theta):
            return const - 0.5 * (yy - 2.0 * float(theta @ phi_y) + float(theta @ gram @ theta))

        return loglik

    def make_loglik_batch(self, data: Dataset, k: int):
        if data.n == 0:
            return lambda thetas: np.zeros(thetas.shape[0])
        phi = self.design.phi(k)
        gram = phi.T @ phi
        phi_y = phi.T @ data.y
        yy = float(data.y @ data.y)
        const = -0.5 * data.n * _LOG2PI

        def loglik(thetas):
            quad = np.einsum("si,ij,sj->s", thetas, gram, thetas)
            return const - 0.5 * (yy - 2.0 * thetas @ phi_y + quad)

        return loglik

    def project(self, truth: TruthSpec, k: int) -> np.ndarray:
        phi = self.design.phi(k)
        f0 = self.truth_embedding(truth)
        try:
            return np.linalg.solve(phi.T @ phi, phi.T @ f0)
        except np.linalg.LinAlgError as err:
            raise ValueError(f"singular normal equations at k={k}") from err

    def bias_sq(self, truth: TruthSpec, k: int) -> float:
        f0 = self.truth_embedding(truth)
        r = f0 - self.design.phi(k) @ self.project(truth, k)
        return float(r @ r) / self.n

    def metric(self) -> SemiMetric:
        return SemiMetric("empirical_l2")

    def center(self, draws) -> CenterPoint:
        k_max = max(draws.blocks)
        acc = np.zeros(k_max)
        total = 0
        for k in sorted(draws.blocks):
            block = draws.blocks[k]
            acc[:k] += block.sum(axis=0)
            total += block.shape[0]
        return CenterPoint(self.tag, "coefficients", acc / total)

    def center_embedding(self, center: CenterPoint) -> np.ndarray:
        return self.design.phi(center.values.size) @ center.values

    def draw_distances(self, draws, center: CenterPoint) -> np.ndarray:
        k_max = max(max(draws.blocks), center.values.size)
        gram = self.design.gram(k_max)
        cbar = np.zeros(k_max)
        cbar[: center.values.size] = center.values
        parts = []
        for k in sorted(draws.blocks):
            block = draws.blocks[k]
            diff = np.zeros((block.shape[0], k_max))
            diff[:, :k] = block
            diff -= cbar
            d2 = np.einsum("si,ij,sj->s", diff, gram, diff)
            parts.append(np.sqrt(np.clip(d2, 0.0, None)))
        return np.concatenate(parts)


class Histogram:
    """Regular-bin random histograms for density estimation on [0, 1]."""

    tag = "histogram"

    def __init__(
        self,
        rule: QuadratureRule = DEFAULT_RULE,
        basis_tag: str = "trigonometric",
        cdf_cells: int = 4096,
        max_k: int = 128,
    ):
        self.rule = rule
        self.basis_tag = basis_tag
        self.cdf_cells = cdf_cells
        self.max_k = max_k
        self._truth_cache: dict[bytes, np.ndarray] = {}
        self._pdf_cache: dict[bytes, np.ndarray] = {}
        self._cells_cache: dict[int, np.ndarray] = {}

    def density_fn(self, truth: TruthSpec):
        coeffs = truth.coefficients

        def p0(x):
            return 1.0 + eval_series(np.asarray(x, dtype=float), coeffs, self.basis_tag)

        return p0

    def truth_embedding(self, truth: TruthSpec) -> np.ndarray:
        key = truth.coefficients.tobytes()
        if key not in self._truth_cache:
            self._truth_cache[key] = np.clip(self.density_fn(truth)(self.rule.nodes), 0.0, None)
        return self._truth_cache[key]

    def _pdf_table(self, truth: TruthSpec) -> np.ndarray:
        key = truth.coefficients.tobytes()
        if key not in self._pdf_cache:
            grid = np.linspace(0.0, 1.0, self.cdf_cells + 1)
            self._pdf_cache[key] = np.clip(self.density_fn(truth)(grid), 0.0, None)
        return self._pdf_cache[key]

    def simulate(self, truth: TruthSpec, n: int, seed: int) -> Dataset:
        if truth.family_tag != self.tag:
            raise ValueError(
                f"truth is for family {truth.family_tag!r}, not {self.tag!r}"
            )
        rng = np.random.default_rng(seed)
        grid = np.linspace(0.0, 1.0, self.cdf_cells + 1)
        y = _inverse_cdf_sample(self._pdf_table(truth), grid, n, rng)
        return Dataset(self.tag, y, None, n, seed)

    def counts(self, data: Dataset, k: int) -> np.ndarray:
        if data.n == 0:
            return np.zeros(k, dtype=int)
        idx = np.minimum((data.y * k).astype(int), k - 1)
        return np.bincount(idx, minlength=k)

    def log_likelihood(self, theta, data: Dataset) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        _simplex_check(theta)
        if data.n == 0:
            return 0.0
        k = theta.size
        counts = self.counts(data, k)
        occupied = counts > 0
        if np.any(theta[occupied] == 0.0):
            return -np.inf
        return float(np.sum(counts[occupied] * np.log(k * theta[occupied])))

    def make_loglik(self, data: Dataset, k: int):
        counts = self.counts(data, k)
        occupied = counts > 0
        c_occ = counts[occupied]
        logk = np.log(k)

        def loglik(theta):
            t = theta[occupied]
            if np.any(t <= 0.0):
                return -np.inf
            return float(np.sum(c_occ * (logk + np.log(t))))

        return loglik

    def make_loglik_batch(self, data: Dataset, k: int):
        counts = self.counts(data, k)
        occupied = counts > 0
        c_occ = counts[occupied].astype(float)
        logk = np.log(k)

        def loglik(thetas):
            t = thetas[:, occupied]
            out = np.full(thetas.shape[0], -np.inf)
            good = np.all(t > 0.0, axis=1)
            out[good] = (c_occ * (logk + np.log(t[good]))).sum(axis=1)
            return out

        return loglik

    def project(self, truth: TruthSpec, k: int) -> np.ndarray:
        cells, _ = hist_cell_integrals(self.density_fn(truth), k)
        cells = np.clip(cells, 0.0, None)
        return cells / cells.sum()

    def bias_sq(self, truth: TruthSpec, k: int) -> float:
        theta = self.project(truth, k)
        return hellinger_hist_vs_density(theta, self.density_fn(truth)) ** 2

    def metric(self) -> SemiMetric:
        return SemiMetric("hellinger", weights=self.rule.weights)

    def node_cells(self, k: int) -> np.ndarray:
        if k not in self._cells_cache:
            self._cells_cache[k] = np.minimum((self.rule.nodes * k).astype(int), k - 1)
        return self._cells_cache[k]

    def density_rows(self, block: np.ndarray, k: int) -> np.ndarray:
        return k * block[:, self.node_cells(k)]

    def center(self, draws) -> CenterPoint:
        total = 0
        acc = np.zeros(self.rule.nodes.size)
        for k in sorted(draws.blocks):
            block = draws.blocks[k]
            acc += self.density_rows(block, k).sum(axis=0)
            total += block.shape[0]
        values = acc / total
        hist_k = hist_theta = None
        if len(draws.blocks) == 1:
            (k,) = draws.blocks
            hist_k = k
            hist_theta = draws.blocks[k].mean(axis=0)
        return CenterPoint(self.tag, "density", values, hist_k=hist_k, hist_theta=hist_theta)

    def center_embedding(self, center: CenterPoint) -> np.ndarray:
        return center.values

    def draw_distances(self, draws, center: CenterPoint) -> np.ndarray:
        if center.hist_k is not None and set(draws.blocks) == {center.hist_k}:
            block = draws.blocks[center.hist_k]
            diff = np.sqrt(block) - np.sqrt(center.hist_theta)[None, :]
            return np.sqrt(np.clip(np.sum(diff**2, axis=1), 0.0, None))
        metric = self.metric()
        parts = []
        for k in sorted(draws.blocks):
            parts.append(metric.distances(self.density_rows(draws.blocks[k], k), center.values))
        return np.concatenate(parts)


class LogLinear:
    """Exponential-family densities exp(sum_j theta_j phi_j - c(theta)) on [0, 1]."""

    tag = "loglinear"

    def __init__(
        self,
        rule: QuadratureRule = DEFAULT_RULE,
        basis_tag: str = "trigonometric",
        cdf_cells: int = 4096,
        max_k: int = 128,
    ):
        self.rule = rule
        self.basis_tag = basis_tag
        self.cdf_cells = cdf_cells
        self.max_k = max_k
        self.phi_grid = basis_matrix(rule.nodes, max_k, basis_tag)
        self._truth_cache: dict[bytes, np.ndarray] = {}
        self._pdf_cache: dict[bytes, np.ndarray] = {}

    def log_norm(self, theta) -> float:
        """c(theta) = log int exp(sum theta_j phi_j), overflow-guarded."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        g = self.phi_grid[:, : theta.size] @ theta
        m = float(g.max()) if g.size else 0.0
        return m + float(np.log(self.rule.weights @ np.exp(g - m)))

    def log_norm_parts(self, theta):
        """(c, E phi, Cov phi) under f_theta, all on the quadrature grid."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        k = theta.size
        phi = self.phi_grid[:, :k]
        g = phi @ theta
        m = float(g.max())
        unnorm = self.rule.weights * np.exp(g - m)
        z = float(unnorm.sum())
        c = m + np.log(z)
        w = unnorm / z  # density times quadrature weight, sums to one
        mean = phi.T @ w
        cov = (phi * w[:, None]).T @ phi - np.outer(mean, mean)
        return c, mean, cov

    def density_values(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        g = self.phi_grid[:, : theta.size] @ theta
        return np.exp(g - self.log_norm(theta))

    def truth_embedding(self, truth: TruthSpec) -> np.ndarray:
        key = truth.coefficients.tobytes()
        if key not in self._truth_cache:
            g = eval_series(self.rule.nodes, truth.coefficients, self.basis_tag)
            m = float(g.max())
            c = m + float(np.log(self.rule.weights @ np.exp(g - m)))
            self._truth_cache[key] = np.exp(g - c)
        return self._truth_cache[key]

    def _truth_log_norm(self, truth: TruthSpec) -> float:
        g = eval_series(self.rule.nodes, truth.coefficients, self.basis_tag)
        m = float(g.max())
        return m + float(np.log(self.rule.weights @ np.exp(g - m)))

    def simulate(self, truth: TruthSpec, n: int, seed: int) -> Dataset:
        if truth.family_tag != self.tag:
            raise ValueError(
                f"truth is for family {truth.family_tag!r}, not {self.tag!r}"
            )
        rng = np.random.default_rng(seed)
        grid = np.linspace(0.0, 1.0, self.cdf_cells + 1)
        key = truth.coefficients.tobytes()
        if key not in self._pdf_cache:
            c0 = self._truth_log_norm(truth)
            self._pdf_cache[key] = np.exp(
                eval_series(grid, truth.coefficients, self.basis_tag) - c0
            )
        y = _inverse_cdf_sample(self._pdf_cache[key], grid, n, rng)
        return Dataset(self.tag, y, None, n, seed)

    def suff_stats(self, data: Dataset, k: int) -> np.ndarray:
        if data.n == 0:
            return np.zeros(k)
        return basis_matrix(data.y, k, self.basis_tag).sum(axis=0)

    def log_likelihood(self, theta, data: Dataset) -> float:
        if data.n == 0:
            return 0.0
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        t_stats = self.suff_stats(data, theta.size)
        return float(theta @ t_stats) - data.n * self.log_norm(theta)

    def make_loglik(self, data: Dataset, k: int):
        t_stats = self.suff_stats(data, k)
        n = data.n
        phi = self.phi_grid[:, :k]
        weights = self.rule.weights

        def loglik(theta):
            g = phi @ theta
            m = g.max()
            c = m + np.log(weights @ np.exp(g - m))
            return float(theta @ t_stats) - n * float(c)

        return loglik

    def make_loglik_batch(self, data: Dataset, k: int):
        t_stats = self.suff_stats(data, k)
        n = data.n
        phi = self.phi_grid[:, :k]
        weights = self.rule.weights

        def loglik(thetas):
            g = thetas @ phi.T
            m = g.max(axis=1)
            c = m + np.log(np.exp(g - m[:, None]) @ weights)
            return thetas @ t_stats - n * c

        return loglik

    def project(self, truth: TruthSpec, k: int) -> np.ndarray:
        """KL(theta_0, .) minimizer: matches E_{f_theta} phi_j to the truth's moments."""
        f0 = self.truth_embedding(truth)
        m0 = self.phi_grid[:, :k].T @ (self.rule.weights * f0)

        def objective(theta):
            c, mean, cov = self.log_norm_parts(theta)
            return c - float(theta @ m0), mean - m0, cov

        x0 = np.zeros(k)
        x0[: min(k, truth.coefficients.size)] = truth.coefficients[:k]
        theta, _ = damped_newton(objective, x0)
        return theta

    def bias_sq(self, truth: TruthSpec, k: int) -> float:
        theta = self.project(truth, k)
        return self.metric().distance(self.truth_embedding(truth), self.density_values(theta)) ** 2

    def metric(self) -> SemiMetric:
        return SemiMetric("hellinger", weights=self.rule.weights)

    def density_rows(self, block: np.ndarray, k: int) -> np.ndarray:
        g = block @ self.phi_grid[:, :k].T
        m = g.max(axis=1, keepdims=True)
        z = np.exp(g - m) @ self.rule.weights
        return np.exp(g - m - np.log(z)[:, None])

    def center(self, draws) -> CenterPoint:
        total = 0
        acc = np.zeros(self.rule.nodes.size)
        for k in sorted(draws.blocks):
            block = draws.blocks[k]
            acc += self.density_rows(block, k).sum(axis=0)
            total += block.shape[0]
        return CenterPoint(self.tag, "density", acc / total)

    def center_embedding(self, center: CenterPoint) -> np.ndarray:
        return center.values

    def draw_distances(self, draws, center: CenterPoint) -> np.ndarray:
        metric = self.metric()
        parts = []
        for k in sorted(draws.blocks):
            parts.append(metric.distances(self.density_rows(draws.blocks[k], k), center.values))
        return np.concatenate(parts)


class Classification:
    """Fixed-design binary responses with the logistic link."""

    tag = "classification"

    def __init__(self, n: int, basis_tag: str = "trigonometric", k_max: int = 64):
        self.design = midpoint_design(n, basis_tag=basis_tag, k_design=k_max)
        self.basis_tag = basis_tag
        self._truth_cache: dict[bytes, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def max_k(self) -> int:
        return self.design.k_design

    def truth_embedding(self, truth: TruthSpec) -> np.ndarray:
        key = truth.coefficients.tobytes()
        if key not in self._truth_cache:
            f0 = eval_series(self.design.points, truth.coefficients, self.basis_tag)
            self._truth_cache[key] = expit(f0)
        return self._truth_cache[key]

    def simulate(self, truth: TruthSpec, n: int, seed: int) -> Dataset:
        if truth.family_tag != self.tag:
            raise ValueError(
                f"truth is for family {truth.family_tag!r}, not {self.tag!r}"
            )
        if n != self.n:
            raise ValueError(f"family was built for n={self.n}, got {n}")
        rng = np.random.default_rng(seed)
        y = (rng.random(n) < self.truth_embedding(truth)).astype(float)
        return Dataset(self.tag, y, self.design, n, seed)

    def log_likelihood(self, theta, data: Dataset) -> float:
        if data.n == 0:
            return 0.0
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        f = self.design.phi(theta.size) @ theta
        return float(data.y @ f - np.logaddexp(0.0, f).sum())

    def make_loglik(self, data: Dataset, k: int):
        if data.n == 0:
            return lambda theta: 0.0
        phi = self.design.phi(k)
        y = data.y

        def loglik(theta):
            f = phi @ theta
            return float(y @ f - np.logaddexp(0.0, f).sum())

        return loglik

    def make_loglik_batch(self, data: Dataset, k: int):
        if data.n == 0:
            return lambda thetas: np.zeros(thetas.shape[0])
        phi = self.design.phi(k)
        y = data.y

        def loglik(thetas):
            f = thetas @ phi.T
            return f @ y - np.logaddexp(0.0, f).sum(axis=1)

        return loglik

    def project(self, truth: TruthSpec, k: int) -> np.ndarray:
        """Empirical KL projection: matches sum_i q(x_i) phi_j(x_i) to the truth."""
        phi = self.design.phi(k)
        q0 = self.truth_embedding(truth)
        n = self.n

        def objective(theta):
            f = phi @ theta
            q = expit(f)
            value = float(np.logaddexp(0.0, f).sum() - q0 @ f) / n
            grad = phi.T @ (q - q0) / n
            hess = (phi * (q * (1.0 - q))[:, None]).T @ phi / n
            return value, grad, hess

        theta, _ = damped_newton(objective, np.zeros(k))
        return theta

    def q_values(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return expit(self.design.phi(theta.size) @ theta)

    def bias_sq(self, truth: TruthSpec, k: int) -> float:
        theta = self.project(truth, k)
        return self.metric().distance(self.truth_embedding(truth), self.q_values(theta)) ** 2

    def metric(self) -> SemiMetric:
        return SemiMetric("empirical_hellinger")

    def q_rows(self, block: np.ndarray, k: int) -> np.ndarray:
        return expit(block @ self.design.phi(k).T)

    def center(self, draws) -> CenterPoint:
        total = 0
        acc = np.zeros(self.n)
        for k in sorted(draws.blocks):
            block = draws.blocks[k]
            acc += self.q_rows(block, k).sum(axis=0)
            total += block.shape[0]
        return CenterPoint(self.tag, "probability", acc / total)

    def center_embedding(self, center: CenterPoint) -> np.ndarray:
        return center.values

    def draw_distances(self, draws, center: CenterPoint) -> np.ndarray:
        metric = self.metric()
        parts = []
        for k in sorted(draws.blocks):
            parts.append(metric.distances(self.q_rows(draws.blocks[k], k), center.values))
        return np.concatenate(parts)


def make_family(tag: str, n: int | None = None, basis_tag: str = "trigonometric", **kwargs):
    if tag == "regression":
        if n is None:
            raise ValueError("regression requires n")
        return Regression(n, basis_tag=basis_tag, **kwargs)
    if tag == "histogram":
        return Histogram(basis_tag=basis_tag, **kwargs)
    if tag == "loglinear":
        return LogLinear(basis_tag=basis_tag, **kwargs)
    if tag == "classification":
        if n is None:
            raise ValueError("classification requires n")
        return Classification(n, basis_tag=basis_tag, **kwargs)
    raise ValueError(f"unknown family {tag!r}")
