"""Orthonormal bases on [0, 1] and fixed midpoint design grids.

Both basis families are orthonormal in L2[0,1] and integrate to zero, which the
log-linear model requires. On the midpoint design x_i = (i - 1/2)/n the
trigonometric system is also orthonormal in the empirical inner product for
k <= n/2 (discrete Fourier orthogonality), so the design Gram matrix is the
identity up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BASIS_TAGS = ("trigonometric", "cosine")


def _basis_block(x: np.ndarray, start: int, stop: int, tag: str) -> np.ndarray:
    """Columns phi_{start+1} .. phi_{stop} evaluated at x."""
    j = np.arange(start + 1, stop + 1)
    if tag == "trigonometric":
        # phi_{2l-1} = sqrt(2) cos(2 pi l x), phi_{2l} = sqrt(2) sin(2 pi l x)
        freq = (j + 1) // 2
        ang = 2.0 * np.pi * np.outer(x, freq)
        block = np.empty((x.size, j.size))
        odd = j % 2 == 1
        block[:, odd] = np.cos(ang[:, odd])
        block[:, ~odd] = np.sin(ang[:, ~odd])
    elif tag == "cosine":
        block = np.cos(np.pi * np.outer(x, j))
    else:
        raise ValueError(f"unknown basis tag {tag!r}")
    block *= np.sqrt(2.0)
    return block


def basis_matrix(x, k: int, tag: str = "trigonometric") -> np.ndarray:
    """Evaluate the first k basis functions at x; returns shape (len(x), k)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _basis_block(x, 0, k, tag)


def eval_series(x, coefficients, tag: str = "trigonometric", chunk: int = 512) -> np.ndarray:
    """Evaluate sum_j c_j phi_j(x) for possibly long coefficient vectors.

    Works in column blocks so an n x 4096 basis matrix is never materialized.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    coefficients = np.asarray(coefficients, dtype=float)
    total = np.zeros(x.size)
    for start in range(0, coefficients.size, chunk):
        stop = min(start + chunk, coefficients.size)
        total += _basis_block(x, start, stop, tag) @ coefficients[start:stop]
    return total


@dataclass(frozen=True)
class DesignGrid:
    """Fixed design points with the basis evaluated and certified.

    c0 reports the numerical constant for which the eigenvalues of Phi'Phi/n
    lie in [1/c0, c0] for all k <= k_design.
    """

    points: np.ndarray
    basis_tag: str
    k_design: int
    c0: float
    _phi: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.points.size

    def phi(self, k: int) -> np.ndarray:
        if k > self.k_design:
            raise ValueError(
                f"k={k} exceeds the certified design range k_design={self.k_design}"
            )
        return self._phi[:, :k]

    def gram(self, k: int) -> np.ndarray:
        p = self.phi(k)
        return p.T @ p / self.n


def midpoint_design(n: int, basis_tag: str = "trigonometric", k_design: int | None = None) -> DesignGrid:
    """Equispaced midpoint design x_i = (i - 1/2)/n with eigenvalue certification."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = n // 2 if basis_tag == "trigonometric" else max(n - 1, 1)
    cap = max(cap, 1)
    k_design = min(k_design if k_design is not None else 64, cap)
    points = (np.arange(n) + 0.5) / n
    phi = basis_matrix(points, k_design, basis_tag)
    eigs = np.linalg.eigvalsh(phi.T @ phi / n)
    if eigs.min() <= 1e-12:
        raise ValueError(
            f"design matrix numerically singular at k={k_design} (n={n}, {basis_tag})"
        )
    c0 = float(max(eigs.max(), 1.0 / eigs.min()))
    return DesignGrid(points=points, basis_tag=basis_tag, k_design=k_design, c0=c0, _phi=phi)
