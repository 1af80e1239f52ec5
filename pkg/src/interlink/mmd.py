"""Unbiased maximum mean discrepancy with a Gaussian kernel mixture.

Kernels are k_sigma(x, y) = exp(-||x - y||^2 / (2 sigma^2)) with
sigma = multiplier * base_scale, where the base scale is the mean pairwise
Euclidean distance of the pooled sample.  The base scale is treated as a
constant when differentiating.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DataError

DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)
SCALE_FLOOR = 1e-8


@dataclass(frozen=True)
class KernelMixture:
    base_scale: float
    multipliers: Tuple[float, ...] = DEFAULT_MULTIPLIERS

    def __post_init__(self):
        if self.base_scale <= 0:
            raise DataError(f"base scale must be > 0, got {self.base_scale}")
        if any(m <= 0 for m in self.multipliers):
            raise DataError("bandwidth multipliers must be positive")

    @classmethod
    def from_samples(
        cls,
        a1: np.ndarray,
        a2: np.ndarray,
        multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
    ) -> "KernelMixture":
        return cls(base_scale(a1, a2), tuple(multipliers))


def base_scale(a1: np.ndarray, a2: np.ndarray) -> float:
    """Mean pairwise Euclidean distance over the pooled sample.

    All unordered pairs of the pooled rows count.  Degenerate samples (all
    points identical) fall back to a small positive floor with a warning.
    """
    pooled = np.vstack([np.asarray(a1, dtype=float), np.asarray(a2, dtype=float)])
    if pooled.shape[0] < 2:
        raise DataError("need at least 2 points to compute a base scale")
    mean_dist = float(pdist(pooled, metric="euclidean").mean())
    if mean_dist <= 0.0:
        warnings.warn(
            "all points identical; kernel base scale floored at "
            f"{SCALE_FLOOR}",
            RuntimeWarning,
            stacklevel=2,
        )
        return SCALE_FLOOR
    return mean_dist


def _check_samples(a1: np.ndarray, a2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.ndim != 2 or a2.ndim != 2 or a1.shape[1] != a2.shape[1]:
        raise DataError(f"incompatible sample shapes {a1.shape} and {a2.shape}")
    if a1.shape[0] < 2 or a2.shape[0] < 2:
        raise DataError("each sample needs at least 2 points for the unbiased MMD")
    return a1, a2


def mmd_unbiased(a1: np.ndarray, a2: np.ndarray, kernel: KernelMixture) -> float:
    """Unbiased MMD estimate summed over the kernel mixture.

    Within-sample sums run over off-diagonal pairs only (the 1/(n(n-1))
    normalization); the estimator may be slightly negative on samples from
    the same distribution.
    """
    a1, a2 = _check_samples(a1, a2)
    # The estimator is symmetric in its arguments; evaluating in a canonical
    # operand order makes that symmetry exact in floating point as well.
    if (a2.shape[0], a2.tobytes()) < (a1.shape[0], a1.tobytes()):
        a1, a2 = a2, a1
    n1, n2 = a1.shape[0], a2.shape[0]
    d11 = cdist(a1, a1, metric="sqeuclidean")
    d22 = cdist(a2, a2, metric="sqeuclidean")
    d12 = cdist(a1, a2, metric="sqeuclidean")

    total = 0.0
    for mult in kernel.multipliers:
        denom = 2.0 * (mult * kernel.base_scale) ** 2
        k11 = np.exp(-d11 / denom)
        k22 = np.exp(-d22 / denom)
        k12 = np.exp(-d12 / denom)
        within1 = (k11.sum() - np.trace(k11)) / (n1 * (n1 - 1))
        within2 = (k22.sum() - np.trace(k22)) / (n2 * (n2 - 1))
        cross = 2.0 * k12.sum() / (n1 * n2)
        total += within1 + within2 - cross
    return float(total)


def mmd_gradient(
    a1: np.ndarray,
    a2: np.ndarray,
    kernel: KernelMixture,
    rows1: Optional[Sequence[int]] = None,
    rows2: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of the unbiased MMD with the base scale held constant.

    Uses dk_sigma(x, y)/dx = -k_sigma(x, y) (x - y) / sigma^2.  Returns
    gradient rows for the requested indices (all rows when None).
    """
    a1, a2 = _check_samples(a1, a2)
    n1, n2 = a1.shape[0], a2.shape[0]
    idx1 = np.arange(n1) if rows1 is None else np.asarray(rows1, dtype=int)
    idx2 = np.arange(n2) if rows2 is None else np.asarray(rows2, dtype=int)
    if len(idx1) and (idx1.min() < 0 or idx1.max() >= n1):
        raise DataError("row index out of range for sample 1")
    if len(idx2) and (idx2.min() < 0 or idx2.max() >= n2):
        raise DataError("row index out of range for sample 2")

    d11 = cdist(a1[idx1], a1, metric="sqeuclidean")
    d22 = cdist(a2[idx2], a2, metric="sqeuclidean")
    d12 = cdist(a1[idx1], a2, metric="sqeuclidean")
    d21 = cdist(a2[idx2], a1, metric="sqeuclidean")

    g1 = np.zeros((len(idx1), a1.shape[1]))
    g2 = np.zeros((len(idx2), a2.shape[1]))
    for mult in kernel.multipliers:
        sigma2 = (mult * kernel.base_scale) ** 2
        w11 = np.exp(-d11 / (2.0 * sigma2)) / sigma2
        w22 = np.exp(-d22 / (2.0 * sigma2)) / sigma2
        w12 = np.exp(-d12 / (2.0 * sigma2)) / sigma2
        w21 = np.exp(-d21 / (2.0 * sigma2)) / sigma2
        # The selected row pairs with itself at distance 0; the (x - y)
        # factor already zeroes that term, no masking needed.

        def pair_sum(w: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
            # sum_j w_ij (x_i - y_j) for the selected rows x
            return w.sum(axis=1)[:, None] * x - w @ y

        # Each unordered within-pair appears twice in the double sum, hence
        # the factor 2.
        g1 += -2.0 / (n1 * (n1 - 1)) * pair_sum(w11, a1[idx1], a1)
        g1 += 2.0 / (n1 * n2) * pair_sum(w12, a1[idx1], a2)
        g2 += -2.0 / (n2 * (n2 - 1)) * pair_sum(w22, a2[idx2], a2)
        g2 += 2.0 / (n1 * n2) * pair_sum(w21, a2[idx2], a1)
    return g1, g2
