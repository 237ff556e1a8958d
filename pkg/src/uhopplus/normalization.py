"""Probability maps onto the simplex: softmax, sparsemax and 1.5-entmax."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from uhopplus.errors import BisectionNoConvergeError, HopfieldError, NonFiniteError

ENTMAX_TOL = 1e-10
ENTMAX_MAX_ITERS = 200


def _finite(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("input contains NaN or inf")
    return z


def softmax(z, beta: float = 1.0) -> np.ndarray:
    """``exp(beta*z) / sum(exp(beta*z))`` with max-subtraction."""
    if not beta > 0:
        raise HopfieldError(f"beta must be positive, got {beta}")
    s = beta * _finite(z)
    e = np.exp(s - s.max())
    return e / e.sum()


def sparsemax(z) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold).

    Ties are ordered by original index via a stable sort.
    """
    z = _finite(z)
    order = np.argsort(-z, kind="stable")
    zs = z[order]
    cumsum = np.cumsum(zs)
    k = np.arange(1, z.size + 1)
    support = 1.0 + k * zs > cumsum
    k_max = k[support][-1]
    threshold = (cumsum[k_max - 1] - 1.0) / k_max
    return np.maximum(z - threshold, 0.0)


def entmax15(z) -> np.ndarray:
    """1.5-entmax, ``p_i = max(0, z_i/2 - tau)**2`` with tau found by bisection."""
    z = _finite(z)
    # translation invariance lets us work near zero for full bisection precision
    half = (z - z.max()) / 2.0
    lo, hi = half.min() - 1.0, 0.0
    for _ in range(ENTMAX_MAX_ITERS):
        tau = 0.5 * (lo + hi)
        p = np.maximum(half - tau, 0.0) ** 2
        total = p.sum()
        if abs(total - 1.0) <= ENTMAX_TOL:
            return p / total
        if total > 1.0:
            lo = tau
        else:
            hi = tau
    raise BisectionNoConvergeError(f"entmax15 threshold not found in {ENTMAX_MAX_ITERS} iterations")


class NormKind(str, Enum):
    SOFTMAX = "softmax"
    SPARSEMAX = "sparsemax"
    ENTMAX15 = "entmax15"


@dataclass(frozen=True)
class Normalization:
    """Which simplex map the update rule uses, plus the softmax support threshold."""

    kind: NormKind = NormKind.SOFTMAX
    softmax_support_threshold: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "kind", NormKind(self.kind))
        if not 0.0 < self.softmax_support_threshold < 1.0:
            raise HopfieldError("softmax support threshold must lie in (0, 1)")

    def __call__(self, z, beta: float) -> np.ndarray:
        """Apply the map to ``beta * z``."""
        if self.kind is NormKind.SOFTMAX:
            return softmax(z, beta)
        if not beta > 0:
            raise HopfieldError(f"beta must be positive, got {beta}")
        scaled = beta * _finite(z)
        if self.kind is NormKind.SPARSEMAX:
            return sparsemax(scaled)
        return entmax15(scaled)

    def support_size(self, p) -> int:
        p = np.asarray(p)
        if self.kind is NormKind.SOFTMAX:
            return int(np.count_nonzero(p >= self.softmax_support_threshold))
        return int(np.count_nonzero(p > 0.0))
