"""Energies, one-step updates and fixed-point retrieval for the dense (MHM) and kernelized (KHM) models.

The energy is implemented in its CCCP-consistent form

    E(x) = 1/2 K(x, x) - (1/beta) * log sum_mu exp(beta * K(xi_mu, x))

with ``K(a, b) = <a, b>`` when no feature map is given. Its CCCP minimization
gives the update ``x <- Xi . Norm(beta * K(Xi, x))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from uhopplus.errors import DimensionMismatchError, HopfieldError, IndexOutOfRangeError
from uhopplus.kernel import FeatureMap, apply_feature_map
from uhopplus.normalization import Normalization
from uhopplus.patterns import PatternSet

TRACE_ITERATE_CAP = 10_000


@dataclass(frozen=True)
class HopfieldConfig:
    beta: float
    norm: Normalization = field(default_factory=Normalization)
    max_iters: int = 100
    fixed_point_tol: float = 1e-6

    def __post_init__(self):
        if not self.beta > 0:
            raise HopfieldError(f"beta must be positive, got {self.beta}")
        if self.max_iters < 1:
            raise HopfieldError("max_iters must be at least 1")
        if not self.fixed_point_tol > 0:
            raise HopfieldError("fixed_point_tol must be positive")


@dataclass
class RetrievalTrace:
    iterates: List[np.ndarray]
    energies: List[float]
    weights_final: np.ndarray
    converged: bool
    steps: int

    @property
    def x_final(self) -> np.ndarray:
        return self.iterates[-1]

    def to_json(self, max_elements: int = TRACE_ITERATE_CAP) -> dict:
        """JSON-ready dict; iterates are dropped when they exceed ``max_elements`` numbers."""
        n_values = sum(it.size for it in self.iterates)
        out = {
            "steps": self.steps,
            "converged": self.converged,
            "energies": [float(e) for e in self.energies],
            "weights_final": self.weights_final.tolist(),
            "x_final": self.x_final.tolist(),
        }
        if n_values <= max_elements:
            out["iterates"] = [it.tolist() for it in self.iterates]
        else:
            out["iterates_elided"] = len(self.iterates)
        return out


def _query(x, xi: PatternSet) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (xi.d,):
        raise DimensionMismatchError(f"query has shape {x.shape}, patterns are {xi.d}-dimensional")
    return x


class _Model:
    """Pre-computed memory features so repeated updates only map the query."""

    def __init__(self, xi: PatternSet, phi: Optional[FeatureMap]):
        if phi is not None and phi.d != xi.d:
            raise DimensionMismatchError(f"patterns are {xi.d}-dimensional, feature map expects {phi.d}")
        self.xi = xi
        self.phi = phi
        self.mem_features = xi.data if phi is None else phi.features(xi.data)

    def query_features(self, x: np.ndarray) -> np.ndarray:
        return x if self.phi is None else apply_feature_map(self.phi, x)

    def similarities(self, x: np.ndarray) -> np.ndarray:
        return self.mem_features.T @ self.query_features(x)

    def energy(self, x: np.ndarray, beta: float) -> float:
        fx = self.query_features(x)
        return float(0.5 * fx @ fx - logsumexp(beta * (self.mem_features.T @ fx)) / beta)

    def step(self, x: np.ndarray, cfg: HopfieldConfig) -> Tuple[np.ndarray, np.ndarray]:
        p = cfg.norm(self.similarities(x), cfg.beta)
        return self.xi.data @ p, p


def mhm_energy(x, xi: PatternSet, beta: float) -> float:
    if not beta > 0:
        raise HopfieldError(f"beta must be positive, got {beta}")
    return _Model(xi, None).energy(_query(x, xi), beta)


def khm_energy(x, xi: PatternSet, phi: FeatureMap, beta: float) -> float:
    if not beta > 0:
        raise HopfieldError(f"beta must be positive, got {beta}")
    return _Model(xi, phi).energy(_query(x, xi), beta)


def energy(x, xi: PatternSet, phi: Optional[FeatureMap], beta: float) -> float:
    return mhm_energy(x, xi, beta) if phi is None else khm_energy(x, xi, phi, beta)


def update_step(x, xi: PatternSet, phi: Optional[FeatureMap], cfg: HopfieldConfig) -> Tuple[np.ndarray, np.ndarray]:
    """One update ``x' = Xi p`` with ``p = Norm(beta K(Xi, x))``; returns ``(x', p)``."""
    return _Model(xi, phi).step(_query(x, xi), cfg)


def retrieve(x0, xi: PatternSet, phi: Optional[FeatureMap], cfg: HopfieldConfig) -> RetrievalTrace:
    """Iterate the update until ``||x_{t+1} - x_t|| <= tol`` or ``max_iters`` updates.

    ``steps`` counts applied updates, including the final one that confirms
    the fixed point.
    """
    model = _Model(xi, phi)
    x = _query(x0, xi)
    iterates = [x]
    energies = [model.energy(x, cfg.beta)]
    converged = False
    p = None
    for _ in range(cfg.max_iters):
        x_new, p = model.step(x, cfg)
        iterates.append(x_new)
        energies.append(model.energy(x_new, cfg.beta))
        moved = np.linalg.norm(x_new - x)
        x = x_new
        if moved <= cfg.fixed_point_tol:
            converged = True
            break
    return RetrievalTrace(iterates, energies, p, converged, len(iterates) - 1)


def final_weights(x0, model: _Model, cfg: HopfieldConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Same loop as ``retrieve`` without recording the trace."""
    x = x0
    p = None
    for _ in range(cfg.max_iters):
        x_new, p = model.step(x, cfg)
        moved = np.linalg.norm(x_new - x)
        x = x_new
        if moved <= cfg.fixed_point_tol:
            break
    return x, p


def retrieval_error(x_star, xi: PatternSet, mu: int) -> float:
    """``||x_star - xi_mu||``."""
    if not 0 <= mu < xi.m:
        raise IndexOutOfRangeError(f"pattern index {mu} outside [0, {xi.m})")
    return float(np.linalg.norm(_query(x_star, xi) - xi.data[:, mu]))
