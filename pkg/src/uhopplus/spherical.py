"""Spherical codes: minimal separation, analytic optimal codes and a numerical search oracle.

Following the usual convention of the capacity literature, the "minimal
separation" ``rho`` of a code is its largest pairwise inner product; an
optimal code minimizes it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from uhopplus.errors import HopfieldError, SinglePointError, ZeroVectorError
from uhopplus.patterns import PatternSet

TAU_SCHEDULE = (0.3, 0.1, 0.03, 0.01)
# strong Armijo constant: a weak one accepts the reflecting step that oscillates around antipodal pairs
SUFFICIENT_DECREASE = 0.3


@dataclass(frozen=True)
class SphericalCode:
    """``n`` unit vectors in ``R^dim``, one per row of ``points``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise HopfieldError(f"points must be an (n, dim) array, got {pts.shape}")
        if not np.allclose(np.linalg.norm(pts, axis=1), 1.0, rtol=0.0, atol=1e-9):
            raise ZeroVectorError("code points must be unit vectors")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def as_patterns(self) -> PatternSet:
        return PatternSet(self.points.T)

    def to_json(self) -> dict:
        return {"n": self.n, "dim": self.dim, "rho": minimal_separation(self), "points": self.points.tolist()}


def _max_offdiag(points: np.ndarray) -> float:
    k = points @ points.T
    np.fill_diagonal(k, -np.inf)
    return float(k.max())


def minimal_separation(code: SphericalCode) -> float:
    """Largest inner product between two distinct points."""
    if code.n < 2:
        raise SinglePointError("minimal separation needs at least two points")
    return _max_offdiag(code.points)


def simplex_code(dim: int) -> SphericalCode:
    """Vertices of the regular simplex: ``dim + 1`` points with pairwise inner product ``-1/dim``."""
    if dim < 1:
        raise HopfieldError("dim must be at least 1")
    n = dim + 1
    centered = np.eye(n) - 1.0 / n
    _, _, vt = np.linalg.svd(centered)
    pts = centered @ vt[:dim].T
    return SphericalCode(pts / np.linalg.norm(pts, axis=1, keepdims=True))


def cross_polytope_code(dim: int) -> SphericalCode:
    """The ``2*dim`` points ``+-e_i``, ordered ``e_1, -e_1, e_2, ...``."""
    if dim < 1:
        raise HopfieldError("dim must be at least 1")
    eye = np.eye(dim)
    return SphericalCode(np.stack([s * eye[i] for i in range(dim) for s in (1.0, -1.0)]))


def polygon_code(n: int) -> SphericalCode:
    """``n`` equally spaced points on the unit circle."""
    angles = 2.0 * np.pi * np.arange(n) / n
    return SphericalCode(np.stack([np.cos(angles), np.sin(angles)], axis=1))


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _smooth_max(points: np.ndarray, tau: float, iu) -> float:
    return float(tau * logsumexp((points @ points.T)[iu] / tau))


def _smooth_max_grad(points: np.ndarray, tau: float, iu) -> np.ndarray:
    k = points @ points.T
    w = np.zeros_like(k)
    z = k[iu] / tau
    w[iu] = np.exp(z - logsumexp(z))
    w = w + w.T
    return w @ points


def _descend(points: np.ndarray, tau: float, iters: int, iu) -> np.ndarray:
    """Riemannian gradient descent with Armijo backtracking on the log-sum-exp smoothed max."""
    step = 1.0
    value = _smooth_max(points, tau, iu)
    for _ in range(iters):
        g = _smooth_max_grad(points, tau, iu)
        g -= np.sum(g * points, axis=1, keepdims=True) * points
        gnorm2 = float(np.sum(g * g))
        if gnorm2 < 1e-18:
            break
        step = min(2.0 * step, 10.0)
        while step > 1e-12:
            trial = points - step * g
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            trial_value = _smooth_max(trial, tau, iu)
            if trial_value <= value - SUFFICIENT_DECREASE * step * gnorm2:
                stalled = value - trial_value <= 1e-12 * max(1.0, abs(value))
                points, value = trial, trial_value
                break
            step *= 0.5
        else:
            break
        if stalled:
            break
    return points


def brute_force_optimal_code(
    dim: int,
    n: int,
    restarts: int = 20,
    iters: int = 300,
    seed: int = 0,
    tau_schedule: Sequence[float] = TAU_SCHEDULE,
) -> SphericalCode:
    """Best of ``restarts`` annealed local searches for a code minimizing the largest inner product.

    An oracle for small instances only: the result is a local optimum and
    carries no optimality certificate. Restart ``r`` uses the ``r``-th block of
    the ``seed`` stream, so results are deterministic.
    """
    if dim < 2 or n < 2:
        raise HopfieldError("need dim >= 2 and n >= 2")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    best, best_rho = None, np.inf
    for _ in range(max(restarts, 1)):
        pts = rng.standard_normal((n, dim))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        for tau in tau_schedule:
            pts = _descend(pts, tau, iters, iu)
        rho = _max_offdiag(pts)
        if rho < best_rho:
            best, best_rho = pts, rho
    return SphericalCode(best)
