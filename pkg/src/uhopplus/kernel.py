"""Linear feature maps ``Phi(v) = W^T v`` and feature-space separation statistics."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from uhopplus.errors import DimensionMismatchError, SinglePatternError, ZeroImageError
from uhopplus.patterns import PatternSet

RANK_RTOL = 1e-8
ZERO_IMAGE = 1e-12


@dataclass(frozen=True)
class FeatureMap:
    """A ``(d, D_phi)`` weight matrix ``W``.

    With ``output_normalize`` (the default) features are projected onto the
    unit sphere after the linear map; the raw mode keeps ``W^T v`` as is,
    which makes ``W = I`` reproduce the plain dense Hopfield model.
    """

    w: np.ndarray
    output_normalize: bool = True

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 2:
            raise DimensionMismatchError(f"W must be (d, D_phi) with d >= 1, D_phi >= 2; got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if not self.full_column_rank:
            warnings.warn("feature map W is not of full column rank", RuntimeWarning, stacklevel=3)

    @property
    def d(self) -> int:
        return self.w.shape[0]

    @property
    def d_phi(self) -> int:
        return self.w.shape[1]

    @property
    def full_column_rank(self) -> bool:
        if self.d < self.d_phi:
            return False
        s = np.linalg.svd(self.w, compute_uv=False)
        return bool(s[-1] > RANK_RTOL * s[0])

    @classmethod
    def identity(cls, d: int, output_normalize: bool = False) -> "FeatureMap":
        return cls(np.eye(d), output_normalize=output_normalize)

    def features(self, vectors: np.ndarray) -> np.ndarray:
        """Map the columns of a ``(d, n)`` matrix to ``(D_phi, n)`` features."""
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.shape[0] != self.d:
            raise DimensionMismatchError(f"expected {self.d}-dimensional inputs, got {vectors.shape[0]}")
        out = self.w.T @ vectors
        if self.output_normalize:
            norms = np.linalg.norm(out, axis=0)
            if np.any(norms < ZERO_IMAGE):
                raise ZeroImageError("W^T v vanishes; cannot normalize the feature")
            out = out / norms
        return out

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "d_phi": self.d_phi,
            "output_normalize": self.output_normalize,
            "w": self.w.ravel(order="C").tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureMap":
        w = np.asarray(obj["w"], dtype=np.float64).reshape(obj["d"], obj["d_phi"])
        return cls(w, output_normalize=bool(obj.get("output_normalize", True)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "FeatureMap":
        return cls.from_json(json.loads(Path(path).read_text()))


def apply_feature_map(phi: FeatureMap, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError("apply_feature_map takes a single vector")
    return phi.features(v[:, None])[:, 0]


def kernel_similarity(phi: FeatureMap, xi: PatternSet, x) -> np.ndarray:
    """``[<Phi(xi_mu), Phi(x)>]_mu``."""
    if xi.d != phi.d:
        raise DimensionMismatchError(f"patterns are {xi.d}-dimensional, feature map expects {phi.d}")
    return phi.features(xi.data).T @ apply_feature_map(phi, x)


def gram(features: np.ndarray) -> np.ndarray:
    return features.T @ features


@dataclass(frozen=True)
class SeparationStats:
    delta_per_pattern: np.ndarray
    delta_min: float
    r_phi: float
    argmin_pattern: int


def separation_from_features(features: np.ndarray) -> SeparationStats:
    """Separation statistics of the columns of a ``(D, M)`` feature matrix."""
    m = features.shape[1]
    if m < 2:
        raise SinglePatternError("separation needs at least two patterns")
    k = gram(features)
    self_sim = np.diag(k).copy()
    off = k.copy()
    np.fill_diagonal(off, -np.inf)
    delta = self_sim - off.max(axis=0)
    r_phi = 0.5 * float(pdist(features.T).min())
    mu = int(np.argmin(delta))
    return SeparationStats(delta, float(delta[mu]), r_phi, mu)


def separation_stats(phi: FeatureMap, xi: PatternSet) -> SeparationStats:
    """Per-pattern separation ``K(xi_mu, xi_mu) - max_{nu != mu} K(xi_nu, xi_mu)`` and ``R_phi``.

    Under output normalization ``R_phi == sqrt(delta_min / 2)``.
    """
    if xi.d != phi.d:
        raise DimensionMismatchError(f"patterns are {xi.d}-dimensional, feature map expects {phi.d}")
    return separation_from_features(phi.features(xi.data))
