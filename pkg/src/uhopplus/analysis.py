"""Experiment protocols: metastable-state histograms, energy landscapes, basins of attraction, loss curves."""

from __future__ import annotations

import csv
import io
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from uhopplus.errors import EmptySelectionError, NotOnSimplexError, NotPlanarError
from uhopplus.hopfield import HopfieldConfig, _Model, final_weights
from uhopplus.kernel import FeatureMap
from uhopplus.normalization import Normalization
from uhopplus.patterns import PatternSet, gaussian_queries, generate_synthetic
from uhopplus.uhop import TrainConfig, TrainLog, init_weights, uhop_plus

OVERFLOW_BUCKET = 10
BUCKETS = tuple(range(1, OVERFLOW_BUCKET)) + (OVERFLOW_BUCKET,)
NO_CONVERGENCE = 0


def bucket_label(k: int) -> str:
    return f"{OVERFLOW_BUCKET}+" if k >= OVERFLOW_BUCKET else str(k)


def metastable_size(p, norm: Normalization) -> int:
    """Support size of the final weights (thresholded for softmax, exact zeros otherwise)."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-6:
        raise NotOnSimplexError("weights must be a probability vector")
    return norm.support_size(p)


@dataclass
class MetaHistogram:
    """Counts of metastable-state sizes; sizes of 10 or more share the ``10+`` bucket."""

    counts: Dict[int, int] = field(default_factory=lambda: {k: 0 for k in BUCKETS})

    @classmethod
    def from_sizes(cls, sizes: Iterable[int]) -> "MetaHistogram":
        hist = cls()
        for k, c in Counter(min(int(s), OVERFLOW_BUCKET) for s in sizes).items():
            hist.counts[k] += c
        return hist

    @property
    def total_queries(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> Dict[int, float]:
        total = self.total_queries
        return {k: 100.0 * c / total if total else 0.0 for k, c in self.counts.items()}

    def percent(self, k: int) -> float:
        return self.percentages[min(k, OVERFLOW_BUCKET)]

    def merge(self, other: "MetaHistogram") -> "MetaHistogram":
        return MetaHistogram({k: self.counts[k] + other.counts[k] for k in BUCKETS})

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "percent"])
        for k, pct in self.percentages.items():
            writer.writerow([bucket_label(k), f"{pct:.12g}"])
        return buf.getvalue()


def _map_ordered(fn, items: Sequence, threads: int) -> List:
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def metastable_distribution(
    queries,
    xi: PatternSet,
    phi: Optional[FeatureMap],
    cfg: HopfieldConfig,
    threads: int = 1,
) -> MetaHistogram:
    """Run retrieval from every query and histogram the support of the final weights."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.size == 0:
        raise EmptySelectionError("no queries given")
    model = _Model(xi, phi)

    def size(q):
        return metastable_size(final_weights(q, model, cfg)[1], cfg.norm)

    return MetaHistogram.from_sizes(_map_ordered(size, list(queries), threads))


@dataclass(frozen=True)
class GridSpec:
    x_range: Tuple[float, float] = (-1.5, 1.5)
    y_range: Tuple[float, float] = (-1.5, 1.5)
    nx: int = 40
    ny: int = 40

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.ny)

    def points(self) -> np.ndarray:
        """All cell coordinates, row-major over ``(y, x)``, shape ``(ny*nx, 2)``."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


@dataclass
class GridResult:
    """``values[j, i]`` belongs to the cell at ``(xs[i], ys[j])``."""

    grid: GridSpec
    values: np.ndarray
    kind: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "value"])
        for (x, y), v in zip(self.grid.points(), self.values.ravel()):
            cell = str(int(v)) if self.kind == "basin" else f"{v:.12g}"
            writer.writerow([f"{x:.12g}", f"{y:.12g}", cell])
        return buf.getvalue()


def _require_planar(xi: PatternSet) -> None:
    if xi.d != 2:
        raise NotPlanarError(f"planar grids need 2-dimensional patterns, got d={xi.d}")


def energy_landscape(xi: PatternSet, phi: Optional[FeatureMap], beta: float, grid: GridSpec) -> GridResult:
    _require_planar(xi)
    model = _Model(xi, phi)
    vals = np.array([model.energy(q, beta) for q in grid.points()])
    return GridResult(grid, vals.reshape(grid.ny, grid.nx), "energy")


def basin_labels(
    queries,
    xi: PatternSet,
    phi: Optional[FeatureMap],
    cfg: HopfieldConfig,
    eps: float = 0.05,
    threads: int = 1,
) -> np.ndarray:
    """Label ``mu + 1`` when the final iterate is within ``eps`` of exactly memory ``mu``, else 0."""
    model = _Model(xi, phi)

    def label(q):
        x = final_weights(q, model, cfg)[0]
        hits = np.flatnonzero(np.linalg.norm(xi.data - x[:, None], axis=0) <= eps)
        return int(hits[0]) + 1 if hits.size == 1 else NO_CONVERGENCE

    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    return np.array(_map_ordered(label, list(queries), threads), dtype=np.int64)


def basins(
    xi: PatternSet,
    phi: Optional[FeatureMap],
    cfg: HopfieldConfig,
    grid: GridSpec,
    eps: float = 0.05,
    threads: int = 1,
) -> GridResult:
    _require_planar(xi)
    labels = basin_labels(grid.points(), xi, phi, cfg, eps, threads)
    return GridResult(grid, labels.reshape(grid.ny, grid.nx), "basin")


@dataclass
class MetaComparison:
    before: MetaHistogram
    after: MetaHistogram
    logs: List[TrainLog]


def metastable_comparison(
    m: int,
    d: int,
    d_phi: int,
    hop: HopfieldConfig,
    train: TrainConfig,
    n_queries: int,
    seeds: Sequence[int],
    threads: int = 1,
) -> MetaComparison:
    """Synthetic protocol: per seed, Gaussian memories and queries, histogram before and after U-Hop+.

    Seed ``s`` draws memories from ``s``, queries from ``s + 1_000_000`` and
    the initial ``W`` from ``s + 2_000_000``.
    """
    before, after, logs = MetaHistogram(), MetaHistogram(), []
    for s in seeds:
        xi = generate_synthetic(m, d, s)
        queries = gaussian_queries(n_queries, d, s + 1_000_000)
        before = before.merge(metastable_distribution(queries, xi, None, hop, threads))
        phi, log = uhop_plus(xi, init_weights(d, d_phi, s + 2_000_000), train)
        after = after.merge(metastable_distribution(queries, xi, phi, hop, threads))
        logs.append(log)
    return MetaComparison(before, after, logs)


def loss_curves(m_values: Sequence[int], d: int, d_phi: int, train: TrainConfig, seed: int = 0) -> Dict[int, TrainLog]:
    """Training curves of the separation loss for several memory-set sizes."""
    return {
        m: uhop_plus(generate_synthetic(m, d, seed), init_weights(d, d_phi, seed + 2_000_000), train)[1]
        for m in m_values
    }
