"""Named experiment presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Optional

from uhopplus.errors import UnknownPresetError


@dataclass(frozen=True)
class Preset:
    name: str
    m: int
    d: int
    d_phi: int
    beta: float
    train_iters: int
    lr: float
    update_iters: int
    dataset: str = "synthetic"
    n_queries: int = 50
    grid: Optional[int] = None
    support_threshold: float = 0.01

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS: Dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("synthetic-meta", m=10, d=5, d_phi=5, beta=4.0, train_iters=20, lr=0.1, update_iters=20),
        Preset(
            "mnist-meta", m=2000, d=784, d_phi=200, beta=0.1, train_iters=20, lr=0.1, update_iters=5,
            dataset="mnist", n_queries=2000,
        ),
        Preset("contours-2pt", m=2, d=2, d_phi=2, beta=20.0, train_iters=5, lr=0.1, update_iters=20, grid=40),
        Preset("contours-4pt", m=4, d=2, d_phi=2, beta=1.0 / 0.9, train_iters=5, lr=0.1, update_iters=20, grid=40),
        # planar grids need d = 2, so the basins preset uses d = D_phi = 2 instead of 5
        Preset("basins-5pt", m=5, d=2, d_phi=2, beta=20.0, train_iters=5, lr=0.1, update_iters=5, grid=100),
    )
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
