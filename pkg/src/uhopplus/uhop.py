"""Average separation loss, its HardMax limit, and projected gradient training of ``W`` (U-Hop+).

All losses act on the ``(D, M)`` feature matrix ``F`` of the memories. With
output normalization ``F`` has unit columns, so the loss is invariant to the
scale of ``W`` and the Frobenius projection never changes its value.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from uhopplus.errors import HopfieldError, SinglePatternError, ZeroImageError, ZeroMatrixError
from uhopplus.kernel import FeatureMap, separation_from_features
from uhopplus.patterns import PatternSet

ARMIJO_C = 1e-4
MAX_HALVINGS = 60
MAX_STEP = 1e100
PROJECTIONS = ("frobenius", "orthonormal")


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise HopfieldError(f"tau must be positive, got {tau}")


def _features(x: np.ndarray, w: np.ndarray, normalize: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Returns ``(F, norms)``; ``norms`` are the pre-normalization column lengths."""
    a = w.T @ x
    norms = np.linalg.norm(a, axis=0)
    if not normalize:
        return a, norms
    if np.any(norms < 1e-12):
        raise ZeroImageError("a memory is mapped to the zero vector")
    return a / norms, norms


def _loss_from_features(f: np.ndarray, tau: float, normalize: bool = False) -> Tuple[float, float, np.ndarray]:
    """Returns ``(loss, excess, log_p)``.

    ``excess`` is the loss with each pattern's self term factored out,
    ``mean_mu log(1 + sum_{nu != mu} exp(G_mu_nu - G_mu_mu))``. For unit
    features the self term is exactly ``1/tau``; the excess keeps the
    information that ``1/tau + excess`` loses to rounding when ``tau`` is small.
    ``log_p`` holds the row-wise log-softmax of ``G = F^T F / tau``.
    """
    g = (f.T @ f) / tau
    lse = logsumexp(g, axis=1)
    diag = np.diag(g)
    if normalize:
        diag = np.full_like(diag, 1.0 / tau)
    off = g - diag[:, None]
    np.fill_diagonal(off, -np.inf)
    excess = float(np.logaddexp(0.0, logsumexp(off, axis=1)).mean()) if f.shape[1] > 1 else 0.0
    loss = float(diag.mean() + excess) if normalize else float(lse.mean())
    return loss, excess, g - lse[:, None]


def loss_and_gradient(x: np.ndarray, w: np.ndarray, tau: float, normalize: bool = True) -> Tuple[float, np.ndarray]:
    """Separation loss and ``dL/dW`` for patterns ``x`` (``(d, M)``) and weights ``w`` (``(d, D)``)."""
    _check_tau(tau)
    m = x.shape[1]
    f, norms = _features(x, w, normalize)
    loss, _, log_p = _loss_from_features(f, tau, normalize)
    s = np.exp(log_p) / m
    if normalize:
        # self terms move only along f_mu, which the sphere Jacobian removes;
        # dropping them avoids cancellation against tiny cross terms
        np.fill_diagonal(s, 0.0)
    d_f = f @ (s + s.T) / tau
    if normalize:
        # Jacobian of a -> a/|a| is (I - f f^T)/|a|
        d_a = (d_f - f * np.sum(f * d_f, axis=0)) / norms
    else:
        d_a = d_f
    return loss, x @ d_a.T


def _x(xi) -> np.ndarray:
    return xi.data if isinstance(xi, PatternSet) else np.asarray(xi, dtype=np.float64)


def separation_loss(xi: PatternSet, phi: FeatureMap, tau: float) -> float:
    """``(1/M) sum_mu log sum_nu exp(<Phi(xi_mu), Phi(xi_nu)> / tau)``."""
    _check_tau(tau)
    return _loss_from_features(phi.features(_x(xi)), tau, phi.output_normalize)[0]


def loss_gradient(xi: PatternSet, w, tau: float, output_normalize: bool = True) -> np.ndarray:
    return loss_and_gradient(_x(xi), np.asarray(w, dtype=np.float64), tau, output_normalize)[1]


def _hardmax(f: np.ndarray) -> float:
    if f.shape[1] < 2:
        raise SinglePatternError("HardMax loss needs at least two patterns")
    k = f.T @ f
    np.fill_diagonal(k, -np.inf)
    return float(k.max())


def hardmax_loss(xi: PatternSet, phi: FeatureMap) -> float:
    """Largest pairwise feature similarity, ``max_{mu != nu} <Phi(xi_mu), Phi(xi_nu)>``."""
    return _hardmax(phi.features(_x(xi)))


def _log_log1p_exp(t: np.ndarray) -> np.ndarray:
    """``log(log(1 + exp(t)))`` without underflow for very negative ``t``."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    big = t > 30.0
    out[big] = np.log(t[big] + np.log1p(np.exp(-t[big])))
    small = ~big
    s = np.exp(t[small])
    ratio = np.ones_like(s)
    pos = s > 0
    ratio[pos] = np.log1p(s[pos]) / s[pos]
    out[small] = t[small] + np.log(ratio)
    return out


def helper_loss_from_features(f: np.ndarray, tau: float) -> float:
    _check_tau(tau)
    k = f.T @ f
    # per-pattern term with its own self-similarity factored out:
    # log(1 + sum_{nu != mu} exp((K_mu_nu - K_mu_mu) / tau))
    z = (k - np.diag(k)[:, None]) / tau
    np.fill_diagonal(z, -np.inf)
    if f.shape[1] == 1:
        return -np.inf
    log_s = logsumexp(z, axis=1)
    return float(tau * logsumexp(_log_log1p_exp(log_s)))


def helper_loss_l0(xi: PatternSet, phi: FeatureMap, tau: float) -> float:
    """Smoothed HardMax surrogate ``tau * log sum_mu log(1 + sum_{nu!=mu} exp((K_mu_nu - K_mu_mu)/tau))``.

    For unit features it is sandwiched between ``hardmax - 1 - tau log M`` and
    ``hardmax - 1 + tau log(M(M-1))``. A single pattern gives ``-inf``.
    """
    return helper_loss_from_features(phi.features(_x(xi)), tau)


def helper_loss_l0_literal(xi: PatternSet, phi: FeatureMap, tau: float) -> float:
    """``tau * log sum_mu log sum_nu exp(K_mu_nu / tau)``, self terms included.

    This form keeps the ``1/tau`` self term inside each logarithm, so it does
    not obey the HardMax sandwich; ``helper_loss_l0`` is the one that does.
    """
    _check_tau(tau)
    f = phi.features(_x(xi))
    lse = logsumexp((f.T @ f) / tau, axis=1)
    return float(tau * np.log(np.sum(lse)))


def project(w: np.ndarray, projection: str = "frobenius") -> np.ndarray:
    if projection == "frobenius":
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            raise ZeroMatrixError("cannot project a zero matrix onto the unit sphere")
        return w / norm
    if projection == "orthonormal":
        u, _, vt = np.linalg.svd(w, full_matrices=False)
        return u @ vt
    raise HopfieldError(f"unknown projection {projection!r}; expected one of {PROJECTIONS}")


def pgd_step(w, lr: float, xi: PatternSet, tau: float, output_normalize: bool = True, projection: str = "frobenius") -> np.ndarray:
    """``W' = P(W - lr * grad L(W))`` with ``P`` the Frobenius normalization by default."""
    if not lr >= 0:
        raise HopfieldError(f"learning rate must be non-negative, got {lr}")
    w = np.asarray(w, dtype=np.float64)
    grad = loss_gradient(xi, w, tau, output_normalize)
    return project(w - lr * grad, projection)


def backtracking_step(
    x: np.ndarray,
    w: np.ndarray,
    lr: float,
    tau: float,
    normalize: bool = True,
    projection: str = "frobenius",
    loss_grad: Optional[Tuple[float, np.ndarray]] = None,
) -> Tuple[np.ndarray, float, float]:
    """Projected Armijo line search starting from ``lr`` and halving.

    Returns ``(W_next, loss_next, step_used)``. The loss never increases; if
    no trial step is accepted the projected current iterate is returned.
    """
    _, grad = loss_grad if loss_grad is not None else loss_and_gradient(x, w, tau, normalize)
    current = _compare_value(x, w, tau, normalize)
    step = lr
    for _ in range(MAX_HALVINGS):
        trial = project(w - step * grad, projection)
        try:
            trial_value = _compare_value(x, trial, tau, normalize)
        except ZeroImageError:
            trial_value = np.inf
        decrease = ARMIJO_C * float(np.sum(grad * (trial - w)))
        if trial_value <= current + decrease and trial_value <= current:
            return trial, _loss_from_features(_features(x, trial, normalize)[0], tau, normalize)[0], step
        step *= 0.5
    fallback = project(w, projection)
    return fallback, _loss_from_features(_features(x, fallback, normalize)[0], tau, normalize)[0], 0.0


def _compare_value(x: np.ndarray, w: np.ndarray, tau: float, normalize: bool) -> float:
    """Line-search objective: the excess for unit features, the plain loss otherwise.

    Both differ from the loss by a constant in their respective modes.
    """
    loss, excess, _ = _loss_from_features(_features(x, w, normalize)[0], tau, normalize)
    return excess if normalize else loss


@dataclass(frozen=True)
class TrainConfig:
    """U-Hop+ settings.

    ``lipschitz=None`` selects Armijo backtracking. The first trial step is
    ``lr``; later searches start from ``max(lr, step_growth * last_step)``
    (or grow the previous trial after a failed search) so the step can follow
    the exponentially small gradients of low-``tau`` losses. ``step_growth=1`` gives plain backtracking from ``lr``. A value
    ``G`` for ``lipschitz`` fixes the step at ``min(lr, 1/G)``.
    """

    iters: int = 20
    lr: float = 0.1
    tau: float = 1.0
    lipschitz: Optional[float] = None
    seed: int = 0
    output_normalize: bool = True
    projection: str = "frobenius"
    step_growth: float = 2.0

    def __post_init__(self):
        if self.step_growth < 1.0:
            raise HopfieldError("step_growth must be at least 1")
        if self.iters < 0:
            raise HopfieldError("iters must be non-negative")
        if not self.lr > 0:
            raise HopfieldError("lr must be positive")
        _check_tau(self.tau)
        if self.lipschitz is not None and not self.lipschitz > 0:
            raise HopfieldError("Lipschitz constant must be positive")
        if self.projection not in PROJECTIONS:
            raise HopfieldError(f"unknown projection {self.projection!r}")


@dataclass
class TrainLog:
    """Per-iteration diagnostics; ``initial_*`` hold the values at ``W_0``."""

    loss_per_iter: List[float] = field(default_factory=list)
    hardmax_per_iter: List[float] = field(default_factory=list)
    delta_min_per_iter: List[float] = field(default_factory=list)
    step_per_iter: List[float] = field(default_factory=list)
    initial_loss: float = float("nan")
    initial_hardmax: float = float("nan")
    initial_delta_min: float = float("nan")

    def __len__(self) -> int:
        return len(self.loss_per_iter)

    def rows(self):
        yield 0, self.initial_loss, self.initial_hardmax, self.initial_delta_min
        for t, vals in enumerate(zip(self.loss_per_iter, self.hardmax_per_iter, self.delta_min_per_iter), start=1):
            yield (t, *vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "loss", "hardmax", "delta_min"])
        for t, loss, hm, dm in self.rows():
            writer.writerow([t, f"{loss:.12g}", f"{hm:.12g}", f"{dm:.12g}"])
        return buf.getvalue()


def init_weights(d: int, d_phi: int, seed: int) -> np.ndarray:
    """Gaussian ``(d, d_phi)`` matrix scaled to unit Frobenius norm."""
    w = np.random.default_rng(seed).standard_normal((d, d_phi))
    return w / np.linalg.norm(w)


def _diagnostics(x: np.ndarray, w: np.ndarray, tau: float, normalize: bool) -> Tuple[float, float, float]:
    f = _features(x, w, normalize)[0]
    loss = _loss_from_features(f, tau, normalize)[0]
    if f.shape[1] < 2:
        return loss, float("nan"), float("nan")
    return loss, _hardmax(f), separation_from_features(f).delta_min


def uhop_plus(xi: PatternSet, w0, cfg: TrainConfig) -> Tuple[FeatureMap, TrainLog]:
    """Run ``cfg.iters`` projected gradient steps on the separation loss."""
    x = _x(xi)
    w = np.asarray(w0, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != x.shape[0]:
        raise HopfieldError(f"W must have {x.shape[0]} rows, got shape {w.shape}")
    if w.shape[0] < w.shape[1] or np.linalg.matrix_rank(w) < w.shape[1]:
        raise HopfieldError("initial W must have full column rank")
    w = project(w, cfg.projection)
    log = TrainLog()
    log.initial_loss, log.initial_hardmax, log.initial_delta_min = _diagnostics(x, w, cfg.tau, cfg.output_normalize)
    fixed_step = None if cfg.lipschitz is None else min(cfg.lr, 1.0 / cfg.lipschitz)
    trial = cfg.lr
    for _ in range(cfg.iters):
        if fixed_step is None:
            w, _, step = backtracking_step(x, w, trial, cfg.tau, cfg.output_normalize, cfg.projection)
            # a failed search usually means the step was too small to move W in floating point
            trial = max(cfg.lr, cfg.step_growth * step) if step > 0 else min(cfg.step_growth * trial, MAX_STEP)
        else:
            _, grad = loss_and_gradient(x, w, cfg.tau, cfg.output_normalize)
            w, step = project(w - fixed_step * grad, cfg.projection), fixed_step
        loss, hm, dm = _diagnostics(x, w, cfg.tau, cfg.output_normalize)
        log.loss_per_iter.append(loss)
        log.hardmax_per_iter.append(hm)
        log.delta_min_per_iter.append(dm)
        log.step_per_iter.append(step)
    return FeatureMap(w, output_normalize=cfg.output_normalize), log
