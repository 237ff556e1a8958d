"""Capacity lower bound (Lambert W form), well-separation predicates and spherical-code bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import betainc

from uhopplus.errors import (
    DegenerateRadiusError,
    HopfieldError,
    IndexOutOfRangeError,
    InvalidLogArgumentError,
    OutOfDomainError,
)
from uhopplus.kernel import FeatureMap, SeparationStats, separation_from_features, separation_stats
from uhopplus.patterns import PatternSet

INV_E = math.exp(-1.0)
DEGENERATE_RADIUS = 1e-15


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function by Halley iteration."""
    x = float(x)
    if math.isnan(x) or x < -INV_E:
        if x >= -INV_E - 1e-15:
            return -1.0
        raise OutOfDomainError(f"W0 is defined for x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x < -0.32:
        # branch-point series in p = sqrt(2(e x + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x < 3.0:
        w = math.log1p(x)
        w = w * (1.0 - math.log1p(w) / (2.0 + w))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return max(w, -1.0)


def lambert_w0_of_exp(y: float) -> float:
    """``W0(exp(y))`` without forming ``exp(y)`` for large ``y``."""
    if y < 500.0:
        return lambert_w0(math.exp(y))
    # solve w + log w = y by Newton
    w = y - math.log(y)
    for _ in range(100):
        dw = (w + math.log(w) - y) / (1.0 + 1.0 / w)
        w -= dw
        if abs(dw) <= 1e-15 * w:
            break
    return w


@dataclass(frozen=True)
class CapacityInputs:
    d_phi: int
    beta: float
    p_fail: float
    r_phi: float

    def __post_init__(self):
        if self.d_phi < 2:
            raise HopfieldError("feature dimension must be at least 2")
        if not self.beta > 0:
            raise HopfieldError("beta must be positive")
        if not 0.0 < self.p_fail < 1.0:
            raise HopfieldError("p must lie in (0, 1)")
        if not self.r_phi > 0:
            raise HopfieldError("R_phi must be positive")


@dataclass(frozen=True)
class CapacityBound:
    bound: float
    log_bound: float
    a: float
    b: float
    c: float
    raw_log_argument: float
    flags: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "bound": self.bound,
            "log_bound": self.log_bound,
            "a": self.a,
            "b": self.b,
            "C": self.c,
            "raw_log_argument": self.raw_log_argument,
            "flags": list(self.flags),
        }


def capacity_lower_bound(inp: CapacityInputs, guard_sign: bool = True) -> CapacityBound:
    """``sqrt(p) * C**((D-1)/4)`` with ``C = b / W0(exp(a + ln b))``.

    ``a = 4/(D-1) * (ln(2(sqrt(p)-1)/R) + 1)`` and ``b = 4 beta / (5(D-1))``.
    For ``p < 1`` the log argument is negative; with ``guard_sign`` its
    absolute value is used and the result carries the flag
    ``"log_argument_sign_guarded"``, otherwise ``InvalidLogArgumentError``.
    """
    dm1 = inp.d_phi - 1
    raw_arg = 2.0 * (math.sqrt(inp.p_fail) - 1.0) / inp.r_phi
    flags = []
    if raw_arg <= 0.0:
        if not guard_sign:
            raise InvalidLogArgumentError(f"log argument 2(sqrt(p)-1)/R = {raw_arg} is not positive")
        flags.append("log_argument_sign_guarded")
    a = 4.0 / dm1 * (math.log(abs(raw_arg)) + 1.0)
    b = 4.0 * inp.beta / (5.0 * dm1)
    c = b / lambert_w0_of_exp(a + math.log(b))
    log_bound = 0.5 * math.log(inp.p_fail) + dm1 / 4.0 * math.log(c)
    bound = math.exp(log_bound) if log_bound < 709.0 else math.inf
    return CapacityBound(bound, log_bound, a, b, c, raw_arg, flags)


def mhm_capacity_lower_bound(d: int, beta: float, p_fail: float, r: float) -> CapacityBound:
    """The same bound with the identity feature map, i.e. feature dimension ``d``."""
    return capacity_lower_bound(CapacityInputs(d, beta, p_fail, r))


def radius_from_separation(delta_min: float) -> float:
    """``R = sqrt(2 delta_min) / 2`` for unit-norm patterns."""
    return 0.5 * math.sqrt(2.0 * delta_min)


def separation_threshold(m: int, r_phi: float, beta: float, strict: bool = False) -> float:
    """Right-hand side of the well-separation condition.

    ``strict`` adds the ``2 R_phi`` term of the dense-model lemma.
    """
    if r_phi <= DEGENERATE_RADIUS:
        raise DegenerateRadiusError("R_phi is zero: two memories share a feature vector")
    thr = math.log(2.0 * (m - 1) / r_phi) / beta
    return thr + 2.0 * r_phi if strict else thr


def _stats(xi: PatternSet, phi: Optional[FeatureMap]) -> SeparationStats:
    if phi is None:
        return separation_from_features(xi.data)
    return separation_stats(phi, xi)


def well_separated(xi: PatternSet, phi: Optional[FeatureMap], beta: float, mu: int, strict: bool = False) -> bool:
    """``Delta_mu >= ln(2(M-1)/R_phi) / beta`` (plus ``2 R_phi`` when strict)."""
    if not 0 <= mu < xi.m:
        raise IndexOutOfRangeError(f"pattern index {mu} outside [0, {xi.m})")
    st = _stats(xi, phi)
    return bool(st.delta_per_pattern[mu] >= separation_threshold(xi.m, st.r_phi, beta, strict))


def is_memory_code(xi: PatternSet, phi: Optional[FeatureMap], beta: float, strict: bool = False) -> bool:
    st = _stats(xi, phi)
    thr = separation_threshold(xi.m, st.r_phi, beta, strict)
    return bool(np.all(st.delta_per_pattern >= thr))


@dataclass(frozen=True)
class BoundPair:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise HopfieldError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def separation_sandwich(m_star: int, d_phi: int) -> BoundPair:
    """Bounds on the best achievable minimum separation for ``m_star`` points on the ``d_phi``-sphere."""
    if m_star < 2 or d_phi < 2:
        raise HopfieldError("need m_star >= 2 and d_phi >= 2")
    lg = math.lgamma
    log_lower_base = 0.5 * math.log(math.pi) - math.log(m_star) + lg((d_phi + 1) / 2) - lg(d_phi / 2 + 1)
    log_upper_base = math.log(2.0) + 0.5 * math.log(math.pi) - math.log(m_star) + lg((d_phi + 1) / 2) - lg(d_phi / 2)
    lower = 0.5 * math.exp(2.0 / (d_phi - 1) * log_lower_base)
    upper = 2.0 * math.exp(log_upper_base / (d_phi - 1))
    return BoundPair(lower, upper)


@dataclass(frozen=True)
class CapacityEstimate:
    """Asymptotic estimates of the optimal capacity at angle ``theta``.

    ``o(1)`` factors are dropped and the exponent uses the proxy
    ``-log sin(theta)``, which is below the true exponent, so ``lower`` may
    exceed ``upper`` in high dimension. ``lower_exact`` is the non-asymptotic
    cap-area bound the ``lower`` estimate approximates.
    """

    lower: float
    upper: float
    lower_exact: float
    asymptotic: bool = True

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_exact": self.lower_exact,
            "label": "asymptotic estimate",
        }


def cap_fraction(d_phi: int, theta: float) -> float:
    """Normalized surface area of a spherical cap of angular radius ``theta <= pi/2`` on the ``d_phi``-sphere."""
    return 0.5 * float(betainc((d_phi - 1) / 2.0, 0.5, math.sin(theta) ** 2))


def optimal_capacity_bounds(d_phi: int, theta: float) -> CapacityEstimate:
    if d_phi < 2:
        raise HopfieldError("d_phi must be at least 2")
    if not 0.0 < theta < math.pi / 2:
        raise HopfieldError("theta must lie in (0, pi/2)")
    s = math.sin(theta)
    lower = math.sqrt(2.0 * math.pi * d_phi) * math.cos(theta) * math.exp(-(d_phi - 1) * math.log(s))
    upper = math.exp(-d_phi * math.log(s))
    return CapacityEstimate(lower, upper, 1.0 / cap_fraction(d_phi, theta))
