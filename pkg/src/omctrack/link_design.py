"""Closed-form link budget and spot-size design rules for the main laser.

Throughout, ``aA`` is the product of the source power coefficient and the
receiver area (W m^2), ``sigma_t`` the per-axis mobility spread and
``sigma_p`` the Rayleigh pointing scale (both m), and ``w_z`` the main-beam
width at the receiver (m).

Infeasible constraints come back as an empty :class:`Interval` instead of an
exception so that parameter sweeps never abort.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .specfun import BRANCH_POINT, LambertBranch, lambert_w, marcum_q1

__all__ = [
    "DesignThresholds",
    "Interval",
    "DesignRule",
    "average_power",
    "constraint_average_power",
    "max_beam_width",
    "feasible_radius",
    "outage_probability",
    "expected_outage",
    "optimal_beam_width",
    "outage_lambert_argument",
    "constraint_outage",
    "design_rule",
]

#: Open intervals whose endpoints are closer than this are treated as empty.
EMPTY_TOL = 1e-9


@dataclass(frozen=True)
class DesignThresholds:
    """Design targets.

    Attributes
    ----------
    eta : float
        Floor on the average received power (W).
    gamma_th : float
        Instantaneous power threshold defining the feasible region (W).
    xi : float
        Ceiling on the expected outage probability, in (0, 1).
    """

    eta: float
    gamma_th: float
    xi: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not self.gamma_th > 0:
            raise ValueError(f"gamma_th must be > 0, got {self.gamma_th}")
        if not 0 < self.xi < 1:
            raise ValueError(f"xi must lie in (0, 1), got {self.xi}")


@dataclass(frozen=True)
class Interval:
    """Open interval ``(lo, hi)``; ``lo = hi = nan`` encodes "no solution"."""

    lo: float
    hi: float

    @classmethod
    def empty(cls) -> "Interval":
        return cls(math.nan, math.nan)

    @property
    def is_empty(self) -> bool:
        if math.isnan(self.lo) or math.isnan(self.hi):
            return True
        return self.hi - self.lo <= EMPTY_TOL

    def __contains__(self, value: float) -> bool:
        return not self.is_empty and self.lo < value < self.hi

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def intersect(self, other: "Interval") -> "Interval":
        if self.is_empty or other.is_empty:
            return Interval.empty()
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if hi - lo <= EMPTY_TOL:
            return Interval.empty()
        return Interval(lo, hi)

    def scaled(self, factor: float) -> "Interval":
        if self.is_empty:
            return Interval.empty()
        return Interval(self.lo * factor, self.hi * factor)

    def __str__(self):
        if self.is_empty:
            return "(empty)"
        return f"({self.lo:.6g}, {self.hi:.6g})"


def _scalar_or_array(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not np.all(np.asarray(value) > 0):
            raise ValueError(f"{name} must be > 0, got {value}")


def average_power(aA, sigma_p, sigma_t, w_z):
    """Average received power over pointing error and target motion.

    ``2 aA / (pi (4 sigma_p^2 + 4 sigma_t^2 + w_z^2))``. Vectorized over any
    argument.
    """
    _check_positive(aA=aA, w_z=w_z)
    spread = 4.0 * (np.square(sigma_p) + np.square(sigma_t))
    return _scalar_or_array(2.0 * np.asarray(aA) / (np.pi * (spread + np.square(w_z))))


def constraint_average_power(aA: float, sigma_p: float, sigma_t: float,
                             thr: DesignThresholds) -> Interval:
    """Beam widths keeping :func:`average_power` above ``thr.eta``."""
    _check_positive(aA=aA)
    radicand = 2.0 * aA / (math.pi * thr.eta) - 4.0 * (sigma_p ** 2 + sigma_t ** 2)
    if radicand <= 0:
        return Interval.empty()
    hi = math.sqrt(radicand)
    if hi <= EMPTY_TOL:
        return Interval.empty()
    return Interval(0.0, hi)


def max_beam_width(aA: float, gamma_th: float) -> float:
    """Widest beam whose peak power still exceeds ``gamma_th``."""
    _check_positive(aA=aA, gamma_th=gamma_th)
    return math.sqrt(2.0 * aA / (math.pi * gamma_th))


def _check_width(w_z, aA, gamma_th):
    _check_positive(w_z=w_z)
    w_max = max_beam_width(aA, gamma_th)
    if np.any(np.asarray(w_z) > w_max * (1.0 + 1e-12)):
        raise ValueError(
            f"w_z={w_z} exceeds sqrt(2 aA/(pi gamma_th))={w_max}: "
            "received power can never exceed gamma_th"
        )


def feasible_radius(aA: float, gamma_th: float, w_z):
    """Radius of the disk around the beam center where power exceeds ``gamma_th``."""
    _check_width(w_z, aA, gamma_th)
    w2 = np.square(w_z)
    log_term = np.log(2.0 * aA / (np.pi * w2 * gamma_th))
    return _scalar_or_array(np.asarray(w_z) * np.sqrt(0.5 * np.maximum(log_term, 0.0)))


def outage_probability(r: float, sigma_t: float, w_z: float, aA: float, gamma_th: float) -> float:
    """Outage probability for a fixed pointing error ``r``.

    The target lands at a Gaussian position (per-axis ``sigma_t``) centered
    ``r`` away from the beam center; outage is leaving the feasible disk.
    """
    _check_positive(sigma_t=sigma_t)
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    r_out = float(feasible_radius(aA, gamma_th, w_z))
    return marcum_q1(r / sigma_t, r_out / sigma_t)


def expected_outage(w_z, aA, gamma_th, sigma_t, sigma_p):
    """Outage probability averaged over the Rayleigh pointing error.

    ``exp(w_z^2 / (4 (sigma_t^2 + sigma_p^2)) * ln(pi w_z^2 gamma_th / (2 aA)))``
    for ``0 < w_z <= sqrt(2 aA / (pi gamma_th))``. Vectorized over ``w_z``.
    """
    _check_width(w_z, aA, gamma_th)
    spread = sigma_t ** 2 + sigma_p ** 2
    _check_positive(sigma_sum=spread)
    w2 = np.square(np.asarray(w_z, dtype=float))
    t = np.pi * w2 * gamma_th / (2.0 * aA)
    with np.errstate(divide="ignore", invalid="ignore"):
        exponent = np.where(t > 0, w2 / (4.0 * spread) * np.log(np.where(t > 0, t, 1.0)), 0.0)
    return _scalar_or_array(np.exp(exponent))


def optimal_beam_width(aA: float, gamma_th: float) -> float:
    """Beam width minimizing :func:`expected_outage`, ``sqrt(2 aA / (pi e gamma_th))``.

    Independent of the mobility and pointing spreads.
    """
    _check_positive(aA=aA, gamma_th=gamma_th)
    return math.sqrt(2.0 * aA / (math.pi * math.e * gamma_th))


def outage_lambert_argument(aA: float, gamma_th: float, sigma_t: float, sigma_p: float,
                            xi: float) -> float:
    """``u = 2 pi gamma_th (sigma_t^2 + sigma_p^2) ln(xi) / aA``.

    The outage constraint is ``t ln t < u`` with ``t = pi w_z^2 gamma_th/(2 aA)``.
    It has solutions only for ``u >= -1/e``.
    """
    return 2.0 * math.pi * gamma_th * (sigma_t ** 2 + sigma_p ** 2) * math.log(xi) / aA


def constraint_outage(aA: float, gamma_th: float, sigma_t: float, sigma_p: float,
                      xi: float) -> Interval:
    """Beam widths keeping :func:`expected_outage` below ``xi``.

    When ``xi`` equals the minimum attainable outage the result collapses to a
    zero-width interval at :func:`optimal_beam_width` (reported as empty).
    """
    _check_positive(aA=aA, gamma_th=gamma_th, sigma_sum=sigma_t ** 2 + sigma_p ** 2)
    if not 0 < xi < 1:
        raise ValueError(f"xi must lie in (0, 1), got {xi}")
    u = outage_lambert_argument(aA, gamma_th, sigma_t, sigma_p, xi)
    if u < BRANCH_POINT:
        # allow a few ulps of roundoff at the degenerate optimum
        if BRANCH_POINT - u > 1e-12 * abs(BRANCH_POINT):
            return Interval.empty()
        u = BRANCH_POINT
    scale = max_beam_width(aA, gamma_th)
    lo = scale * math.exp(0.5 * lambert_w(u, LambertBranch.NEGATIVE_ONE))
    hi = scale * math.exp(0.5 * lambert_w(u, LambertBranch.PRINCIPAL))
    return Interval(lo, hi)


class DesignRule(NamedTuple):
    """Result of :func:`design_rule`."""

    width: Interval
    divergence: Interval
    average_power: Interval
    outage: Interval
    min_expected_outage: float

    @property
    def feasible(self) -> bool:
        return not self.width.is_empty


def design_rule(aA: float, sigma_t: float, sigma_p: float, thr: DesignThresholds,
                z: float) -> DesignRule:
    """Spot-size rule: intersection of the average-power and outage constraints.

    The divergence-angle range is the width range divided by the link length
    ``z``. ``min_expected_outage`` is the outage at the optimal width, the
    smallest ``xi`` any design could meet.
    """
    _check_positive(z=z)
    c1 = constraint_average_power(aA, sigma_p, sigma_t, thr)
    c2 = constraint_outage(aA, thr.gamma_th, sigma_t, sigma_p, thr.xi)
    width = c1.intersect(c2)
    best = expected_outage(optimal_beam_width(aA, thr.gamma_th), aA, thr.gamma_th, sigma_t, sigma_p)
    return DesignRule(width, width.scaled(1.0 / z), c1, c2, best)
