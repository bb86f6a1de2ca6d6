"""Numerical-integration counterparts of the closed-form link metrics.

These integrate the underlying model directly and share no algebra with
:mod:`omctrack.link_design`; sweeps emit them as a validation series.
"""
from __future__ import annotations

import math

from scipy import integrate

from .link_design import feasible_radius
from .specfun import marcum_q1

__all__ = ["average_power_numeric", "expected_outage_numeric", "split_spread"]

_QUAD = dict(epsabs=0.0, epsrel=1e-12, limit=400)


def split_spread(sigma_sum: float) -> tuple[float, float]:
    """Split ``sigma_t^2 + sigma_p^2`` evenly into ``(sigma_t, sigma_p)``."""
    if not sigma_sum > 0:
        raise ValueError(f"sigma_sum must be > 0, got {sigma_sum}")
    s = math.sqrt(0.5 * sigma_sum)
    return s, s


def _gauss_overlap(offset: float, sigma_t: float, w_z: float) -> float:
    # int exp(-2 (x - offset)^2 / w^2) N(x; 0, sigma_t^2) dx over the real line
    def f(x):
        return math.exp(-2.0 * (x - offset) ** 2 / w_z ** 2 - 0.5 * (x / sigma_t) ** 2)

    width = 12.0 * max(sigma_t, w_z)
    lo, hi = min(0.0, offset) - width, max(0.0, offset) + width
    pts = sorted({0.0, offset})
    val, _ = integrate.quad(f, lo, hi, points=pts, **_QUAD)
    return val / (math.sqrt(2.0 * math.pi) * sigma_t)


def average_power_numeric(aA: float, sigma_p: float, sigma_t: float, w_z: float) -> float:
    """Average received power by triple integration.

    Integrates beam intensity against the 2-D Gaussian target density for a
    beam center displaced by ``r`` (the x and y integrals factor), then
    averages over the Rayleigh density of ``r``.
    """
    if not (sigma_p > 0 and sigma_t > 0 and w_z > 0):
        raise ValueError("sigma_p, sigma_t and w_z must be > 0 for the numeric oracle")
    peak = 2.0 * aA / (math.pi * w_z ** 2)
    y_factor = _gauss_overlap(0.0, sigma_t, w_z)

    def over_r(r):
        rayleigh = r / sigma_p ** 2 * math.exp(-0.5 * (r / sigma_p) ** 2)
        return rayleigh * _gauss_overlap(r, sigma_t, w_z)

    r_max = 40.0 * sigma_p
    val, _ = integrate.quad(over_r, 0.0, r_max, points=[sigma_p], **_QUAD)
    return peak * y_factor * val


def expected_outage_numeric(w_z: float, aA: float, gamma_th: float, sigma_t: float,
                            sigma_p: float) -> float:
    """Expected outage by quadrature of the Marcum-Q outage over the Rayleigh pointing error."""
    if not (sigma_p > 0 and sigma_t > 0):
        raise ValueError("sigma_p and sigma_t must be > 0 for the numeric oracle")
    b = feasible_radius(aA, gamma_th, w_z) / sigma_t

    def f(r):
        return r / sigma_p ** 2 * math.exp(-0.5 * (r / sigma_p) ** 2) * marcum_q1(r / sigma_t, b)

    # Rayleigh tail beyond 9 sigma_p is below 1e-17
    val, _ = integrate.quad(f, 0.0, 9.0 * sigma_p, points=[sigma_p], epsabs=1e-13, epsrel=1e-11,
                            limit=200)
    return val
