"""Special functions used by the link-design formulas.

Two functions are provided without any special-function dependency:

* :func:`marcum_q1`, the first-order Marcum Q function, evaluated as a
  Poisson mixture of Erlang survival functions.
* :func:`lambert_w`, the two real branches of the Lambert W function,
  evaluated by Halley iteration with a bisection fallback.
"""
from __future__ import annotations

import enum
import math

__all__ = ["LambertBranch", "marcum_q1", "lambert_w", "BRANCH_POINT"]

#: Location of the Lambert W branch point, -1/e.
BRANCH_POINT = -math.exp(-1.0)

_SERIES_TAIL_TOL = 1e-17
_W_RESIDUAL_TOL = 1e-12
# Inputs this close below -1/e are snapped onto the branch point (roundoff in callers).
_BRANCH_SNAP = 4.0 * 2.220446049250313e-16


class LambertBranch(enum.Enum):
    """Real branch of the Lambert W function."""

    PRINCIPAL = 0
    NEGATIVE_ONE = -1


def _check_finite_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


def _poisson_mixture(mix: float, inner: float, shift: int) -> float:
    # sum_k Pois(k; mix) * P(Pois(inner) <= k - shift), all terms non-negative
    log_mix = math.log(mix)
    log_inner = math.log(inner)
    total = 0.0
    cdf = 0.0  # P(Pois(inner) <= k - shift), built up term by term
    k = 0
    while True:
        j = k - shift
        if j >= 0:
            cdf += math.exp(-inner + j * log_inner - math.lgamma(j + 1.0))
        weight = math.exp(-mix + k * log_mix - math.lgamma(k + 1.0))
        total += weight * min(cdf, 1.0)
        if k + 1 > mix:
            rho = mix / (k + 1.0)
            if weight * rho / (1.0 - rho) < _SERIES_TAIL_TOL:
                return total
        k += 1


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q function Q1(a, b).

    Q1(a, b) is the probability that the radius of a 2-D Gaussian vector with
    unit per-axis variance and mean offset ``a`` exceeds ``b``. Writing
    ``lam = a**2 / 2`` and ``x = b**2 / 2``, it equals ``P(X <= N)`` for
    independent ``X ~ Pois(x)`` and ``N ~ Pois(lam)``, so

        Q1(a, b) = sum_k Pois(k; lam) * P(Pois(x) <= k).

    When ``b < a`` the result is close to one and is computed instead as
    ``1 - P(N <= X - 1)`` from the mirrored series, which keeps the small
    complement accurate. Every term is non-negative and built in the log
    domain. A series stops once ``k`` exceeds its Poisson mean and the
    geometric bound on the remaining mixing mass, ``p_k * rho / (1 - rho)``
    with ``rho = mean / (k + 1)``, drops below 1e-17.

    Parameters
    ----------
    a : float
        Non-centrality (offset) parameter, ``a >= 0``.
    b : float
        Threshold radius, ``b >= 0``.

    Returns
    -------
    float
        Q1(a, b) in [0, 1].

    Raises
    ------
    ValueError
        If either argument is negative or not finite.
    """
    a = _check_finite_nonneg("a", a)
    b = _check_finite_nonneg("b", b)
    if b == 0.0:
        return 1.0
    lam = 0.5 * a * a
    x = 0.5 * b * b
    if lam == 0.0:
        return math.exp(-x)
    if b < a:
        q = 1.0 - _poisson_mixture(x, lam, 1)
    else:
        q = _poisson_mixture(lam, x, 0)
    return min(max(q, 0.0), 1.0)


def _residual(w: float, x: float) -> float:
    return w * math.exp(w) - x


def _initial_guess(x: float, branch: LambertBranch) -> float:
    p2 = 2.0 * (math.e * x + 1.0)
    p = math.sqrt(max(p2, 0.0))
    if branch is LambertBranch.PRINCIPAL:
        if p < 0.6:
            return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
        if x < 3.0:
            return math.log1p(x)
        lx = math.log(x)
        return lx - math.log(lx)
    if p < 0.6:
        return -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p ** 3
    l1 = math.log(-x)
    return l1 - math.log(-l1)


def _bisect(x: float, branch: LambertBranch) -> float:
    if branch is LambertBranch.PRINCIPAL:
        lo, hi = -1.0, max(1.0, math.log(x) if x > 1.0 else 1.0)
        # w e^w is increasing on [-1, inf)
        while _residual(hi, x) < 0.0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _residual(mid, x) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * max(1.0, abs(mid)):
                break
        return 0.5 * (lo + hi)
    # w e^w is decreasing on (-inf, -1]
    lo, hi = 2.0 * math.log(-x) - 10.0, -1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _residual(mid, x) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def lambert_w(x: float, branch: LambertBranch = LambertBranch.PRINCIPAL) -> float:
    """Real Lambert W function, the inverse of ``w * exp(w)``.

    Parameters
    ----------
    x : float
        Argument. The principal branch accepts ``x >= -1/e``; the ``-1``
        branch accepts ``-1/e <= x < 0``.
    branch : LambertBranch
        Which real branch to evaluate.

    Returns
    -------
    float
        ``w`` with ``w * exp(w) == x``; ``w >= -1`` on the principal branch and
        ``w <= -1`` on the other.

    Raises
    ------
    ValueError
        If ``x`` lies outside the branch domain.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"lambert_w argument must be finite, got {x}")
    if x < BRANCH_POINT:
        if BRANCH_POINT - x > _BRANCH_SNAP:
            raise ValueError(f"lambert_w argument {x} is below the branch point -1/e")
        x = BRANCH_POINT
    if branch is LambertBranch.NEGATIVE_ONE and x >= 0.0:
        raise ValueError(f"W_-1 is defined only for -1/e <= x < 0, got {x}")
    if x == BRANCH_POINT:
        return -1.0
    if x == 0.0:
        return 0.0

    tol = _W_RESIDUAL_TOL * max(1.0, abs(x))
    w = _initial_guess(x, branch)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 0.25 * tol:
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_next = w - step
        if branch is LambertBranch.PRINCIPAL:
            w_next = max(w_next, -1.0)
        else:
            w_next = min(w_next, -1.0)
        if w_next == w:
            break
        w = w_next

    if abs(_residual(w, x)) > tol or not math.isfinite(w):
        w = _bisect(x, branch)
    return w
