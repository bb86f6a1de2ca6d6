"""Beacon-based target tracking.

Two estimators recover the target position on the reference plane from the
powers the target measures from ``N`` beacon lasers:

* :func:`track_mle_grid` scans a rectangular grid for the maximum of the
  Gaussian-noise likelihood.
* :func:`track_multilateration` inverts each power into a distance, linearizes
  the circle equations pairwise and solves them by least squares.

:func:`theoretical_error` gives the first-order RMS error implied by the
power-to-position Jacobian.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .beam import BeamSpec, ReceiverSpec, Vec2, peak_power
from .stochastic import NoiseSpec

__all__ = [
    "RankDeficientError",
    "BeaconArray",
    "GridSearchConfig",
    "Method",
    "TrackingEstimate",
    "pinv",
    "model_powers",
    "log_likelihood",
    "log_likelihood_grid",
    "track_mle_grid",
    "power_floor",
    "estimate_distance",
    "Multilaterator",
    "track_multilateration",
    "jacobian",
    "theoretical_error",
]

log = logging.getLogger(__name__)

#: Singular values below this fraction of the largest are treated as zero.
RCOND = 1e-12


class RankDeficientError(ValueError):
    """A linear system lost rank (collinear beacons or a flat Jacobian)."""


@dataclass(frozen=True)
class BeaconArray:
    """Beacon lasers sharing one receiver aperture of ``area`` m^2."""

    beams: tuple[BeamSpec, ...]
    area: float

    def __post_init__(self):
        beams = tuple(self.beams)
        if not beams:
            raise ValueError("a beacon array needs at least one beam")
        object.__setattr__(self, "beams", beams)
        rx = ReceiverSpec(self.area)
        for beam in beams:
            rx.check_against(beam)

    @classmethod
    def uniform(cls, centers, aA: float, beam_width: float, area: float = 1e-4) -> "BeaconArray":
        """Identical beams (power product ``aA``) at the given spot centers."""
        beams = tuple(BeamSpec(aA / area, beam_width, Vec2(*c)) for c in centers)
        return cls(beams, area)

    def __len__(self):
        return len(self.beams)

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.beams], dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return np.array([b.beam_width for b in self.beams], dtype=float)

    @property
    def peaks(self) -> np.ndarray:
        """Noiseless received power at each beam's center."""
        return np.array([peak_power(b, self.area) for b in self.beams], dtype=float)


@dataclass(frozen=True)
class GridSearchConfig:
    """Rectangle ``[x_min, x_max] x [y_min, y_max]`` scanned at spacing ``step``."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("search region is degenerate")

    @classmethod
    def covering(cls, array: BeaconArray, step: float) -> "GridSearchConfig":
        """Bounding box of the beacon centers."""
        c = array.centers
        return cls(c[:, 0].min(), c[:, 0].max(), c[:, 1].min(), c[:, 1].max(), step)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        nx = int(math.floor((self.x_max - self.x_min) / self.step + 1e-9)) + 1
        ny = int(math.floor((self.y_max - self.y_min) / self.step + 1e-9)) + 1
        xs = self.x_min + self.step * np.arange(nx)
        ys = self.y_min + self.step * np.arange(ny)
        return xs, ys


class Method(enum.Enum):
    GRID_MLE = "mle-grid"
    MULTILATERATION = "multilateration"


@dataclass(frozen=True)
class TrackingEstimate:
    point: Vec2
    method: Method
    log_likelihood: float | None = None
    clamped: int = 0  # number of measurements clamped before distance inversion


def pinv(matrix: np.ndarray) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudo-inverse via SVD, and the numerical rank."""
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(matrix.shape[::-1]), 0
    keep = s > RCOND * s[0]
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vt.T * inv_s) @ u.T, int(keep.sum())


def model_powers(points, array: BeaconArray) -> np.ndarray:
    """Noiseless beacon powers at ``points``; output shape ``points.shape[:-1] + (N,)``."""
    p = np.asarray(points, dtype=float)[..., None, :]
    d2 = np.sum((p - array.centers) ** 2, axis=-1)
    w2 = array.widths ** 2
    return array.peaks * np.exp(-2.0 * d2 / w2)


def _check_meas(meas, array: BeaconArray) -> np.ndarray:
    meas = np.asarray(meas, dtype=float)
    if meas.shape[-1] != len(array):
        raise ValueError(f"got {meas.shape[-1]} measurements for {len(array)} beacons")
    return meas


def log_likelihood(meas, hyp, array: BeaconArray, noise: NoiseSpec) -> float:
    """Log-likelihood of the measured powers if the target were at ``hyp``."""
    if not noise.sigma_n > 0:
        raise ValueError("log_likelihood needs sigma_n > 0")
    meas = _check_meas(meas, array)
    resid = meas - model_powers(hyp, array)
    n = len(array)
    return float(-np.sum(resid ** 2) / (2.0 * noise.sigma_n ** 2)
                 - n * math.log(math.sqrt(2.0 * math.pi) * noise.sigma_n))


def _sum_sq_residual_grid(meas: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                          array: BeaconArray) -> np.ndarray:
    # Gaussian factors along each axis keep memory at O(N (nx + ny)) per beacon
    c, w2, peaks = array.centers, array.widths ** 2, array.peaks
    gx = np.exp(-2.0 * (xs[:, None] - c[:, 0]) ** 2 / w2)  # (nx, N)
    gy = np.exp(-2.0 * (ys[:, None] - c[:, 1]) ** 2 / w2)  # (ny, N)
    ssr = np.zeros((xs.size, ys.size))
    for i in range(len(array)):
        resid = meas[i] - peaks[i] * np.outer(gx[:, i], gy[:, i])
        ssr += resid * resid
    return ssr


def log_likelihood_grid(meas, xs, ys, array: BeaconArray, noise: NoiseSpec) -> np.ndarray:
    """Log-likelihood on the grid ``xs x ys``; result indexed ``[ix, iy]``."""
    if not noise.sigma_n > 0:
        raise ValueError("log_likelihood_grid needs sigma_n > 0")
    meas = _check_meas(meas, array)
    ssr = _sum_sq_residual_grid(meas, np.asarray(xs, float), np.asarray(ys, float), array)
    n = len(array)
    return -ssr / (2.0 * noise.sigma_n ** 2) - n * math.log(math.sqrt(2.0 * math.pi) * noise.sigma_n)


def _parabolic_offset(fm: float, f0: float, fp: float) -> float:
    denom = fm - 2.0 * f0 + fp
    if denom >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (fm - fp) / denom, -0.5, 0.5))


def track_mle_grid(meas, array: BeaconArray, noise: NoiseSpec, cfg: GridSearchConfig,
                   refine: bool = False) -> TrackingEstimate:
    """Exhaustive maximum-likelihood search over a grid.

    The argmax does not depend on ``sigma_n`` (it only scales the residual
    term), so ``sigma_n = 0`` is accepted and the returned log-likelihood is
    then None. Ties go to the smallest x, then the smallest y.

    With ``refine=True`` the grid maximizer is nudged by a separable parabolic
    fit through its neighbours; the default returns the raw grid point.
    """
    meas = _check_meas(meas, array)
    xs, ys = cfg.axes()
    ssr = _sum_sq_residual_grid(meas, xs, ys, array)
    # argmin over a C-ordered (x, y) array returns the first minimum: smallest x, then y
    ix, iy = np.unravel_index(np.argmin(ssr), ssr.shape)
    x, y = float(xs[ix]), float(ys[iy])
    if refine:
        if 0 < ix < xs.size - 1:
            x += cfg.step * _parabolic_offset(-ssr[ix - 1, iy], -ssr[ix, iy], -ssr[ix + 1, iy])
        if 0 < iy < ys.size - 1:
            y += cfg.step * _parabolic_offset(-ssr[ix, iy - 1], -ssr[ix, iy], -ssr[ix, iy + 1])
    ll = None
    if noise.sigma_n > 0:
        ll = log_likelihood(meas, (x, y), array, noise)
    return TrackingEstimate(Vec2(x, y), Method.GRID_MLE, ll)


def power_floor(peak) -> np.ndarray | float:
    """Smallest power accepted by the distance inversion: ``max(1e-12, 1e-6 peak)``."""
    return np.maximum(1e-12, 1e-6 * np.asarray(peak, dtype=float))


def _squared_distances(meas: np.ndarray, array: BeaconArray) -> tuple[np.ndarray, np.ndarray]:
    peaks = array.peaks
    clipped = np.clip(meas, power_floor(peaks), peaks)
    d2 = 0.5 * array.widths ** 2 * np.log(peaks / clipped)
    return d2, clipped != meas


def estimate_distance(p_meas: float, beam: BeamSpec, area: float) -> float:
    """Distance from ``beam``'s center at which the noiseless power equals ``p_meas``.

    Measurements outside ``[power_floor, peak]`` (noise can push them there)
    are clamped first; the clamp is logged.
    """
    peak = peak_power(beam, area)
    floor = float(power_floor(peak))
    p = min(max(float(p_meas), floor), peak)
    if p != p_meas:
        log.debug("clamped measured power %g W into [%g, %g]", p_meas, floor, peak)
    return beam.beam_width * math.sqrt(0.5 * math.log(peak / p))


class Multilaterator:
    """Pairwise-difference least-squares solver for a fixed beacon layout.

    The system matrix depends only on the beacon centers, so its
    pseudo-inverse is computed once and reused for every measurement vector.
    """

    def __init__(self, array: BeaconArray):
        if len(array) < 3:
            raise ValueError("multilateration needs at least 3 beacons")
        self.array = array
        c = array.centers
        self.pairs = list(itertools.combinations(range(len(array)), 2))
        i, j = np.array(self.pairs).T
        self._i, self._j = i, j
        self.system = 2.0 * (c[j] - c[i])
        self._offset = np.sum(c[j] ** 2, axis=1) - np.sum(c[i] ** 2, axis=1)
        self.system_pinv, rank = pinv(self.system)
        if rank < 2:
            raise RankDeficientError("beacon centers are collinear; position is not identifiable")

    def rhs(self, d2: np.ndarray) -> np.ndarray:
        return d2[..., self._i] - d2[..., self._j] + self._offset

    def solve(self, meas) -> tuple[np.ndarray, np.ndarray]:
        """Estimated points for one or many measurement vectors, and clamp counts."""
        meas = _check_meas(meas, self.array)
        d2, clamped = _squared_distances(meas, self.array)
        return self.rhs(d2) @ self.system_pinv.T, clamped.sum(axis=-1)


def track_multilateration(meas, array: BeaconArray, area: float | None = None) -> TrackingEstimate:
    """Least-squares multilateration from one measurement vector.

    ``area`` defaults to the array's receiver area.
    """
    if area is not None and area != array.area:
        array = BeaconArray(array.beams, area)
    point, clamped = Multilaterator(array).solve(meas)
    if clamped:
        log.debug("%d of %d measurements clamped before distance inversion", clamped, len(array))
    return TrackingEstimate(Vec2(float(point[0]), float(point[1])), Method.MULTILATERATION,
                            clamped=int(clamped))


def jacobian(point, array: BeaconArray) -> np.ndarray:
    """Derivatives of each beacon power with respect to the target position, shape ``(N, 2)``."""
    p = np.asarray(point, dtype=float)
    diff = p - array.centers
    powers = model_powers(p, array)
    return (-4.0 * powers / array.widths ** 2)[:, None] * diff


def theoretical_error(point, array: BeaconArray, noise: NoiseSpec) -> float:
    """First-order RMS position error ``sigma_n sqrt(tr(U+^T U+))`` at ``point``."""
    u_pinv, rank = pinv(jacobian(point, array))
    if rank < 2:
        raise RankDeficientError(f"Jacobian has rank {rank} at {tuple(point)}; error is unbounded")
    return noise.sigma_n * math.sqrt(float(np.trace(u_pinv.T @ u_pinv)))
