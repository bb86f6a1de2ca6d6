"""Gaussian beam geometry on the reference plane.

Lengths are in meters, powers in watts. Every function accepts either a single
point or an array of points with a trailing axis of length 2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Vec2",
    "BeamSpec",
    "ReceiverSpec",
    "ApertureWarning",
    "beam_width_at",
    "peak_power",
    "intensity",
    "received_power",
    "project_to_reference",
    "target_plane_ratio",
    "reference_plane_ratio",
    "far_field_ratio",
]


class Vec2(NamedTuple):
    """Point or offset on the reference plane."""

    x: float
    y: float


class ApertureWarning(UserWarning):
    """Receiver aperture is not small compared with the beam spot."""


@dataclass(frozen=True)
class BeamSpec:
    """One laser source as seen on the reference plane.

    Attributes
    ----------
    power_coeff : float
        Power coefficient ``a`` of the source (W).
    beam_width : float
        Gaussian spot scale ``w_z`` at the link distance (m).
    center : Vec2
        Spot center on the reference plane (m).
    """

    power_coeff: float
    beam_width: float
    center: Vec2 = Vec2(0.0, 0.0)

    def __post_init__(self):
        if not self.power_coeff > 0:
            raise ValueError(f"power_coeff must be > 0, got {self.power_coeff}")
        if not self.beam_width > 0:
            raise ValueError(f"beam_width must be > 0, got {self.beam_width}")
        cx, cy = (float(c) for c in self.center)
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError(f"center must be finite, got {self.center}")
        object.__setattr__(self, "center", Vec2(cx, cy))


@dataclass(frozen=True)
class ReceiverSpec:
    """Receiving aperture of the target, area in m^2."""

    area: float

    def __post_init__(self):
        if not self.area > 0:
            raise ValueError(f"area must be > 0, got {self.area}")

    def check_against(self, beam: BeamSpec) -> bool:
        """Warn when the aperture is not small relative to ``beam``'s spot.

        Returns True when the small-aperture assumption holds.
        """
        if self.area > beam.beam_width ** 2 / 100.0:
            warnings.warn(
                f"receiver area {self.area} m^2 exceeds w_z^2/100 = "
                f"{beam.beam_width ** 2 / 100.0} m^2; point-receiver model is approximate",
                ApertureWarning,
                stacklevel=2,
            )
            return False
        return True


def beam_width_at(divergence: float, distance: float) -> float:
    """Beam width ``w_z = phi * z`` for divergence angle ``phi`` (rad) at ``z`` (m)."""
    if not divergence > 0:
        raise ValueError(f"divergence must be > 0, got {divergence}")
    if not distance > 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    return divergence * distance


def _sq_dist(beam: BeamSpec, point) -> np.ndarray | float:
    p = np.asarray(point, dtype=float)
    d = p - np.asarray(beam.center)
    return np.sum(d * d, axis=-1)


def peak_power(beam: BeamSpec, area: float) -> float:
    """Received power at the spot center, ``2 a A / (pi w_z^2)``."""
    return 2.0 * beam.power_coeff * area / (math.pi * beam.beam_width ** 2)


def intensity(beam: BeamSpec, point) -> np.ndarray | float:
    """Gaussian spot intensity (W/m^2) at ``point``."""
    w2 = beam.beam_width ** 2
    peak = 2.0 * beam.power_coeff / (math.pi * w2)
    return peak * np.exp(-2.0 * _sq_dist(beam, point) / w2)


def received_power(beam: BeamSpec, rx: ReceiverSpec | float, point) -> np.ndarray | float:
    """Noiseless received power ``A * I(point)``.

    ``rx`` may be a :class:`ReceiverSpec` or a bare area in m^2.
    """
    area = rx.area if isinstance(rx, ReceiverSpec) else float(rx)
    return area * intensity(beam, point)


def project_to_reference(z: float, l: float, elevation: float) -> float:
    """Project a target displacement onto the reference plane.

    A target at distance ``z`` from the source moves by ``l`` along a
    direction tilted ``elevation`` radians out of the reference plane (positive
    angles move away from the source). The returned length is where the ray
    from the source through the new position crosses the reference plane,
    measured from the previous target point.
    """
    if not z > 0:
        raise ValueError(f"z must be > 0, got {z}")
    denom = z + l * math.sin(elevation)
    if not denom > 0:
        raise ValueError("target lies behind the source plane (z + l sin(angle) <= 0)")
    return z * l * math.cos(elevation) / denom


def target_plane_ratio(z: float, l: float, elevation: float, w_z: float) -> float:
    """Intensity at the moved target relative to the previous target point.

    The beam width at the moved target grows with its axial distance, using a
    fixed divergence ``w_z / z``.
    """
    s = l / z * math.sin(elevation)
    return math.exp(-2.0 * math.cos(elevation) ** 2 / (w_z / l + w_z / z * math.sin(elevation)) ** 2) / (1.0 + s) ** 2


def reference_plane_ratio(z: float, l: float, elevation: float, w_z: float) -> float:
    """Intensity at the projected point relative to the previous target point."""
    lp = project_to_reference(z, l, elevation)
    return math.exp(-2.0 * lp * lp / (w_z * w_z))


def far_field_ratio(l: float, elevation: float, w_z: float) -> float:
    """Common limit of both ratios as ``z`` grows without bound."""
    return math.exp(-2.0 * (l * math.cos(elevation)) ** 2 / (w_z * w_z))
