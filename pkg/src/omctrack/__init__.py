"""Link design and beacon tracking for short-range optical mobile links."""
from .beam import BeamSpec, ReceiverSpec, Vec2, beam_width_at, intensity, received_power
from .link_design import (
    DesignThresholds,
    Interval,
    average_power,
    constraint_average_power,
    constraint_outage,
    design_rule,
    expected_outage,
    optimal_beam_width,
)
from .specfun import LambertBranch, lambert_w, marcum_q1
from .stochastic import MobilitySpec, NoiseSpec, PointingSpec, RandomStream
from .tracking import (
    BeaconArray,
    GridSearchConfig,
    RankDeficientError,
    theoretical_error,
    track_mle_grid,
    track_multilateration,
)

__all__ = [
    "BeamSpec", "ReceiverSpec", "Vec2", "beam_width_at", "intensity", "received_power",
    "DesignThresholds", "Interval", "average_power", "constraint_average_power",
    "constraint_outage", "design_rule", "expected_outage", "optimal_beam_width",
    "LambertBranch", "lambert_w", "marcum_q1",
    "MobilitySpec", "NoiseSpec", "PointingSpec", "RandomStream",
    "BeaconArray", "GridSearchConfig", "RankDeficientError", "theoretical_error",
    "track_mle_grid", "track_multilateration",
]
