"""Monte-Carlo experiments: tracking accuracy, link curves and trajectories.

Randomness is derived from ``ExperimentConfig.master_seed``. Tracking trial
``i`` draws its noise from ``RandomStream(master_seed).spawn(i)``, so any
single trial can be reproduced on its own and results do not depend on
execution order. Trajectories use two fixed sub-streams, one for mobility and
one for pointing error.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .beam import BeamSpec, Vec2, received_power
from .link_design import (
    DesignThresholds,
    average_power,
    expected_outage,
    max_beam_width,
    optimal_beam_width,
)
from .oracles import average_power_numeric, expected_outage_numeric
from .stochastic import (
    MobilitySpec,
    NoiseSpec,
    PointingSpec,
    RandomStream,
    sample_pointing_offset,
    sample_target_step,
)
from .tracking import (
    BeaconArray,
    GridSearchConfig,
    Method,
    Multilaterator,
    RankDeficientError,
    model_powers,
    track_mle_grid,
)

__all__ = [
    "ExperimentConfig",
    "TrialStats",
    "CurvePoint",
    "Curve",
    "Trajectory",
    "TrajectoryStep",
    "run_tracking_experiment",
    "sweep_link_curves",
    "simulate_trajectory",
    "expected_trajectory_metrics",
    "SWEEP_PARAMETERS",
]

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 10_000
# trajectories and trials use disjoint spawn keys under the same master seed
_MOBILITY_KEY = 2 ** 32
_POINTING_KEY = 2 ** 32 + 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs: geometry, environment, thresholds and seeding.

    Sections a run does not use may be left as None: tracking experiments need
    ``array`` and ``noise``; link curves need ``aA``, ``mobility``, ``pointing``
    and ``thresholds``; trajectories additionally use the main beam.

    ``aA`` is the main laser's power-area product and ``main_width`` its beam
    width (defaulting to the outage-optimal width). ``sweep`` is an optional
    ``(parameter_name, values)`` pair for link curves.
    """

    z: float
    aA: float | None = None
    main_width: float | None = None
    area: float = 1e-4
    array: BeaconArray | None = None
    mobility: MobilitySpec | None = None
    pointing: PointingSpec | None = None
    noise: NoiseSpec | None = None
    thresholds: DesignThresholds | None = None
    trial_count: int = DEFAULT_TRIALS
    master_seed: int = 0
    search: GridSearchConfig | None = None
    sweep: tuple[str, tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.trial_count < 1:
            raise ValueError(f"trial_count must be >= 1, got {self.trial_count}")
        if not self.z > 0:
            raise ValueError(f"z must be > 0, got {self.z}")
        if self.sweep is not None:
            name, values = self.sweep
            values = tuple(float(v) for v in values)
            if name not in SWEEP_PARAMETERS:
                raise ValueError(f"unknown sweep parameter {name!r}; choose from {SWEEP_PARAMETERS}")
            if not values or not all(math.isfinite(v) for v in values):
                raise ValueError("sweep values must be a non-empty list of finite numbers")
            object.__setattr__(self, "sweep", (name, values))

    def need(self, *names: str):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"experiment config is missing: {', '.join(missing)}")

    @property
    def main_beam(self) -> BeamSpec:
        """The communication laser, centered on the reference-plane origin."""
        self.need("aA")
        width = self.main_width
        if width is None:
            self.need("thresholds")
            width = optimal_beam_width(self.aA, self.thresholds.gamma_th)
        return BeamSpec(self.aA / self.area, width)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class TrialStats:
    """Aggregate tracking error over Monte-Carlo trials."""

    mean_radial_error: float
    rms_error: float
    error_angle: float
    trials: int
    errors: np.ndarray | None = field(default=None, repr=False)
    estimates: np.ndarray | None = field(default=None, repr=False)


class CurvePoint(NamedTuple):
    abscissa: float
    ordinate: float
    series: str
    method: str  # "closed_form" or "numeric_oracle"


class Curve(str, enum.Enum):
    AVG_POWER = "avg_power"
    EXPECTED_OUTAGE = "expected_outage"


def _trial_noise(cfg: ExperimentConfig, trials: int) -> np.ndarray:
    root = RandomStream(cfg.master_seed)
    n = len(cfg.array)
    noise = np.empty((trials, n))
    for t in range(trials):
        noise[t] = root.spawn(t).normal(cfg.noise.sigma_n, n)
    return noise


def run_tracking_experiment(cfg: ExperimentConfig, target, method: Method | str,
                            keep_trials: bool = False) -> TrialStats:
    """Track a fixed target ``cfg.trial_count`` times under fresh noise.

    Each trial adds independent Gaussian noise to the noiseless beacon powers
    at ``target``, runs the estimator and records the radial error.
    """
    cfg.need("array", "noise")
    method = Method(method)
    target = np.asarray(target, dtype=float)
    trials = cfg.trial_count
    measured = model_powers(target, cfg.array) + _trial_noise(cfg, trials)

    if method is Method.MULTILATERATION:
        try:
            solver = Multilaterator(cfg.array)
        except RankDeficientError as exc:
            raise RankDeficientError(f"trial 0: {exc}") from exc
        estimates, _ = solver.solve(measured)
    else:
        search = cfg.search or GridSearchConfig.covering(cfg.array, 0.01)
        estimates = np.empty((trials, 2))
        for t in range(trials):
            estimates[t] = track_mle_grid(measured[t], cfg.array, cfg.noise, search).point

    errors = np.linalg.norm(estimates - target, axis=1)
    mean = float(np.mean(errors))
    stats = TrialStats(
        mean_radial_error=mean,
        rms_error=float(np.sqrt(np.mean(errors ** 2))),
        error_angle=mean / cfg.z,
        trials=trials,
    )
    if keep_trials:
        stats.errors = errors
        stats.estimates = estimates
    return stats


SWEEP_PARAMETERS = ("aA", "sigma_sum", "sigma_t", "sigma_p", "gamma_th")


def _series_settings(cfg: ExperimentConfig):
    cfg.need("aA", "mobility", "pointing", "thresholds")
    base = dict(
        aA=cfg.aA,
        sigma_t=cfg.mobility.sigma_t,
        sigma_p=cfg.pointing.sigma_p,
        gamma_th=cfg.thresholds.gamma_th,
    )
    if cfg.sweep is None:
        yield "base", base
        return
    name, values = cfg.sweep
    for v in values:
        s = dict(base)
        if name == "sigma_sum":
            # split evenly; only the sum enters the closed forms
            s["sigma_t"] = s["sigma_p"] = math.sqrt(0.5 * v)
        else:
            s[name] = v
        yield f"{name}={v:g}", s


def sweep_link_curves(cfg: ExperimentConfig, which: Curve | str, w_grid: Sequence[float],
                      oracle: bool = True) -> list[CurvePoint]:
    """Average-power or expected-outage curves over a beam-width grid.

    One series per sweep value (or a single ``"base"`` series). With
    ``oracle`` set, each closed-form point is paired with its numerical
    integration. Expected-outage grid points wider than
    ``sqrt(2 aA / (pi gamma_th))`` are skipped with a warning.
    """
    w_grid = [float(w) for w in w_grid]
    if not w_grid:
        raise ValueError("beam-width grid is empty")
    if any(not (math.isfinite(w) and w > 0) for w in w_grid):
        raise ValueError("beam-width grid values must be finite and > 0")
    which = Curve(which)

    points: list[CurvePoint] = []
    for label, s in _series_settings(cfg):
        if which == Curve.EXPECTED_OUTAGE:
            w_max = max_beam_width(s["aA"], s["gamma_th"])
            skipped = [w for w in w_grid if w > w_max]
            if skipped:
                log.warning("series %s: skipped %d widths above %.6g m (peak below gamma_th)",
                            label, len(skipped), w_max)
        for w in w_grid:
            if which == Curve.AVG_POWER:
                closed = average_power(s["aA"], s["sigma_p"], s["sigma_t"], w)
                numeric = (average_power_numeric(s["aA"], s["sigma_p"], s["sigma_t"], w)
                           if oracle else None)
            else:
                if w > w_max:
                    continue
                closed = expected_outage(w, s["aA"], s["gamma_th"], s["sigma_t"], s["sigma_p"])
                numeric = (expected_outage_numeric(w, s["aA"], s["gamma_th"], s["sigma_t"],
                                                   s["sigma_p"]) if oracle else None)
            points.append(CurvePoint(w, float(closed), label, "closed_form"))
            if numeric is not None:
                points.append(CurvePoint(w, float(numeric), label, "numeric_oracle"))
    return points


class TrajectoryStep(NamedTuple):
    index: int
    target: Vec2
    center: Vec2
    power: float
    outage: bool


@dataclass
class Trajectory:
    """Per-interval record of a simulated tracking run (arrays of length ``steps``)."""

    target: np.ndarray
    center: np.ndarray
    power: np.ndarray
    outage: np.ndarray

    def __len__(self):
        return len(self.power)

    def __iter__(self) -> Iterator[TrajectoryStep]:
        for k in range(len(self)):
            yield TrajectoryStep(k + 1, Vec2(*self.target[k]), Vec2(*self.center[k]),
                                 float(self.power[k]), bool(self.outage[k]))

    @property
    def outage_rate(self) -> float:
        return float(np.mean(self.outage))

    @property
    def mean_power(self) -> float:
        return float(np.mean(self.power))


def simulate_trajectory(cfg: ExperimentConfig, steps: int, start=(0.0, 0.0)) -> Trajectory:
    """Random-walk target followed by an ideally tracking main laser.

    The main beam has power-area product ``cfg.aA`` and width
    ``cfg.main_width`` on a receiver of ``cfg.area``.

    In interval ``k`` the beam is re-aimed at the target's previous position
    plus a Rayleigh pointing offset, the target takes a Gaussian step, and the
    main-beam power at the new position is recorded. Outage means the power is
    at or below ``gamma_th``.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    cfg.need("mobility", "pointing", "thresholds")
    beam = cfg.main_beam
    root = RandomStream(cfg.master_seed)
    moves = sample_target_step((0.0, 0.0), cfg.mobility, root.spawn(_MOBILITY_KEY), size=steps)
    offsets = sample_pointing_offset(cfg.pointing, root.spawn(_POINTING_KEY), size=steps)

    positions = np.asarray(start, dtype=float) + np.cumsum(np.vstack([[0.0, 0.0], moves]), axis=0)
    previous, target = positions[:-1], positions[1:]
    center = previous + offsets
    # beam geometry is shift-invariant: evaluate the main beam at target - center
    power = received_power(beam, cfg.area, target - center)
    outage = power <= cfg.thresholds.gamma_th
    return Trajectory(target, center, power, outage)


def expected_trajectory_metrics(cfg: ExperimentConfig) -> tuple[float, float]:
    """Closed-form expected outage and average power for ``cfg``'s main beam."""
    w = cfg.main_beam.beam_width
    cfg.need("mobility", "pointing")
    s_t, s_p = cfg.mobility.sigma_t, cfg.pointing.sigma_p
    return (
        expected_outage(w, cfg.aA, cfg.thresholds.gamma_th, s_t, s_p),
        average_power(cfg.aA, s_p, s_t, w),
    )
