import math

import numpy as np
import pytest

from omctrack.config import load_config
from omctrack.harness import (
    Curve,
    ExperimentConfig,
    run_tracking_experiment,
    simulate_trajectory,
    sweep_link_curves,
)
from omctrack.link_design import DesignThresholds, expected_outage, optimal_beam_width
from omctrack.stochastic import MobilitySpec, NoiseSpec, PointingSpec
from omctrack.tracking import BeaconArray, GridSearchConfig, Method


@pytest.fixture(scope="module")
def table3():
    return load_config("table3").experiment(trials=500)


@pytest.fixture(scope="module")
def table1():
    return load_config("table1").experiment()


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(z=100, trial_count=0)
        with pytest.raises(ValueError):
            ExperimentConfig(z=0.0)
        with pytest.raises(ValueError):
            ExperimentConfig(z=100, sweep=("aA", (1.0, math.inf)))
        with pytest.raises(ValueError):
            ExperimentConfig(z=100, sweep=("colour", (1.0,)))

    def test_main_beam_defaults_to_optimal_width(self, table1):
        assert table1.main_beam.beam_width == optimal_beam_width(80, 1.0)
        assert table1.with_(main_width=4.0).main_beam.beam_width == 4.0

    def test_missing_sections_are_reported(self):
        with pytest.raises(ValueError, match="array"):
            run_tracking_experiment(ExperimentConfig(z=100), (0, 0), Method.MULTILATERATION)


class TestTracking:
    def test_reproducible(self, table3):
        a = run_tracking_experiment(table3, (0.3, 0.1), Method.MULTILATERATION, keep_trials=True)
        b = run_tracking_experiment(table3, (0.3, 0.1), Method.MULTILATERATION, keep_trials=True)
        assert a.estimates.tobytes() == b.estimates.tobytes()
        c = run_tracking_experiment(table3.with_(master_seed=1), (0.3, 0.1), Method.MULTILATERATION)
        assert c.mean_radial_error != a.mean_radial_error

    def test_trial_is_independent_of_trial_count(self, table3):
        short = run_tracking_experiment(table3.with_(trial_count=10), (0, 0), "multilateration",
                                        keep_trials=True)
        long = run_tracking_experiment(table3, (0, 0), "multilateration", keep_trials=True)
        assert np.array_equal(short.estimates, long.estimates[:10])

    def test_error_angle_is_mean_over_distance(self, table3):
        stats = run_tracking_experiment(table3, (-1, -1), Method.MULTILATERATION)
        assert stats.error_angle * table3.z == pytest.approx(stats.mean_radial_error, rel=1e-12)
        assert stats.rms_error >= stats.mean_radial_error > 0

    def test_noiseless_multilateration_is_exact(self, table3):
        stats = run_tracking_experiment(table3.with_(noise=NoiseSpec(0.0), trial_count=5), (0.5, 0.4),
                                        Method.MULTILATERATION)
        assert stats.mean_radial_error < 1e-12

    def test_noiseless_grid_within_half_diagonal(self):
        cfg = load_config("table2").experiment(trials=3).with_(noise=NoiseSpec(0.0))
        stats = run_tracking_experiment(cfg, (0.503, 0.397), Method.GRID_MLE)
        assert stats.mean_radial_error <= cfg.search.step / math.sqrt(2)

    def test_grid_defaults_to_array_bounding_box(self):
        cfg = ExperimentConfig(z=100, array=BeaconArray.uniform([(1, 1), (-1, 1), (-1, -1), (1, -1)],
                                                                 80, 2), noise=NoiseSpec(0.0),
                               trial_count=1)
        assert run_tracking_experiment(cfg, (0.5, 0.4), "mle-grid").mean_radial_error < 1e-9


class TestSweep:
    def test_average_power_value(self, table1):
        pts = sweep_link_curves(table1, Curve.AVG_POWER, [4.0])
        closed = [p for p in pts if p.method == "closed_form"]
        assert closed[0].ordinate == pytest.approx(2.122, abs=1e-3)
        assert {p.method for p in pts} == {"closed_form", "numeric_oracle"}

    def test_series_labels(self):
        cfg = load_config("fig7").experiment()
        pts = sweep_link_curves(cfg, "expected_outage", np.linspace(0.5, 6, 12), oracle=False)
        assert sorted({p.series for p in pts}) == ["aA=160", "aA=40", "aA=80"]

    def test_minima_at_optimal_width(self):
        cfg = load_config("fig7").experiment()
        grid = np.arange(0.5, 10.0, 1e-3)
        pts = sweep_link_curves(cfg, "expected_outage", grid, oracle=False)
        for aA in (40, 80, 160):
            series = [p for p in pts if p.series == f"aA={aA}"]
            best = min(series, key=lambda p: p.ordinate)
            assert best.abscissa == pytest.approx(optimal_beam_width(aA, 1.0), abs=1e-3)

    def test_spread_minima_share_abscissa(self):
        cfg = load_config("fig8").experiment()
        grid = np.arange(0.5, 7.0, 1e-3)
        pts = sweep_link_curves(cfg, "expected_outage", grid, oracle=False)
        best = {}
        for label in {p.series for p in pts}:
            best[label] = min((p for p in pts if p.series == label), key=lambda p: p.ordinate)
        assert len({round(b.abscissa, 9) for b in best.values()}) == 1
        assert best["sigma_sum=1"].ordinate < 0.01

    def test_too_wide_widths_are_skipped(self, table1, caplog):
        pts = sweep_link_curves(table1, "expected_outage", [1.0, 8.0], oracle=False)
        assert [p.abscissa for p in pts] == [1.0]
        assert "skipped 1 widths" in caplog.text

    def test_empty_grid(self, table1):
        with pytest.raises(ValueError):
            sweep_link_curves(table1, "avg_power", [])


class TestTrajectory:
    def test_no_spread_means_constant_peak(self):
        cfg = ExperimentConfig(z=100, aA=80, main_width=4.0, mobility=MobilitySpec(0.0),
                               pointing=PointingSpec(0.0),
                               thresholds=DesignThresholds(1.0, 1.0, 0.1))
        traj = simulate_trajectory(cfg, 50)
        assert np.allclose(traj.power, 160 / (16 * math.pi), rtol=1e-14)
        assert not traj.outage.any()

    def test_structure_and_reproducibility(self, table1):
        a = simulate_trajectory(table1, 200)
        b = simulate_trajectory(table1, 200)
        assert len(a) == 200 and a.power.tobytes() == b.power.tobytes()
        steps = list(a)
        assert steps[0].index == 1 and steps[-1].index == 200
        # the beam is re-aimed at the previous true position
        offsets = a.center[1:] - a.target[:-1]
        assert 0.5 < np.mean(np.hypot(*offsets.T)) < 2.0
        assert steps[3].outage == (steps[3].power <= 1.0)

    def test_rejects_non_positive_steps(self, table1):
        with pytest.raises(ValueError):
            simulate_trajectory(table1, 0)

    def test_explicit_width(self, table1):
        traj = simulate_trajectory(table1.with_(main_width=4.33), 20_000)
        want = expected_outage(4.33, 80, 1.0, 1.0, 1.0)
        assert traj.outage_rate == pytest.approx(want, rel=0.1)


def test_search_region_from_config():
    cfg = load_config("table2").experiment()
    assert cfg.search == GridSearchConfig(-1, 1, -1, 1, 0.01)
