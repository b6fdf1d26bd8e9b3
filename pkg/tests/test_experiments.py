import math

import numpy as np
import pytest

from ldcusum.arma import ArmaModel
from ldcusum.detector import DetectorConfig
from ldcusum.errors import ConfigMismatch
from ldcusum.experiments import (
    ExperimentPlan,
    alarm_ratio_rows,
    basic_experiment,
    coefficient_sweep,
    convergence_diagnostic,
    format_value,
    parse_grid,
    parse_process,
    run_experiment,
    sensitivity_sweep,
    write_csv,
)
from ldcusum.likelihood import MeanShift


class TestPlan:
    def test_defaults(self):
        plan = ExperimentPlan()
        assert plan.n_windows == 151
        assert plan.first_change_window == 51
        assert plan.config.change == MeanShift(3.0)

    def test_detector_independent_of_post_mean(self):
        assert ExperimentPlan(post_mean=5.0).config.change == MeanShift(3.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ExperimentPlan(changepoint=201)
        with pytest.raises(ValueError):
            ExperimentPlan(runs=0)
        with pytest.raises(ConfigMismatch):
            ExperimentPlan(detector=DetectorConfig(model=ArmaModel.ma1(0.5)))

    def test_with_model(self):
        plan = ExperimentPlan(detector=DetectorConfig(model=ArmaModel.ar1(0.5), window=40))
        moved = plan.with_model(ArmaModel.ma1(0.2))
        assert moved.detector.model == ArmaModel.ma1(0.2)
        assert moved.detector.window == 40


class TestReport:
    def test_shape_and_granularity(self):
        rep = basic_experiment(ExperimentPlan(runs=40))
        assert len(rep.alarm_ratio_per_window) == 151
        assert np.allclose(rep.alarm_ratio_per_window * 40, np.round(rep.alarm_ratio_per_window * 40))
        assert np.all((0 <= rep.alarm_ratio_per_window) & (rep.alarm_ratio_per_window <= 1))
        assert rep.mean_false_alarm == pytest.approx(rep.alarm_ratio_per_window[:50].mean())
        assert len(rep.detection_ratio_per_window) == 101
        assert rep.mean_delay >= 0

    def test_order_independent(self):
        plan = ExperimentPlan(model=ArmaModel.ma1(0.3), runs=30)
        seeds = list(range(30))
        a = run_experiment(plan, seeds)
        b = run_experiment(plan, seeds[::-1])
        np.testing.assert_array_equal(a.alarm_ratio_per_window, b.alarm_ratio_per_window)
        assert (a.mean_false_alarm, a.mean_delay, a.runs_detected) == (b.mean_false_alarm, b.mean_delay, b.runs_detected)

    def test_reproducible(self):
        plan = ExperimentPlan(runs=20, seed=9)
        np.testing.assert_array_equal(basic_experiment(plan).alarm_ratio_per_window,
                                      basic_experiment(plan).alarm_ratio_per_window)

    def test_undetected_runs_excluded(self):
        # a tiny shift is rarely caught; undetected runs do not count towards the delay
        plan = ExperimentPlan(model=ArmaModel(), post_mean=0.05, runs=30)
        rep = basic_experiment(plan)
        assert rep.runs_detected <= rep.runs
        if rep.runs_detected == 0:
            assert math.isnan(rep.mean_delay)


class TestMonteCarlo:
    def test_ar1_basic(self):
        rep = basic_experiment(ExperimentPlan(model=ArmaModel.ar1(0.5)))
        assert rep.mean_false_alarm <= 0.05
        assert rep.alarm_ratio_per_window[50:61].max() >= 0.95

    def test_ma1_negative_elevated(self):
        rep = basic_experiment(ExperimentPlan(model=ArmaModel.ma1(-0.6)))
        assert rep.mean_false_alarm > 0.10

    def test_sweep_good_region(self):
        coeffs = [-0.3, 0.0, 0.3, 0.6]
        for family in ("ar1", "ma1"):
            rows = coefficient_sweep(coeffs, ExperimentPlan(), family)
            assert [r.coef for r in rows] == coeffs
            assert all(r.mean_false_alarm <= 0.05 for r in rows)

    def test_ar1_strong_positive_delay(self):
        rows = coefficient_sweep([0.9], ExperimentPlan(post_mean=5.0))
        assert 2.0 <= rows[0].mean_delay <= 10.0

    def test_white_noise_concentration(self):
        runs = 3000
        rep = basic_experiment(ExperimentPlan(model=ArmaModel(), runs=runs))
        p = rep.mean_false_alarm
        assert 0 <= p <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / runs)

    def test_sensitivity_trends(self):
        template = ExperimentPlan(model=ArmaModel())
        follow = sensitivity_sweep([1, 2, 3, 5], "follow", template)
        delays = [r.mean_delay for r in follow]
        assert all(a >= b for a, b in zip(delays, delays[1:]))
        assert [r.tested_mean for r in follow] == [1, 2, 3, 5]
        fixed = sensitivity_sweep([2, 5], 5.0, template)
        assert fixed[0].mean_false_alarm == fixed[1].mean_false_alarm
        assert fixed[1].mean_delay <= fixed[0].mean_delay


class TestConvergence:
    def test_examples(self):
        (n, d), = convergence_diagnostic(ArmaModel.ar1(0.5), 0.0, [50])
        assert n == 50 and abs(d) < 0.05
        (_, d), = convergence_diagnostic(ArmaModel.ma1(-0.9), 0.0, [400])
        assert abs(d) > 1.0

    def test_white_noise_exact(self):
        rows = convergence_diagnostic(ArmaModel(), 0.5, [10, 20, 40])
        assert all(abs(d) < 1e-12 for _, d in rows)


class TestParsingAndOutput:
    def test_process(self):
        assert parse_process("ar1:0.5") == ArmaModel.ar1(0.5)
        assert parse_process("ma1:-0.6", sigma=2.0) == ArmaModel.ma1(-0.6, 2.0)
        assert parse_process("wn") == ArmaModel()
        assert parse_process("arma:0.5,0.2/0.3") == ArmaModel((0.5, 0.2), (0.3,))
        with pytest.raises(ValueError):
            parse_process("garch:1")

    def test_grid(self):
        grid = parse_grid("-0.9:0.9:0.1")
        assert len(grid) == 19
        assert grid[0] == -0.9 and grid[-1] == 0.9 and grid[9] == 0.0
        assert parse_grid("1,2,3,5") == [1.0, 2.0, 3.0, 5.0]
        with pytest.raises(ValueError):
            parse_grid("1:0:0.1")

    def test_format(self):
        assert format_value(True) == "1"
        assert format_value(np.int64(3)) == "3"
        assert format_value(0.1) == "0.1"
        assert float(format_value(1 / 3)) == 1 / 3

    def test_csv(self, tmp_path):
        rep = basic_experiment(ExperimentPlan(runs=5))
        path = write_csv(tmp_path / "a.csv", ["window_index", "alarm_ratio"], alarm_ratio_rows(rep))
        raw = path.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == "window_index,alarm_ratio"
        assert len(lines) == 152
        assert lines[1].startswith("1,")
