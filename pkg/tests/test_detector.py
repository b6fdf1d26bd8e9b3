import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldcusum.arma import ArmaModel, ChangeInjection, build_context, simulate
from ldcusum.detector import (
    DetectorConfig,
    build_curve,
    first_detection,
    margins,
    run_sequential,
    test_window,
    window_alarms,
)
from ldcusum.errors import ConfigMismatch, InvalidAlpha, SeriesTooShort
from ldcusum.likelihood import MeanShift, ScaleChange, VarianceChange, mean_shift_llr, scale_llr
from ldcusum.thresholds import b_mean_change, threshold_curve

WN = DetectorConfig(model=ArmaModel(), change=MeanShift(3.0))


class TestConfig:
    def test_defaults(self):
        cfg = DetectorConfig()
        assert (cfg.window, cfg.alpha, cfg.tuning_beta_max) == (50, 0.01, 1.0)
        assert cfg.gamma == pytest.approx(math.log(100) / 50)
        assert cfg.admissible().all()

    def test_tuning_mask(self):
        mask = DetectorConfig(tuning_beta_max=0.95).admissible()
        assert mask.sum() == 48  # beta = 0, 0.02, ..., 0.94

    def test_invalid(self):
        with pytest.raises(InvalidAlpha):
            DetectorConfig(alpha=1.5)
        with pytest.raises(ValueError):
            DetectorConfig(window=1)
        with pytest.raises(ValueError):
            DetectorConfig(tuning_beta_max=0.0)
        with pytest.raises(ConfigMismatch):
            DetectorConfig(model=ArmaModel(mean=1.0), change=ScaleChange(2.0, 0.0))


class TestWindow:
    def test_zero_window(self):
        d = test_window(np.zeros(50), WN)
        betas = np.arange(50) / 50
        expected = max(-4.5 * (1 - b) - b_mean_change(ArmaModel(), 3.0, WN.gamma, b) for b in betas)
        assert not d.alarm
        assert d.margin == pytest.approx(expected, abs=1e-12)
        assert d.margin < 0

    def test_window_at_alternative(self):
        d = test_window(np.full(50, 3.0), WN)
        assert d.alarm
        assert d.argmax_beta == 0.0

    def test_tuning_suppresses_end_spike(self):
        x = np.zeros(50)
        x[-2:] = 2.4
        assert test_window(x, WN).alarm
        tuned = DetectorConfig(model=ArmaModel(), change=MeanShift(3.0), tuning_beta_max=0.95)
        assert not test_window(x, tuned).alarm

    def test_shape_check(self):
        with pytest.raises(ConfigMismatch):
            test_window(np.zeros(49), WN)

    def test_foreign_curve_rejected(self):
        other = threshold_curve(MeanShift(2.0), ArmaModel(), 50, WN.gamma)
        with pytest.raises(ConfigMismatch):
            test_window(np.zeros(50), WN, other)

    def test_margins_match_llr(self):
        cfg = DetectorConfig(model=ArmaModel.ar1(0.5, mean=1.0), change=MeanShift(2.0), window=12)
        ctx = build_context(cfg.model, 12)
        curve = build_curve(cfg)
        x = simulate(cfg.model, 12, seed=4)
        got = margins(x, cfg)[0]
        for i, beta in enumerate(curve.betas):
            expected = mean_shift_llr(x - 1.0, ctx, 2.0, beta) / 12 - curve.values[i]
            assert got[i] == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("change", [ScaleChange(2.0, 1.5), VarianceChange(0.5)])
    def test_scale_margins_match_llr(self, change):
        model = ArmaModel.ma1(0.4, mean=1.5) if isinstance(change, ScaleChange) else ArmaModel.ma1(0.4)
        cfg = DetectorConfig(model=model, change=change, window=10)
        ctx = build_context(model, 10)
        curve = build_curve(cfg)
        x = simulate(model, 10, seed=5) - model.mean
        f, mu = (change.f, change.mu_bar) if isinstance(change, ScaleChange) else (0.5, 0.0)
        got = margins(x + model.mean, cfg)[0]
        for i, beta in enumerate(curve.betas):
            m = 10 - i
            llr = scale_llr(x[i:], ctx.leading(m), f, mu, beta, 10)
            assert got[i] == pytest.approx(llr / 10 - curve.values[i], abs=1e-12)

    @given(seed=st.integers(0, 10_000), c=st.floats(0.0, 5.0))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_level(self, seed, c):
        x = np.random.default_rng(seed).standard_normal(50)
        assert test_window(x + c, WN).margin >= test_window(x, WN).margin - 1e-12


class TestSequential:
    def test_decision_count(self):
        x = simulate(ArmaModel.ar1(0.5), 200, ChangeInjection(100, 3.0), seed=1)
        res = run_sequential(x, DetectorConfig(model=ArmaModel.ar1(0.5)))
        assert len(res.decisions) == 151
        assert [d.window_index for d in res.decisions] == list(range(1, 152))

    def test_detection_time_arithmetic(self):
        alarms = np.zeros(151, dtype=bool)
        alarms[54:] = True  # first alarm in window 55
        assert first_detection(alarms, 50, 100) == 104
        alarms[10] = True  # pre-change false alarm in window 11 is ignored
        assert first_detection(alarms, 50, 100) == 104
        assert first_detection(alarms, 50, 1) == 60
        assert first_detection(np.zeros(5, dtype=bool), 50, 1) is None

    def test_delay(self):
        x = np.zeros(200)
        x[99:] = 3.0
        res = run_sequential(x, WN)
        t = res.first_detection(100)
        assert t is not None and t >= 100
        assert res.delay(100) == t - 100

    def test_all_zero(self):
        assert not run_sequential(np.zeros(200), WN).alarms.any()

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            run_sequential(np.zeros(10), WN)
        with pytest.raises(SeriesTooShort):
            window_alarms(np.zeros(10), WN)

    def test_deterministic(self):
        x = simulate(ArmaModel.ma1(-0.6), 300, ChangeInjection(150, 3.0), seed=2)
        cfg = DetectorConfig(model=ArmaModel.ma1(-0.6), window=100, alpha=1e-4)
        assert run_sequential(x, cfg) == run_sequential(x, cfg)

    def test_tuning_removes_alarms_only(self):
        model = ArmaModel.ma1(-0.6)
        x = simulate(model, 300, ChangeInjection(150, 3.0), seed=3)
        plain = window_alarms(x, DetectorConfig(model=model))
        tuned = window_alarms(x, DetectorConfig(model=model, tuning_beta_max=0.95))
        assert np.all(plain | ~tuned)

    @given(seed=st.integers(0, 1000), pos=st.integers(0, 119))
    @settings(max_examples=30, deadline=None)
    def test_window_locality(self, seed, pos):
        cfg = DetectorConfig(model=ArmaModel.ar1(0.5), window=20)
        x = np.random.default_rng(seed).standard_normal(120)
        base = margins(np.lib.stride_tricks.sliding_window_view(x, 20), cfg).max(axis=1)
        y = x.copy()
        y[pos] += 7.0
        moved = margins(np.lib.stride_tricks.sliding_window_view(y, 20), cfg).max(axis=1)
        outside = np.array([not (w <= pos < w + 20) for w in range(101)])
        np.testing.assert_array_equal(base[outside], moved[outside])

    def test_batch_equals_single(self):
        x = simulate(ArmaModel.ar1(0.5), 80, seed=6)
        res = run_sequential(x, DetectorConfig(model=ArmaModel.ar1(0.5)))
        for d in res.decisions[::7]:
            single = test_window(x[d.window_index - 1:d.window_index + 49], DetectorConfig(model=ArmaModel.ar1(0.5)))
            assert single.margin == pytest.approx(d.margin, abs=1e-12)
            assert single.alarm == d.alarm
