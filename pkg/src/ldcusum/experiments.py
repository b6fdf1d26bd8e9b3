"""Monte-Carlo evaluation harness.

A run simulates one series with a level change, slides the detector over it
and records which windows alarmed.  Runs use seeds ``seed + r`` and are
aggregated in run order into per-window alarm ratios, the mean false-alarm
ratio over windows that cannot contain the change, and the mean detection
delay over the runs that detected it.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np

from .arma import ArmaModel, ChangeInjection, build_context, script_T_limit, simulate, t_sum, validate
from .detector import DetectorConfig, build_curve, first_detection, window_alarms
from .errors import ConfigMismatch
from .likelihood import MeanShift


@dataclass(frozen=True)
class ExperimentPlan:
    """One Monte-Carlo experiment.

    ``model`` is the pre-change law (its ``mean`` is the pre-change level);
    the level moves to ``post_mean`` at observation ``changepoint``.  When
    ``detector`` is omitted the default detector is used: a mean shift of 3
    tested on windows of 50 at alpha 0.01, whatever ``post_mean`` is.
    """

    model: ArmaModel = field(default_factory=lambda: ArmaModel.ar1(0.5))
    series_length: int = 200
    changepoint: int = 100
    post_mean: float = 3.0
    runs: int = 300
    detector: Optional[DetectorConfig] = None
    seed: int = 0
    mode: Literal["smooth", "abrupt"] = "smooth"

    def __post_init__(self):
        validate(self.model)
        if not 1 <= self.changepoint <= self.series_length:
            raise ValueError("changepoint must lie in 1..series_length")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.detector is not None and self.detector.model != self.model:
            raise ConfigMismatch("detector H0 model differs from the simulated pre-change model")
        if self.config.window > self.series_length:
            raise ValueError("window longer than the series")

    @property
    def config(self) -> DetectorConfig:
        if self.detector is not None:
            return self.detector
        return DetectorConfig(model=self.model)

    @property
    def injection(self) -> ChangeInjection:
        return ChangeInjection(self.changepoint, self.post_mean, self.mode)

    @property
    def n_windows(self) -> int:
        return self.series_length - self.config.window + 1

    @property
    def first_change_window(self) -> int:
        """Index of the first window containing the changepoint."""
        return max(self.changepoint - self.config.window + 1, 1)

    def with_model(self, model: ArmaModel) -> "ExperimentPlan":
        detector = None if self.detector is None else replace(self.detector, model=model)
        return replace(self, model=model, detector=detector)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    alarm_ratio_per_window: np.ndarray
    mean_false_alarm: float
    detection_ratio_per_window: np.ndarray
    mean_delay: float
    runs_detected: int
    runs: int
    first_change_window: int

    def detection_ratio_by(self, window_index: int) -> float:
        """Alarm ratio of window ``window_index`` (1-based)."""
        return float(self.alarm_ratio_per_window[window_index - 1])


def run_experiment(plan: ExperimentPlan, seeds: Sequence[int]) -> ExperimentReport:
    """Aggregate runs with the given seeds (one run per seed)."""
    cfg = plan.config
    curve = build_curve(cfg)
    n = cfg.window
    counts = np.zeros(plan.n_windows, dtype=np.int64)
    delays = []
    for s in seeds:
        series = simulate(plan.model, plan.series_length, plan.injection, seed=int(s))
        alarms = window_alarms(series, cfg, curve)
        counts += alarms
        t = first_detection(alarms, n, plan.changepoint)
        if t is not None:
            delays.append(t - plan.changepoint)
    runs = len(seeds)
    ratios = counts / runs
    first = plan.first_change_window
    pre = ratios[: first - 1]
    return ExperimentReport(
        alarm_ratio_per_window=ratios,
        mean_false_alarm=float(pre.mean()) if pre.size else math.nan,
        detection_ratio_per_window=ratios[first - 1:],
        mean_delay=float(sum(delays) / len(delays)) if delays else math.nan,
        runs_detected=len(delays),
        runs=runs,
        first_change_window=first,
    )


def basic_experiment(plan: ExperimentPlan) -> ExperimentReport:
    return run_experiment(plan, [plan.seed + r for r in range(plan.runs)])


@dataclass(frozen=True)
class SweepRow:
    coef: float
    mean_false_alarm: float
    mean_delay: float
    runs_detected: int


def family_model(family: str, coef: float, sigma: float = 1.0, mean: float = 0.0) -> ArmaModel:
    if family == "ar1":
        return ArmaModel.ar1(coef, sigma, mean)
    if family == "ma1":
        return ArmaModel.ma1(coef, sigma, mean)
    raise ValueError(f"unknown process family {family!r} (expected 'ar1' or 'ma1')")


def coefficient_sweep(coeffs: Iterable[float], template: ExperimentPlan,
                      family: str = "ar1") -> list[SweepRow]:
    """Run the template experiment for each AR(1) or MA(1) coefficient."""
    rows = []
    for c in coeffs:
        model = family_model(family, float(c), template.model.sigma, template.model.mean)
        rep = basic_experiment(template.with_model(model))
        rows.append(SweepRow(float(c), rep.mean_false_alarm, rep.mean_delay, rep.runs_detected))
    return rows


@dataclass(frozen=True)
class SensitivityRow:
    simulated_mean: float
    tested_mean: float
    mean_false_alarm: float
    mean_delay: float
    runs_detected: int


def sensitivity_sweep(simulated_means: Iterable[float],
                      tested_mean: Union[float, Literal["follow"]],
                      template: ExperimentPlan) -> list[SensitivityRow]:
    """Vary the simulated post-change mean; the tested mean either follows it
    or stays fixed."""
    rows = []
    base = template.config
    for mu in simulated_means:
        target = float(mu) if tested_mean == "follow" else float(tested_mean)
        cfg = replace(base, change=MeanShift(target - template.model.mean))
        plan = replace(template, post_mean=float(mu), detector=cfg)
        rep = basic_experiment(plan)
        rows.append(SensitivityRow(float(mu), target, rep.mean_false_alarm, rep.mean_delay,
                                   rep.runs_detected))
    return rows


def convergence_diagnostic(model: ArmaModel, beta: float,
                           n_values: Iterable[int]) -> list[tuple[int, float]]:
    """``t_{n,beta} / (n (1 - beta)) - T`` for each window length ``n``."""
    limit = script_T_limit(model)
    rows = []
    for n in n_values:
        ctx = build_context(model, int(n))
        rows.append((int(n), t_sum(ctx, beta) / (n * (1.0 - beta)) - limit))
    return rows


# --------------------------------------------------------------------------
# parsing and output
# --------------------------------------------------------------------------


_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_process(text: str, sigma: float = 1.0, mean: float = 0.0) -> ArmaModel:
    """Parse ``ar1:0.5``, ``ma1:-0.6``, ``wn`` or ``arma:0.5,0.2/0.3`` (AR list / MA list)."""
    text = text.strip().lower()
    if text in ("wn", "white", "white_noise"):
        return ArmaModel.white_noise(sigma, mean)
    m = re.fullmatch(rf"(ar1|ma1):({_FLOAT})", text)
    if m:
        return family_model(m.group(1), float(m.group(2)), sigma, mean)
    m = re.fullmatch(r"arma:([^/]*)/?(.*)", text)
    if m:
        ar = [float(v) for v in m.group(1).split(",") if v.strip()]
        ma = [float(v) for v in m.group(2).split(",") if v.strip()]
        return ArmaModel(tuple(ar), tuple(ma), sigma, mean)
    raise ValueError(f"cannot parse process {text!r}")


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive of stop) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step == 0 or (stop - start) / step < 0:
            raise ValueError(f"empty or infinite grid {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def alarm_ratio_rows(report: ExperimentReport):
    return [(i + 1, r) for i, r in enumerate(report.alarm_ratio_per_window)]
