"""Sliding-window changepoint detection.

Each window of ``n`` observations is tested against every candidate change
fraction ``beta = i/n``: an alarm is raised when
``max_beta (L_{n,beta}(x) / n - b(beta)) > 0``.  The H0 model is assumed
known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .arma import ArmaModel, build_context, tail_indicator, validate
from .errors import ConfigMismatch, InvalidAlpha, SeriesTooShort
from .likelihood import ChangeKind, MeanShift, ScaleChange, VarianceChange
from .thresholds import ThresholdCurve, effective_scale, gamma_from_alpha, threshold_curve


@dataclass(frozen=True)
class DetectorConfig:
    """Detector settings.

    Parameters
    ----------
    model : ArmaModel
        H0 law of the observations (coefficients, sigma and level).
    change : MeanShift, VarianceChange or ScaleChange
        Alternative tested in every window.
    window : int
        Window length ``n``.
    alpha : float
        Significance; the decay rate is ``-log(alpha) / n``.
    tuning_beta_max : float
        Candidate changepoints with ``beta`` above this are ignored; 1 disables tuning.
    threshold_variant : {"asymptotic", "finite_n"}
    """

    model: ArmaModel = field(default_factory=ArmaModel)
    change: ChangeKind = field(default_factory=lambda: MeanShift(3.0))
    window: int = 50
    alpha: float = 0.01
    tuning_beta_max: float = 1.0
    threshold_variant: Literal["asymptotic", "finite_n"] = "asymptotic"

    def __post_init__(self):
        validate(self.model)
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")
        if not 0 < self.alpha < 1:
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.tuning_beta_max <= 1:
            raise ValueError("tuning_beta_max must lie in (0, 1]")
        if self.threshold_variant not in ("asymptotic", "finite_n"):
            raise ValueError(f"unknown threshold variant {self.threshold_variant!r}")
        if isinstance(self.change, ScaleChange) and self.change.mu_bar != self.model.mean:
            raise ConfigMismatch(
                f"scale change around mu_bar={self.change.mu_bar} but the H0 level is {self.model.mean}"
            )
        if isinstance(self.change, VarianceChange):
            effective_scale(self.change, self.model)

    @property
    def gamma(self) -> float:
        return gamma_from_alpha(self.alpha, self.window)

    def admissible(self) -> np.ndarray:
        """Mask over the beta grid of candidates not removed by tuning."""
        betas = np.arange(self.window) / self.window
        return betas <= self.tuning_beta_max + 1e-12


@dataclass(frozen=True)
class WindowDecision:
    window_index: int
    alarm: bool
    margin: float
    argmax_beta: float


class _Statistic:
    """Evaluates ``L_{n,beta}`` for all grid betas on a batch of centred windows."""

    def __init__(self, cfg: DetectorConfig):
        n = cfg.window
        self.n = n
        model = cfg.model
        kind = cfg.change
        if isinstance(kind, MeanShift):
            ctx = build_context(model, n)
            nus = np.stack([kind.nu_bar * tail_indicator(n, i) for i in range(n)])  # (beta, n)
            self.weights = ctx.solve(nus.T).T
            self.offsets = 0.5 * np.einsum("ij,ij->i", self.weights, nus)
            self.blocks = None
        else:
            f, mu_bar = effective_scale(kind, model)
            self.f = f
            self.nu_bar = f * mu_bar - mu_bar
            full = build_context(model, n)
            self.blocks = [full.leading(n - i) for i in range(n)]
            self.block_ones = [b.solve(np.ones(b.n)) for b in self.blocks]

    def __call__(self, centred: np.ndarray) -> np.ndarray:
        """``centred`` is (windows, n); returns (windows, n) statistics."""
        if self.blocks is None:
            return centred @ self.weights.T - self.offsets
        n, f, nu_bar = self.n, self.f, self.nu_bar
        out = np.empty((centred.shape[0], n))
        for i, (ctx, w1) in enumerate(zip(self.blocks, self.block_ones)):
            m = n - i
            y = centred[:, i:]
            quad = np.einsum("wj,jw->w", y, ctx.solve(y.T))
            lin = y @ w1
            s = w1.sum()
            out[:, i] = (-m * math.log(f) + 0.5 * quad
                         - 0.5 / f**2 * (quad - 2.0 * nu_bar * lin + nu_bar**2 * s))
        return out


@lru_cache(maxsize=64)
def _prepared(cfg: DetectorConfig) -> tuple[ThresholdCurve, _Statistic]:
    curve = threshold_curve(cfg.change, cfg.model, cfg.window, cfg.gamma, cfg.threshold_variant)
    return curve, _Statistic(cfg)


def build_curve(cfg: DetectorConfig) -> ThresholdCurve:
    return _prepared(cfg)[0]


def _check_curve(cfg: DetectorConfig, curve: ThresholdCurve) -> None:
    if (curve.n != cfg.window or curve.kind != cfg.change or curve.model != cfg.model
            or curve.variant != cfg.threshold_variant
            or not math.isclose(curve.gamma, cfg.gamma, rel_tol=1e-12)):
        raise ConfigMismatch("threshold curve was not built for this detector configuration")


def margins(windows: np.ndarray, cfg: DetectorConfig,
            curve: Optional[ThresholdCurve] = None) -> np.ndarray:
    """``L_{n,beta}/n - b(beta)`` for a (windows, n) array; tuned-out betas are ``-inf``."""
    prepared_curve, stat = _prepared(cfg)
    if curve is None:
        curve = prepared_curve
    else:
        _check_curve(cfg, curve)
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    if windows.shape[1] != cfg.window:
        raise ConfigMismatch(f"windows have length {windows.shape[1]}, detector expects {cfg.window}")
    diff = stat(windows - cfg.model.mean) / cfg.window - curve.values
    diff[:, ~cfg.admissible()] = -np.inf
    return diff


def _decide(diff: np.ndarray, first_index: int, n: int) -> list[WindowDecision]:
    best = np.argmax(diff, axis=1)
    top = diff[np.arange(len(diff)), best]
    return [
        WindowDecision(first_index + w, bool(top[w] > 0), float(top[w]), float(best[w] / n))
        for w in range(len(diff))
    ]


def test_window(x, cfg: DetectorConfig, curve: Optional[ThresholdCurve] = None) -> WindowDecision:
    """Decide a single window of ``cfg.window`` observations."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.window,):
        raise ConfigMismatch(f"window must have {cfg.window} observations, got shape {x.shape}")
    return _decide(margins(x[None, :], cfg, curve), 1, cfg.window)[0]


test_window.__test__ = False  # not a pytest test despite the name


@dataclass(frozen=True)
class SequentialResult:
    decisions: list[WindowDecision]
    window: int

    @property
    def alarms(self) -> np.ndarray:
        return np.array([d.alarm for d in self.decisions], dtype=bool)

    def first_detection(self, changepoint: int = 1) -> Optional[int]:
        """Last observation of the first alarmed window containing observation
        ``changepoint`` or later; ``None`` if no such alarm."""
        return first_detection(self.alarms, self.window, changepoint)

    def delay(self, changepoint: int) -> Optional[int]:
        t = self.first_detection(changepoint)
        return None if t is None else t - changepoint


def first_detection(alarms: np.ndarray, window: int, changepoint: int = 1) -> Optional[int]:
    start = max(changepoint - window + 1, 1)
    hits = np.flatnonzero(np.asarray(alarms)[start - 1:])
    if hits.size == 0:
        return None
    return int(start + hits[0]) + window - 1


def window_alarms(series, cfg: DetectorConfig, curve: Optional[ThresholdCurve] = None) -> np.ndarray:
    """Alarm flag per window (window ``w`` covers observations ``w..w+n-1``)."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or len(series) < cfg.window:
        raise SeriesTooShort(f"series of length {series.size} is shorter than the window {cfg.window}")
    diff = margins(sliding_window_view(series, cfg.window), cfg, curve)
    return diff.max(axis=1) > 0


def run_sequential(series, cfg: DetectorConfig,
                   curve: Optional[ThresholdCurve] = None) -> SequentialResult:
    """Slide the window one observation at a time over ``series``."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or len(series) < cfg.window:
        raise SeriesTooShort(f"series of length {series.size} is shorter than the window {cfg.window}")
    diff = margins(sliding_window_view(series, cfg.window), cfg, curve)
    return SequentialResult(_decide(diff, 1, cfg.window), cfg.window)
