"""Gaussian log-likelihood ratios, their moment generating functions and the
numerical Legendre transform.

Throughout, H0 is N(0, Sigma) (data are centred beforehand) and H1 is
N(nu, T).  All determinants and MGFs are handled on the log scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy import linalg

from .arma import CovarianceContext, beta_index, tail_indicator
from .errors import (
    DimensionMismatch,
    EqualVariances,
    NoMaximizer,
    OutsideDomain,
    UnitScale,
)

FD_STEP = 1e-7


# --------------------------------------------------------------------------
# change specifications
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanShift:
    """Level moves from the H0 mean by ``nu_bar``; covariance unchanged."""

    nu_bar: float

    def __post_init__(self):
        if not math.isfinite(self.nu_bar) or self.nu_bar == 0:
            raise ValueError("nu_bar must be finite and non-zero")


@dataclass(frozen=True)
class VarianceChange:
    """Innovation standard deviation moves from the H0 value to ``tau``."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class ScaleChange:
    """Mean ``mu_bar`` becomes ``f * mu_bar`` and covariance becomes ``f^2`` times."""

    f: float
    mu_bar: float = 0.0

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError("f must be positive")
        if self.f == 1:
            raise UnitScale("f = 1 describes no change")

    @property
    def nu_bar(self) -> float:
        return self.f * self.mu_bar - self.mu_bar


ChangeKind = Union[MeanShift, VarianceChange, ScaleChange]


@dataclass(frozen=True)
class ChangeSpec:
    """A tested alternative: change ``kind`` starting after fraction ``beta``."""

    kind: ChangeKind
    beta: float = 0.0
    sigma: Optional[float] = None  # H0 innovation scale, needed for VarianceChange

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if isinstance(self.kind, VarianceChange) and self.sigma is not None:
            if self.sigma == self.kind.tau:
                raise EqualVariances("tau equals sigma: no change to detect")


# --------------------------------------------------------------------------
# likelihood ratios
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianPair:
    """H0: N(0, Sigma) versus H1: N(nu, T)."""

    nu: np.ndarray
    sigma_ctx: CovarianceContext
    t_ctx: CovarianceContext

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        object.__setattr__(self, "nu", nu)
        n = self.sigma_ctx.n
        if self.t_ctx.n != n or nu.shape != (n,):
            raise DimensionMismatch(
                f"dimensions disagree: Sigma {n}, T {self.t_ctx.n}, nu {nu.shape}"
            )

    @property
    def n(self) -> int:
        return self.sigma_ctx.n


def _check_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionMismatch(f"expected a vector of length {n}, got shape {x.shape}")
    return x


def log_likelihood_ratio(x, pair: GaussianPair) -> float:
    """``log g(x) / f(x)`` for the pair's two Gaussian densities."""
    x = _check_vector(x, pair.n)
    r = x - pair.nu
    return float(
        0.5 * (pair.sigma_ctx.logdet - pair.t_ctx.logdet)
        + 0.5 * x @ pair.sigma_ctx.solve(x)
        - 0.5 * r @ pair.t_ctx.solve(r)
    )


def mean_shift_vector(n: int, nu_bar: float, beta: float) -> np.ndarray:
    return nu_bar * tail_indicator(n, beta_index(n, beta))


def mean_shift_llr(x, ctx: CovarianceContext, nu_bar: float, beta: float) -> float:
    """LLR for a mean change to ``nu_bar`` after position ``n * beta``, same covariance.

    Equals ``nu^T T^{-1} x - nu^T T^{-1} nu / 2``.
    """
    x = _check_vector(x, ctx.n)
    nu = mean_shift_vector(ctx.n, nu_bar, beta)
    w = ctx.solve(nu)
    return float(w @ x - 0.5 * w @ nu)


def scale_llr(x_window, ctx_block: CovarianceContext, f: float, mu_bar: float,
              beta: float, n: int) -> float:
    """Scale-change LLR evaluated on the post-change block only.

    ``x_window`` holds the centred observations ``n*beta+1..n``; under H1
    their mean is ``(f - 1) mu_bar`` and their covariance ``f^2 Sigma``.
    """
    m = n - beta_index(n, beta)
    y = _check_vector(x_window, m)
    if ctx_block.n != m:
        raise DimensionMismatch(f"block context has size {ctx_block.n}, expected {m}")
    nu_bar = f * mu_bar - mu_bar
    r = y - nu_bar
    return float(
        -m * math.log(f)
        + 0.5 * y @ ctx_block.solve(y)
        - 0.5 / f**2 * r @ ctx_block.solve(r)
    )


# --------------------------------------------------------------------------
# moment generating functions (log scale)
# --------------------------------------------------------------------------


def mgf_general(theta: float, pair: GaussianPair) -> float:
    """``log E_0 exp(theta * LLR)`` for a general Gaussian pair.

    Uses ``theta T^{-1} + (1 - theta) Sigma^{-1} = T^{-1} W Sigma^{-1}`` with
    ``W = theta Sigma + (1 - theta) T``; the former is positive definite
    exactly when ``W`` is, so the domain check is a Cholesky attempt on ``W``.
    """
    S, T = pair.sigma_ctx, pair.t_ctx
    if theta == 0.0:
        return 0.0
    W = theta * S.cov + (1.0 - theta) * T.cov
    try:
        w_cho = linalg.cho_factor(W, lower=True)
    except linalg.LinAlgError as exc:
        raise OutsideDomain(f"MGF is infinite at theta={theta}") from exc
    diag = np.diag(w_cho[0])
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise OutsideDomain(f"MGF is infinite at theta={theta}")
    logdet_w = 2.0 * np.sum(np.log(diag))
    nu = pair.nu
    u = T.solve(nu)
    # nu^T T^{-1} (theta T^{-1} + (1-theta) Sigma^{-1})^{-1} T^{-1} nu = u^T Sigma W^{-1} nu
    cross = float((S.cov @ u) @ linalg.cho_solve(w_cho, nu))
    return float(
        0.5 * theta * (S.logdet - T.logdet)
        - 0.5 * (logdet_w - T.logdet)
        - 0.5 * theta * (nu @ u)
        + 0.5 * theta**2 * cross
    )


def mgf_independent(theta: float, sigmas, taus, nu) -> float:
    """Log-MGF of the LLR for independent coordinates,
    H0: N(0, sigma_i^2), H1: N(nu_i, tau_i^2)."""
    sigmas = np.asarray(sigmas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if not sigmas.shape == taus.shape == nu.shape:
        raise DimensionMismatch("sigmas, taus and nu must have equal shapes")
    s2, t2 = sigmas**2, taus**2
    mix = theta * s2 + (1.0 - theta) * t2
    if np.any(mix <= 0):
        raise OutsideDomain(f"MGF is infinite at theta={theta}")
    return float(
        theta * np.sum(np.log(sigmas / taus))
        - 0.5 * np.sum(np.log(mix / t2))
        - 0.5 * theta * np.sum(nu**2 / t2)
        + 0.5 * theta**2 * np.sum(nu**2 * s2 / t2 / mix)
    )


# --------------------------------------------------------------------------
# Legendre transform
# --------------------------------------------------------------------------


class LegendreResult(NamedTuple):
    value: float
    theta: float


def _derivative(fn: Callable[[float], float], theta: float, lo: float, hi: float) -> float:
    # relative step: far-out maximisers sit where the log-MGF is large and nearly linear
    h = min(FD_STEP * max(1.0, abs(theta)), 0.5 * (theta - lo), 0.5 * (hi - theta))
    if h <= 0:
        raise OutsideDomain("theta is on the edge of the domain")
    return (fn(theta + h) - fn(theta - h)) / (2.0 * h)


def legendre(
    b: float,
    log_mgf: Callable[[float], float],
    theta_domain: tuple[float, float] = (-math.inf, math.inf),
    start: Optional[float] = None,
) -> LegendreResult:
    """``sup_theta (theta * b - log_mgf(theta))`` and its maximiser.

    The objective is concave, so its derivative ``b - log_mgf'(theta)`` is
    non-increasing.  The derivative (central differences, step
    ``1e-7 * max(1, |theta|)``) is
    bracketed by geometric expansion from ``start`` (towards an open domain
    edge by repeated halving of the remaining gap) and then bisected.

    Raises
    ------
    NoMaximizer
        If the objective keeps increasing up to the edge of ``theta_domain``.
    """
    lo, hi = theta_domain
    if not lo < hi:
        raise ValueError("theta_domain must be a non-empty interval")
    if start is None:
        start = min(max(0.0, lo), hi)
        if start in (lo, hi):
            start = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else (
                lo + 1.0 if math.isfinite(lo) else hi - 1.0
            )

    def derivative(theta: float) -> Optional[float]:
        try:
            d = _derivative(log_mgf, theta, lo, hi)
        except OutsideDomain:
            return None
        return d if math.isfinite(d) else None

    d0 = derivative(start)
    if d0 is None:
        raise OutsideDomain(f"log-MGF is not finite around theta={start}")
    if d0 == b:
        return LegendreResult(start * b - log_mgf(start), start)

    # an undefined derivative counts as "past the maximiser" in the direction of travel
    direction = 1.0 if b > d0 else -1.0

    def before_max(theta: float) -> bool:
        d = derivative(theta)
        if d is None:
            return False
        return b > d if direction > 0 else b < d

    edge = hi if direction > 0 else lo
    inner = start
    outer = None
    step = 1.0
    for _ in range(200):
        if math.isfinite(edge) and abs(edge - inner) <= step:
            candidate = inner + 0.5 * (edge - inner)
        else:
            candidate = inner + direction * step
        if candidate == inner:
            break
        if before_max(candidate):
            inner = candidate
            step *= 2.0
        else:
            outer = candidate
            break
    if outer is None:
        raise NoMaximizer(f"objective increases up to the domain edge {edge} (b={b})")

    def slope_positive(theta: float) -> bool:
        return before_max(theta) if direction > 0 else not before_max(theta)

    a, c = (inner, outer) if inner < outer else (outer, inner)
    for _ in range(300):
        mid = 0.5 * (a + c)
        if mid in (a, c) or c - a <= 1e-15 * max(1.0, abs(mid)):
            break
        if slope_positive(mid):
            a = mid
        else:
            c = mid
    theta_star = 0.5 * (a + c)
    value = theta_star * b - log_mgf(theta_star)
    return LegendreResult(float(value), float(theta_star))


def rate_function(b: float, log_mgf: Callable[[float], float],
                  theta_domain: tuple[float, float] = (-math.inf, math.inf)) -> float:
    """Legendre value alone; ``inf`` when no finite maximiser exists."""
    try:
        return legendre(b, log_mgf, theta_domain).value
    except NoMaximizer:
        return math.inf


def mean_derivative(log_mgf: Callable[[float], float], at: float = 0.0) -> float:
    """Central-difference slope of ``log_mgf`` at ``at`` (the H0 drift when ``at = 0``)."""
    return (log_mgf(at + FD_STEP) - log_mgf(at - FD_STEP)) / (2.0 * FD_STEP)
