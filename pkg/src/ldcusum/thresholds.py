"""Critical functions ``b(beta)`` calibrated to a uniform decay rate ``gamma``.

For every candidate change fraction ``beta`` the threshold solves
``I_beta(b(beta)) = gamma`` where ``I_beta`` is the Legendre transform of the
per-observation log-MGF of the statistic under H0.  The root above the H0
drift is used throughout (upper-tail rejection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from .arma import (
    ArmaModel,
    CovarianceContext,
    beta_index,
    build_context,
    script_T_limit,
    t_sum,
    validate,
)
from .errors import (
    BracketingFailure,
    EqualVariances,
    InvalidAlpha,
    OutsideDomain,
    UnitScale,
)
from .likelihood import (
    ChangeKind,
    GaussianPair,
    MeanShift,
    ScaleChange,
    VarianceChange,
    mean_derivative,
    mean_shift_vector,
    mgf_general,
    mgf_independent,
    rate_function,
)

Variant = Literal["asymptotic", "finite_n"]

ROOT_TOL = 1e-10
MAX_DOUBLINGS = 60


def gamma_from_alpha(alpha: float, n: int) -> float:
    """Decay rate with ``exp(-n * gamma) = alpha``."""
    if not 0 < alpha < 1:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return -math.log(alpha) / n


def _check_common(gamma: float, beta: float) -> None:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")


# --------------------------------------------------------------------------
# change in mean
# --------------------------------------------------------------------------


def _b_from_script_t(nu_bar: float, script_t: float, gamma: float, beta: float) -> float:
    rest = 1.0 - beta
    return abs(nu_bar) * math.sqrt(2.0 * script_t * gamma * rest) - 0.5 * nu_bar**2 * script_t * rest


def b_mean_change(model: ArmaModel, nu_bar: float, gamma: float, beta: float) -> float:
    """Asymptotic threshold for a mean shift of size ``nu_bar`` in an ARMA process.

    ``b = |nu_bar| sqrt(2 T gamma (1 - beta)) - nu_bar^2 T (1 - beta) / 2``
    with ``T`` the limit from :func:`~ldcusum.arma.script_T_limit`.
    """
    _check_common(gamma, beta)
    return _b_from_script_t(nu_bar, script_T_limit(model), gamma, beta)


def b_mean_change_ar1(rho: float, sigma: float, nu_bar: float, gamma: float, beta: float) -> float:
    _check_common(gamma, beta)
    validate(ArmaModel.ar1(rho, sigma))
    k = (1.0 - rho) / sigma
    return abs(nu_bar) * k * math.sqrt(2.0 * gamma * (1.0 - beta)) - 0.5 * nu_bar**2 * k**2 * (1.0 - beta)


def b_mean_change_ma1(theta: float, sigma: float, nu_bar: float, gamma: float, beta: float) -> float:
    _check_common(gamma, beta)
    script_T_limit(ArmaModel.ma1(theta, sigma))  # validation and degeneracy check
    k = 1.0 / (sigma * (1.0 + theta))
    return abs(nu_bar) * abs(k) * math.sqrt(2.0 * gamma * (1.0 - beta)) - 0.5 * nu_bar**2 * k**2 * (1.0 - beta)


def b_mean_change_iid(nu_bar: float, gamma: float, beta: float) -> float:
    """Unit-variance i.i.d. threshold."""
    _check_common(gamma, beta)
    return abs(nu_bar) * math.sqrt(2.0 * gamma * (1.0 - beta)) - 0.5 * nu_bar**2 * (1.0 - beta)


def b_mean_change_finite(ctx: CovarianceContext, nu_bar: float, gamma: float, beta: float) -> float:
    """Finite-window threshold using the exact ``t_{n,beta}`` instead of its limit."""
    _check_common(gamma, beta)
    n = ctx.n
    t = t_sum(ctx, beta)
    return abs(nu_bar) * math.sqrt(2.0 * gamma * t / n) - nu_bar**2 * t / (2.0 * n)


# --------------------------------------------------------------------------
# change in variance / scale (no mean change)
# --------------------------------------------------------------------------


def _log_ratio_rate(b: float, rest: float, k: float, shift: float) -> float:
    """``rest * (-1/2 - k y - log(-2 k y) / 2)`` with ``y = b / rest - shift``.

    Returns ``nan`` off the branch where the logarithm is defined.
    """
    y = b / rest - shift
    arg = -2.0 * k * y
    if not arg > 0:
        return math.nan
    return rest * (-0.5 - k * y - 0.5 * math.log(arg))


def _bisect_increasing(rate: Callable[[float], float], lo: float, hi: float,
                       gamma: float, tol: float) -> float:
    """Root of ``rate(b) = gamma`` for ``rate`` increasing on ``[lo, hi]``."""
    best_b, best_resid = lo, math.inf
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        r = rate(mid)
        if math.isnan(r):
            raise BracketingFailure(f"rate undefined inside the bracket at b={mid}")
        resid = r - gamma
        if abs(resid) < abs(best_resid):
            best_b, best_resid = mid, resid
        if abs(resid) < tol:
            return mid
        if resid < 0:
            lo = mid
        else:
            hi = mid
    if abs(best_resid) < tol:
        return best_b
    raise BracketingFailure(f"bisection stalled with residual {best_resid:g}")


def _implicit_threshold(rest: float, k: float, shift: float, gamma: float) -> float:
    """Solve ``_log_ratio_rate(b) = gamma`` on the upper-tail branch.

    ``y = b/rest - shift``.  The rate vanishes at the H0 drift ``y = -1/(2k)``
    and increases in ``b`` from there; for ``k > 0`` the statistic is bounded
    above by ``y = 0`` where the rate diverges.
    """
    drift = rest * (shift - 0.5 / k)

    def rate(b):
        return _log_ratio_rate(b, rest, k, shift)

    if k > 0:
        edge = rest * shift
        hi = None
        below = drift
        for j in range(1, 1100):
            cand = drift + (edge - drift) * (1.0 - 0.5**j)
            if cand >= edge:
                # root within float resolution of the upper bound
                return below
            if rate(cand) > gamma:
                hi = cand
                break
            below = cand
        if hi is None:
            raise BracketingFailure("rate never exceeds gamma below the statistic's upper bound")
    else:
        offset = rest * abs(0.5 / k)
        hi = None
        for j in range(MAX_DOUBLINGS + 1):
            cand = drift + offset * 2.0**j
            if rate(cand) > gamma:
                hi = cand
                break
        if hi is None:
            raise BracketingFailure("no upper bracket found after 60 doublings")
    return _bisect_increasing(rate, drift, hi, gamma, ROOT_TOL)


def variance_rate(b: float, sigma: float, tau: float, beta: float) -> float:
    """Decay rate of a variance-change statistic at threshold ``b`` (closed form)."""
    return _log_ratio_rate(b, 1.0 - beta, tau**2 / (sigma**2 - tau**2), math.log(sigma / tau))


def scale_rate(b: float, f: float, beta: float) -> float:
    """Decay rate of a pure scale-change statistic at threshold ``b`` (closed form)."""
    return _log_ratio_rate(b, 1.0 - beta, 1.0 / (1.0 / f**2 - 1.0), -math.log(f))


def b_variance_change(sigma: float, tau: float, gamma: float, beta: float) -> float:
    """Threshold for a change of standard deviation from ``sigma`` to ``tau``
    in independent Gaussian data."""
    _check_common(gamma, beta)
    if not (sigma > 0 and tau > 0):
        raise ValueError("sigma and tau must be positive")
    if sigma == tau:
        raise EqualVariances("sigma equals tau")
    return _implicit_threshold(1.0 - beta, tau**2 / (sigma**2 - tau**2), math.log(sigma / tau), gamma)


def b_scale_change(f: float, gamma: float, beta: float) -> float:
    """Threshold for covariance inflation by ``f^2`` without a change of mean."""
    _check_common(gamma, beta)
    if not f > 0:
        raise ValueError("f must be positive")
    if f == 1:
        raise UnitScale("f = 1 describes no change")
    return _implicit_threshold(1.0 - beta, 1.0 / (1.0 / f**2 - 1.0), -math.log(f), gamma)


# --------------------------------------------------------------------------
# change in scale with a non-zero mean
# --------------------------------------------------------------------------


def scale_log_mgf(theta: float, f: float, nu_bar: float, s: float, m: int, n: int) -> float:
    """Per-observation log-MGF of the block scale statistic.

    ``m`` is the block length ``n (1 - beta)`` and ``s`` the all-ones
    quadratic form of the block precision matrix.
    """
    mix = theta / f**2 + 1.0 - theta
    if not mix > 0:
        raise OutsideDomain(f"MGF is infinite at theta={theta}")
    log_mgf = (
        -theta * m * math.log(f)
        - 0.5 * m * math.log(mix)
        - theta * s * nu_bar**2 / (2.0 * f**2)
        + theta**2 * s * nu_bar**2 / (2.0 * f**4 * mix)
    )
    return log_mgf / n


def scale_theta_domain(f: float) -> tuple[float, float]:
    c = 1.0 / f**2 - 1.0  # mix = 1 + c * theta
    return (-1.0 / c, math.inf) if c > 0 else (-math.inf, -1.0 / c)


def _scale_threshold_from_s(s: float, f: float, mu_bar: float, gamma: float,
                            beta: float, n: int) -> float:
    _check_common(gamma, beta)
    if not f > 0:
        raise ValueError("f must be positive")
    if f == 1:
        raise UnitScale("f = 1 with a fixed mean describes no change")
    m = n - beta_index(n, beta)
    nu_bar = f * mu_bar - mu_bar
    domain = scale_theta_domain(f)

    def log_mgf(theta):
        return scale_log_mgf(theta, f, nu_bar, s, m, n)

    def rate(b):
        return rate_function(b, log_mgf, domain)

    drift = mean_derivative(log_mgf)
    step = max(1e-3, abs(drift), math.sqrt(2.0 * gamma))
    hi = None
    for j in range(MAX_DOUBLINGS + 1):
        cand = drift + step * 2.0 ** (j - 10)
        if rate(cand) > gamma:
            hi = cand
            break
    if hi is None:
        raise BracketingFailure("no upper bracket found for the scale threshold")
    return _bisect_increasing(rate, drift, hi, gamma, ROOT_TOL)


def b_scale_change_general(ctx_block: CovarianceContext, f: float, mu_bar: float,
                           gamma: float, beta: float, n: int) -> float:
    """Threshold for a scale change with mean ``mu_bar -> f mu_bar`` in dependent data.

    ``ctx_block`` is the H0 covariance of the ``n (1 - beta)`` post-change
    observations; the root is found by bisection on the Legendre transform.
    """
    m = n - beta_index(n, beta)
    if ctx_block.n != m:
        raise ValueError(f"ctx_block has size {ctx_block.n}, expected {m}")
    ones = np.ones(m)
    s = float(ones @ ctx_block.solve(ones))
    return _scale_threshold_from_s(s, f, mu_bar, gamma, beta, n)


# --------------------------------------------------------------------------
# curves
# --------------------------------------------------------------------------


def effective_scale(kind: ChangeKind, model: ArmaModel) -> tuple[float, float]:
    """``(f, mu_bar)`` of the block scale statistic used for ``kind``."""
    if isinstance(kind, VarianceChange):
        if kind.tau == model.sigma:
            raise EqualVariances("tau equals the model's sigma")
        return kind.tau / model.sigma, 0.0
    if isinstance(kind, ScaleChange):
        return kind.f, kind.mu_bar
    raise TypeError(f"{kind!r} is not a variance or scale change")


def threshold_value(kind: ChangeKind, model: ArmaModel, n: int, gamma: float, beta: float,
                    variant: Variant = "asymptotic",
                    ctx: Optional[CovarianceContext] = None) -> float:
    """``b(beta)`` for one grid point; ``ctx`` (the window covariance) is
    built on demand for finite-n variants."""
    if isinstance(kind, MeanShift):
        if variant == "asymptotic":
            return b_mean_change(model, kind.nu_bar, gamma, beta)
        ctx = ctx if ctx is not None else build_context(model, n)
        return b_mean_change_finite(ctx, kind.nu_bar, gamma, beta)
    if isinstance(kind, VarianceChange):
        return b_variance_change(model.sigma, kind.tau, gamma, beta)
    if isinstance(kind, ScaleChange):
        if kind.mu_bar == 0:
            return b_scale_change(kind.f, gamma, beta)
        m = n - beta_index(n, beta)
        if variant == "asymptotic":
            s = script_T_limit(model) * m
            return _scale_threshold_from_s(s, kind.f, kind.mu_bar, gamma, beta, n)
        ctx = ctx if ctx is not None else build_context(model, n)
        return b_scale_change_general(ctx.leading(m), kind.f, kind.mu_bar, gamma, beta, n)
    raise TypeError(f"unknown change kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    """``b(beta)`` on the grid ``beta = i / n``, ``i = 0..n-1``."""

    betas: np.ndarray
    values: np.ndarray
    gamma: float
    kind: ChangeKind
    variant: Variant
    model: ArmaModel

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        for arr in (self.betas, self.values):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.betas)

    def __call__(self, beta: float) -> float:
        return float(self.values[beta_index(self.n, beta)])

    def decay_rates(self) -> np.ndarray:
        """Decay rate at each ``b(beta)`` recomputed through MGF + Legendre."""
        ctx = build_context(self.model, self.n) if self.variant == "finite_n" else None
        return np.array([
            decay_rate(self.kind, self.model, self.n, float(beta), float(b), self.variant, ctx)
            for beta, b in zip(self.betas, self.values)
        ])


def threshold_curve(kind: ChangeKind, model: ArmaModel, n: int, gamma: float,
                    variant: Variant = "asymptotic") -> ThresholdCurve:
    if variant not in ("asymptotic", "finite_n"):
        raise ValueError(f"unknown variant {variant!r}")
    validate(model)
    ctx = build_context(model, n) if variant == "finite_n" else None
    betas = np.arange(n) / n
    values = np.array([threshold_value(kind, model, n, gamma, float(b), variant, ctx) for b in betas])
    return ThresholdCurve(betas=betas, values=values, gamma=float(gamma), kind=kind,
                          variant=variant, model=model)


# --------------------------------------------------------------------------
# independent route: MGF + Legendre
# --------------------------------------------------------------------------


def log_mgf_for(kind: ChangeKind, model: ArmaModel, n: int, beta: float,
                variant: Variant = "asymptotic",
                ctx: Optional[CovarianceContext] = None):
    """Per-observation log-MGF of the statistic for ``kind`` at ``beta``,
    together with its theta domain."""
    m = n - beta_index(n, beta)
    if isinstance(kind, MeanShift):
        if variant == "asymptotic":
            q = kind.nu_bar**2 * script_T_limit(model) * (1.0 - beta)
            return (lambda th: 0.5 * (th**2 - th) * q), (-math.inf, math.inf)
        ctx = ctx if ctx is not None else build_context(model, n)
        pair = GaussianPair(mean_shift_vector(n, kind.nu_bar, beta), ctx, ctx)
        return (lambda th: mgf_general(th, pair) / n), (-math.inf, math.inf)
    if isinstance(kind, VarianceChange):
        sig, tau = model.sigma, kind.tau
        sigmas = np.full(n, sig)
        taus = np.concatenate([np.full(n - m, sig), np.full(m, tau)])
        nu = np.zeros(n)
        c = sig**2 - tau**2  # mix = tau^2 + c * theta
        domain = (-tau**2 / c, math.inf) if c > 0 else (-math.inf, -tau**2 / c)
        return (lambda th: mgf_independent(th, sigmas, taus, nu) / n), domain
    if isinstance(kind, ScaleChange):
        nu_bar = kind.nu_bar
        if nu_bar == 0:
            s = 0.0
        elif variant == "asymptotic":
            s = script_T_limit(model) * m
        else:
            ctx = ctx if ctx is not None else build_context(model, n)
            ones = np.ones(m)
            s = float(ones @ ctx.leading(m).solve(ones))
        f = kind.f
        return (lambda th: scale_log_mgf(th, f, nu_bar, s, m, n)), scale_theta_domain(f)
    raise TypeError(f"unknown change kind {kind!r}")


def decay_rate(kind: ChangeKind, model: ArmaModel, n: int, beta: float, b: float,
               variant: Variant = "asymptotic",
               ctx: Optional[CovarianceContext] = None) -> float:
    log_mgf, domain = log_mgf_for(kind, model, n, beta, variant, ctx)
    return rate_function(b, log_mgf, domain)
