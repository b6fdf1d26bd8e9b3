"""Gaussian ARMA(p, q) processes.

The generative law for every sequence in the package is

    X_i - c = eps_i + sum_j ar[j] (X_{i-j} - c) + sum_j ma[j] eps_{i-j},

with ``eps_i`` i.i.d. N(0, sigma^2).  This module builds the stationary
autocovariance of such a process, the Toeplitz covariance matrix of a window
of ``n`` consecutive observations (with a cached Cholesky factor), and
simulates realisations with an injected change in level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import linalg, signal

from .errors import (
    BetaNotOnGrid,
    DegenerateMA,
    DimensionMismatch,
    InvalidSigma,
    NonStationary,
    NotPositiveDefinite,
    TruncationFailure,
)

STATIONARITY_MARGIN = 1e-10
PSI_CAP = 100_000
AUTOCOV_TOL = 1e-14


@dataclass(frozen=True)
class ArmaModel:
    """ARMA(p, q) parameterisation.

    Parameters
    ----------
    ar : sequence of float
        Autoregressive coefficients rho_1..rho_p.
    ma : sequence of float
        Moving-average coefficients theta_1..theta_q.  Invertibility is not
        required.
    sigma : float
        Standard deviation of the Gaussian innovations.
    mean : float
        Process level ``c``.
    """

    ar: tuple[float, ...] = ()
    ma: tuple[float, ...] = ()
    sigma: float = 1.0
    mean: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(a) for a in self.ar))
        object.__setattr__(self, "ma", tuple(float(m) for m in self.ma))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "mean", float(self.mean))

    @classmethod
    def ar1(cls, rho: float, sigma: float = 1.0, mean: float = 0.0) -> "ArmaModel":
        return cls(ar=(rho,), sigma=sigma, mean=mean)

    @classmethod
    def ma1(cls, theta: float, sigma: float = 1.0, mean: float = 0.0) -> "ArmaModel":
        return cls(ma=(theta,), sigma=sigma, mean=mean)

    @classmethod
    def white_noise(cls, sigma: float = 1.0, mean: float = 0.0) -> "ArmaModel":
        return cls(sigma=sigma, mean=mean)

    @property
    def p(self) -> int:
        return len(self.ar)

    @property
    def q(self) -> int:
        return len(self.ma)

    def with_mean(self, mean: float) -> "ArmaModel":
        return ArmaModel(self.ar, self.ma, self.sigma, mean)

    def ar_root_moduli(self) -> np.ndarray:
        """Moduli of the roots of 1 - rho_1 z - ... - rho_p z^p."""
        coeffs = [-a for a in reversed(self.ar)] + [1.0]
        # np.roots strips leading zeros and solves via companion-matrix eigenvalues
        roots = np.roots(coeffs)
        return np.abs(roots)


def validate(model: ArmaModel) -> ArmaModel:
    """Check ``sigma > 0`` and stationarity; return the model unchanged.

    Raises
    ------
    InvalidSigma
        If sigma is not a positive finite number.
    NonStationary
        If an AR root has modulus ``<= 1 + 1e-10``.
    """
    if not (math.isfinite(model.sigma) and model.sigma > 0):
        raise InvalidSigma(f"sigma must be positive, got {model.sigma}")
    if not all(math.isfinite(c) for c in model.ar + model.ma + (model.mean,)):
        raise ValueError("ARMA coefficients and mean must be finite")
    moduli = model.ar_root_moduli()
    bad = moduli[moduli <= 1.0 + STATIONARITY_MARGIN]
    if bad.size:
        raise NonStationary(np.sort(bad))
    return model


def psi_weights(model: ArmaModel, tol: float = 1e-12) -> np.ndarray:
    """Causal MA(infinity) weights psi_0 = 1, psi_1, ...

    The recursion ``psi_j = theta_j + sum_i rho_i psi_{j-i}`` is run until a
    weight with index ``K >= p + q + 1`` drops below ``tol`` in absolute value,
    together with the ``p - 1`` weights before it (so that an oscillating AR
    recursion is not cut at an accidental near-zero).  Weights ``0..K-1`` are
    returned.
    """
    validate(model)
    ar, ma = model.ar, model.ma
    p, q = len(ar), len(ma)
    run_needed = max(p, 1)
    psi = [1.0]
    small_run = 0
    j = 0
    while True:
        j += 1
        if j > PSI_CAP:
            raise TruncationFailure(
                f"psi weights still above {tol:g} after {PSI_CAP} terms"
            )
        value = ma[j - 1] if j <= q else 0.0
        for i in range(1, min(j, p) + 1):
            value += ar[i - 1] * psi[j - i]
        small_run = small_run + 1 if abs(value) < tol else 0
        if j >= p + q + 1 and small_run >= run_needed:
            break
        psi.append(value)
    # drop the sub-tolerance tail that was appended while the run accumulated
    keep = len(psi) - (small_run - 1)
    return np.array(psi[:keep])


def autocovariance(model: ArmaModel, max_lag: int) -> np.ndarray:
    """Stationary autocovariances gamma(0..max_lag) via psi-weight convolution."""
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    psi = psi_weights(model, tol=AUTOCOV_TOL)
    gamma = np.zeros(max_lag + 1)
    for h in range(min(max_lag, len(psi) - 1) + 1):
        gamma[h] = np.dot(psi[: len(psi) - h], psi[h:])
    return model.sigma**2 * gamma


@dataclass(frozen=True, eq=False)
class CovarianceContext:
    """A positive-definite covariance matrix with its Cholesky factor.

    Built either from an ARMA model (Toeplitz, see :func:`build_context`) or
    from an arbitrary SPD matrix via :meth:`from_matrix`.  Instances are
    immutable and safe to share.
    """

    cov: np.ndarray
    model: Optional[ArmaModel] = None
    autocov: Optional[np.ndarray] = None
    _cho: tuple = field(default=None, repr=False)
    logdet: float = field(default=float("nan"))

    @classmethod
    def from_matrix(
        cls,
        cov,
        model: Optional[ArmaModel] = None,
        autocov: Optional[np.ndarray] = None,
    ) -> "CovarianceContext":
        cov = np.array(cov, dtype=float, ndmin=2)
        if cov.shape[0] != cov.shape[1]:
            raise DimensionMismatch(f"covariance must be square, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise NotPositiveDefinite("covariance matrix is not symmetric")
        try:
            factor, lower = linalg.cho_factor(cov, lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        diag = np.diag(factor)
        if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
            raise NotPositiveDefinite("Cholesky factor has a non-positive pivot")
        cov.setflags(write=False)
        factor.setflags(write=False)
        if autocov is not None:
            autocov = np.array(autocov, dtype=float)
            autocov.setflags(write=False)
        return cls(
            cov=cov,
            model=model,
            autocov=autocov,
            _cho=(factor, lower),
            logdet=float(2.0 * np.sum(np.log(diag))),
        )

    @property
    def n(self) -> int:
        return self.cov.shape[0]

    def solve(self, v) -> np.ndarray:
        """Return ``cov^{-1} v`` (``v`` may be a vector or an ``n x k`` matrix)."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise DimensionMismatch(f"expected leading dimension {self.n}, got {v.shape}")
        return linalg.cho_solve(self._cho, v, check_finite=False)

    def leading(self, m: int) -> "CovarianceContext":
        """Context for the first ``m`` coordinates (same process, shorter window)."""
        if self.model is not None:
            return build_context(self.model, m)
        return CovarianceContext.from_matrix(self.cov[:m, :m])


def build_context(model: ArmaModel, n: int) -> CovarianceContext:
    """Toeplitz covariance of ``n`` consecutive observations of ``model``."""
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    validate(model)
    gamma = autocovariance(model, n - 1)
    return CovarianceContext.from_matrix(linalg.toeplitz(gamma), model=model, autocov=gamma)


def precision_quadratic(ctx: CovarianceContext, u, v) -> float:
    """``u^T cov^{-1} v`` through the cached factorisation."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (ctx.n,) or v.shape != (ctx.n,):
        raise DimensionMismatch(f"expected vectors of length {ctx.n}, got {u.shape} and {v.shape}")
    return float(u @ ctx.solve(v))


def beta_index(n: int, beta: float) -> int:
    """Integer ``m = n * beta``; raises if ``beta`` is not on the grid ``i/n``."""
    scaled = n * beta
    m = int(round(scaled))
    if abs(scaled - m) > 1e-9 * max(1.0, n) or not 0 <= m < n:
        raise BetaNotOnGrid(f"beta={beta!r} is not of the form i/{n} with 0 <= i < {n}")
    return m


def tail_indicator(n: int, m: int) -> np.ndarray:
    ind = np.zeros(n)
    ind[m:] = 1.0
    return ind


def t_sum(ctx: CovarianceContext, beta: float) -> float:
    """Sum of the entries of ``cov^{-1}`` over rows/columns ``n*beta+1..n``."""
    m = beta_index(ctx.n, beta)
    ind = tail_indicator(ctx.n, m)
    return precision_quadratic(ctx, ind, ind)


def script_T_limit(model: ArmaModel) -> float:
    """Limit of ``t_{n,beta} / (n (1 - beta))``:
    ``((1 - sum(ar)) / (sigma (1 + sum(ma))))**2``."""
    validate(model)
    ma_sum = 1.0 + math.fsum(model.ma)
    if abs(ma_sum) < 1e-12:
        raise DegenerateMA("1 + sum(ma) vanishes; the limit is infinite")
    return ((1.0 - math.fsum(model.ar)) / (model.sigma * ma_sum)) ** 2


def partial_sum_variance(ctx: CovarianceContext) -> float:
    """Variance of ``X_1 + ... + X_n``, i.e. ``1^T cov 1``."""
    return float(ctx.cov.sum())


def long_run_variance(model: ArmaModel) -> float:
    """Limit of ``partial_sum_variance / n``."""
    validate(model)
    return (model.sigma * (1.0 + math.fsum(model.ma)) / (1.0 - math.fsum(model.ar))) ** 2


@dataclass(frozen=True)
class ChangeInjection:
    """A level change effective from (1-based) observation ``changepoint_index``.

    ``smooth`` keeps the recursion's memory across the change; ``abrupt``
    replaces the remainder of the series with an independent stationary path.
    ``scale`` multiplies the innovation standard deviation after the change
    (1 leaves it untouched).
    """

    changepoint_index: int
    new_mean: float = 0.0
    mode: Literal["smooth", "abrupt"] = "smooth"
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("smooth", "abrupt"):
            raise ValueError(f"mode must be 'smooth' or 'abrupt', got {self.mode!r}")
        if self.changepoint_index < 1:
            raise ValueError("changepoint_index is 1-based and must be >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def none(cls, length: int) -> "ChangeInjection":
        return cls(changepoint_index=length + 1)


def burn_in(model: ArmaModel) -> int:
    return 1000 + 20 * (model.p + model.q)


def _filter_polys(model: ArmaModel) -> tuple[np.ndarray, np.ndarray]:
    a = np.concatenate(([1.0], -np.asarray(model.ar)))
    b = np.concatenate(([1.0], np.asarray(model.ma)))
    return b, a


def _recursion(model: ArmaModel, eps: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Run the ARMA recursion with a time-varying level ``c_i``.

    ``X_i - sum rho_j X_{i-j} = c_i (1 - sum rho_j) + eps_i + sum theta_j eps_{i-j}``
    which is the defining recursion with ``c`` replaced by ``c_i`` at time i.
    """
    b, a = _filter_polys(model)
    noise = signal.lfilter(b, a, eps)
    drive = levels * (1.0 - math.fsum(model.ar))
    # start the deterministic part in its steady state
    zi = signal.lfilter_zi([1.0], a) * drive[0] if model.p else None
    if zi is None:
        level_path = drive
    else:
        level_path, _ = signal.lfilter([1.0], a, drive, zi=zi)
    return noise + level_path


def _stationary_path(
    model: ArmaModel, length: int, rng: np.random.Generator, sigma: float
) -> np.ndarray:
    burn = burn_in(model)
    eps = rng.standard_normal(burn + length) * sigma
    levels = np.full(burn + length, model.mean)
    return _recursion(model, eps, levels)[burn:]


def simulate(
    model: ArmaModel,
    length: int,
    injection: Optional[ChangeInjection] = None,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Simulate ``length`` observations starting from stationarity.

    Parameters
    ----------
    model : ArmaModel
        Pre-change law.
    length : int
        Number of observations returned.
    injection : ChangeInjection, optional
        Change in level; default is no change.
    seed : int, optional
        Seed for :func:`numpy.random.default_rng`.

    Returns
    -------
    numpy.ndarray
        Observations ``X_1..X_length``.
    """
    validate(model)
    if length < 1:
        raise ValueError("length must be >= 1")
    if injection is None:
        injection = ChangeInjection.none(length)
    k = injection.changepoint_index
    if k > length + 1:
        raise ValueError(f"changepoint_index must be <= length + 1 = {length + 1}, got {k}")
    rng = np.random.default_rng(seed)

    if injection.mode == "abrupt":
        pre = _stationary_path(model, k - 1, rng, model.sigma) if k > 1 else np.empty(0)
        if k > length:
            return pre
        post_model = model.with_mean(injection.new_mean)
        post = _stationary_path(post_model, length - k + 1, rng, model.sigma * injection.scale)
        return np.concatenate([pre, post])

    burn = burn_in(model)
    total = burn + length
    change_at = burn + k - 1  # 0-based position of observation k
    eps = rng.standard_normal(total) * model.sigma
    eps[change_at:] *= injection.scale
    levels = np.full(total, model.mean)
    levels[change_at:] = injection.new_mean
    return _recursion(model, eps, levels)[burn:]


def sample_autocovariance(x: Sequence[float], max_lag: int) -> np.ndarray:
    """Biased sample autocovariance (divisor ``len(x)``), lags ``0..max_lag``."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    n = len(d)
    return np.array([np.dot(d[: n - h], d[h:]) / n for h in range(max_lag + 1)])
