"""Fitting ARFI and AR models to finite time series.

The pipeline follows the usual semi-parametric route: ``d`` from the local
Whittle estimator, fractional differencing of the series with the truncated
``(1 - L)^d`` filter, then ordinary least squares AR identification with the
order picked by BIC.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from .errors import DataError
from .fracdiff import DEFAULT_Q, ArfiModel, apply_fracdiff_filter, companion_radius

MIN_WHITTLE_LENGTH = 64
WHITTLE_BOUNDS = (-0.5, 1.0)


class Mode(str, Enum):
    """Estimation modes.

    ``EAR``   pure AR on the raw series, ``d`` forced to 0.
    ``EARD``  AR on the fractionally differenced series; the model keeps ``d = 0``.
    ``EARFI`` AR on the differenced series and the estimated ``d`` kept in the model.
    """

    EAR = "ear"
    EARD = "eard"
    EARFI = "earfi"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown mode {value!r}; expected one of {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class FitConfig:
    mode: Mode = Mode.EARFI
    q: int = DEFAULT_Q
    pmin: int = 2
    pmax: int = 16
    whittle_bandwidth_exponent: float = 0.65
    demean: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not 2 <= self.pmin <= self.pmax:
            raise ValueError(f"need 2 <= pmin <= pmax, got pmin={self.pmin}, pmax={self.pmax}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not 0.0 < self.whittle_bandwidth_exponent < 1.0:
            raise ValueError("whittle_bandwidth_exponent must lie in (0, 1)")


@dataclass(frozen=True)
class FitResult:
    model: ArfiModel
    d_hat: float
    d_stderr: float
    p_selected: int
    bic_curve: dict[int, float]
    n_used: int
    mode: Mode
    warnings: tuple[str, ...] = field(default_factory=tuple)


class WhittleEstimate(NamedTuple):
    d: float
    stderr: float
    at_boundary: bool = False


class ArFit(NamedTuple):
    coefficients: np.ndarray
    sigma2: float
    stable: bool


def _golden_section(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def periodogram(x) -> tuple[np.ndarray, np.ndarray]:
    """Periodogram ``|sum x_t e^{-i l t}|^2 / (2 pi N)`` at ``l_j = 2 pi j / N``, ``j >= 1``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    dft = np.fft.rfft(x)[1:]
    lam = 2.0 * np.pi * np.arange(1, dft.size + 1) / n
    return lam, np.abs(dft) ** 2 / (2.0 * np.pi * n)


def whittle_d(series, bandwidth_exponent: float = 0.65, *, demean: bool = True) -> WhittleEstimate:
    """Local Whittle estimate of the memory parameter ``d``.

    Minimises ``R(d) = ln(mean_j l_j^{2d} I(l_j)) - 2 d mean_j ln l_j`` over the
    lowest ``floor(N ** bandwidth_exponent)`` Fourier frequencies by golden
    section search on [-0.5, 1). Standard error is ``1 / (2 sqrt(m))``.
    """
    x = np.asarray(series, dtype=float)
    if x.size < MIN_WHITTLE_LENGTH:
        raise DataError(
            f"series too short for Whittle estimation: N={x.size} < {MIN_WHITTLE_LENGTH}"
        )
    if demean:
        x = x - x.mean()
    lam, I = periodogram(x)
    m = int(math.floor(x.size ** bandwidth_exponent))
    m = max(1, min(m, lam.size))
    lam, I = lam[:m], I[:m]
    if not np.all(np.isfinite(I)) or np.max(I) <= 0.0:
        raise DataError("periodogram degenerate (zero-variance series)")
    # ordinates that are exactly zero would send the log objective to -inf
    I = np.maximum(I, np.finfo(float).tiny)
    log_lam = np.log(lam)
    mean_log_lam = log_lam.mean()

    def objective(d):
        return math.log(np.mean(np.exp(2.0 * d * log_lam) * I)) - 2.0 * d * mean_log_lam

    lo, hi = WHITTLE_BOUNDS
    d_hat = _golden_section(objective, lo, hi)
    at_boundary = min(d_hat - lo, hi - d_hat) < 1e-4
    if at_boundary:
        warnings.warn(f"Whittle minimiser at search boundary (d={d_hat:.4f})",
                      RuntimeWarning, stacklevel=2)
    return WhittleEstimate(float(d_hat), 1.0 / (2.0 * math.sqrt(m)), at_boundary)


def _lagged(x: np.ndarray, p: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    y = x[start:]
    X = np.column_stack([x[start - k: n - k] for k in range(1, p + 1)]) if p else np.zeros((n - start, 0))
    return X, y


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    if X.shape[1] == 0:
        return np.zeros(0), float(y @ y)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DataError("degenerate series: rank-deficient regressor matrix")
    resid = y - X @ coef
    return coef, float(resid @ resid)


def ols_ar(series, p: int, *, start: int | None = None) -> ArFit:
    """Least-squares AR(p) fit of ``x[n]`` on ``x[n-1]..x[n-p]``.

    Uses ``n = start..N-1`` (default ``start = p``); ``sigma2`` is the residual
    sum of squares over the number of equations. The series is used as given
    (no mean removal). Unstable fits are flagged, not repaired.
    """
    x = np.asarray(series, dtype=float)
    p = int(p)
    if p < 0:
        raise ValueError("AR order must be >= 0")
    if x.size <= 2 * p + 1:
        raise DataError(f"series too short for AR({p}): N={x.size}")
    start = p if start is None else int(start)
    X, y = _lagged(x, p, start)
    coef, rss = _ols(X, y)
    sigma2 = rss / y.size
    if not sigma2 > 0:
        raise DataError("degenerate series: zero residual variance")
    stable = companion_radius(coef) < 1.0 - 1e-9
    if not stable:
        warnings.warn(f"unstable AR({p}) fit", RuntimeWarning, stacklevel=2)
    return ArFit(coef, sigma2, stable)


def select_order_bic(series, pmin: int = 2, pmax: int = 16) -> tuple[int, dict[int, float]]:
    """Pick the AR order minimising ``n ln(sigma2) + p ln(n)``.

    Every candidate is fitted on the same equations ``t = pmax..N-1`` so the
    criterion compares like with like; ``n = N - pmax``. Ties go to the
    smaller order.
    """
    x = np.asarray(series, dtype=float)
    if not 0 <= pmin <= pmax:
        raise ValueError(f"need 0 <= pmin <= pmax, got {pmin}, {pmax}")
    if x.size <= 2 * pmax + 1:
        raise DataError(f"series too short for order search up to {pmax}: N={x.size}")
    n_eff = x.size - pmax
    curve: dict[int, float] = {}
    for p in range(pmin, pmax + 1):
        X, y = _lagged(x, p, pmax)
        _, rss = _ols(X, y)
        sigma2 = rss / n_eff
        if not sigma2 > 0:
            raise DataError("degenerate series: zero residual variance")
        curve[p] = n_eff * math.log(sigma2) + p * math.log(n_eff)
    best = min(curve, key=lambda p: (curve[p], p))
    return best, curve


def d_significance(d_hat: float, stderr: float, level: float = 0.05) -> tuple[float, float, bool]:
    """Two-sided test of ``d = 0``: returns the acceptance interval and the verdict."""
    if not stderr > 0:
        raise ValueError("stderr must be > 0")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    half = NormalDist().inv_cdf(1.0 - level / 2.0) * stderr
    return -half, half, bool(abs(d_hat) > half)


def fit(series, config: FitConfig = FitConfig()) -> FitResult:
    """Identify an ARFI/AR model from ``series`` according to ``config.mode``."""
    x = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise DataError("series contains non-finite values")
    if x.size < MIN_WHITTLE_LENGTH:
        raise DataError(f"series too short: N={x.size} < {MIN_WHITTLE_LENGTH}")
    if config.demean:
        x = x - x.mean()
    notes: list[str] = []
    mode = config.mode
    if mode is Mode.EAR:
        d_hat, stderr = 0.0, float("nan")
        work = x
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = whittle_d(x, config.whittle_bandwidth_exponent, demean=False)
        notes.extend(str(w.message) for w in caught)
        d_hat, stderr = est.d, est.stderr
        work = apply_fracdiff_filter(x, d_hat, config.q).values
    p, curve = select_order_bic(work, config.pmin, config.pmax)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ar = ols_ar(work, p)
    notes.extend(str(w.message) for w in caught)
    model_d = d_hat if mode is Mode.EARFI else 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        # raises NonStationaryError for unstable fits
        model = ArfiModel(ar.coefficients, model_d, ar.sigma2)
    notes.extend(str(w.message) for w in caught)
    return FitResult(
        model=model,
        d_hat=d_hat,
        d_stderr=stderr,
        p_selected=p,
        bic_curve=curve,
        n_used=x.size - p,
        mode=mode,
        warnings=tuple(notes),
    )
