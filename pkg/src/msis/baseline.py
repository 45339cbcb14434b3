"""Refined multiscale entropy, the model-free comparison method.

Each scale ``tau`` is obtained by zero-phase Butterworth lowpass filtering at
``1/(2 tau)`` followed by keeping every ``tau``-th sample; Sample Entropy of
the result is then turned into an information-storage value through the
Gaussian identity ``S = 0.5 ln(2 pi e) - C`` (unit-variance series).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import sosfiltfilt
from scipy.spatial import cKDTree

from .errors import DataError
from .estimation import ols_ar, select_order_bic

BUTTER_ORDER = 6
GAUSS_ENTROPY_UNIT = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class SampEnConfig:
    """Sample Entropy settings.

    ``basis`` selects what the tolerance ``r_factor`` multiplies: ``"series"``
    is the standard deviation of the analysed series, ``"innovation"`` the
    standard deviation of the one-step residual of an AR model fitted to it.
    """

    m: int = 2
    r_factor: float = 0.2
    basis: str = "series"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("embedding dimension must be >= 1")
        if not self.r_factor > 0:
            raise ValueError("r_factor must be > 0")
        if self.basis not in ("series", "innovation"):
            raise ValueError(f"unknown tolerance basis {self.basis!r}")


def _butter_analog_poles(order: int) -> np.ndarray:
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def _butter_zpk(cutoff: float, order: int):
    if not 0.0 < cutoff < 0.5:
        raise ValueError(f"Butterworth cutoff must lie strictly inside (0, 0.5), got {cutoff}")
    # prewarp with s = (z - 1)/(z + 1)
    warped = math.tan(math.pi * cutoff)
    pa = warped * _butter_analog_poles(order)
    pz = (1.0 + pa) / (1.0 - pa)
    zz = -np.ones(order)
    return zz, pz


def butterworth_lowpass(cutoff: float, order: int = BUTTER_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Digital Butterworth lowpass ``(b, a)`` with unit DC gain.

    ``cutoff`` is the -3 dB frequency in cycles/sample. Built from the analog
    prototype by the bilinear transform with frequency prewarping.
    """
    zz, pz = _butter_zpk(cutoff, order)
    b = np.real(np.poly(zz))
    a = np.real(np.poly(pz))
    b *= a.sum() / b.sum()
    return b, a


def butterworth_sos(cutoff: float, order: int = BUTTER_ORDER) -> np.ndarray:
    """Same filter as :func:`butterworth_lowpass` in second-order sections.

    Polynomial form loses accuracy at low cutoffs; this is the form used for
    filtering.
    """
    if order % 2:
        raise ValueError("second-order sections need an even order")
    _, pz = _butter_zpk(cutoff, order)
    upper = pz[pz.imag > 0]
    upper = upper[np.argsort(np.abs(upper))]
    sos = []
    for p in upper:
        a = np.array([1.0, -2.0 * p.real, abs(p) ** 2])
        b = np.array([1.0, 2.0, 1.0]) * a.sum() / 4.0
        sos.append(np.concatenate((b, a)))
    return np.array(sos)


def frequency_response(b, a, f) -> np.ndarray:
    """``H(e^{2 pi i f})`` of a rational filter."""
    z = np.exp(-2j * np.pi * np.asarray(f, dtype=float))
    return np.polyval(np.asarray(b)[::-1], z) / np.polyval(np.asarray(a)[::-1], z)


def decimate(series, tau: int) -> np.ndarray:
    """Zero-phase Butterworth lowpass at ``1/(2 tau)`` then keep every ``tau``-th sample."""
    x = np.asarray(series, dtype=float)
    tau = int(tau)
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if tau == 1:
        return x.copy()
    if x.size < tau:
        raise DataError(f"series shorter than decimation factor {tau}")
    y = sosfiltfilt(butterworth_sos(1.0 / (2.0 * tau)), x)
    return y[: (x.size // tau) * tau: tau]


def _embed(x: np.ndarray, m: int, count: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, m)[:count]


def _count_pairs(templates: np.ndarray, r: float) -> int:
    """Unordered pairs of distinct templates within Chebyshev distance ``r``."""
    n = templates.shape[0]
    if n < 2:
        return 0
    tree = cKDTree(templates)
    ordered = int(tree.count_neighbors(tree, r, p=np.inf))
    return (ordered - n) // 2


def sample_entropy(series, config: SampEnConfig = SampEnConfig(), *, tolerance: float | None = None) -> float:
    """Sample Entropy ``-ln(A/B)``; ``nan`` when undefined.

    ``B`` counts pairs of length-``m`` templates within Chebyshev distance
    ``r`` (self matches excluded), ``A`` the same for length ``m + 1``; both use
    the first ``N - m`` templates. ``r`` is ``config.r_factor`` times the
    sample standard deviation (``ddof=1``) unless ``tolerance`` is given.
    A constant series gives ``nan``.
    """
    x = np.asarray(series, dtype=float)
    m = config.m
    if x.size < m + 2:
        raise DataError(f"series too short for Sample Entropy with m={m}")
    if tolerance is None:
        sd = float(np.std(x, ddof=1))
        if not sd > 0:
            return math.nan
        tolerance = config.r_factor * sd
    count = x.size - m
    B = _count_pairs(_embed(x, m, count), tolerance)
    A = _count_pairs(_embed(x, m + 1, count), tolerance)
    if A == 0 or B == 0:
        return math.nan
    return -math.log(A / B)


@dataclass(frozen=True)
class RmseProfile:
    """Refined multiscale entropy record; undefined scales hold ``nan``."""

    tau: np.ndarray
    f_tau: np.ndarray
    sampen: np.ndarray
    S: np.ndarray

    def __len__(self):
        return self.tau.size

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.S)


def _innovation_sd(x: np.ndarray) -> float:
    pmax = min(16, (x.size - 2) // 2)
    if pmax < 1:
        return math.nan
    p, _ = select_order_bic(x - x.mean(), 1, pmax)
    return math.sqrt(ols_ar(x - x.mean(), p).sigma2)


def refined_mse_storage(series, taus: Sequence[int], config: SampEnConfig = SampEnConfig()) -> RmseProfile:
    """Storage-equivalent refined multiscale entropy at each ``tau``.

    Scales whose decimated series is too short or whose Sample Entropy is
    undefined are reported as ``nan``.
    """
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    taus = np.array([int(t) for t in taus], dtype=int)
    sampen = np.full(taus.size, np.nan)
    for i, tau in enumerate(taus):
        try:
            y = decimate(x, tau)
            sd = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
            if not sd > 0:
                continue
            # SampEn is scale-free with an SD-relative tolerance, so this
            # only fixes the units of the Gaussian conversion
            y = (y - y.mean()) / sd
            tol = None
            if config.basis == "innovation":
                tol = config.r_factor * _innovation_sd(y)
                if not tol > 0:
                    continue
            sampen[i] = sample_entropy(y, config, tolerance=tol)
        except (DataError, np.linalg.LinAlgError):
            continue
    f_tau = 1.0 / (2.0 * taus) if taus.size else np.zeros(0)
    return RmseProfile(taus, f_tau, sampen, GAUSS_ENTROPY_UNIT - sampen)
