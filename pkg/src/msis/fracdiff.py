"""Fractional differencing and the ARFI(p, d) -> AR(p + q) truncation.

Conventions
-----------
An AR lag polynomial is written ``B(L) = 1 - sum_{k=1}^m B_k L^k`` and only
``B_1..B_m`` are stored. The fractional differencing operator is expanded as
``(1 - L)^d = sum_k G_k L^k`` with ``G_0 = 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, NonStationaryError

#: Default truncation lag of the fractional integration polynomial.
DEFAULT_Q = 50

#: Roots must lie at least this far inside the unit circle (companion form).
STABILITY_MARGIN = 1e-9


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


def companion_radius(b: Sequence[float]) -> float:
    """Spectral radius of the companion matrix of ``1 - sum b_k L^k``."""
    b = np.asarray(b, dtype=float)
    if b.size == 0 or not np.any(b):
        return 0.0
    # trailing zeros only add roots at the origin
    nz = np.flatnonzero(b)
    b = b[: nz[-1] + 1]
    roots = np.roots(np.concatenate(([1.0], -b)))
    return float(np.max(np.abs(roots)))


@dataclass(frozen=True)
class ArPolynomial:
    """Finite AR lag polynomial ``B(L) = 1 - sum_{k=1}^{order} b[k-1] L^k``."""

    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(self.b))

    @property
    def order(self) -> int:
        return int(self.b.size)

    @property
    def spectral_radius(self) -> float:
        return companion_radius(self.b)

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0 - STABILITY_MARGIN

    def lag_coefficients(self) -> np.ndarray:
        """Full coefficient vector ``[1, -b_1, ..., -b_m]``."""
        return np.concatenate(([1.0], -self.b))


@dataclass(frozen=True)
class FracDiffExpansion:
    """Truncated expansion ``G_0..G_q`` of ``(1 - L)^d``."""

    d: float
    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g", _frozen(self.g))

    @property
    def q(self) -> int:
        return int(self.g.size - 1)


@dataclass(frozen=True)
class ArfiModel:
    """ARFI(p, d) process ``A(L)(1 - L)^d X_n = E_n``.

    Parameters
    ----------
    a : sequence of float
        Short-term AR coefficients ``A_1..A_p`` (``A(L) = 1 - sum A_i L^i``).
    d : float
        Fractional differencing parameter, accepted in (-0.5, 1).
    sigma2_e : float
        Innovation variance, strictly positive.
    """

    a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d: float = 0.0
    sigma2_e: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "sigma2_e", float(self.sigma2_e))
        if not np.isfinite(self.sigma2_e) or self.sigma2_e <= 0:
            raise ValueError(f"innovation variance must be > 0, got {self.sigma2_e}")
        if not np.all(np.isfinite(self.a)):
            raise ValueError("AR coefficients must be finite")
        if not -0.5 < self.d < 1.0:
            raise ValueError(f"d must lie in (-0.5, 1), got {self.d}")
        if self.d >= 0.75:
            warnings.warn(
                f"d={self.d} is outside (-0.5, 0.75); long-memory estimates "
                "and truncation become unreliable there",
                stacklevel=3,
            )
        if companion_radius(self.a) >= 1.0 - STABILITY_MARGIN:
            raise NonStationaryError(
                "nonstationary process: AR polynomial has a root on or inside "
                "the unit circle"
            )

    @property
    def p(self) -> int:
        return int(self.a.size)

    def with_d(self, d: float) -> "ArfiModel":
        return ArfiModel(self.a, d, self.sigma2_e)

    def scaled(self, c: float) -> "ArfiModel":
        """Same dynamics with innovation variance multiplied by ``c``."""
        return ArfiModel(self.a, self.d, self.sigma2_e * c)


def fracdiff_coefficients(d: float, q: int) -> FracDiffExpansion:
    """Coefficients of ``(1 - L)^d`` truncated at lag ``q``.

    Uses the multiplicative recursion ``G_k = G_{k-1} (k - 1 - d) / k``, which
    stays accurate where the gamma-function form overflows (k > ~170).
    """
    q = int(q)
    if q < 1:
        raise ValueError(f"truncation lag must be >= 1, got {q}")
    if not np.isfinite(d):
        raise ValueError("d must be finite")
    k = np.arange(1, q + 1, dtype=float)
    g = np.concatenate(([1.0], np.cumprod((k - 1.0 - d) / k)))
    return FracDiffExpansion(float(d), g)


def arfi_to_ar(model: ArfiModel, q: int = DEFAULT_Q) -> ArPolynomial:
    """Truncate ``(1 - L)^d`` at lag ``q`` and fold it into ``A(L)``.

    Returns the AR(p + q) polynomial ``B(L) = A(L) G(L)``. ``q = 0`` is
    accepted and returns ``A(L)`` itself.
    """
    if q == 0:
        return ArPolynomial(model.a)
    g = fracdiff_coefficients(model.d, q).g
    prod = np.convolve(np.concatenate(([1.0], -model.a)), g)
    return ArPolynomial(-prod[1:])


class FilteredSeries(NamedTuple):
    values: np.ndarray
    transient: int


def apply_fracdiff_filter(series, d: float, q: int = DEFAULT_Q) -> FilteredSeries:
    """Apply the truncated ``(1 - L)^d`` filter with zero pre-sample values.

    The output has the same length as the input; its first ``q`` samples are
    computed from a partial window and are reported as ``transient``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DataError("series must be one-dimensional")
    if x.size < q + 1:
        raise DataError(
            f"series too short for truncation lag: N={x.size}, q={q}"
        )
    g = fracdiff_coefficients(d, q).g
    y = np.convolve(x, g)[: x.size]
    return FilteredSeries(y, int(q))


def poles_to_ar(poles: Sequence[tuple[float, float]]) -> ArPolynomial:
    """AR polynomial with conjugate root pairs ``rho * exp(+-2j pi f)``.

    Each ``(rho, f)`` pair contributes ``1 - 2 rho cos(2 pi f) L + rho^2 L^2``.
    """
    coeffs = np.array([1.0])
    for rho, f in poles:
        rho, f = float(rho), float(f)
        if rho >= 1.0:
            raise NonStationaryError(f"unstable pole: modulus {rho} >= 1")
        if rho < 0.0:
            raise ValueError(f"pole modulus must be >= 0, got {rho}")
        if not 0.0 < f < 0.5:
            raise ValueError(f"pole frequency must lie in (0, 0.5), got {f}")
        quad = np.array([1.0, -2.0 * rho * np.cos(2.0 * np.pi * f), rho * rho])
        coeffs = np.convolve(coeffs, quad)
    return ArPolynomial(-coeffs[1:])
