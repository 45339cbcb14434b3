"""State-space machinery for multiscale information storage.

The chain implemented here takes an AR(m) approximation of an ARFI process,
casts it in innovations form, lowpass filters it with an FIR filter (which
turns it into an ARMA(m, r) process), downsamples the result by ``tau`` and
recovers the innovations form of the rescaled process through a discrete
algebraic Riccati equation. Storage at each scale is half the log ratio of
process variance to innovation variance.
"""

from __future__ import annotations

import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, NonStationaryError, NumericalError
from .fracdiff import DEFAULT_Q, STABILITY_MARGIN, ArfiModel, ArPolynomial, arfi_to_ar

#: Default FIR lowpass order.
DEFAULT_R = 48

LYAP_TOL = 1e-12
LYAP_MAX_DOUBLINGS = 200
DARE_TOL = 1e-12
DARE_MAX_ITER = 100_000
DARE_WARN_ITER = 10_000
DARE_MAX_DOUBLINGS = 100

LYAP_RESIDUAL_LIMIT = 1e-10
DARE_RESIDUAL_LIMIT = 1e-9


# --------------------------------------------------------------------------
# residual bookkeeping

class SolverRecord(NamedTuple):
    solver: str
    dim: int
    residual: float
    iterations: int


_collectors: list[list[SolverRecord]] = []
_collectors_lock = threading.Lock()


@contextmanager
def track_residuals():
    """Collect a :class:`SolverRecord` for every Lyapunov/DARE solve in scope.

    >>> with track_residuals() as log:
    ...     _ = solve_dlyap(np.array([[0.5]]), np.array([[1.0]]))
    >>> log[0].solver
    'dlyap'
    """
    log: list[SolverRecord] = []
    with _collectors_lock:
        _collectors.append(log)
    try:
        yield log
    finally:
        with _collectors_lock:
            _collectors.remove(log)


def _record(rec: SolverRecord, limit: float) -> None:
    with _collectors_lock:
        for log in _collectors:
            log.append(rec)
    if not rec.residual < limit:
        warnings.warn(
            f"{rec.solver}: relative residual {rec.residual:.3e} exceeds {limit:.0e} "
            f"(dim={rec.dim})",
            RuntimeWarning,
            stacklevel=3,
        )


# --------------------------------------------------------------------------
# model types

def _as_matrix(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    a.setflags(write=False)
    return a


def _as_vector(v) -> np.ndarray:
    v = np.array(v, dtype=float).ravel()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class InnovationsSS:
    """``Z[n+1] = B Z[n] + K E[n]``, ``X[n] = C Z[n] + E[n]``, ``var(E) = sigma2_e``."""

    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    sigma2_e: float

    def __post_init__(self):
        object.__setattr__(self, "B", _as_matrix(self.B))
        object.__setattr__(self, "C", _as_vector(self.C))
        object.__setattr__(self, "K", _as_vector(self.K))
        object.__setattr__(self, "sigma2_e", float(self.sigma2_e))
        n = self.B.shape[0]
        if self.B.shape != (n, n) or self.C.size != n or self.K.size != n:
            raise ValueError(
                f"inconsistent dimensions: B{self.B.shape}, C({self.C.size}), K({self.K.size})"
            )
        if not self.sigma2_e > 0:
            raise NumericalError(f"degenerate innovation variance {self.sigma2_e}")

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    @property
    def spectral_radius(self) -> float:
        if self.dim == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.B))))


@dataclass(frozen=True)
class GeneralSS:
    """``Y[n+1] = B Y[n] + W[n]``, ``X[n] = C Y[n] + V[n]`` with correlated noises.

    ``SigmaW = cov(W)``, ``sigmaV = var(V)``, ``SigmaVW = cov(W, V)``.
    """

    B: np.ndarray
    C: np.ndarray
    SigmaW: np.ndarray
    sigmaV: float
    SigmaVW: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "B", _as_matrix(self.B))
        object.__setattr__(self, "C", _as_vector(self.C))
        object.__setattr__(self, "SigmaW", _as_matrix(self.SigmaW))
        object.__setattr__(self, "SigmaVW", _as_vector(self.SigmaVW))
        object.__setattr__(self, "sigmaV", float(self.sigmaV))
        n = self.B.shape[0]
        if self.SigmaW.shape != (n, n) or self.C.size != n or self.SigmaVW.size != n:
            raise ValueError("inconsistent dimensions in GeneralSS")
        if not self.sigmaV > 0:
            raise NumericalError(f"observation noise variance must be > 0, got {self.sigmaV}")
        if n:
            asym = np.max(np.abs(self.SigmaW - self.SigmaW.T))
            if asym > 1e-10 * max(1.0, np.max(np.abs(self.SigmaW))):
                raise ValueError(f"SigmaW is not symmetric (residual {asym:.2e})")

    @property
    def dim(self) -> int:
        return self.B.shape[0]


@dataclass(frozen=True)
class FirFilter:
    """FIR filter ``D(L) = sum_{k=0}^r D_k L^k`` designed for cutoff ``cutoff``."""

    taps: np.ndarray
    cutoff: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "taps", _as_vector(self.taps))
        if self.taps.size == 0 or self.taps[0] == 0.0:
            raise ValueError("filter leading tap zero after stripping")

    @property
    def r(self) -> int:
        return self.taps.size - 1

    def scaled(self, c: float) -> "FirFilter":
        return FirFilter(self.taps * c, self.cutoff)


@dataclass(frozen=True)
class ScaleEntry:
    tau: int
    f_tau: float
    S: float
    sigma2_x: float
    sigma2_e: float


@dataclass(frozen=True)
class MultiscaleProfile:
    """Storage profile: one :class:`ScaleEntry` per analysed scale."""

    entries: tuple[ScaleEntry, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def tau(self) -> np.ndarray:
        return np.array([e.tau for e in self.entries], dtype=int)

    @property
    def f_tau(self) -> np.ndarray:
        return np.array([e.f_tau for e in self.entries])

    @property
    def S(self) -> np.ndarray:
        return np.array([e.S for e in self.entries])

    @property
    def sigma2_x(self) -> np.ndarray:
        return np.array([e.sigma2_x for e in self.entries])

    @property
    def sigma2_e(self) -> np.ndarray:
        return np.array([e.sigma2_e for e in self.entries])


# --------------------------------------------------------------------------
# basic operations

def ar_to_ss(poly: ArPolynomial, sigma2_e: float) -> InnovationsSS:
    """Companion-form innovations model of ``B(L) X_n = E_n``."""
    if not poly.stable:
        raise NonStationaryError(
            f"nonstationary process: spectral radius {poly.spectral_radius:.12f}"
        )
    m = poly.order
    B = np.zeros((m, m))
    if m:
        B[0] = poly.b
        B[np.arange(1, m), np.arange(m - 1)] = 1.0
    K = np.zeros(m)
    if m:
        K[0] = 1.0
    return InnovationsSS(B, poly.b, K, sigma2_e)


def _smith_doubling(A: np.ndarray, Q: np.ndarray, tol: float,
                    max_doublings: int) -> tuple[np.ndarray, int]:
    P = 0.5 * (Q + Q.T)
    Ak = A.copy()
    for it in range(1, max_doublings + 1):
        update = Ak @ P @ Ak.T
        P = P + update
        Ak = Ak @ Ak
        scale = np.linalg.norm(P)
        if np.linalg.norm(update) <= tol * scale or not np.any(Ak):
            return P, it
        if not np.isfinite(scale):
            raise NonStationaryError("Lyapunov: unstable transition matrix (divergence)")
    raise ConvergenceError(f"Lyapunov: no convergence after {max_doublings} doublings")


def solve_dlyap(A, Q, *, check_stability: bool = True,
                tol: float = LYAP_TOL, max_doublings: int = LYAP_MAX_DOUBLINGS) -> np.ndarray:
    """Solve ``P = A P A^T + Q`` by squared Smith doubling.

    Each step adds ``A_k P_k A_k^T`` and squares ``A_k``, so after ``k`` steps
    the partial sum covers ``2^k`` terms of ``sum_j A^j Q (A^T)^j``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if check_stability:
        rho = float(np.max(np.abs(np.linalg.eigvals(A))))
        if rho >= 1.0 - STABILITY_MARGIN:
            raise NonStationaryError(
                f"Lyapunov: unstable transition matrix (spectral radius {rho:.12f})"
            )
    P, it = _smith_doubling(A, Q, tol, max_doublings)
    P = 0.5 * (P + P.T)
    qnorm = max(np.linalg.norm(Q), np.finfo(float).tiny)
    R = Q + A @ P @ A.T - P
    res = np.linalg.norm(R) / qnorm
    # one correction solve: near the unit circle |P| >> |Q| and the doubling
    # sum carries rounding error of order eps |P|
    if res > 1e-13:
        dP, _ = _smith_doubling(A, R, tol, max_doublings)
        P2 = P + 0.5 * (dP + dP.T)
        res2 = np.linalg.norm(P2 - A @ P2 @ A.T - Q) / qnorm
        if res2 < res:
            P, res = P2, res2
    _record(SolverRecord("dlyap", n, float(res), it), LYAP_RESIDUAL_LIMIT)
    return P


def process_variance(ss: InnovationsSS, *, check_stability: bool = True) -> float:
    """Stationary variance ``C Omega C^T + sigma2_e`` of an innovations model."""
    if ss.dim == 0:
        return ss.sigma2_e
    Omega = solve_dlyap(ss.B, ss.sigma2_e * np.outer(ss.K, ss.K),
                        check_stability=check_stability)
    return float(ss.C @ Omega @ ss.C + ss.sigma2_e)


class StorageTerms(NamedTuple):
    S: float
    H: float
    C: float


def storage(sigma2_x: float, sigma2_e: float) -> float:
    """Information storage ``0.5 ln(sigma2_x / sigma2_e)`` in nats."""
    if not sigma2_e > 0:
        raise NumericalError(f"degenerate innovation variance {sigma2_e}")
    return 0.5 * float(np.log(sigma2_x / sigma2_e))


def storage_terms(sigma2_x: float, sigma2_e: float) -> StorageTerms:
    """Storage together with the Gaussian entropy ``H_X`` and entropy rate ``C_X``."""
    s = storage(sigma2_x, sigma2_e)
    h = 0.5 * float(np.log(2 * np.pi * np.e * sigma2_x))
    c = 0.5 * float(np.log(2 * np.pi * np.e * sigma2_e))
    return StorageTerms(s, h, c)


# --------------------------------------------------------------------------
# rescaling: FIR filtering and downsampling

def design_fir_lowpass(r: int = DEFAULT_R, cutoff: float = 0.25) -> FirFilter:
    """Hamming-windowed sinc lowpass of even order ``r`` with unit DC gain.

    ``cutoff`` is in cycles/sample. Taps that fall exactly on a zero of the
    sinc at either end are removed; they only delay the output. ``cutoff=0.5``
    gives the identity filter.
    """
    r = int(r)
    if r < 0 or r % 2:
        raise ValueError("linear-phase design requires even order")
    if not 0.0 < cutoff <= 0.5:
        raise ValueError(f"cutoff must lie in (0, 0.5], got {cutoff}")
    if cutoff == 0.5 or r == 0:
        return FirFilter(np.array([1.0]), cutoff)
    k = np.arange(r + 1) - r // 2
    arg = 2.0 * cutoff * k
    h = 2.0 * cutoff * np.sinc(arg) * np.hamming(r + 1)
    # sin(pi * n) is not exactly zero in floating point
    h[(k != 0) & np.isclose(arg, np.round(arg), rtol=0.0, atol=1e-12)] = 0.0
    h /= h.sum()
    nz = np.flatnonzero(h)
    return FirFilter(h[nz[0]: nz[-1] + 1], cutoff)


def _companion_ar(ss: InnovationsSS) -> np.ndarray:
    """Return ``b`` if ``ss`` is the companion form of an AR polynomial."""
    m = ss.dim
    if m == 0:
        return np.zeros(0)
    expected = np.zeros((m, m))
    expected[0] = ss.C
    expected[np.arange(1, m), np.arange(m - 1)] = 1.0
    e1 = np.zeros(m)
    e1[0] = 1.0
    if not (np.array_equal(ss.B, expected) and np.array_equal(ss.K, e1)):
        raise ValueError("FIR filtering requires an AR model in companion form")
    return np.array(ss.C)


def apply_fir_to_ss(ss: InnovationsSS, filt: FirFilter) -> InnovationsSS:
    """Innovations-form model of ``D(L) X_n`` for an AR(m) model ``ss``.

    The state is ``[X^(r)_{n-1}..X^(r)_{n-m}, E_{n-1}..E_{n-r}]`` and the new
    innovation is ``D_0 E_n``.
    """
    b = _companion_ar(ss)
    d = filt.taps
    if d[0] == 0.0:
        raise ValueError("filter leading tap zero after stripping")
    if d.size == 1 and d[0] == 1.0:
        return ss
    m, r = b.size, d.size - 1
    n = m + r
    C = np.concatenate((b, d[1:]))
    B = np.zeros((n, n))
    if m:
        B[0] = C
    B[np.arange(1, m), np.arange(m - 1)] = 1.0
    B[np.arange(m + 1, n), np.arange(m, n - 1)] = 1.0
    K = np.zeros(n)
    if m:
        K[0] = 1.0
    if r:
        K[m] = 1.0 / d[0]
    return InnovationsSS(B, C, K, d[0] ** 2 * ss.sigma2_e)


def _power_and_gramian(B: np.ndarray, Q: np.ndarray, tau: int) -> tuple[np.ndarray, np.ndarray]:
    """``B^tau`` and ``sum_{j<tau} B^j Q (B^T)^j`` by binary splitting."""
    if tau == 1:
        return B.copy(), Q.copy()
    if tau % 2 == 0:
        P, S = _power_and_gramian(B, Q, tau // 2)
        return P @ P, S + P @ S @ P.T
    P, S = _power_and_gramian(B, Q, tau - 1)
    return B @ P, B @ S @ B.T + Q


def downsample_ss(ss: InnovationsSS, tau: int) -> GeneralSS:
    """Model of ``X^(tau)_n = X_{n tau}`` with correlated state/observation noise."""
    tau = int(tau)
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    n = ss.dim
    s2 = ss.sigma2_e
    if n == 0:
        return GeneralSS(np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0)), s2, np.zeros(0))
    Q = s2 * np.outer(ss.K, ss.K)
    Btau, SigmaW = _power_and_gramian(ss.B, Q, tau)
    Bprev = np.linalg.matrix_power(ss.B, tau - 1)
    SigmaVW = Bprev @ ss.K * s2
    return GeneralSS(Btau, ss.C, 0.5 * (SigmaW + SigmaW.T), s2, SigmaVW)


def _riccati_map(gss: GeneralSS, P: np.ndarray) -> np.ndarray:
    A, C = gss.B, gss.C
    g = A @ P @ C + gss.SigmaVW
    return A @ P @ A.T + gss.SigmaW - np.outer(g, g) / (C @ P @ C + gss.sigmaV)


def dare_residual(gss: GeneralSS, P: np.ndarray) -> float:
    """Relative residual of the filtering DARE at ``P``."""
    if gss.dim == 0:
        return 0.0
    denom = max(np.linalg.norm(P), np.linalg.norm(gss.SigmaW), np.finfo(float).tiny)
    return float(np.linalg.norm(P - _riccati_map(gss, P)) / denom)


def _dare_doubling(gss: GeneralSS, tol: float, max_doublings: int) -> tuple[np.ndarray, int]:
    # remove the noise cross-covariance, then run the structure-preserving
    # doubling recursion on the dual (control-form) equation
    A, C, R, S = gss.B, gss.C, gss.sigmaV, gss.SigmaVW
    n = gss.dim
    Ak = (A - np.outer(S, C) / R).T
    Gk = np.outer(C, C) / R
    Hk = gss.SigmaW - np.outer(S, S) / R
    Hk = 0.5 * (Hk + Hk.T)
    eye = np.eye(n)
    for it in range(1, max_doublings + 1):
        W = eye + Gk @ Hk
        WA = np.linalg.solve(W, Ak)
        WG = np.linalg.solve(W, Gk)
        H_new = Hk + Ak.T @ Hk @ WA
        Gk = Gk + Ak @ WG @ Ak.T
        Ak = Ak @ WA
        H_new = 0.5 * (H_new + H_new.T)
        Gk = 0.5 * (Gk + Gk.T)
        delta = np.linalg.norm(H_new - Hk)
        Hk = H_new
        if not np.all(np.isfinite(Hk)):
            break
        if delta <= tol * max(np.linalg.norm(Hk), np.finfo(float).tiny):
            return _dare_polish(gss, Hk), it
    raise ConvergenceError(f"DARE: no convergence after {max_doublings} doublings")


def _dare_polish(gss: GeneralSS, P: np.ndarray, max_steps: int = 4) -> np.ndarray:
    # doubling accumulates ~1e-8 relative rounding error; Newton steps
    # (closed-loop Lyapunov solves) remove it, keeping the best iterate
    best, best_res = P, dare_residual(gss, P)
    for _ in range(max_steps):
        if best_res <= 1e-14:
            break
        A, C = gss.B, gss.C
        g = A @ P @ C + gss.SigmaVW
        Ac = A - np.outer(g / (C @ P @ C + gss.sigmaV), C)
        try:
            X, _ = _smith_doubling(Ac, _riccati_map(gss, P) - P, LYAP_TOL, LYAP_MAX_DOUBLINGS)
        except NumericalError:
            break
        P = P + 0.5 * (X + X.T)
        res = dare_residual(gss, P)
        if not res < best_res:
            break
        best, best_res = P, res
    return best


def _dare_iteration(gss: GeneralSS, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    P = gss.SigmaW.copy()
    warned = False
    for it in range(1, max_iter + 1):
        P_new = _riccati_map(gss, P)
        P_new = 0.5 * (P_new + P_new.T)
        delta = np.linalg.norm(P_new - P)
        P = P_new
        if delta <= tol * max(np.linalg.norm(P), np.finfo(float).tiny):
            return P, it
        if it == DARE_WARN_ITER and not warned:
            warned = True
            warnings.warn(
                f"DARE: fixed-point iteration needs more than {DARE_WARN_ITER} steps "
                "(poles close to the unit circle)",
                RuntimeWarning,
                stacklevel=3,
            )
    raise ConvergenceError(f"DARE: no convergence after {max_iter} iterations")


def solve_dare(gss: GeneralSS, *, method: str = "doubling", tol: float = DARE_TOL,
               max_iter: int | None = None) -> np.ndarray:
    """Stabilising solution of the filtering Riccati equation

    ``P = B P B^T + SigmaW - (B P C^T + SigmaVW)(C P C^T + sigmaV)^-1 (.)^T``.

    ``method="doubling"`` (default) evaluates the Riccati recursion ``2^k``
    steps at a time; ``method="iteration"`` runs the plain fixed-point
    recursion from ``P = SigmaW``. Both converge to the same solution.
    """
    n = gss.dim
    if n == 0:
        return np.zeros((0, 0))
    if method == "doubling":
        P, it = _dare_doubling(gss, tol, max_iter or DARE_MAX_DOUBLINGS)
    elif method == "iteration":
        P, it = _dare_iteration(gss, tol, max_iter or DARE_MAX_ITER)
    else:
        raise ValueError(f"unknown DARE method {method!r}")
    if not np.all(np.isfinite(P)) or float(gss.C @ P @ gss.C) + gss.sigmaV <= 0:
        raise NumericalError("DARE: invalid solution")
    _record(SolverRecord(f"dare-{method}", n, dare_residual(gss, P), it), DARE_RESIDUAL_LIMIT)
    return P


def to_innovations_form(gss: GeneralSS, *, gain_divisor: str = "innovation",
                        method: str = "doubling") -> InnovationsSS:
    """Convert a correlated-noise model into innovations form.

    The innovation variance is ``C P C^T + sigmaV``; the gain is
    ``(B P C^T + SigmaVW)`` divided by that variance. ``gain_divisor="observation"``
    divides by ``sigmaV`` instead, which is only correct when ``C P C^T = 0``
    and is kept for comparison.
    """
    if gain_divisor not in ("innovation", "observation"):
        raise ValueError(f"gain_divisor must be 'innovation' or 'observation', got {gain_divisor!r}")
    if gss.dim == 0:
        return InnovationsSS(np.zeros((0, 0)), np.zeros(0), np.zeros(0), gss.sigmaV)
    P = solve_dare(gss, method=method)
    s2 = float(gss.C @ P @ gss.C) + gss.sigmaV
    if not s2 > 0:
        raise NumericalError("DARE: invalid solution (non-positive innovation variance)")
    divisor = gss.sigmaV if gain_divisor == "observation" else s2
    K = (gss.B @ P @ gss.C + gss.SigmaVW) / divisor
    return InnovationsSS(gss.B, gss.C, K, s2)


# --------------------------------------------------------------------------
# orchestration

def scale_cutoff(tau: int) -> float:
    return 1.0 / (2.0 * tau)


def rescaled_model(ar_ss: InnovationsSS, tau: int, r: int = DEFAULT_R, *,
                   design: Callable[[int, float], FirFilter] = design_fir_lowpass,
                   gain_divisor: str = "innovation",
                   dare_method: str = "doubling") -> InnovationsSS:
    """Innovations-form model of ``ar_ss`` filtered at ``1/(2 tau)`` and downsampled."""
    filt = design(r, scale_cutoff(tau)) if tau > 1 else design(r, 0.5)
    filtered = apply_fir_to_ss(ar_ss, filt)
    gss = downsample_ss(filtered, tau)
    return to_innovations_form(gss, gain_divisor=gain_divisor, method=dare_method)


def _scale_entry(ar_ss, tau, r, design, gain_divisor, dare_method) -> ScaleEntry:
    try:
        ss_tau = rescaled_model(ar_ss, tau, r, design=design,
                                gain_divisor=gain_divisor, dare_method=dare_method)
        # B^(tau) is a power of a matrix already known to be stable
        sx = process_variance(ss_tau, check_stability=False)
        s = storage(sx, ss_tau.sigma2_e)
    except (NumericalError, ValueError) as exc:
        exc.args = (f"tau={tau}: {exc}",) + exc.args[1:]
        exc.tau = tau
        raise
    return ScaleEntry(int(tau), scale_cutoff(tau), s, sx, ss_tau.sigma2_e)


def multiscale_storage(model: ArfiModel, q: int = DEFAULT_Q, r: int = DEFAULT_R,
                       taus: Iterable[int] = range(1, 51), *,
                       design: Callable[[int, float], FirFilter] = design_fir_lowpass,
                       gain_divisor: str = "innovation",
                       dare_method: str = "doubling",
                       max_workers: int | None = None) -> MultiscaleProfile:
    """Information storage of an ARFI process at each scale in ``taus``.

    The ARFI model is truncated to AR(p + q), put in state-space form and, for
    every ``tau``, filtered by the lowpass ``design(r, 1/(2 tau))``,
    downsampled by ``tau`` and converted back to innovations form. ``tau = 1``
    uses the identity filter. ``q = 0`` ignores ``d`` (pure AR model).

    Scales are independent; ``max_workers > 1`` evaluates them on a thread
    pool with results identical to the sequential run.
    """
    taus = [int(t) for t in taus]
    if not taus:
        raise ValueError("taus must be non-empty")
    if any(t < 1 for t in taus):
        raise ValueError("every tau must be >= 1")
    poly = arfi_to_ar(model, q)
    ar_ss = ar_to_ss(poly, model.sigma2_e)

    def one(tau):
        return _scale_entry(ar_ss, tau, r, design, gain_divisor, dare_method)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            entries = tuple(pool.map(one, taus))
    else:
        entries = tuple(one(t) for t in taus)
    return MultiscaleProfile(entries)


def storage_profile_from_poly(poly: ArPolynomial, sigma2_e: float, r: int = DEFAULT_R,
                              taus: Sequence[int] = range(1, 51), **kwargs) -> MultiscaleProfile:
    """Like :func:`multiscale_storage` for an already truncated AR polynomial."""
    ar_ss = ar_to_ss(poly, sigma2_e)
    design = kwargs.pop("design", design_fir_lowpass)
    divisor = kwargs.pop("gain_divisor", "innovation")
    method = kwargs.pop("dare_method", "doubling")
    if kwargs:
        raise TypeError(f"unexpected arguments {sorted(kwargs)}")
    return MultiscaleProfile(tuple(_scale_entry(ar_ss, int(t), r, design, divisor, method)
                                   for t in taus))
