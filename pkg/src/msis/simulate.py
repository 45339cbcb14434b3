"""Seeded ARFI realizations and the finite-sample study harness.

Random streams
--------------
Replicate ``i`` of a run with seed ``s`` draws its innovations from
``numpy.random.default_rng([s, i])`` (a PCG64 generator keyed by the
``SeedSequence`` of the pair) with ``Generator.standard_normal`` (ziggurat
method). Each replicate is therefore reproducible on its own, independent of
how many replicates run or in which order.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .baseline import SampEnConfig, refined_mse_storage
from .errors import NumericalError
from .estimation import FitConfig, Mode, fit
from .fracdiff import DEFAULT_Q, ArfiModel, arfi_to_ar, poles_to_ar
from .statespace import DEFAULT_R, multiscale_storage

ESTIMATORS = ("earfi", "ear", "rmse")


@dataclass(frozen=True)
class SimSpec:
    model: ArfiModel
    n: int
    q: int = DEFAULT_Q
    reps: int = 1
    seed: int = 0
    burnin: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.burnin is None:
            object.__setattr__(self, "burnin", 1000 + self.q)
        if self.burnin < self.q:
            raise ValueError("burnin must be >= q")


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def generate_replicate(spec: SimSpec, index: int) -> np.ndarray:
    """Replicate ``index`` of ``spec``: the truncated AR(p + q) recursion fed with Gaussian noise."""
    poly = arfi_to_ar(spec.model, spec.q)
    if not poly.stable:
        raise NumericalError("truncated AR polynomial is unstable")
    rng = replicate_rng(spec.seed, index)
    e = rng.standard_normal(spec.burnin + spec.n) * math.sqrt(spec.model.sigma2_e)
    x = lfilter([1.0], poly.lag_coefficients(), e)
    return x[spec.burnin:]


def generate_arfi(spec: SimSpec) -> list[np.ndarray]:
    return [generate_replicate(spec, i) for i in range(spec.reps)]


# --------------------------------------------------------------------------
# study harness

@dataclass(frozen=True)
class StudyConfig:
    """Grid of the finite-sample study.

    ``poles`` is a list of pole sets, each a list of ``(rho, f)`` pairs.
    """

    poles: tuple = (((0.8, 0.1),),)
    d: tuple = (0.0, 0.4, 0.7)
    n: tuple = (300,)
    reps: int = 100
    seed: int = 0
    estimators: tuple = ESTIMATORS
    tau_max: int = 50
    q: int = DEFAULT_Q
    r: int = DEFAULT_R
    pmin: int = 2
    pmax: int = 16
    sigma2: float = 1.0
    burnin: int | None = None
    sampen_m: int = 2
    sampen_r: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "poles", tuple(tuple((float(r), float(f)) for r, f in ps)
                                                for ps in self.poles))
        object.__setattr__(self, "d", tuple(float(v) for v in self.d))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "estimators", tuple(str(e).lower() for e in self.estimators))
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ValueError(f"estimators: unknown {bad}; expected a subset of {list(ESTIMATORS)}")
        if not self.poles or not self.d or not self.n or not self.estimators:
            raise ValueError("poles, d, n and estimators must be non-empty")
        if self.reps < 1 or self.tau_max < 1:
            raise ValueError("reps and tau_max must be >= 1")

    @property
    def taus(self) -> np.ndarray:
        return np.arange(1, self.tau_max + 1)


@dataclass
class StudyCell:
    poles: tuple
    d: float
    n: int
    estimator: str
    tau: np.ndarray
    theory: np.ndarray
    samples: np.ndarray  # reps x taus, nan where the estimate failed
    errors: list[str] = field(default_factory=list)

    @property
    def f_tau(self) -> np.ndarray:
        return 1.0 / (2.0 * self.tau)

    def _pct(self, q):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanpercentile(self.samples, q, axis=0)

    @property
    def median(self) -> np.ndarray:
        return self._pct(50)

    @property
    def p10(self) -> np.ndarray:
        return self._pct(10)

    @property
    def p90(self) -> np.ndarray:
        return self._pct(90)

    @property
    def missing_fraction(self) -> np.ndarray:
        return np.mean(np.isnan(self.samples), axis=0)

    def table(self) -> dict[str, np.ndarray]:
        return {
            "tau": self.tau,
            "f_tau": self.f_tau,
            "theory": self.theory,
            "median": self.median,
            "p10": self.p10,
            "p90": self.p90,
            "missing_fraction": self.missing_fraction,
        }


def _profile_for(model: ArfiModel, q: int, r: int, taus) -> np.ndarray:
    # d = 0 needs no fractional part; skipping the q zero lags is exact
    return multiscale_storage(model, q if model.d != 0.0 else 0, r, taus).S


def estimate_profile(series, estimator: str, cfg: StudyConfig) -> np.ndarray:
    """Storage profile of one series by one estimator; ``nan`` where it fails."""
    taus = cfg.taus
    if estimator == "rmse":
        return refined_mse_storage(series, taus, SampEnConfig(cfg.sampen_m, cfg.sampen_r)).S
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit(series, FitConfig(Mode.parse(estimator), cfg.q, cfg.pmin, cfg.pmax))
        return _profile_for(res.model, cfg.q, cfg.r, taus)


def _replicate_rows(args) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    spec, index, cfg = args
    x = generate_replicate(spec, index)
    rows, errs = {}, {}
    for est in cfg.estimators:
        try:
            rows[est] = estimate_profile(x, est, cfg)
        except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
            rows[est] = np.full(cfg.tau_max, np.nan)
            errs[est] = f"rep {index}: {exc}"
    return rows, errs


def run_cell(cfg: StudyConfig, poles, d: float, n: int, *, max_workers: int | None = None) -> list[StudyCell]:
    """All estimators for one (pole set, d, N) grid point."""
    a = poles_to_ar(poles).b
    model = ArfiModel(a, d, cfg.sigma2)
    theory = _profile_for(model, cfg.q, cfg.r, cfg.taus)
    spec = SimSpec(model, n, cfg.q, cfg.reps, cfg.seed, cfg.burnin)
    jobs = [(spec, i, cfg) for i in range(cfg.reps)]
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_replicate_rows, jobs))
    else:
        results = [_replicate_rows(j) for j in jobs]
    cells = []
    for est in cfg.estimators:
        samples = np.vstack([rows[est] for rows, _ in results])
        errors = [errs[est] for _, errs in results if est in errs]
        cells.append(StudyCell(tuple(poles), d, n, est, cfg.taus, theory, samples, errors))
    return cells


def run_study(cfg: StudyConfig, *, max_workers: int | None = None) -> list[StudyCell]:
    """Run every grid cell; replicate failures become ``nan`` rows, not aborts."""
    cells: list[StudyCell] = []
    for poles in cfg.poles:
        for d in cfg.d:
            for n in cfg.n:
                cells.extend(run_cell(cfg, poles, d, n, max_workers=max_workers))
    return cells


def cell_name(cell: StudyCell, pole_index: int) -> str:
    return f"poles{pole_index}_d{cell.d:g}_n{cell.n}_{cell.estimator}"


def parse_poles(text: str) -> list[tuple[float, float]]:
    """``"0.8:0.1,0.8:0.3"`` -> ``[(0.8, 0.1), (0.8, 0.3)]``."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            rho, f = item.split(":")
            out.append((float(rho), float(f)))
        except ValueError:
            raise ValueError(f"bad pole {item!r}; expected 'rho:f'") from None
    if not out:
        raise ValueError("empty pole list")
    return out

