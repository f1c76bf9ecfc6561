"""
EM for the Gaussian-uniform mixture via expected sufficient statistics.

E-step: responsibilities r_nl, then N_l = sum_n r_nl, t1_m = sum_n y_n r_nm,
t2_m = sum_n y_n^2 r_nm.  M-step: w_l = N_l / N, mu_m = t1_m / N_m,
s_m^2 = t2_m / N_m - (t1_m / N_m)^2.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, EstimationError
from .mixture import GummParams, component_log_joint, log_pdf
from .simkit import TimestampSet

log = logging.getLogger(__name__)

SIGMA_FLOOR = 0.025
EMPTY_FRACTION = 1e-6
CONVERGENCE_TOL = 1e-8


@dataclass(frozen=True)
class SufficientStats:
    counts: np.ndarray  # N_l for l = 0..M (label 0 = uniform)
    first: np.ndarray  # t1_m, m = 1..M
    second: np.ndarray  # t2_m
    n: int
    t_r: float

    @property
    def M(self) -> int:
        return self.first.size


@dataclass
class FitResult:
    params: GummParams
    loglik_trace: list[float]
    iterations_run: int
    padding_offset: float = 0.0
    converged: bool = False
    events: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "iterations_run": self.iterations_run,
            "padding_offset": float(self.padding_offset),
            "converged": self.converged,
            "events": list(self.events),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FitResult:
        return cls(
            params=GummParams.from_dict(d["params"]),
            loglik_trace=list(d["loglik_trace"]),
            iterations_run=int(d["iterations_run"]),
            padding_offset=float(d["padding_offset"]),
            converged=bool(d["converged"]),
            events=list(d.get("events", [])),
            provenance=dict(d.get("provenance", {})),
        )


def _values(data) -> np.ndarray:
    return data.values if isinstance(data, TimestampSet) else np.asarray(data, dtype=np.float64)


def responsibilities(params: GummParams, y) -> tuple[np.ndarray, np.ndarray]:
    """Posterior label probabilities (N, M+1) and per-point log densities."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    lj = component_log_joint(params, y)
    top = lj.max(axis=1)
    if np.any(np.isneginf(top)):
        raise DomainError("point with zero density under every component")
    with np.errstate(under="ignore"):
        e = np.exp(lj - top[:, None])
    total = e.sum(axis=1)
    return e / total[:, None], top + np.log(total)


def posterior(params: GummParams, y: float) -> np.ndarray:
    """Label probabilities [uniform, gaussian_1, ..., gaussian_M] for one timestamp."""
    if not 0 <= y < params.t_r:
        raise DomainError(f"timestamp {y} outside [0, {params.t_r})")
    return responsibilities(params, [y])[0][0]


def _e_step(y: np.ndarray, params: GummParams) -> tuple[SufficientStats, float]:
    r, lp = responsibilities(params, y)
    g = r[:, 1:]
    stats = SufficientStats(
        counts=r.sum(axis=0),
        first=y @ g,
        second=(y * y) @ g,
        n=y.size,
        t_r=params.t_r,
    )
    return stats, float(lp.sum())


def e_step(data, params: GummParams) -> SufficientStats:
    y = _values(data)
    if y.size == 0:
        raise EstimationError("E-step on empty data")
    if y.min() < 0 or y.max() >= params.t_r:
        raise DomainError("data outside [0, t_r)")
    return _e_step(y, params)[0]


def m_step(
    stats: SufficientStats,
    sigma_floor: float = SIGMA_FLOOR,
    *,
    data=None,
    prev: GummParams | None = None,
    events: list | None = None,
) -> GummParams:
    """Closed-form parameter update from expected sufficient statistics.

    Stds are clamped up to ``sigma_floor``.  A component whose expected count
    falls below 1e-6 N is moved to the data point of lowest density under
    ``prev`` when both ``data`` and ``prev`` are given; otherwise it keeps
    weight zero.
    """
    if stats.n <= 0:
        raise EstimationError("M-step with no data")
    N = float(stats.n)
    Nl = stats.counts
    Ng = Nl[1:]
    empty = Ng < EMPTY_FRACTION * N
    if stats.M and np.all(empty) and Nl[0] < EMPTY_FRACTION * N:
        raise EstimationError("every component is empty")
    pi0 = Nl[0] / N
    w = Ng / N
    safe = np.where(empty, 1.0, Ng)
    mu = stats.first / safe
    var = stats.second / safe - mu * mu
    s = np.sqrt(np.maximum(var, sigma_floor**2))
    if events is not None and np.any(var[~empty] < sigma_floor**2):
        events.append("clamp")

    if np.any(empty) and (data is None or prev is None):
        w[empty] = 0.0
        s[empty] = sigma_floor
    elif np.any(empty):
        y = _values(data)
        lp = log_pdf(prev, y)
        for m in np.flatnonzero(empty):
            j = int(np.argmin(lp))
            mu[m] = y[j]
            s[m] = max(stats.t_r / (4 * stats.M), sigma_floor)
            w[m] = 1.0 / N
            lp[j] = np.inf
            log.info("component %d emptied; reinitialized at %.6g", m + 1, y[j])
            if events is not None:
                events.append(f"reinit:{m + 1}")

    total = pi0 + w.sum()
    return GummParams(stats.t_r, pi0 / total, w / total, mu, s)


def init_params(data, M: int, with_uniform: bool, t_r: float | None = None, rng=None) -> GummParams:
    """Quantile initialization: means at the (k + 1/2)/M quantiles, stds t_r/(4M).

    ``rng`` is accepted for restart policies and ignored here.
    """
    if isinstance(data, TimestampSet):
        t_r = data.cycle_length if t_r is None else t_r
    if t_r is None:
        raise ValueError("t_r is required for raw arrays")
    y = _values(data)
    if M < 1:
        raise EstimationError("need at least one Gaussian")
    if y.size < M or np.unique(y).size < M:
        raise EstimationError(f"{M} Gaussians but only {np.unique(y).size} distinct values")
    pi0 = 0.1 if with_uniform else 0.0
    means = np.quantile(y, (np.arange(M) + 0.5) / M)
    return GummParams(t_r, pi0, np.full(M, (1 - pi0) / M), means, np.full(M, t_r / (4 * M)))


def _random_init(y: np.ndarray, M: int, with_uniform: bool, t_r: float, rng) -> GummParams:
    pi0 = 0.1 if with_uniform else 0.0
    means = np.sort(rng.choice(y, size=M, replace=False))
    return GummParams(t_r, pi0, np.full(M, (1 - pi0) / M), means, np.full(M, t_r / (4 * M)))


def default_iters(M: int) -> int:
    return 80 if M >= 4 else 50


def run_em(
    y: np.ndarray,
    params: GummParams,
    max_iters: int,
    sigma_floor: float = SIGMA_FLOOR,
    tol: float | None = CONVERGENCE_TOL,
) -> FitResult:
    """Alternate E and M steps starting from ``params``.

    ``loglik_trace[i]`` is the log-likelihood of the parameters entering
    iteration i.  A uniform weight of exactly zero stays zero.
    """
    trace: list[float] = []
    events: list[str] = []
    converged = False
    for it in range(max_iters):
        stats, ll = _e_step(y, params)
        trace.append(ll)
        step_events: list[str] = []
        params = m_step(stats, sigma_floor, data=y, prev=params, events=step_events)
        events += [f"{it}:{e}" for e in step_events]
        if tol is not None and it > 0 and 0 <= trace[-1] - trace[-2] < tol:
            converged = True
            break
    return FitResult(params, trace, len(trace), converged=converged, events=events)


def fit(
    data,
    M: int,
    with_uniform: bool,
    max_iters: int | None = None,
    rng=None,
    *,
    sigma_floor: float = SIGMA_FLOOR,
    tol: float | None = CONVERGENCE_TOL,
    restarts: int = 0,
    t_r: float | None = None,
) -> FitResult:
    """Fit an M-Gaussian mixture (plus uniform if ``with_uniform``) by EM.

    The default budget is 50 iterations, 80 for M >= 4.  ``restarts`` extra
    runs start from random data points drawn from ``rng``; the run with the
    highest final log-likelihood wins.
    """
    if isinstance(data, TimestampSet):
        t_r = data.cycle_length
    y = _values(data)
    if y.size == 0:
        raise EstimationError("cannot fit empty data")
    if t_r is None:
        raise ValueError("t_r is required for raw arrays")
    if y.min() < 0 or y.max() >= t_r:
        raise DomainError("data outside [0, t_r)")
    if max_iters is None:
        max_iters = default_iters(M)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    best = run_em(y, init_params(y, M, with_uniform, t_r=t_r), max_iters, sigma_floor, tol)
    if restarts:
        rng = np.random.default_rng(rng)
        for _ in range(restarts):
            res = run_em(y, _random_init(y, M, with_uniform, t_r, rng), max_iters, sigma_floor, tol)
            if res.loglik_trace[-1] > best.loglik_trace[-1]:
                best = res
    return best


def is_monotone(trace, slack: float = 1e-8) -> bool:
    t = np.asarray(trace)
    return bool(np.all(np.diff(t) >= -slack))


def write_fit(result: FitResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n")


def read_fit(path) -> FitResult:
    return FitResult.from_dict(json.loads(Path(path).read_text()))


def final_loglik(result: FitResult, data) -> float:
    """Log-likelihood of the returned parameters (one step past the trace)."""
    return float(np.sum(log_pdf(result.params, _values(data))))

