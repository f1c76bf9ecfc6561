"""
Gaussian-uniform mixture density on one repetition period.

    f(y) = sum_m w_m N(y; mu_m, s_m) + w_0 U(y; 0, t_r)

The Gaussians are not truncated to [0, t_r); a GMM is the w_0 = 0 case.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .simkit import Frame, TimestampSet, fold

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class GummParams:
    t_r: float
    pi0: float
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        for name in ("weights", "means", "stds"):
            a = np.array(getattr(self, name), dtype=np.float64).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "pi0", float(self.pi0))
        w, mu, s = self.weights, self.means, self.stds
        if not (w.size == mu.size == s.size):
            raise ValueError("weights, means and stds must have equal length")
        if self.pi0 < 0 or np.any(w < 0):
            raise ValueError("mixture weights must be non-negative")
        if abs(self.pi0 + w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {self.pi0 + w.sum()!r}, not 1")
        if np.any(~(s > 0)):
            raise ValueError("component stds must be positive")
        if w.size == 0 and self.pi0 < 1:
            raise ValueError("need at least one Gaussian when pi0 < 1")
        if not self.t_r > 0:
            raise ValueError("t_r must be positive")

    @classmethod
    def from_components(cls, t_r, pi0, components) -> GummParams:
        comps = np.asarray(components, dtype=np.float64).reshape(-1, 3)
        return cls(t_r, pi0, comps[:, 0], comps[:, 1], comps[:, 2])

    @property
    def M(self) -> int:
        return self.weights.size

    @property
    def components(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.weights, self.means, self.stds)]

    def to_dict(self) -> dict:
        return {"t_r": self.t_r, "pi0": self.pi0, "components": [list(c) for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> GummParams:
        return cls.from_components(float(d["t_r"]), float(d["pi0"]), d["components"])


def component_log_joint(params: GummParams, y: np.ndarray) -> np.ndarray:
    """log(w_l * density_l(y)) for every label l = 0..M, shape (len(y), M+1).

    Label 0 is the uniform component; -inf where a weight is zero or y is
    outside [0, t_r) for the uniform.
    """
    y = np.asarray(y, dtype=np.float64)
    # label-major storage keeps the per-point reductions contiguous
    out = np.empty((params.M + 1, y.size))
    with np.errstate(divide="ignore"):
        log_u = math.log(params.pi0) - math.log(params.t_r) if params.pi0 > 0 else -np.inf
        out[0] = np.where((y >= 0) & (y < params.t_r), log_u, -np.inf)
        for m in range(params.M):
            z = (y - params.means[m]) / params.stds[m]
            out[m + 1] = (math.log(params.weights[m]) if params.weights[m] > 0 else -np.inf) \
                - math.log(params.stds[m]) - LOG_SQRT_2PI - 0.5 * z * z
    return out.T


def log_pdf(params: GummParams, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    return logsumexp(component_log_joint(params, y), axis=1)


def pdf(params: GummParams, y):
    """Mixture density at y (scalar or array)."""
    scalar = np.ndim(y) == 0
    with np.errstate(under="ignore"):
        out = np.exp(log_pdf(params, y))
    return float(out[0]) if scalar else out


def log_likelihood(params: GummParams, data: TimestampSet | np.ndarray) -> float:
    """Sum of log densities; ``-inf`` if any point has zero density."""
    y = data.values if isinstance(data, TimestampSet) else np.asarray(data, dtype=np.float64)
    if y.size and (y.min() < 0 or y.max() >= params.t_r):
        raise DomainError("data outside [0, t_r)")
    lp = log_pdf(params, y)
    if np.any(np.isneginf(lp)):
        return -math.inf
    return float(np.sum(lp))


def sample(params: GummParams, n: int, rng) -> TimestampSet:
    """Ancestral sampling; Gaussian draws are wrapped into [0, t_r)."""
    rng = np.random.default_rng(rng)
    probs = np.concatenate([[params.pi0], params.weights])
    labels = rng.choice(probs.size, size=n, p=probs / probs.sum())
    y = rng.random(n) * params.t_r
    g = labels > 0
    idx = labels[g] - 1
    y[g] = rng.normal(params.means[idx], params.stds[idx])
    return TimestampSet(np.sort(fold(y, params.t_r)), Frame.RELATIVE, params.t_r)


def write_params(params: GummParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def read_params(path) -> GummParams:
    return GummParams.from_dict(json.loads(Path(path).read_text()))
