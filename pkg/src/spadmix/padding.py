"""
Periodic padding: re-cut the periodic histogram at a chosen offset so that
boundary structure (pre-pulse bump, noise slope) sits inside the fitting
window, then evaluate the fitted density back in the original frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .histkit import Histogram
from .mixture import GummParams, pdf
from .simkit import Frame, TimestampSet, fold

SMOOTHING_BINS = 5


@dataclass(frozen=True)
class PaddingPlan:
    offset: float
    t_r: float

    def __post_init__(self):
        if not 0 <= self.offset < self.t_r:
            raise ValueError(f"offset {self.offset} outside [0, {self.t_r})")

    @property
    def inverse(self) -> PaddingPlan:
        return PaddingPlan(float(fold(np.array([self.t_r - self.offset]), self.t_r)[0]), self.t_r)


def circular_smooth(values: np.ndarray, window: int = SMOOTHING_BINS) -> np.ndarray:
    """Centered circular moving average over ``window`` bins."""
    half = window // 2
    return sum(np.roll(values, k) for k in range(-half, window - half)) / window


def select_offset(hist: Histogram, window: int = SMOOTHING_BINS) -> PaddingPlan:
    """Cut at the left edge of the bin where the smoothed density is lowest (first on ties)."""
    smooth = circular_smooth(hist.densities, window)
    k = int(np.argmin(smooth))
    return PaddingPlan(k * hist.bin_width, hist.t_r)


def wrap_shift(data: TimestampSet, plan: PaddingPlan) -> TimestampSet:
    """y -> mod(y - offset, t_r)."""
    if data.frame is not Frame.RELATIVE:
        raise ValueError("wrap_shift needs relative timestamps")
    shifted = fold(data.values - plan.offset, plan.t_r)
    return TimestampSet(np.sort(shifted), Frame.RELATIVE, plan.t_r)


def unwrap_pdf(params: GummParams, plan: PaddingPlan | None, y):
    """Density of a model fitted in the shifted frame, at original-frame time y."""
    if plan is None or plan.offset == 0:
        return pdf(params, y)
    scalar = np.ndim(y) == 0
    yy = fold(np.atleast_1d(np.asarray(y, dtype=np.float64)) - plan.offset, plan.t_r)
    out = pdf(params, yy)
    return float(out[0]) if scalar else out
