"""Density-normalized histograms over one repetition period."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BinningError
from .simkit import Frame, TimestampSet


def num_bins(t_r: float, bin_width: float) -> int:
    n = t_r / bin_width
    if not bin_width > 0 or abs(n - round(n)) > 1e-9 * max(n, 1.0) or round(n) < 1:
        raise BinningError(f"bin width {bin_width} does not divide t_r = {t_r}")
    return int(round(n))


@dataclass(frozen=True)
class Histogram:
    t_r: float
    bin_width: float
    densities: np.ndarray
    sample_count: int

    def __post_init__(self):
        d = np.array(self.densities, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "densities", d)
        if d.size != num_bins(self.t_r, self.bin_width):
            raise BinningError(f"{d.size} densities for {num_bins(self.t_r, self.bin_width)} bins")
        if np.any(d < 0):
            raise BinningError("negative density")

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.densities.size) + 0.5) * self.bin_width

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.densities.size + 1) * self.bin_width

    def integral(self) -> float:
        return float(self.densities.sum() * self.bin_width)


def build_histogram(timestamps: TimestampSet, bin_width: float) -> Histogram:
    """Bin i holds [i*w, (i+1)*w); values equal to t_r go to the last bin."""
    if timestamps.frame is not Frame.RELATIVE:
        raise BinningError("histograms are built from relative timestamps")
    t_r = timestamps.cycle_length
    nb = num_bins(t_r, bin_width)
    y = timestamps.values
    n = y.size
    if n == 0:
        return Histogram(t_r, bin_width, np.zeros(nb), 0)
    idx = np.clip(np.floor(y / bin_width).astype(np.int64), 0, nb - 1)
    counts = np.bincount(idx, minlength=nb)
    return Histogram(t_r, bin_width, counts / (n * bin_width), n)


def average_histograms(histograms: list[Histogram]) -> Histogram:
    """Per-bin mean of densities; each input counts equally regardless of its sample size."""
    if not histograms:
        raise BinningError("nothing to average")
    first = histograms[0]
    for h in histograms[1:]:
        if h.t_r != first.t_r or h.bin_width != first.bin_width:
            raise BinningError("histograms differ in t_r or bin width")
    dens = np.mean(np.stack([h.densities for h in histograms]), axis=0)
    return Histogram(first.t_r, first.bin_width, dens, sum(h.sample_count for h in histograms))


def write_histogram(hist: Histogram, path, header: dict | None = None) -> None:
    lines = [
        f"# t_r = {hist.t_r!r}",
        f"# bin_width = {hist.bin_width!r}",
        f"# sample_count = {hist.sample_count}",
    ]
    lines += [f"# {k} = {v}" for k, v in (header or {}).items()]
    lines += [repr(float(d)) for d in hist.densities]
    Path(path).write_text("\n".join(lines) + "\n")


def read_histogram(path) -> Histogram:
    meta = {}
    dens = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
            continue
        try:
            dens.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    try:
        return Histogram(float(meta["t_r"]), float(meta["bin_width"]), np.array(dens),
                         int(meta["sample_count"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing header field {exc}") from None
