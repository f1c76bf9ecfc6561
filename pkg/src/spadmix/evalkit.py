"""
Histogram-matching evaluation and the four benchmark scenarios.

A scenario run simulates ``num_replications`` independent acquisitions,
averages their density histograms into a reference PDF, pools every
registration timestamp as EM input, fits, and scores the fit by the mean
squared difference between model density and reference at the bin centers.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import emfit
from .histkit import Histogram, average_histograms, build_histogram
from .mixture import GummParams
from .padding import PaddingPlan, select_offset, unwrap_pdf, wrap_shift
from .simkit import Frame, ScenarioConfig, TimestampSet, simulate_replication

# (signal S, noise B, cycle length t_r); dead time, pulse and K stay at the defaults
SCENARIOS = {
    "single_pulse": ScenarioConfig(signal_level=3.16, noise_level=0.1, cycle_length=8.0),
    "high_noise": ScenarioConfig(signal_level=3.16, noise_level=3.16, cycle_length=8.0),
    "bump": ScenarioConfig(signal_level=3.16, noise_level=0.1, cycle_length=10.0),
    "bump_noise": ScenarioConfig(signal_level=3.16, noise_level=3.16, cycle_length=10.0),
}

# the table cells of the reference experiments: (scenario, model, padded, Ms)
TABLE1 = [("single_pulse", "gmm", False, (2, 3)), ("high_noise", "gumm", False, (2, 3))]
TABLE2 = [
    ("bump", "gmm", False, (4, 5, 6)),
    ("bump", "gmm", True, (4, 5, 6)),
    ("bump_noise", "gumm", False, (4, 5, 6)),
    ("bump_noise", "gumm", True, (4, 5, 6)),
]


def scenario_config(name: str, seed: int | None = None, **overrides) -> ScenarioConfig:
    try:
        cfg = SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None
    if seed is not None:
        overrides["rng_seed"] = seed
    return cfg.replace(**overrides) if overrides else cfg


def mse(params: GummParams, plan: PaddingPlan | None, hist: Histogram) -> float:
    """Mean squared difference between model density and histogram density at bin centers."""
    if plan is not None and plan.t_r != hist.t_r:
        raise ValueError("padding plan and histogram disagree on t_r")
    if params.t_r != hist.t_r:
        raise ValueError("model and histogram disagree on t_r")
    model = unwrap_pdf(params, plan, hist.centers)
    return float(np.mean((model - hist.densities) ** 2))


@dataclass(frozen=True)
class Simulation:
    config: ScenarioConfig
    relative: list[TimestampSet]
    histograms: list[Histogram]
    average: Histogram

    @property
    def pooled(self) -> TimestampSet:
        vals = np.sort(np.concatenate([ts.values for ts in self.relative]))
        return TimestampSet(vals, Frame.RELATIVE, self.config.cycle_length)


def _one_replication(args) -> TimestampSet:
    config, r = args
    return simulate_replication(config, r).relative


def simulate(config: ScenarioConfig, threads: int = 1) -> Simulation:
    """Run every replication of ``config``; the worker count never changes results."""
    jobs = [(config, r) for r in range(config.num_replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rel = list(pool.map(_one_replication, jobs))
    else:
        rel = [_one_replication(j) for j in jobs]
    hists = [build_histogram(ts, config.bin_width) for ts in rel]
    return Simulation(config, rel, hists, average_histograms(hists))


@dataclass
class ScenarioReport:
    scenario_name: str
    config: ScenarioConfig
    model_kind: str
    M: int
    padded: bool
    mse: float
    fit: emfit.FitResult
    histogram: Histogram
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "seed": self.config.rng_seed,
            "model": self.model_kind,
            "M": self.M,
            "padded": self.padded,
            "mse": self.mse,
            "fit": self.fit.to_dict(),
            "histogram": {
                "t_r": self.histogram.t_r,
                "bin_width": self.histogram.bin_width,
                "sample_count": self.histogram.sample_count,
                "densities": [float(d) for d in self.histogram.densities],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioReport:
        h = d["histogram"]
        return cls(
            scenario_name=d["scenario"],
            config=ScenarioConfig(**d["config"]),
            model_kind=d["model"],
            M=int(d["M"]),
            padded=bool(d["padded"]),
            mse=float(d["mse"]),
            fit=emfit.FitResult.from_dict(d["fit"]),
            histogram=Histogram(h["t_r"], h["bin_width"], np.array(h["densities"]), h["sample_count"]),
        )


def fit_and_score(
    sim_or_data,
    hist: Histogram,
    model_kind: str,
    M: int,
    padded: bool,
    *,
    max_iters: int | None = None,
    offset: float | None = None,
    restarts: int = 0,
    rng=None,
) -> tuple[emfit.FitResult, float]:
    """Fit pooled timestamps (optionally in a padded frame) and score against ``hist``."""
    data = sim_or_data.pooled if isinstance(sim_or_data, Simulation) else sim_or_data
    if model_kind not in ("gmm", "gumm"):
        raise ValueError(f"model must be 'gmm' or 'gumm', not {model_kind!r}")
    plan = None
    if padded or offset is not None:
        plan = PaddingPlan(offset, hist.t_r) if offset is not None else select_offset(hist)
        data = wrap_shift(data, plan)
    result = emfit.fit(data, M, model_kind == "gumm", max_iters, rng, restarts=restarts)
    result.padding_offset = plan.offset if plan else 0.0
    return result, mse(result.params, plan, hist)


def run_scenario(
    name: str,
    config: ScenarioConfig | None = None,
    model_kind: str = "gmm",
    M: int = 3,
    padded: bool = False,
    *,
    max_iters: int | None = None,
    offset: float | None = None,
    threads: int = 1,
    simulation: Simulation | None = None,
) -> ScenarioReport:
    """Simulate (unless ``simulation`` is given), fit, and score one table cell."""
    t0 = time.perf_counter()
    if config is None:
        config = simulation.config if simulation is not None else scenario_config(name)
    sim = simulation if simulation is not None else simulate(config, threads)
    result, err = fit_and_score(sim, sim.average, model_kind, M, padded,
                                max_iters=max_iters, offset=offset)
    result.provenance = {
        "config_hash": config.config_hash(),
        "seed": config.rng_seed,
        "padding_offset": result.padding_offset,
        "pooled_timestamps": int(sum(len(ts) for ts in sim.relative)),
    }
    return ScenarioReport(name, config, model_kind, M, padded, err, result, sim.average,
                          seconds=time.perf_counter() - t0)


def plot_rows(report: ScenarioReport) -> np.ndarray:
    """Columns: bin center, histogram density, model density."""
    h = report.histogram
    plan = PaddingPlan(report.fit.padding_offset, h.t_r) if report.fit.padding_offset else None
    return np.column_stack([h.centers, h.densities, unwrap_pdf(report.fit.params, plan, h.centers)])


def write_plot_data(report: ScenarioReport, path) -> None:
    rows = plot_rows(report)
    lines = [
        f"# scenario = {report.scenario_name}",
        f"# config_hash = {report.config.config_hash()}",
        f"# seed = {report.config.rng_seed}",
        "# bin_center\thistogram_density\tmodel_density",
    ]
    lines += ["\t".join(repr(float(v)) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_report(report: ScenarioReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def read_report(path) -> ScenarioReport:
    return ScenarioReport.from_dict(json.loads(Path(path).read_text()))


def render_tables(reports: list[ScenarioReport]) -> str:
    """Aligned text tables: one row per (scenario, model, padding), one column per M.

    Repeated cells (e.g. several seeds) are averaged; the count is shown
    in the header.
    """
    cells: dict[tuple, dict[int, list[float]]] = {}
    for r in reports:
        cells.setdefault((r.scenario_name, r.model_kind.upper(), r.padded), {}).setdefault(r.M, []).append(r.mse)
    Ms = sorted({m for row in cells.values() for m in row})
    nrep = max((len(v) for row in cells.values() for v in row.values()), default=0)
    head = ["Scenario", "Model", "Padding"] + [f"M={m}" for m in Ms]
    rows = []
    for (scen, model, pad), byM in cells.items():
        rows.append([scen, model, "yes" if pad else "no"]
                    + [f"{np.mean(byM[m]):.5f}" if m in byM else "-" for m in Ms])
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [f"# MSE (density units), mean over {nrep} run(s) per cell", fmt.format(*head),
           fmt.format(*["-" * w for w in widths])]
    out += [fmt.format(*row) for row in rows]
    return "\n".join(out) + "\n"
