"""
Command-line front end.

    spadmix simulate --scenario single_pulse --seed 1 --out runs/sp
    spadmix fit runs/sp --gaussians 3 --model gmm --out runs/sp
    spadmix eval --fit runs/sp/fit.json --histogram runs/sp/histogram_avg.txt --out runs/sp
    spadmix report runs/*/report.json --out runs
    spadmix report --scenario all --seed 0 1 2 3 4 --out tables
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import emfit, evalkit
from .errors import BinningError
from .histkit import build_histogram, read_histogram, write_histogram
from .padding import PaddingPlan
from .simkit import (
    Frame,
    ScenarioConfig,
    TimestampSet,
    coerce_overrides,
    read_config,
    read_timestamp_meta,
    read_timestamps,
    write_config,
    write_timestamps,
)

log = logging.getLogger("spadmix")


def _parse_overrides(items: list[str]) -> dict:
    pairs = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not key=value")
        pairs[key.strip()] = val.strip()
    return coerce_overrides(pairs)


def _load_config(args) -> ScenarioConfig:
    if args.config and args.scenario:
        raise ValueError("give --config or --scenario, not both")
    if args.config:
        cfg = read_config(args.config)
    elif args.scenario:
        cfg = evalkit.scenario_config(args.scenario)
    else:
        cfg = ScenarioConfig()
    over = _parse_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        seed = args.seed[0] if isinstance(args.seed, list) else args.seed
        over["rng_seed"] = seed
    return cfg.replace(**over) if over else cfg


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> None:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = evalkit.simulate(cfg, args.threads)
    stamp = {"config_hash": cfg.config_hash(), "seed": cfg.rng_seed}
    ext = "bin" if args.format == "binary" else "txt"
    files = []
    for r, (ts, h) in enumerate(zip(sim.relative, sim.histograms)):
        name = f"timestamps_rep{r:02d}.{ext}"
        write_timestamps(ts, out / name, args.format, header={**stamp, "replication": r})
        write_histogram(h, out / f"histogram_rep{r:02d}.txt", header={**stamp, "replication": r})
        files.append(name)
    write_histogram(sim.average, out / "histogram_avg.txt", header=stamp)
    write_config(cfg, out / "config.cfg")
    _dump_json({**stamp, "config": cfg.to_dict(), "scenario": args.scenario,
                "format": args.format, "timestamp_files": files,
                "registrations": [len(ts) for ts in sim.relative]}, out / "manifest.json")
    print(f"wrote {len(files)} replications to {out} ({sum(map(len, sim.relative))} registrations)")


def _collect_inputs(paths: list[str]):
    """Expand directories from ``simulate`` into their timestamp files, manifest and histogram."""
    files, manifest, hist_path = [], None, None
    for p in map(Path, paths):
        if p.is_dir():
            if (p / "manifest.json").exists():
                manifest = json.loads((p / "manifest.json").read_text())
                files += [p / f for f in manifest["timestamp_files"]]
            else:
                files += sorted(p.glob("timestamps_*.txt")) + sorted(p.glob("timestamps_*.bin"))
            if (p / "histogram_avg.txt").exists():
                hist_path = p / "histogram_avg.txt"
        else:
            files.append(p)
    if not files:
        raise ValueError("no timestamp files found")
    return files, manifest, hist_path


def _pool(files, t_r_hint) -> TimestampSet:
    sets = [read_timestamps(f, t_r_hint) for f in files]
    t_rs = {ts.cycle_length for ts in sets}
    if None in t_rs:
        raise ValueError("binary timestamp files need --cycle-length or a manifest")
    if len(t_rs) != 1:
        raise ValueError(f"timestamp files disagree on cycle length: {sorted(t_rs)}")
    for f, ts in zip(files, sets):
        if ts.frame is not Frame.RELATIVE:
            raise ValueError(f"{f}: expected relative timestamps")
    vals = np.sort(np.concatenate([ts.values for ts in sets]))
    return TimestampSet(vals, Frame.RELATIVE, t_rs.pop())


def cmd_fit(args) -> None:
    files, manifest, hist_path = _collect_inputs(args.inputs)
    if args.histogram:
        hist_path = Path(args.histogram)
    t_r = args.cycle_length or (manifest["config"]["cycle_length"] if manifest else None)
    data = _pool(files, t_r)
    prov = {"inputs": [str(f) for f in files], "pooled_timestamps": len(data)}
    if manifest:
        prov.update(config_hash=manifest["config_hash"], seed=manifest["seed"])
    elif files[0].suffix == ".txt":
        meta = read_timestamp_meta(files[0])
        prov.update({k: meta[k] for k in ("config_hash", "seed") if k in meta})

    if hist_path is not None:
        hist = read_histogram(hist_path)
    else:
        bw = manifest["config"]["bin_width"] if manifest else 0.05
        hist = build_histogram(data, bw)
    if hist.t_r != data.cycle_length:
        raise BinningError("histogram and timestamps disagree on cycle length")

    result, err = evalkit.fit_and_score(
        data, hist, args.model, args.gaussians, args.padded,
        max_iters=args.em_iters, offset=args.offset, restarts=args.restarts, rng=args.seed,
    )
    prov.update(model=args.model, M=args.gaussians, padded=bool(args.padded or args.offset is not None),
                padding_offset=result.padding_offset, histogram=str(hist_path) if hist_path else None,
                restarts=args.restarts, restart_seed=args.seed)
    result.provenance = prov
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emfit.write_fit(result, out / "fit.json")
    print(f"fit {args.model} M={args.gaussians}: {result.iterations_run} iterations, "
          f"offset {result.padding_offset:g}, mse {err:.6g}")


def cmd_eval(args) -> None:
    fit = emfit.read_fit(args.fit)
    hist = read_histogram(args.histogram)
    if fit.params.t_r != hist.t_r:
        raise BinningError("fit and histogram disagree on cycle length")
    manifest_path = Path(args.histogram).parent / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        cfg = ScenarioConfig(**manifest["config"])
        name = args.name or manifest.get("scenario") or "custom"
    else:
        cfg = ScenarioConfig(cycle_length=hist.t_r, bin_width=hist.bin_width,
                             pulse_delay=min(4.0, hist.t_r / 2))
        name = args.name or "custom"
    if cfg.bin_width != hist.bin_width:
        raise BinningError("histogram bin width differs from its manifest")
    plan = PaddingPlan(fit.padding_offset, hist.t_r) if fit.padding_offset else None
    err = evalkit.mse(fit.params, plan, hist)
    prov = fit.provenance
    report = evalkit.ScenarioReport(
        name, cfg, prov.get("model", "gumm" if fit.params.pi0 > 0 else "gmm"), fit.params.M,
        bool(prov.get("padded", plan is not None)), err, fit, hist,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evalkit.write_report(report, out / "report.json")
    evalkit.write_plot_data(report, out / "plot.tsv")
    print(f"{name}: mse {err:.6g}")


def cmd_report(args) -> None:
    if args.config:
        raise ValueError("report runs built-in scenarios; use --scenario with --set overrides")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = [evalkit.read_report(p) for p in args.reports]
    if args.scenario:
        names = list(evalkit.SCENARIOS) if args.scenario == "all" else [args.scenario]
        seeds = args.seed if args.seed else [0]
        cells = [c for c in evalkit.TABLE1 + evalkit.TABLE2 if c[0] in names]
        for seed in seeds:
            for name in names:
                cfg = evalkit.scenario_config(name).replace(
                    rng_seed=seed, **_parse_overrides(args.set))
                sim = evalkit.simulate(cfg, args.threads)
                for scen, model, padded, Ms in cells:
                    if scen != name:
                        continue
                    for M in ([args.gaussians] if args.gaussians else Ms):
                        rep = evalkit.run_scenario(name, cfg, model, M, padded,
                                                   max_iters=args.em_iters, simulation=sim)
                        tag = f"{name}_{model}_M{M}_{'pad' if padded else 'nopad'}_s{seed}"
                        evalkit.write_report(rep, out / f"report_{tag}.json")
                        evalkit.write_plot_data(rep, out / f"plot_{tag}.tsv")
                        reports.append(rep)
                        log.info("%s mse=%.6g (%.1fs)", tag, rep.mse, rep.seconds)
    if not reports:
        raise ValueError("nothing to report: pass report files or --scenario")
    table = evalkit.render_tables(reports)
    (out / "tables.txt").write_text(table)
    sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spadmix", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False, multi_seed=False):
        sp.add_argument("--config", help="flat key = value config file (time in 10 ns units)")
        sp.add_argument("--scenario", help="built-in scenario name" + (" or 'all'" if multi_seed else ""))
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
        sp.add_argument("--seed", type=int, required=seed_required, nargs="+" if multi_seed else None)
        sp.add_argument("--threads", type=int, default=1, help="worker processes (results unchanged)")
        sp.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("simulate", help="simulate registration timestamps and histograms")
    common(s, seed_required=True)
    s.add_argument("--format", choices=["text", "binary"], default="text")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a mixture to pooled timestamps")
    f.add_argument("inputs", nargs="+", help="timestamp files or simulate output directories")
    f.add_argument("--gaussians", "-M", type=int, required=True)
    f.add_argument("--model", choices=["gmm", "gumm"], default="gumm")
    f.add_argument("--padded", action="store_true")
    f.add_argument("--offset", type=float, help="force the padding cut (implies --padded)")
    f.add_argument("--em-iters", type=int, help="default 50, or 80 for M >= 4")
    f.add_argument("--restarts", type=int, default=0)
    f.add_argument("--seed", type=int, default=0, help="seed for restarts")
    f.add_argument("--histogram", help="companion histogram for offset selection")
    f.add_argument("--cycle-length", type=float, help="t_r for binary inputs without manifest")
    f.add_argument("--threads", type=int, default=1)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="score a fit against a histogram")
    e.add_argument("--fit", required=True)
    e.add_argument("--histogram", required=True)
    e.add_argument("--name", help="scenario label for the report")
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="aggregate reports into MSE tables, or run the scenario grid")
    r.add_argument("reports", nargs="*", help="report.json files")
    common(r, multi_seed=True)
    r.add_argument("--gaussians", "-M", type=int, help="restrict the grid to one M")
    r.add_argument("--em-iters", type=int)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"spadmix {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
