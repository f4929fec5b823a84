"""Command-line front end.

Subcommands: full, sweep, edge, merge, converge, dft.  Exit codes: 0 success,
2 configuration error, 3 simulation failure, 4 missing prerequisite.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import ProbeSeries, dft_at
from .asm import load_sweep, run_sweep
from .config import ConfigError, ScenarioConfig, config_dict, load_config
from .hybrid import (asm_plan_for, converge_loop, cost_summary, merge_fields, report_for_window,
                     run_edge, run_inner)
from .scenario import GratingUnitCell, build_full, probe_name

log = logging.getLogger("asmfdtd")

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_MISSING = 0, 2, 3, 4


class MissingPrerequisite(Exception):
    pass


def _write_phasors(directory: Path, phasors: dict) -> None:
    for name, line in sorted(phasors.items()):
        io.write_csv(directory / f"{name}.csv", line)


def _write_series(directory: Path, name: str, series: ProbeSeries) -> None:
    with open(directory / f"{name}.series.npy", "wb") as fh:
        np.save(fh, series.values, allow_pickle=False)
    io.write_json(directory / f"{name}.series.json",
                  {"dt": series.dt, "positions": [float(p) for p in series.positions]})


def cmd_full(cfg: ScenarioConfig, out: Path, args) -> int:
    n_half = cfg.hybrid.n_inner + cfg.hybrid.n_edge
    dom = build_full(cfg, n_half)
    sim = dom.sim.run()
    d = out / "full"
    d.mkdir(parents=True, exist_ok=True)
    f = cfg.grid.f_op
    _write_phasors(d, {p.name: sim.phasor(p.name, f) for p in sim.probes})
    for p in sim.probes:
        _write_series(d, p.name, sim.series(p.name))
    io.write_snapshot(d / "snapshot.pfdt", sim.state)
    io.write_json(d / "counts.json", {"update_count": sim.update_count, "nx": sim.grid.nx,
                                      "ny": sim.grid.ny, "n_steps": sim.grid.n_steps,
                                      "n_half": n_half, "half_domain": bool(sim.pmc_edges)})
    log.info("full run: %d x %d cells, %d updates", sim.grid.nx, sim.grid.ny, sim.update_count)
    return EXIT_OK


def _sweep_dir(out: Path) -> Path:
    return out / "sweep"


def cmd_sweep(cfg: ScenarioConfig, out: Path, args) -> int:
    plan = asm_plan_for(cfg)
    d = _sweep_dir(out)
    log.info("sweep: %d members (full-zone order %d)", plan.n_simulations, plan.full_orders[0])
    run_sweep(GratingUnitCell(cfg), plan, workers=args.workers, directory=d)
    io.write_json(d / "plan.json", {"orders": list(plan.orders), "full_orders": list(plan.full_orders),
                                    "period": plan.periods[0], "t0": plan.t0, "a": plan.a,
                                    "symmetric": plan.symmetric,
                                    "k": [m[0] for m in plan.members()]})
    return EXIT_OK


def _inner(cfg: ScenarioConfig, out: Path):
    plan = asm_plan_for(cfg)
    try:
        res = load_sweep(_sweep_dir(out), plan)
    except FileNotFoundError as exc:
        raise MissingPrerequisite(f"{exc}; run the 'sweep' command first")
    return run_inner(res, cfg)


def _edge_dir(out: Path, side: str, n_edge: int) -> Path:
    return out / f"edge_{side}_{n_edge}"


def cmd_edge(cfg: ScenarioConfig, out: Path, args) -> int:
    inner = _inner(cfg, out)
    n_edge = cfg.hybrid.n_edge if args.n_edge is None else args.n_edge
    sides = ["low", "high"] if args.side is None else [args.side]
    for side in sides:
        res = run_edge(inner, cfg, side, n_edge)
        d = _edge_dir(out, side, n_edge)
        d.mkdir(parents=True, exist_ok=True)
        _write_phasors(d, res.phasors)
        io.write_json(d / "diagnostics.json", {"side": side, "n_edge": n_edge,
                                               "sf_peak": res.sf_peak, "tf_peak": res.tf_peak,
                                               "sf_to_tf": res.sf_peak / res.tf_peak if res.tf_peak else 0.0,
                                               "update_count": res.update_count,
                                               "y_boundary": res.y_boundary})
        log.info("edge %s N^E=%d: SF/TF peak ratio %.3g", side, n_edge,
                 res.sf_peak / res.tf_peak if res.tf_peak else 0.0)
    return EXIT_OK


def cmd_merge(cfg: ScenarioConfig, out: Path, args) -> int:
    inner = _inner(cfg, out)
    n_edge = cfg.hybrid.n_edge if args.n_edge is None else args.n_edge
    d = out / f"merge_{n_edge}"
    d.mkdir(parents=True, exist_ok=True)
    f = cfg.grid.f_op
    seams = {}
    for off in cfg.layout.probe_offsets:
        name = probe_name(off)
        edges = {}
        for side in ("low", "high"):
            path = _edge_dir(out, side, n_edge) / f"{name}.csv"
            if not path.exists():
                raise MissingPrerequisite(f"{path} missing; run 'edge --side {side} --n-edge {n_edge}'")
            edges[side] = io.read_csv(path, f)
        inner_line = inner.phasor(name, f)
        io.write_csv(d / f"{name}.inner.csv", inner_line)
        merged = merge_fields(inner_line, edges["low"], edges["high"], inner.y_boundary, cfg.grid.cell)
        io.write_csv(d / f"{name}.csv", merged.line)
        seams[name] = merged.seam_jump
    io.write_json(d / "seam.json", {"n_edge": n_edge, "seam_jump_normalized": seams})
    return EXIT_OK


def cmd_converge(cfg: ScenarioConfig, out: Path, args) -> int:
    inner = _inner(cfg, out)
    extra = [1] if cfg.hybrid.p_tf != 1 else []
    report = converge_loop(inner, cfg, workers=args.workers, side=args.side or "high",
                           extra_p_tf=extra)
    d = out / "converge"
    d.mkdir(parents=True, exist_ok=True)
    io.write_report_csv(d / "report.csv", report)
    for p in extra:
        io.write_report_csv(d / f"report_p{p}.csv", report_for_window(report, p))
    io.write_json(d / "trace.json", {"stop_reason": report.stop_reason, "threshold": report.threshold,
                                     "p_tf": report.p_tf, "reference": report.reference,
                                     "trace": [{k: (v if k != "extra" else {str(a): b for a, b in v.items()})
                                                for k, v in t.items()} for t in report.trace]})
    log.info("converge: %s", report.stop_reason)
    return EXIT_OK


def cmd_dft(cfg: ScenarioConfig, out: Path, args) -> int:
    if not args.series:
        raise ConfigError("dft needs --series PATH (a .series.npy file with a .series.json sidecar)")
    src = Path(args.series)
    meta_path = src.with_name(src.name.replace(".npy", ".json"))
    if not src.exists() or not meta_path.exists():
        raise MissingPrerequisite(f"{src} or its sidecar {meta_path} is missing")
    meta = io.read_json(meta_path)
    series = ProbeSeries(np.array(meta["positions"]), np.load(src, allow_pickle=False), meta["dt"])
    f = args.freq if args.freq is not None else cfg.grid.f_op
    line = dft_at(series, f)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / (src.name.replace(".series.npy", "") + f".dft_{f:.6g}.csv"), line)
    return EXIT_OK


def cmd_cost(cfg: ScenarioConfig, out: Path, args) -> int:
    plan = asm_plan_for(cfg)
    summary = cost_summary(cfg, cfg.hybrid.n_edge, plan.n_simulations, workers=args.workers)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "cost.json", summary)
    print(f"full {summary['full']}  critical path {summary['critical_path']}  "
          f"ratio {summary['ratio']:.3f}  ({args.workers} workers: {summary['finite_ratio']:.3f})")
    return EXIT_OK


COMMANDS = {"full": cmd_full, "sweep": cmd_sweep, "edge": cmd_edge, "merge": cmd_merge,
            "converge": cmd_converge, "dft": cmd_dft, "cost": cmd_cost}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asmfdtd", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML scenario file")
    p.add_argument("--profile", choices=["desk", "paper"], default="desk")
    p.add_argument("--out", help="output directory (default: output_dir from the config)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--side", choices=["low", "high"])
    p.add_argument("--n-edge", type=int, dest="n_edge")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. --set hybrid.p_tf=5 (repeatable)")
    p.add_argument("--series", help="dft: path to a .series.npy probe file")
    p.add_argument("--freq", type=float, help="dft: frequency in Hz (default grid.f_op)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.profile, args.set)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.n_edge is not None and args.n_edge < 0:
            raise ConfigError("--n-edge must be >= 0")
        if args.command == "converge" and not cfg.hybrid.n_edge_schedule:
            raise ConfigError("hybrid.n_edge_schedule is empty")
        # building the domains validates geometry before any stepping
        asm_plan_for(cfg)
        build_full(cfg, cfg.hybrid.n_inner + cfg.hybrid.n_edge)
        out = Path(args.out or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / f"config.{args.command}.json", config_dict(cfg))
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out, args)
    except MissingPrerequisite as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to one exit code
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
