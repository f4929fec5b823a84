"""Desk grating study: hybrid vs full run for a few edge sizes plus the convergence table.

    python3 scripts/grating_study.py --workers 4 --n-edge 10 30
"""
import argparse
import time

import numpy as np

from asmfdtd.analysis import normalize_line, relative_l2
from asmfdtd.asm import run_sweep
from asmfdtd.config import desk_profile
from asmfdtd.hybrid import asm_plan_for, converge_loop, merge_fields, run_edge, run_inner
from asmfdtd.scenario import GratingUnitCell, build_full


def compare(inner, cfg, n_edge, name):
    f, dy = cfg.grid.f_op, cfg.grid.cell
    low, high = (run_edge(inner, cfg, s, n_edge).phasors[name] for s in ("low", "high"))
    merged = merge_fields(inner.phasor(name, f), low, high, inner.y_boundary, dy).line
    ref = build_full(cfg, cfg.hybrid.n_inner + n_edge).sim.run().phasor(name, f)
    _, a, b = np.intersect1d(np.round(merged.positions / dy).astype(int),
                             np.round(ref.positions / dy).astype(int), return_indices=True)
    m, r = normalize_line(merged).amplitude[a], normalize_line(ref).amplitude[b]
    return relative_l2(m, r), relative_l2(np.abs(m), np.abs(r))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--n-edge", type=int, nargs="+", default=[10, 30])
    ap.add_argument("--probe", default="probe_40")
    args = ap.parse_args()
    cfg = desk_profile()
    t = time.perf_counter()
    plan = asm_plan_for(cfg)
    inner = run_inner(run_sweep(GratingUnitCell(cfg), plan, workers=args.workers), cfg)
    print(f"sweep: {plan.n_simulations} members, {time.perf_counter() - t:.1f} s")
    print("n_edge  cells  complex_l2  magnitude_l2")
    for ne in args.n_edge:
        c, m = compare(inner, cfg, ne, args.probe)
        print(f"{ne:6d}  {2 * (cfg.hybrid.n_inner + ne) + 1:5d}  {c:10.4f}  {m:12.4f}")
    rep = converge_loop(inner, cfg, threshold=0.0, workers=args.workers)
    print("n_edge  raw_metric  normalized")
    for e in rep.entries:
        print(f"{e.n_edge:6d}  {e.raw:10.4e}  {e.normalized:10.4f}")


if __name__ == "__main__":
    main()
