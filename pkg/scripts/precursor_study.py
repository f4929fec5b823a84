"""How the ASM order and the pulse turn-on interact in vacuum.

The light-cone order only covers fields moving at c0, but the lattice lets a
weak precursor travel up to one cell per step.  A hard pulse turn-on feeds it;
raising the delay or using the lattice-cone order removes the alias.
"""
import argparse
import math

import numpy as np

from asmfdtd.asm import run_sweep
from asmfdtd.config import desk_profile
from asmfdtd.grid import C0
from asmfdtd.hybrid import asm_plan_for, run_inner
from asmfdtd.scenario import GratingUnitCell, build_full


def error(cfg, workers):
    inner = run_inner(run_sweep(GratingUnitCell(cfg), asm_plan_for(cfg), workers=workers), cfg)
    full = build_full(cfg, cfg.hybrid.n_inner + cfg.hybrid.p_tf).sim.run()
    num = den = 0.0
    for name, line in inner.lines.items():
        s = full.series(name)
        ref = s.values[:, np.round((line.positions - s.positions[0]) / cfg.grid.cell).astype(int)]
        num += np.linalg.norm(line.values - ref) ** 2
        den += np.linalg.norm(ref) ** 2
    return math.sqrt(num / den)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()
    print("delay_widths  order       rel_l2")
    for delay in (4.0, 5.0, 6.0):
        for lattice in (False, True):
            cfg = desk_profile()
            cfg.grid.n_steps = args.steps
            cfg.structure.kind = "vacuum"
            cfg.source.delay_widths = delay
            dt = cfg.grid.courant / (C0 * math.sqrt(2) / cfg.grid.cell)
            cfg.layout.end_space = int(C0 * args.steps * dt / cfg.grid.cell) + 30
            label = "light cone"
            if lattice:
                # one cell per step of reach, in periods, on both sides
                cfg.asm.order = 2 * math.ceil((args.steps + (cfg.hybrid.n_inner + 2) * cfg.grid.period_cells)
                                              / cfg.grid.period_cells)
                cfg.layout.end_space = args.steps + 30
                label = f"lattice {cfg.asm.order}"
            print(f"{delay:12.0f}  {label:11s} {error(cfg, args.workers):.2e}")


if __name__ == "__main__":
    main()
