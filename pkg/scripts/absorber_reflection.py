"""Normal-incidence reflection of the CPML and Mur boundaries in a quasi-1D channel.

The reflected part is the difference against a run in a domain long enough
that its far end stays out of the time window.
"""
import argparse

import numpy as np

from asmfdtd.boundaries import BlochPhase, PmlSpec
from asmfdtd.config import desk_profile
from asmfdtd.grid import MaterialMap, make_grid
from asmfdtd.simulation import ProbeLine, Simulation
from asmfdtd.sources import SourceSpec, gaussian_width_for


def trace(nx, kind, thickness, cfg, n_steps, src=20, probe=150):
    dx = cfg.grid.cell
    g = make_grid(nx, 3, dx, dx, cfg.grid.courant, n_steps)
    w = gaussian_width_for(cfg.grid.f_op)
    sim = Simulation(g, MaterialMap.vacuum(g), {"xlo": "pec", "xhi": kind, "ylo": "periodic", "yhi": "periodic"},
                     pml=PmlSpec(thickness), bloch=BlochPhase("y", 0.0, 2 * dx),
                     sources=[SourceSpec((src, j), 1.0, 4 * w, w) for j in (1, 2)],
                     probes=[ProbeLine("p", "x", 1, probe, probe + 1)])
    return sim.run().series("p").values[:, 0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=200)
    ap.add_argument("--steps", type=int, default=900)
    args = ap.parse_args()
    cfg = desk_profile()
    ref = trace(4 * args.nx + 400, "pec", 10, cfg, args.steps)
    for kind, T in (("pml", 10), ("pml", 20), ("pml", 40), ("mur", 40)):
        got = trace(args.nx, kind, T, cfg, args.steps)
        db = 10 * np.log10(np.sum(np.abs(got - ref) ** 2) / np.sum(np.abs(ref) ** 2))
        print(f"{kind:4s} {T:3d} cells  {db:7.1f} dB")


if __name__ == "__main__":
    main()
