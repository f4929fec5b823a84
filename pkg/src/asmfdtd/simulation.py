"""Time-stepping driver that wires boundaries, sources and monitors together."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import DftAccumulator, PhasorLine, ProbeSeries
from .boundaries import EDGES, BlochPhase, Cpml, Mur1, PmlSpec, apply_pbc_e, apply_pbc_h, apply_pmc
from .grid import FieldState, GridSpec, MaterialMap, e_update_rows, step_e, step_h, updated_node_count
from .sources import BoundaryRecorder, SourceSpec, TfsfSource, inject_soft_source

EDGE_KINDS = ("pec", "pml", "mur", "pmc", "periodic")


@dataclass(frozen=True)
class ProbeLine:
    """Ez nodes along one grid line.

    ``axis="y"`` samples column ``index`` over rows ``[lo, hi)``; ``axis="x"``
    samples row ``index`` over columns ``[lo, hi)``.  Positions are
    ``origin + node * spacing``.
    """

    name: str
    axis: str
    index: int
    lo: int
    hi: int
    origin: float = 0.0

    def nodes(self):
        r = np.arange(self.lo, self.hi)
        if self.axis == "y":
            return np.full_like(r, self.index), r
        if self.axis == "x":
            return r, np.full_like(r, self.index)
        raise ValueError(f"probe axis must be 'x' or 'y', got {self.axis!r}")

    def positions(self, grid: GridSpec) -> np.ndarray:
        step = grid.dy if self.axis == "y" else grid.dx
        return self.origin + np.arange(self.lo, self.hi) * step


def check_edges(edges: dict, bloch: BlochPhase | None, pml: PmlSpec | None) -> None:
    if set(edges) != set(EDGES):
        raise ValueError(f"exactly one boundary kind per edge is required, got {sorted(edges)}")
    for e, kind in edges.items():
        if kind not in EDGE_KINDS:
            raise ValueError(f"unknown boundary kind {kind!r} on {e}")
        if kind == "periodic" and e[0] != "y":
            raise ValueError("only the y axis may be periodic")
        if kind == "pmc" and e[0] != "y":
            raise ValueError("symmetry planes are supported on y edges only")
    per = [e for e, k in edges.items() if k == "periodic"]
    if per and len(per) != 2:
        raise ValueError("periodic boundaries must be set on both y edges")
    if per and bloch is None:
        raise ValueError("periodic edges need a Bloch phase")
    if not per and bloch is not None:
        raise ValueError("a Bloch phase was given but no edge is periodic")
    if any(k == "pml" for k in edges.values()) and pml is None:
        raise ValueError("PML edges need a PmlSpec")


class Simulation:
    def __init__(self, grid: GridSpec, materials: MaterialMap, edges: dict, *,
                 pml: PmlSpec | None = None, bloch: BlochPhase | None = None,
                 sources=(), tfsf=(), recorders=(), probes=(), dft_frequencies=(),
                 keep_series: bool = True):
        materials.check(grid)
        check_edges(edges, bloch, pml)
        self.grid = grid
        self.materials = materials
        self.edges = dict(edges)
        self.bloch = bloch
        self.sources: list[SourceSpec] = list(sources)
        self.tfsf: list[TfsfSource] = list(tfsf)
        self.recorders: list[BoundaryRecorder] = list(recorders)
        self.probes: list[ProbeLine] = list(probes)
        self.state = FieldState.zeros(grid)
        pml_edges = [e for e, k in edges.items() if k == "pml"]
        self.cpml = Cpml(grid, pml, pml_edges) if pml_edges else None
        mur_edges = [e for e, k in edges.items() if k == "mur"]
        self.mur = Mur1(grid, mur_edges) if mur_edges else None
        self.pmc_edges = [e for e, k in edges.items() if k == "pmc"]
        self.periodic = bloch is not None
        for s in self.sources:
            i, j = s.location
            if not (0 <= i < grid.nx and 0 <= j < grid.ny):
                raise ValueError(f"source location {s.location} outside the domain")
            if materials.pec_mask[i, j]:
                raise ValueError(f"source location {s.location} lies on a PEC node")
        for t in self.tfsf:
            for e in ("ylo", "yhi"):
                thick = self.cpml.thickness_on(e) if self.cpml else 0
                row = t.row
                if thick and ((e == "ylo" and row <= thick) or (e == "yhi" and row >= grid.ny - 1 - thick)):
                    raise ValueError(f"TF/SF row {row} lies inside the {e} PML")
        self._nodes = [p.nodes() for p in self.probes]
        n = grid.n_steps
        self.keep_series = keep_series
        self._series = [np.zeros((n if keep_series else 0, p.hi - p.lo), complex) for p in self.probes]
        self._dft = {
            (p.name, f): DftAccumulator(p.positions(grid), f, grid.dt)
            for p in self.probes for f in dft_frequencies
        }
        self.update_count = 0
        self.steps_done = 0

    def step(self) -> None:
        g, st, n = self.grid, self.state, self.steps_done
        for k, (p, nodes) in enumerate(zip(self.probes, self._nodes)):
            vals = st.ez[nodes]
            if self.keep_series:
                self._series[k][n] = vals
            for (name, _), acc in self._dft.items():
                if name == p.name:
                    acc.add(vals)
        for r in self.recorders:
            r.record_e(st, n)

        step_h(st, g)
        if self.cpml is not None:
            self.cpml.correct_h(st)
        if self.periodic:
            apply_pbc_h(st, self.bloch)
        for e in self.pmc_edges:
            apply_pmc(st, e)
        for t in self.tfsf:
            t.correct_h(st, n)
        for r in self.recorders:
            r.record_h(st, n)

        if self.mur is not None:
            self.mur.save(st)
        rows = e_update_rows(st, g.ny)
        step_e(st, g, self.materials)
        if self.cpml is not None:
            self.cpml.correct_e(st, self.materials, rows)
        t_half = (n + 0.5) * g.dt
        for s in self.sources:
            inject_soft_source(st, s, t_half, g, self.materials)
        for t in self.tfsf:
            t.correct_e(st, n)
        st.ez[self.materials.pec_mask] = 0.0
        if self.periodic:
            apply_pbc_e(st, self.bloch)
        if self.mur is not None:
            self.mur.apply(st, rows)
        self.update_count += updated_node_count(st, g)
        self.steps_done += 1

    def run(self, n_steps: int | None = None) -> "Simulation":
        n = self.grid.n_steps if n_steps is None else n_steps
        for _ in range(n):
            self.step()
        return self

    def series(self, name: str) -> ProbeSeries:
        k = [p.name for p in self.probes].index(name)
        p = self.probes[k]
        return ProbeSeries(p.positions(self.grid), self._series[k][:self.steps_done], self.grid.dt)

    def phasor(self, name: str, f: float) -> PhasorLine:
        return self._dft[(name, f)].result()
