"""Domain builders for the grating study: unit cell, full structure, edges.

Rows are addressed by a global index ``g`` with y = g * dy and the source row
at g = 0.  Structure periods are centred on g = m * P (P cells per period);
PEC strips sit on the period boundaries g = (m + 1/2) * P, so every
TF/SF line and every record line runs through a strip centre.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundaries import BlochPhase, PmlSpec
from .config import ScenarioConfig
from .grid import GridSpec, MaterialMap, make_grid
from .simulation import ProbeLine, Simulation
from .sources import BoundaryRecord, BoundaryRecorder, SourceSpec, TfsfSource, TfsfSpec, gaussian_width_for


@dataclass(frozen=True)
class XLayout:
    nx: int
    source_col: int
    grating_col: int
    probe_cols: tuple[int, ...]


def x_layout(cfg: ScenarioConfig) -> XLayout:
    lay, T = cfg.layout, cfg.grid.pml_thickness
    src = T + lay.x_margin
    grating = src + lay.source_to_grating
    probes = tuple(grating + p for p in lay.probe_offsets)
    after = lay.x_margin if lay.x_margin_after is None else lay.x_margin_after
    nx = max(probes) + after + T + 1
    return XLayout(nx, src, grating, probes)


def pml_spec(cfg: ScenarioConfig) -> PmlSpec:
    g = cfg.grid
    return PmlSpec(g.pml_thickness, g.pml_order, g.pml_reflection)


def x_edges_tag(cfg: ScenarioConfig) -> str:
    g = cfg.grid
    return f"pml:{g.pml_thickness}:{g.pml_order!r}:{g.pml_reflection!r}"


def make_domain_grid(cfg: ScenarioConfig, ny: int) -> GridSpec:
    g = cfg.grid
    return make_grid(x_layout(cfg).nx, ny, g.cell, g.cell, g.courant, g.n_steps)


def source_spec(cfg: ScenarioConfig, location) -> SourceSpec:
    s = cfg.source
    w = gaussian_width_for(cfg.grid.f_op, edge_factor=s.spectral_edge)
    return SourceSpec(tuple(int(v) for v in location), s.amplitude, s.delay_widths * w, w)


def grating_materials(cfg: ScenarioConfig, grid: GridSpec, g_rows: np.ndarray,
                      strip_centres: np.ndarray) -> MaterialMap:
    """Vacuum plus one-cell-thick PEC strips at the grating column."""
    mat = MaterialMap.vacuum(grid)
    if cfg.structure.kind == "vacuum" or len(strip_centres) == 0:
        return mat
    w = cfg.structure.strip_half_width
    dist = np.min(np.abs(g_rows[:, None] - np.asarray(strip_centres)[None, :]), axis=1)
    mat.pec_mask[x_layout(cfg).grating_col, dist <= w] = True
    return mat


def probe_name(offset_cells: int) -> str:
    return f"probe_{offset_cells}"


def probe_lines(cfg: ScenarioConfig, lo: int, hi: int, origin: float) -> list[ProbeLine]:
    xl = x_layout(cfg)
    return [ProbeLine(probe_name(off), "y", col, lo, hi, origin)
            for off, col in zip(cfg.layout.probe_offsets, xl.probe_cols)]


X_EDGES = {"xlo": "pml", "xhi": "pml"}


@dataclass(frozen=True)
class GratingUnitCell:
    """One period with Bloch-phased y edges; rows 0..P with the source at P/2.

    Outputs per member: ``rec_hi`` (Ez row P, Hx just below), ``rec_lo``
    (Ez row 0, Hx just above) and one probe array (steps, P + 1) per
    sampling offset.
    """

    cfg: ScenarioConfig

    @property
    def P(self) -> int:
        return self.cfg.grid.period_cells

    def grid(self) -> GridSpec:
        return make_domain_grid(self.cfg, self.P + 1)

    def g_rows(self) -> np.ndarray:
        return np.arange(self.P + 1) - self.P // 2

    def materials(self, grid: GridSpec) -> MaterialMap:
        half = self.P // 2
        return grating_materials(self.cfg, grid, self.g_rows(), np.array([-half, half]))

    def build(self, k: float) -> Simulation:
        grid = self.grid()
        mat = self.materials(grid)
        n = grid.n_steps
        tag = x_edges_tag(self.cfg)
        recs = [BoundaryRecorder(grid, mat, self.P, "high", tag, n),
                BoundaryRecorder(grid, mat, 0, "low", tag, n)]
        src = source_spec(self.cfg, (x_layout(self.cfg).source_col, self.P // 2))
        edges = dict(X_EDGES, ylo="periodic", yhi="periodic")
        return Simulation(grid, mat, edges, pml=pml_spec(self.cfg),
                          bloch=BlochPhase("y", k, self.cfg.grid.period), sources=[src],
                          recorders=recs, probes=probe_lines(self.cfg, 0, self.P + 1, 0.0))

    def run_member(self, k: float) -> dict:
        sim = self.build(k).run()
        out = {"rec_hi": sim.recorders[0].result(), "rec_lo": sim.recorders[1].result()}
        for p in sim.probes:
            out[p.name] = sim.series(p.name).values
        return out


def structure_extent(cfg: ScenarioConfig, n_half: int) -> float:
    """Distance from the centre to the outermost strip: (n_half + 1/2) d."""
    return (n_half + 0.5) * cfg.grid.period


@dataclass
class FullDomain:
    sim: Simulation
    g_offset: int          # local row = g + g_offset
    n_half: int


def build_full(cfg: ScenarioConfig, n_half: int, half_domain: bool | None = None) -> FullDomain:
    """Finite grating of 2 n_half + 1 periods centred on the source.

    With ``half_domain`` only g >= 0 is simulated and the source row is a
    PMC symmetry plane.
    """
    half_domain = cfg.half_domain if half_domain is None else half_domain
    P, T = cfg.grid.period_cells, cfg.grid.pml_thickness
    edges = dict(cfg.boundaries)
    ty_lo = T if edges["ylo"] == "pml" else 0
    ty_hi = T if edges["yhi"] == "pml" else 0
    reach = (2 * n_half + 1) * P // 2 + cfg.layout.end_space
    if half_domain:
        edges["ylo"] = "pmc"
        g_off = 0
        ny = reach + ty_hi + 1
    else:
        g_off = reach + ty_lo
        ny = g_off + reach + ty_hi + 1
    grid = make_domain_grid(cfg, ny)
    g_rows = np.arange(ny) - g_off
    m = np.arange(n_half + 1)
    centres = np.concatenate([-(m * P + P // 2), m * P + P // 2])
    mat = grating_materials(cfg, grid, g_rows, centres)
    src = source_spec(cfg, (x_layout(cfg).source_col, g_off))
    lo = 0 if half_domain else max(ty_lo, 1)
    hi = ny - max(ty_hi, 1)
    pml = pml_spec(cfg)
    sim = Simulation(grid, mat, edges, pml=pml, sources=[src],
                     probes=probe_lines(cfg, lo, hi, -g_off * cfg.grid.cell),
                     dft_frequencies=[cfg.grid.f_op])
    return FullDomain(sim, g_off, n_half)


@dataclass
class EdgeDomain:
    sim: Simulation
    side: str
    boundary_row: int
    g_offset: int          # local row = g + g_offset
    n_inner: int
    n_edge: int

    @property
    def y_boundary(self) -> float:
        return (self.boundary_row - self.g_offset) * self.sim.grid.dy


def edge_geometry(cfg: ScenarioConfig, side: str, n_inner: int, n_edge: int, sf_buffer: int):
    """(ny, boundary_row, g_offset, strip centres in g) for an edge domain."""
    P, T = cfg.grid.period_cells, cfg.grid.pml_thickness
    g_b = n_inner * P + P // 2
    sf = (sf_buffer + cfg.layout.sf_gap_periods) * P + T
    tf = n_edge * P + cfg.layout.end_space + T
    m = np.arange(-sf_buffer, n_edge + 1)
    if side == "high":
        jb = sf
        g_off = jb - g_b
        centres = g_b + m * P
    elif side == "low":
        jb = tf
        g_off = jb + g_b
        centres = -(g_b + m * P)
    else:
        raise ValueError(f"side must be 'low' or 'high', got {side!r}")
    return sf + tf + 1, jb, g_off, np.sort(centres)


def build_edge(cfg: ScenarioConfig, record: BoundaryRecord, side: str, n_inner: int,
               n_edge: int, sf_buffer: int) -> EdgeDomain:
    """Edge simulation driven only by a TF/SF line replaying ``record``.

    TF region: the strip on the line plus ``n_edge`` periods; SF region:
    ``sf_buffer`` periods, one gap period and the PML absorber.
    """
    P, T = cfg.grid.period_cells, cfg.grid.pml_thickness
    ny, jb, g_off, centres = edge_geometry(cfg, side, n_inner, n_edge, sf_buffer)
    grid = make_domain_grid(cfg, ny)
    g_rows = np.arange(ny) - g_off
    mat = grating_materials(cfg, grid, g_rows, centres)
    tf = TfsfSource(TfsfSpec(jb, side, record), grid, mat)
    if not tf.fingerprint_matches(mat, x_edges_tag(cfg)):
        raise ValueError("record fingerprint does not match the edge domain discretisation")
    edges = dict(X_EDGES, ylo="pml", yhi="pml")
    sim = Simulation(grid, mat, edges, pml=pml_spec(cfg), tfsf=[tf],
                     probes=probe_lines(cfg, T, ny - T, -g_off * cfg.grid.cell),
                     dft_frequencies=[cfg.grid.f_op])
    return EdgeDomain(sim, side, jb, g_off, n_inner, n_edge)
