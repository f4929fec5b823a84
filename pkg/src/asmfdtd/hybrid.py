"""Two-step finite-structure workflow: unit-cell sweep, edge runs, merge, convergence."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import PhasorLine, ProbeSeries, dft_at
from .asm import AsmPlan, SweepResult, plan_sweep, reconstruct_any
from .config import HybridConfig, ScenarioConfig
from .grid import C0
from .scenario import GratingUnitCell, build_edge, build_full, probe_name
from .sources import BoundaryRecord

__all__ = ["HybridConfig", "InnerEstimate", "EdgeResult", "MergedLine", "ConvergenceEntry",
           "ConvergenceReport", "asm_plan_for", "run_inner", "run_edge", "merge_fields",
           "convergence_metric", "converge_loop", "cost_summary"]


def asm_plan_for(cfg: ScenarioConfig) -> AsmPlan:
    """Sweep plan: horizon = full run length, region = inner region plus metric window."""
    g, h = cfg.grid, cfg.hybrid
    unit = GratingUnitCell(cfg).grid()
    t0 = cfg.asm.t0 if cfg.asm.t0 is not None else unit.n_steps * unit.dt
    a = cfg.asm.a if cfg.asm.a is not None else (h.n_inner + h.p_tf + 0.5) * g.period
    return plan_sweep(t0, a, g.period, symmetric=cfg.asm.symmetric, order=cfg.asm.order)


def image_free_reach(plan: AsmPlan) -> float:
    """Largest |y| (from the source) guaranteed free of images up to t0."""
    return plan.full_orders[0] * plan.periods[0] - C0 * plan.t0


def asm_line(results: SweepResult, name: str, n_lo: int, n_hi: int, period_cells: int,
             dt: float, dy: float) -> ProbeSeries:
    """De-imaged probe over periods n_lo..n_hi (physical offsets), as one line.

    Each period contributes rows 1..P of the unit cell; the lowest period also
    contributes row 0 so both end faces are present.
    """
    P = period_cells
    offsets = list(range(n_lo, n_hi + 1))
    parts = reconstruct_any(results, [-N for N in offsets], name)
    vals, pos = [], []
    for N, u in zip(offsets, parts):
        rows = range(0 if N == n_lo else 1, P + 1)
        vals.append(u[:, list(rows)])
        pos.extend((N * P - P // 2 + j) * dy for j in rows)
    return ProbeSeries(np.array(pos), np.concatenate(vals, axis=1), dt)


@dataclass
class InnerEstimate:
    """ASM fields: probe lines over |offset| <= n_inner + p_tf and the two TF/SF records."""

    lines: dict
    record_high: BoundaryRecord
    record_low: BoundaryRecord
    y_boundary: float
    n_inner: int
    p_tf: int

    def phasor(self, name: str, f: float) -> PhasorLine:
        return dft_at(self.lines[name], f)


def run_inner(results: SweepResult, cfg: ScenarioConfig) -> InnerEstimate:
    h, g = cfg.hybrid, cfg.grid
    plan = results.plan
    n_max = h.n_inner + h.p_tf
    reach = image_free_reach(plan)
    need = (n_max + 0.5) * g.period
    if need > reach * (1 + 1e-9):
        raise ValueError(f"offset {n_max} periods ({need:.4g} m) exceeds the image-free reach "
                         f"{reach:.4g} m of the plan (order {plan.full_orders[0]})")
    unit = GratingUnitCell(cfg).grid()
    lines = {probe_name(off): asm_line(results, probe_name(off), -n_max, n_max, g.period_cells,
                                       unit.dt, unit.dy)
             for off in cfg.layout.probe_offsets}
    rec_hi = reconstruct_any(results, -h.n_inner, "rec_hi", mirror="rec_lo")
    rec_lo = reconstruct_any(results, h.n_inner, "rec_lo", mirror="rec_hi")
    return InnerEstimate(lines, rec_hi, rec_lo, (h.n_inner + 0.5) * g.period, h.n_inner, h.p_tf)


@dataclass
class EdgeResult:
    side: str
    n_edge: int
    phasors: dict
    y_boundary: float
    sf_peak: float
    tf_peak: float
    update_count: int


def run_edge(inner: InnerEstimate, cfg: ScenarioConfig, side: str, n_edge: int | None = None,
             sf_buffer: int | None = None) -> EdgeResult:
    h = cfg.hybrid
    n_edge = h.n_edge if n_edge is None else n_edge
    sf_buffer = h.sf_buffer_cells if sf_buffer is None else sf_buffer
    rec = inner.record_high if side == "high" else inner.record_low
    dom = build_edge(cfg, rec, side, inner.n_inner, n_edge, sf_buffer)
    sim = dom.sim.run()
    f = cfg.grid.f_op
    phasors = {p.name: sim.phasor(p.name, f) for p in sim.probes}
    # SF/TF time-domain peaks over the whole domain at the end of the run
    ez = np.abs(sim.state.ez)
    jb = dom.boundary_row
    sf = ez[:, :jb] if side == "high" else ez[:, jb + 1:]
    tf = ez[:, jb:] if side == "high" else ez[:, :jb + 1]
    yb = dom.y_boundary
    return EdgeResult(side, n_edge, phasors, yb, float(sf.max()) if sf.size else 0.0,
                      float(tf.max()), sim.update_count)


@dataclass
class MergedLine:
    line: PhasorLine
    seam_jump: dict = field(default_factory=dict)


def _lattice_check(pos: np.ndarray, dy: float, what: str) -> None:
    q = pos / dy
    if pos.size and np.max(np.abs(q - np.round(q))) > 1e-6:
        raise ValueError(f"{what} positions are not on the common probe grid")


def merge_fields(inner: PhasorLine, low: PhasorLine, high: PhasorLine, y_boundary: float,
                 dy: float) -> MergedLine:
    """Inner estimate on |y| <= y_b (including the seam samples), edges outside."""
    for name, ln in (("inner", inner), ("low", low), ("high", high)):
        _lattice_check(ln.positions, dy, name)
    tol = 1e-6 * dy
    sel_in = np.abs(inner.positions) <= y_boundary + tol
    sel_lo = low.positions < -y_boundary - tol
    sel_hi = high.positions > y_boundary + tol
    pos = np.concatenate([low.positions[sel_lo], inner.positions[sel_in], high.positions[sel_hi]])
    amp = np.concatenate([low.amplitude[sel_lo], inner.amplitude[sel_in], high.amplitude[sel_hi]])
    if pos.size > 1 and np.any(np.diff(pos) <= 0.5 * dy):
        raise ValueError("merged probe positions overlap or are misaligned")
    if pos.size > 1 and np.any(np.diff(pos) > 1.5 * dy):
        raise ValueError("merged probe line has gaps; inputs do not tile the structure")
    jumps = {}
    for side, ln, y in (("low", low, -y_boundary), ("high", high, y_boundary)):
        i_e = np.flatnonzero(np.abs(ln.positions - y) <= tol)
        i_i = np.flatnonzero(np.abs(inner.positions - y) <= tol)
        if i_e.size and i_i.size:
            jumps[side] = float(abs(ln.amplitude[i_e[0]] - inner.amplitude[i_i[0]]))
    peak = float(np.max(np.abs(amp))) if amp.size else 1.0
    return MergedLine(PhasorLine(pos, amp, inner.frequency),
                      {k: v / peak for k, v in jumps.items()})


def _window_values(line: PhasorLine, y0: float, n: int, dy: float, sign: int) -> np.ndarray:
    target = y0 + sign * dy * np.arange(n)
    idx = np.searchsorted(line.positions, target - 1e-6 * dy)
    ok = (idx < line.positions.size)
    ok &= np.abs(line.positions[np.minimum(idx, line.positions.size - 1)] - target) <= 1e-6 * dy
    if not np.all(ok):
        raise ValueError("metric window exceeds the available samples")
    return line.amplitude[idx]


def convergence_metric(e_asm: PhasorLine, e_edge: PhasorLine, y_boundary: float, p_tf: int,
                       period: float, dy: float, side: str = "high") -> float:
    """sqrt(sum |E_asm - E_edge|^2 dy) over the P_TF-period window past the TF/SF line.

    The window is half-open, starting at the boundary sample and holding
    p_tf * period / dy samples (rectangle rule).
    """
    if p_tf < 1:
        raise ValueError("p_tf must be >= 1")
    n = int(round(p_tf * period / dy))
    sign = 1 if side == "high" else -1
    y0 = y_boundary if side == "high" else -y_boundary
    a = _window_values(e_asm, y0, n, dy, sign)
    b = _window_values(e_edge, y0, n, dy, sign)
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) * dy))


@dataclass
class ConvergenceEntry:
    n_edge: int
    raw: float
    normalized: float
    converged: bool


@dataclass
class ConvergenceReport:
    entries: list
    p_tf: int
    reference: float
    threshold: float
    stop_reason: str
    trace: list = field(default_factory=list)

    @property
    def converged_at(self) -> int | None:
        for e in self.entries:
            if e.converged:
                return e.n_edge
        return None


def _edge_metric(args):
    inner, cfg, side, n_edge, probe, p_tfs = args
    res = run_edge(inner, cfg, side, n_edge)
    e_asm = inner.phasor(probe, cfg.grid.f_op)
    dy = cfg.grid.cell
    return n_edge, [convergence_metric(e_asm, res.phasors[probe], inner.y_boundary, p, cfg.grid.period,
                                       dy, side) for p in p_tfs], res


def converge_loop(inner: InnerEstimate, cfg: ScenarioConfig, threshold: float | None = None,
                  schedule=None, side: str = "high", probe: str | None = None, workers: int = 1,
                  extra_p_tf=()) -> ConvergenceReport:
    """Grow N^E along the schedule until the normalised metric drops to the threshold.

    Normalisation is by the largest raw metric seen so far.  With several
    workers, waves of upcoming schedule entries run concurrently; entries past
    the stopping point are discarded.  ``extra_p_tf`` windows are evaluated
    on the same runs and returned in ``report.trace``.
    """
    h = cfg.hybrid
    threshold = h.threshold if threshold is None else threshold
    schedule = list(h.n_edge_schedule if schedule is None else schedule)
    if not schedule:
        raise ValueError("empty N^E schedule")
    probe = probe or probe_name(max(cfg.layout.probe_offsets))
    p_tfs = [h.p_tf] + [p for p in extra_p_tf]
    entries, trace = [], []
    ref = 0.0
    stop = "schedule exhausted without convergence"
    raws: list[float] = []
    pos = 0
    stopped = False
    while pos < len(schedule) and not stopped:
        wave = schedule[pos:pos + max(1, workers)]
        pos += len(wave)
        jobs = [(inner, cfg, side, ne, probe, p_tfs) for ne in wave]
        if workers <= 1 or len(jobs) == 1:
            results = [_edge_metric(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_edge_metric, jobs))
        for ne, vals, res in results:
            raw = vals[0]
            raws.append(raw)
            ref = max(ref, raw)
            norm = raw / ref if ref > 0 else 0.0
            conv = norm <= threshold
            entries.append([ne, raw, conv])
            trace.append({"n_edge": ne, "raw": raw, "running_reference": ref,
                          "normalized_at_eval": norm, "sf_peak": res.sf_peak,
                          "extra": dict(zip(p_tfs[1:], vals[1:]))})
            if conv:
                stop = f"converged at n_edge={ne}"
                stopped = True
                break
    final = [ConvergenceEntry(ne, raw, raw / ref if ref > 0 else 0.0, conv) for ne, raw, conv in entries]
    return ConvergenceReport(final, h.p_tf, ref, threshold, stop, trace)


def report_for_window(report: ConvergenceReport, p_tf: int) -> ConvergenceReport:
    """Re-normalise the ``extra`` metric values of a report's trace for another window."""
    raws = [t["extra"][p_tf] for t in report.trace]
    ref = max(raws) if raws else 0.0
    entries = [ConvergenceEntry(t["n_edge"], r, r / ref if ref > 0 else 0.0, False)
               for t, r in zip(report.trace, raws)]
    return ConvergenceReport(entries, p_tf, ref, report.threshold, "evaluated on the same runs")


def domain_updates(nx: int, ny: int, n_steps: int, extra_rows: int = 0) -> int:
    """Ez-node updates of a run: interior columns times updated rows times steps."""
    return (nx - 2) * (ny - 2 + extra_rows) * n_steps


def cost_summary(cfg: ScenarioConfig, n_edge: int, n_members: int, measured: dict | None = None,
                 workers: int = 4) -> dict:
    """Analytic update counts of the full run and of the hybrid critical path.

    The critical path assumes every sweep member runs concurrently, followed by
    the two (concurrent) edge runs.  ``finite_workers`` gives the same path
    when only ``workers`` processes share the sweep.
    """
    from .scenario import edge_geometry, x_layout

    nx = x_layout(cfg).nx
    n = cfg.grid.n_steps
    P = cfg.grid.period_cells
    n_half = cfg.hybrid.n_inner + n_edge
    full = build_full(cfg, n_half).sim
    full_updates = domain_updates(nx, full.grid.ny, n, extra_rows=len(full.pmc_edges))
    unit_updates = domain_updates(nx, P + 1, n, extra_rows=1)
    ny_e = edge_geometry(cfg, "high", cfg.hybrid.n_inner, n_edge, cfg.hybrid.sf_buffer_cells)[0]
    edge_updates = domain_updates(nx, ny_e, n)
    path = unit_updates + edge_updates
    out = {
        "full": full_updates,
        "unit_cell": unit_updates,
        "edge": edge_updates,
        "members": n_members,
        "critical_path": path,
        "ratio": path / full_updates,
        "finite_workers": workers,
        "finite_critical_path": math.ceil(n_members / workers) * unit_updates + edge_updates,
        "total_hybrid": n_members * unit_updates + 2 * edge_updates,
    }
    out["finite_ratio"] = out["finite_critical_path"] / full_updates
    if measured:
        out["measured"] = dict(measured)
        m_path = measured["unit_cell"] + max(measured["edge_high"], measured["edge_low"])
        out["measured_ratio"] = m_path / measured["full"]
    return out
