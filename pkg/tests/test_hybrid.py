import numpy as np
import pytest

from asmfdtd.analysis import PhasorLine
from asmfdtd.asm import run_sweep
from asmfdtd.hybrid import (ConvergenceEntry, ConvergenceReport, asm_plan_for, converge_loop,
                            convergence_metric, cost_summary, domain_updates, image_free_reach,
                            merge_fields, report_for_window, run_edge, run_inner)
from asmfdtd.scenario import GratingUnitCell, build_edge, build_full, edge_geometry, x_layout

from conftest import small_config


def _common(a: PhasorLine, b: PhasorLine, dy):
    ia = np.round(a.positions / dy).astype(int)
    ib = np.round(b.positions / dy).astype(int)
    common, xa, xb = np.intersect1d(ia, ib, return_indices=True)
    return a.amplitude[xa], b.amplitude[xb], common


@pytest.fixture(scope="module")
def vacuum_case():
    # wide enough that no field touches a y absorber during the run, and an
    # order covering the numerical cone (one cell per step) rather than c0 t0
    cfg = small_config("vacuum", n_steps=160)
    cfg.layout.end_space = 170
    cfg.asm.order = 90
    res = run_sweep(GratingUnitCell(cfg), asm_plan_for(cfg))
    return cfg, res, run_inner(res, cfg)


@pytest.fixture(scope="module")
def grating_case():
    cfg = small_config("grating", n_steps=200)
    res = run_sweep(GratingUnitCell(cfg), asm_plan_for(cfg))
    return cfg, res, run_inner(res, cfg)


def test_plan_covers_inner_region_and_window():
    cfg = small_config()
    plan = asm_plan_for(cfg)
    d = cfg.grid.period
    assert plan.symmetric
    assert image_free_reach(plan) >= (cfg.hybrid.n_inner + cfg.hybrid.p_tf + 0.5) * d
    assert image_free_reach(plan) < (cfg.hybrid.n_inner + cfg.hybrid.p_tf + 0.5) * d + 2 * d


def test_inner_region_beyond_reach_is_refused():
    cfg = small_config()
    cfg.asm.order = 6
    res = run_sweep(GratingUnitCell(cfg), asm_plan_for(cfg))
    with pytest.raises(ValueError, match="image-free"):
        run_inner(res, cfg)


def test_unit_cell_member_obeys_bloch_condition():
    cfg = small_config()
    cell = GratingUnitCell(cfg)
    k = 0.37 * np.pi / cfg.grid.period
    sim = cell.build(k).run(60)
    ez = sim.state.ez
    assert np.allclose(ez[:, 0], ez[:, -1] * np.exp(1j * k * cfg.grid.period), atol=0, rtol=1e-14)
    out = cell.run_member(k)
    assert set(out) == {"rec_hi", "rec_lo", "probe_2", "probe_6"}
    assert out["probe_2"].shape == (cfg.grid.n_steps, cfg.grid.period_cells + 1)


def test_vacuum_inner_estimate_matches_direct_run(vacuum_case):
    cfg, _, inner = vacuum_case
    full = build_full(cfg, cfg.hybrid.n_inner + cfg.hybrid.p_tf).sim.run()
    for name, line in inner.lines.items():
        s = full.series(name)
        idx = np.round(line.positions / cfg.grid.cell).astype(int) - np.round(s.positions[0] / cfg.grid.cell).astype(int)
        ref = s.values[:, idx]
        assert np.linalg.norm(line.values - ref) <= 1e-12 * np.linalg.norm(ref)


def test_light_cone_order_leaves_only_a_faint_precursor_alias():
    cfg = small_config("vacuum", n_steps=160)
    cfg.layout.end_space = 170
    inner = run_inner(run_sweep(GratingUnitCell(cfg), asm_plan_for(cfg)), cfg)
    full = build_full(cfg, cfg.hybrid.n_inner + cfg.hybrid.p_tf).sim.run()
    line = inner.lines["probe_6"]
    s = full.series("probe_6")
    idx = np.round((line.positions - s.positions[0]) / cfg.grid.cell).astype(int)
    err = np.linalg.norm(line.values - s.values[:, idx]) / np.linalg.norm(s.values[:, idx])
    assert 1e-13 < err < 1e-6


def test_vacuum_hybrid_pipeline_is_exact(vacuum_case):
    cfg, _, inner = vacuum_case
    f, dy = cfg.grid.f_op, cfg.grid.cell
    n_edge = 2
    low = run_edge(inner, cfg, "low", n_edge)
    high = run_edge(inner, cfg, "high", n_edge)
    assert high.y_boundary == pytest.approx(inner.y_boundary)
    assert low.y_boundary == pytest.approx(-inner.y_boundary)
    for r in (low, high):
        assert r.sf_peak <= 1e-12 * r.tf_peak
    full = build_full(cfg, cfg.hybrid.n_inner + n_edge).sim.run()
    for name in inner.lines:
        merged = merge_fields(inner.phasor(name, f), low.phasors[name], high.phasors[name],
                              inner.y_boundary, dy)
        a, b, common = _common(merged.line, full.phasor(name, f), dy)
        assert common.size > 200
        assert np.linalg.norm(a - b) <= 1e-11 * np.linalg.norm(b)
        assert max(merged.seam_jump.values()) < 1e-11


def test_edge_domains_put_strips_on_the_boundary():
    cfg = small_config()
    P = cfg.grid.period_cells
    for side in ("low", "high"):
        ny, jb, g_off, centres = edge_geometry(cfg, side, 2, 3, 2)
        g_b = jb - g_off
        assert abs(g_b) == 2 * P + P // 2
        assert g_b in centres
        assert len(centres) == 2 + 3 + 1
        assert np.all(np.diff(centres) == P)
        dom = build_edge(cfg, _fake_record(cfg, ny, side), side, 2, 3, 2)
        assert dom.sim.materials.pec_mask[x_layout(cfg).grating_col, jb]
    with pytest.raises(ValueError):
        edge_geometry(cfg, "middle", 2, 3, 2)


def _fake_record(cfg, ny, side):
    # a record with the fingerprint an edge domain expects, via a zero-field recorder
    from asmfdtd.scenario import grating_materials, make_domain_grid, x_edges_tag
    from asmfdtd.sources import BoundaryRecorder
    _, jb, g_off, centres = edge_geometry(cfg, side, 2, 3, 2)
    g = make_domain_grid(cfg, ny)
    m = grating_materials(cfg, g, np.arange(ny) - g_off, centres)
    r = BoundaryRecorder(g, m, jb, side, x_edges_tag(cfg), g.n_steps)
    r.count = g.n_steps
    return r.result()


def test_edge_rejects_foreign_record(grating_case):
    cfg, _, inner = grating_case
    other = small_config("grating", n_steps=200)
    other.grid.pml_reflection = 1e-6
    with pytest.raises(ValueError, match="fingerprint"):
        build_edge(other, inner.record_high, "high", 2, 2, 2)


def _line(y, amp):
    return PhasorLine(np.asarray(y, float), np.asarray(amp, complex), 1.0)


def test_merge_tiles_and_prefers_inner_at_seam():
    dy = 0.5
    yb = 1.0
    inner = _line([-1.0, -0.5, 0, 0.5, 1.0], [1, 2, 3, 2, 1])
    low = _line([-2.0, -1.5, -1.0], [7, 8, 1.25])
    high = _line([1.0, 1.5, 2.0], [0.5, 9, 10])
    m = merge_fields(inner, low, high, yb, dy)
    assert np.allclose(m.line.positions, np.arange(-2.0, 2.01, 0.5))
    assert np.allclose(m.line.amplitude, [7, 8, 1, 2, 3, 2, 1, 9, 10])
    assert m.seam_jump["low"] == pytest.approx(0.25 / 10)
    assert m.seam_jump["high"] == pytest.approx(0.5 / 10)
    with pytest.raises(ValueError, match="gaps"):
        merge_fields(inner, _line([-2.5], [1]), high, yb, dy)
    with pytest.raises(ValueError):
        merge_fields(inner, _line([-1.3], [1]), high, yb, dy)


def test_convergence_metric_rectangle_rule():
    dy, d = 0.25, 1.0
    y = np.arange(-4, 4.01, dy)
    a = _line(y, np.zeros_like(y))
    b = _line(y, np.where(y >= 1.0, 2.0, 0.0))
    # window [1, 1 + 2d) holds 8 samples of |diff| = 2
    assert convergence_metric(a, b, 1.0, 2, d, dy, "high") == pytest.approx(np.sqrt(8 * 4 * dy))
    bl = _line(y, np.where(y <= -1.0, 1j, 0.0))
    assert convergence_metric(a, bl, 1.0, 2, d, dy, "low") == pytest.approx(np.sqrt(8 * dy))
    assert convergence_metric(b, b, 1.0, 2, d, dy) == 0.0
    with pytest.raises(ValueError, match="window"):
        convergence_metric(a, b, 1.0, 4, d, dy)
    with pytest.raises(ValueError):
        convergence_metric(a, b, 1.0, 0, d, dy)


def test_converge_loop_on_small_grating(grating_case):
    cfg, _, inner = grating_case
    rep = converge_loop(inner, cfg, threshold=0.0, schedule=(0, 2, 4), extra_p_tf=[1])
    assert [e.n_edge for e in rep.entries] == [0, 2, 4]
    assert rep.converged_at is None and "exhausted" in rep.stop_reason
    assert rep.reference == max(e.raw for e in rep.entries)
    assert max(e.normalized for e in rep.entries) == pytest.approx(1.0)
    alt = report_for_window(rep, 1)
    assert alt.p_tf == 1 and len(alt.entries) == 3
    stop = converge_loop(inner, cfg, threshold=1.0, schedule=(0, 2, 4))
    assert [e.n_edge for e in stop.entries] == [0] and stop.converged_at == 0
    par = converge_loop(inner, cfg, threshold=0.0, schedule=(0, 2, 4), workers=2, extra_p_tf=[1])
    assert [(e.n_edge, e.raw) for e in par.entries] == [(e.n_edge, e.raw) for e in rep.entries]
    with pytest.raises(ValueError):
        converge_loop(inner, cfg, schedule=())


def test_normalisation_uses_running_maximum(grating_case):
    cfg, _, inner = grating_case
    rep = converge_loop(inner, cfg, threshold=0.0, schedule=(0, 2, 4))
    for t in rep.trace:
        assert t["running_reference"] == max(x["raw"] for x in rep.trace if x["n_edge"] <= t["n_edge"])


def test_cost_counts_match_the_simulations():
    cfg = small_config(n_steps=40)
    plan = asm_plan_for(cfg)
    s = cost_summary(cfg, cfg.hybrid.n_edge, plan.n_simulations, workers=2)
    full = build_full(cfg, cfg.hybrid.n_inner + cfg.hybrid.n_edge).sim.run()
    assert s["full"] == full.update_count
    unit = GratingUnitCell(cfg).build(0.1).run()
    assert s["unit_cell"] == unit.update_count
    assert s["critical_path"] == s["unit_cell"] + s["edge"]
    assert s["finite_critical_path"] == -(-plan.n_simulations // 2) * s["unit_cell"] + s["edge"]
    assert domain_updates(10, 7, 3) == 8 * 5 * 3
    m = cost_summary(cfg, 2, 4, measured={"unit_cell": 1, "edge_high": 3, "edge_low": 2, "full": 8})
    assert m["measured_ratio"] == pytest.approx(0.5)


def test_report_entries_are_plain_data():
    r = ConvergenceReport([ConvergenceEntry(0, 1.0, 1.0, False)], 1, 1.0, 0.1, "x")
    assert r.converged_at is None


def test_scattered_field_residual_falls_with_edge_size(grating_case):
    cfg, _, inner = grating_case
    peaks = [run_edge(inner, cfg, "high", ne).sf_peak for ne in (0, 4)]
    assert peaks[1] < peaks[0]


def test_zero_record_gives_zero_edge_output(grating_case):
    from asmfdtd.hybrid import InnerEstimate
    from asmfdtd.sources import BoundaryRecord
    cfg, _, inner = grating_case
    z = InnerEstimate(inner.lines, BoundaryRecord.zeros_like(inner.record_high),
                      BoundaryRecord.zeros_like(inner.record_low), inner.y_boundary, inner.n_inner, inner.p_tf)
    r = run_edge(z, cfg, "low", 2)
    assert r.tf_peak == 0 and all(not p.amplitude.any() for p in r.phasors.values())
