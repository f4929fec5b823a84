import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asmfdtd.boundaries import (BlochPhase, Cpml, Mur1, PmlSpec, apply_pbc_e, apply_pbc_h, apply_pmc)
from asmfdtd.grid import FieldState, MaterialMap, make_grid
from asmfdtd.simulation import ProbeLine, Simulation, check_edges
from asmfdtd.sources import SourceSpec

DX = 1e-3


@given(st.floats(-1e4, 1e4), st.floats(1e-4, 1e-1), st.integers(-5, 5))
def test_bloch_phase_is_unit_and_zone_folded(k, d, shift):
    a = BlochPhase("y", k, d)
    b = BlochPhase("y", k + 2 * math.pi / d * shift, d)
    assert abs(abs(a.phase) - 1) < 1e-12
    assert -math.pi / d <= a.k < math.pi / d
    assert abs(a.phase - b.phase) < 1e-6
    assert abs(a.phase * a.inverse_phase - 1) < 1e-12


def test_bloch_phase_values():
    d = 1.25e-3
    b = BlochPhase("y", math.pi / (2 * d), d)
    assert b.phase == pytest.approx(-1j)
    assert b.inverse_phase == pytest.approx(1j)
    assert BlochPhase("y", math.pi / d, d).k == pytest.approx(-math.pi / d)
    with pytest.raises(ValueError):
        BlochPhase("y", 0.0, 0.0)


def test_pbc_rejects_non_periodic_axis():
    g = make_grid(4, 4, DX, DX, 0.9, 1)
    s = FieldState.zeros(g)
    with pytest.raises(ValueError):
        apply_pbc_h(s, BlochPhase("x", 0.0, DX))
    with pytest.raises(ValueError):
        apply_pbc_e(s, BlochPhase("x", 0.0, DX))


def test_pbc_ghost_and_edge_rows():
    g = make_grid(4, 5, DX, DX, 0.9, 1)
    s = FieldState.zeros(g)
    s.hx[:, 0] = np.arange(4) + 1
    s.ez[:, -1] = 2.0
    b = BlochPhase("y", math.pi / (2 * 4 * DX), 4 * DX)
    apply_pbc_h(s, b)
    apply_pbc_e(s, b)
    assert np.allclose(s.hx_ghost_hi, (np.arange(4) + 1) * -1j)
    assert np.allclose(s.ez[:, 0], 2j)


def test_check_edges_rules():
    base = {"xlo": "pml", "xhi": "pml", "ylo": "pec", "yhi": "pec"}
    pml = PmlSpec(4)
    check_edges(base, None, pml)
    with pytest.raises(ValueError):
        check_edges({**base, "xlo": "periodic", "xhi": "periodic"}, BlochPhase("y", 0, DX), pml)
    with pytest.raises(ValueError):
        check_edges({**base, "ylo": "periodic"}, BlochPhase("y", 0, DX), pml)
    with pytest.raises(ValueError):
        check_edges({**base, "ylo": "periodic", "yhi": "periodic"}, None, pml)
    with pytest.raises(ValueError):
        check_edges({**base, "xlo": "pmc"}, None, pml)
    with pytest.raises(ValueError):
        check_edges(base, None, None)
    with pytest.raises(ValueError):
        check_edges({"xlo": "pec", "xhi": "pec", "ylo": "pec"}, None, None)
    with pytest.raises(ValueError):
        check_edges({**base, "yhi": "sponge"}, None, pml)


def test_pmc_only_on_y_edges():
    g = make_grid(4, 4, DX, DX, 0.9, 1)
    with pytest.raises(ValueError):
        apply_pmc(FieldState.zeros(g), "xlo")


def _pec_box_sim(ny, src_rows, amplitudes, edges_y=("pec", "pec"), bloch=None, n=200, nx=30):
    g = make_grid(nx, ny, DX, DX, 0.9, n)
    w = 10 * g.dt
    srcs = [SourceSpec((8, j), a, 4 * w, w) for j, a in zip(src_rows, amplitudes)]
    edges = {"xlo": "pec", "xhi": "pec", "ylo": edges_y[0], "yhi": edges_y[1]}
    return Simulation(g, MaterialMap.vacuum(g), edges, bloch=bloch, sources=srcs)


@settings(max_examples=8, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_bloch_cell_matches_phased_supercell(kd):
    # one period with Bloch edges equals the first period of a three-period
    # supercell whose sources carry the Bloch progression e^{-jkmd}
    P = 6
    d = P * DX
    k = kd / d
    unit = _pec_box_sim(P + 1, [2], [1.0], ("periodic", "periodic"), BlochPhase("y", k, d)).run()
    amps = [np.exp(-1j * k * m * d) for m in range(3)]
    sup = _pec_box_sim(3 * P + 1, [2, 2 + P, 2 + 2 * P], amps, ("periodic", "periodic"),
                       BlochPhase("y", k, 3 * d)).run()
    ref = sup.state.ez[:, :P + 1]
    assert np.abs(unit.state.ez - ref).max() <= 1e-12 * np.abs(ref).max()
    # next period carries one more Bloch factor
    nxt = sup.state.ez[:, P:2 * P + 1]
    assert np.abs(unit.state.ez * np.exp(-1j * k * d) - nxt).max() <= 1e-12 * np.abs(ref).max()


def test_pmc_half_domain_matches_symmetric_full_domain():
    ny_half = 21
    full = _pec_box_sim(2 * ny_half - 1, [ny_half - 1], [1.0], n=150).run()
    half = _pec_box_sim(ny_half, [0], [1.0], ("pmc", "pec"), n=150).run()
    ref = full.state.ez[:, ny_half - 1:]
    assert np.abs(half.state.ez - ref).max() <= 1e-12 * np.abs(ref).max()


def test_pml_spec_validation():
    for kw in (dict(thickness=0), dict(grading_order=0.5), dict(target_reflection=0.0),
               dict(target_reflection=1.0)):
        with pytest.raises(ValueError):
            PmlSpec(**kw)


def test_pml_thicker_than_half_domain_rejected():
    g = make_grid(20, 20, DX, DX, 0.9, 1)
    with pytest.raises(ValueError):
        Cpml(g, PmlSpec(10), ["xlo"])
    Cpml(g, PmlSpec(9), ["xlo", "xhi"])


def _quasi_1d(nx, kind, T, steps=900, src=20, probe=150):
    # y-invariant plane wave via a k = 0 periodic strip three nodes tall
    g = make_grid(nx, 3, DX, DX, 0.9, steps)
    w = 12 * g.dt
    srcs = [SourceSpec((src, j), 1.0, 4 * w, w) for j in (1, 2)]
    edges = {"xlo": "pec", "xhi": kind, "ylo": "periodic", "yhi": "periodic"}
    sim = Simulation(g, MaterialMap.vacuum(g), edges, pml=PmlSpec(T), bloch=BlochPhase("y", 0.0, 2 * DX),
                     sources=srcs, probes=[ProbeLine("p", "x", 1, probe, probe + 1)])
    return sim.run().series("p").values[:, 0]


@pytest.fixture(scope="module")
def reflection_reference():
    return _quasi_1d(1200, "pec", 10)


@pytest.mark.parametrize("kind,T,limit_db", [("pml", 40, -120), ("pml", 10, -80), ("mur", 10, -50)])
def test_absorber_reflection(reflection_reference, kind, T, limit_db):
    ref = reflection_reference
    got = _quasi_1d(200, kind, T)
    refl_db = 10 * np.log10(np.sum(np.abs(got - ref) ** 2) / np.sum(np.abs(ref) ** 2))
    assert refl_db < limit_db


def test_pml_accumulators_idle_until_field_arrives():
    g = make_grid(60, 60, DX, DX, 0.9, 40)
    w = 4 * g.dt
    sim = Simulation(g, MaterialMap.vacuum(g), {e: "pml" for e in ("xlo", "xhi", "ylo", "yhi")},
                     pml=PmlSpec(8), sources=[SourceSpec((30, 30), 1.0, 3 * w, w)])
    sim.run(15)
    assert sim.cpml.accumulators_zero()
    sim.run(25)
    assert not sim.cpml.accumulators_zero()


def test_pml_box_drains_energy():
    g = make_grid(60, 60, DX, DX, 0.9, 600)
    w = 6 * g.dt
    sim = Simulation(g, MaterialMap.vacuum(g), {e: "pml" for e in ("xlo", "xhi", "ylo", "yhi")},
                     pml=PmlSpec(10), sources=[SourceSpec((30, 30), 1.0, 4 * w, w)])
    sim.run(60)
    peak = np.abs(sim.state.ez).max()
    sim.run(540)
    assert np.abs(sim.state.ez).max() < 1e-3 * peak


def test_mur_box_absorbs_and_handles_corners():
    g = make_grid(60, 60, DX, DX, 0.9, 600)
    w = 6 * g.dt
    sim = Simulation(g, MaterialMap.vacuum(g), {e: "mur" for e in ("xlo", "xhi", "ylo", "yhi")},
                     sources=[SourceSpec((30, 30), 1.0, 4 * w, w)])
    sim.run(60)
    peak = np.abs(sim.state.ez).max()
    sim.run(540)
    assert np.isfinite(sim.state.ez).all()
    assert np.abs(sim.state.ez).max() < 0.05 * peak


def test_mur_apply_needs_save():
    g = make_grid(10, 10, DX, DX, 0.9, 1)
    with pytest.raises(RuntimeError):
        Mur1(g, ["xlo"]).apply(FieldState.zeros(g))
    with pytest.raises(ValueError):
        Mur1(g, ["top"])
