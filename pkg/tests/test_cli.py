import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from asmfdtd import io
from asmfdtd.cli import main
from asmfdtd.config import ConfigError, apply_overrides, desk_profile, load_config, paper_profile

SMALL = """
output_dir = "unused"
[grid]
n_steps = 160
pml_thickness = 6
[layout]
x_margin = 3
source_to_grating = 4
probe_offsets = [2, 6]
end_space = 8
[hybrid]
n_inner = 2
n_edge = 2
sf_buffer_cells = 2
p_tf = 2
n_edge_schedule = [0, 2, 4]
"""


@pytest.fixture
def small_toml(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run(cfg, out, *args):
    return main([args[0], "--config", str(cfg), "--out", str(out), *args[1:]])


def tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_profiles():
    d, p = desk_profile(), paper_profile()
    assert d.grid.period_cells == 2 and d.grid.n_steps == 1024
    assert p.grid.period_cells == 8 and p.grid.n_steps == 4096 and p.grid.pml_thickness == 40
    assert p.layout.end_space * p.grid.cell == pytest.approx(0.05)
    assert d.grid.wavelength / d.grid.cell == pytest.approx(40, rel=1e-3)


def test_config_loading_and_overrides(small_toml):
    cfg = load_config(small_toml, "desk", ["hybrid.p_tf=1", "structure.kind='vacuum'"])
    assert cfg.grid.n_steps == 160 and cfg.hybrid.p_tf == 1 and cfg.structure.kind == "vacuum"
    assert cfg.layout.probe_offsets == (2, 6)
    for bad in (["hybrid.nope=1"], ["hybrid.p_tf"], ["hybrid.p_tf=0"], ["grid.courant=1.5"],
                ["boundaries.xlo='periodic'"], ["boundaries.xlo='pmc'"], ["half_domain=true"],
                ["hybrid.n_edge_schedule=[3, 1]"]):
        with pytest.raises(ConfigError):
            load_config(small_toml, "desk", bad)
    with pytest.raises(ConfigError):
        load_config(small_toml.with_name("missing.toml"))
    with pytest.raises(ConfigError):
        load_config(None, "huge")
    cfg = apply_overrides(desk_profile(), ["boundaries.ylo='pmc'", "half_domain=true"]).validate()
    assert cfg.half_domain


def test_config_errors_exit_2(small_toml, tmp_path):
    out = tmp_path / "o"
    assert run(small_toml, out, "full", "--set", "grid.courant=2") == 2
    assert run(small_toml, out, "full", "--workers", "0") == 2
    assert run(small_toml, out, "converge", "--set", "hybrid.n_edge_schedule=[]") == 2
    assert run(small_toml, out, "edge", "--n-edge", "-1") == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid\n")
    assert run(bad, out, "full") == 2
    # nothing was simulated or written before validation failed
    assert not (out / "full").exists()


def test_missing_prerequisites_exit_4(small_toml, tmp_path):
    out = tmp_path / "o"
    assert run(small_toml, out, "edge") == 4
    assert run(small_toml, out, "merge") == 4
    assert run(small_toml, out, "converge") == 4
    assert run(small_toml, out, "dft", "--series", str(tmp_path / "none.series.npy")) == 4
    assert run(small_toml, out, "sweep", "--workers", "1") == 0
    # sweep present but edges missing
    assert run(small_toml, out, "merge") == 4


def test_full_pipeline_outputs(small_toml, tmp_path):
    out = tmp_path / "o"
    assert run(small_toml, out, "full") == 0
    f = out / "full"
    line = io.read_csv(f / "probe_6.csv")
    assert line.positions.size > 10 and np.abs(line.amplitude).max() > 0
    counts = io.read_json(f / "counts.json")
    assert counts["update_count"] == (counts["nx"] - 2) * (counts["ny"] - 2) * 160
    ez = io.read_snapshot(f / "snapshot.pfdt")
    assert ez.shape == (counts["nx"], counts["ny"])
    assert run(small_toml, out, "dft", "--series", str(f / "probe_6.series.npy")) == 0
    again = io.read_csv(next(out.glob("probe_6.dft_*.csv")))
    assert np.allclose(again.amplitude, line.amplitude, rtol=1e-12, atol=1e-30)

    assert run(small_toml, out, "sweep", "--workers", "1") == 0
    manifest = (out / "sweep" / "manifest.csv").read_text().splitlines()
    plan = io.read_json(out / "sweep" / "plan.json")
    assert manifest[0] == "index,k,probe_2,probe_6,rec_hi,rec_lo"
    assert len(manifest) - 1 == len(plan["k"])
    assert run(small_toml, out, "edge", "--workers", "1") == 0
    diag = io.read_json(out / "edge_high_2" / "diagnostics.json")
    assert diag["sf_to_tf"] < 1 and diag["n_edge"] == 2
    assert run(small_toml, out, "merge") == 0
    merged = io.read_csv(out / "merge_2" / "probe_6.csv")
    assert np.all(np.diff(merged.positions) > 0)
    assert set(io.read_json(out / "merge_2" / "seam.json")["seam_jump_normalized"]) == {"probe_2", "probe_6"}
    assert run(small_toml, out, "converge", "--workers", "1") == 0
    rep = io.read_report_csv(out / "converge" / "report.csv")
    assert [e.n_edge for e in rep.entries][0] == 0
    assert (out / "converge" / "report_p1.csv").exists()
    assert run(small_toml, out, "cost", "--workers", "2") == 0
    assert io.read_json(out / "cost.json")["ratio"] > 0


def test_pmc_half_domain_full_run(small_toml, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(small_toml, a, "full", "--set", "layout.end_space=120") == 0
    assert run(small_toml, b, "full", "--set", "layout.end_space=120", "--set", "boundaries.ylo='pmc'",
               "--set", "half_domain=true") == 0
    full = io.read_csv(a / "full" / "probe_6.csv")
    half = io.read_csv(b / "full" / "probe_6.csv")
    sel = full.positions >= -1e-12
    assert np.allclose(full.positions[sel], half.positions)
    assert np.abs(full.amplitude[sel] - half.amplitude).max() <= 1e-9 * np.abs(full.amplitude).max()


def test_resume_reruns_only_missing_member(small_toml, tmp_path):
    out = tmp_path / "o"
    assert run(small_toml, out, "sweep", "--workers", "1") == 0
    sweep = out / "sweep"
    before = {p.name: p.stat().st_mtime_ns for p in sweep.glob("k*")}
    victim = sweep / "k0003.rec_hi.prec"
    data = victim.read_bytes()
    victim.unlink()
    assert run(small_toml, out, "sweep", "--workers", "1") == 0
    assert victim.read_bytes() == data
    after = {p.name: p.stat().st_mtime_ns for p in sweep.glob("k*")}
    changed = {n for n in before if after[n] != before[n]}
    assert changed == {"k0003.rec_hi.prec", "k0003.rec_lo.prec", "k0003.probe_2.npy", "k0003.probe_6.npy"}


def test_corrupt_member_is_a_simulation_failure(small_toml, tmp_path):
    out = tmp_path / "o"
    assert run(small_toml, out, "sweep", "--workers", "1") == 0
    p = out / "sweep" / "k0001.rec_hi.prec"
    p.write_bytes(p.read_bytes()[:-16])
    assert run(small_toml, out, "edge", "--side", "high") == 3


def test_outputs_identical_across_worker_counts(small_toml, tmp_path):
    trees = []
    for w in ("1", "3"):
        out = tmp_path / f"w{w}"
        for cmd in ("sweep", "edge", "merge", "converge"):
            assert run(small_toml, out, cmd, "--workers", w) == 0
        trees.append(tree(out))
    assert trees[0].keys() == trees[1].keys()
    diff = [k for k in trees[0] if trees[0][k] != trees[1][k]]
    assert diff == []


def test_single_member_sweep(small_toml, tmp_path):
    out = tmp_path / "o"
    assert run(small_toml, out, "sweep", "--set", "asm.order=1", "--set", "asm.symmetric=false") == 0
    assert len((out / "sweep" / "manifest.csv").read_text().splitlines()) == 2


def test_module_entry_point(small_toml, tmp_path):
    r = subprocess.run([sys.executable, "-m", "asmfdtd", "cost", "--config", str(small_toml),
                        "--out", str(tmp_path), "--workers", "4"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "critical path" in r.stdout
    r = subprocess.run([sys.executable, "-m", "asmfdtd", "full", "--config", str(small_toml),
                        "--set", "grid.n_steps=0"], capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 2 and "config error" in r.stderr
