import numpy as np
import pytest

from asmfdtd.config import ScenarioConfig, GridConfig, LayoutConfig, HybridConfig


def small_config(kind="grating", n_steps=160, **hybrid):
    """A few-second scenario: 6-cell PMLs, short runs, small structure."""
    h = dict(n_inner=2, n_edge=2, sf_buffer_cells=2, p_tf=2, n_edge_schedule=(0, 2, 4))
    h.update(hybrid)
    cfg = ScenarioConfig(
        grid=GridConfig(n_steps=n_steps, pml_thickness=6),
        layout=LayoutConfig(x_margin=3, source_to_grating=4, probe_offsets=(2, 6), end_space=8),
        hybrid=HybridConfig(**h),
    )
    cfg.structure.kind = kind
    return cfg.validate()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Log one acceptance line; shown in the terminal summary."""
    def log(label, ok, detail):
        request.config._acceptance_lines.append(f"criterion {label:<4} {'INFO' if ok is None else 'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for ln in lines:
            terminalreporter.write_line(ln)
