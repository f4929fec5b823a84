"""Scenario configuration: dataclasses, profiles and TOML loading.

Lengths given in cells are counts of Yee cells; ``period_cells`` is the
number of cells per structure period along y.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .boundaries import EDGES
from .grid import C0


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    f_op: float = 12e9
    period: float = 1.25e-3
    period_cells: int = 2
    courant: float = 0.9
    n_steps: int = 1024
    pml_thickness: int = 20
    pml_order: float = 3.0
    pml_reflection: float = 1e-8

    @property
    def cell(self) -> float:
        return self.period / self.period_cells

    @property
    def wavelength(self) -> float:
        return C0 / self.f_op


@dataclass
class LayoutConfig:
    """Placement along x (cells) and end space along y."""

    x_margin: int = 8
    x_margin_after: int | None = None
    source_to_grating: int = 10
    probe_offsets: tuple[int, ...] = (2, 40)
    end_space: int = 80
    sf_gap_periods: int = 1


@dataclass
class StructureConfig:
    kind: str = "grating"
    strip_half_width: int = 0


@dataclass
class SourceConfig:
    amplitude: float = 1.0
    delay_widths: float = 4.0
    spectral_edge: float = 2.0


@dataclass
class AsmConfig:
    t0: float | None = None
    a: float | None = None
    order: int | None = None
    symmetric: bool = True


@dataclass
class HybridConfig:
    """Inner half-width, edge size, SF buffer and metric window, in periods."""

    n_inner: int = 10
    n_edge: int = 10
    sf_buffer_cells: int = 10
    p_tf: int = 10
    threshold: float = 0.05
    n_edge_schedule: tuple[int, ...] = (0, 10, 30, 50, 70, 90)
    sampling_offsets: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("n_inner", "n_edge", "sf_buffer_cells"):
            if getattr(self, name) < 0:
                raise ConfigError(f"hybrid.{name} must be >= 0")
        if self.p_tf < 1:
            raise ConfigError("hybrid.p_tf must be >= 1")
        if not (0 <= self.threshold <= 1):
            raise ConfigError("hybrid.threshold must lie in [0, 1]")
        s = list(self.n_edge_schedule)
        if any(b <= a for a, b in zip(s, s[1:])) or any(v < 0 for v in s):
            raise ConfigError("hybrid.n_edge_schedule must be strictly increasing and >= 0")


DEFAULT_BOUNDARIES = {"xlo": "pml", "xhi": "pml", "ylo": "pml", "yhi": "pml"}


@dataclass
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    structure: StructureConfig = field(default_factory=StructureConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    asm: AsmConfig = field(default_factory=AsmConfig)
    hybrid: HybridConfig = field(default_factory=HybridConfig)
    boundaries: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDARIES))
    half_domain: bool = False
    output_dir: str = "out"

    def validate(self) -> "ScenarioConfig":
        g, lay = self.grid, self.layout
        if g.f_op <= 0 or g.period <= 0:
            raise ConfigError("grid.f_op and grid.period must be positive")
        if g.period_cells < 2 or g.period_cells % 2:
            raise ConfigError("grid.period_cells must be even and >= 2")
        if not (0 < g.courant <= 1):
            raise ConfigError("grid.courant must lie in (0, 1]")
        if g.n_steps < 1:
            raise ConfigError("grid.n_steps must be >= 1")
        if g.pml_thickness < 1 or g.pml_order < 1 or not (0 < g.pml_reflection < 1):
            raise ConfigError("invalid PML parameters")
        if self.structure.kind not in ("grating", "vacuum"):
            raise ConfigError(f"structure.kind must be 'grating' or 'vacuum', got {self.structure.kind!r}")
        if not (0 <= self.structure.strip_half_width < g.period_cells // 2):
            raise ConfigError("structure.strip_half_width must leave a gap between strips")
        if lay.x_margin_after is not None and lay.x_margin_after < 1:
            raise ConfigError("layout.x_margin_after must be positive")
        if lay.x_margin < 1 or lay.source_to_grating < 1 or lay.end_space < 1 or lay.sf_gap_periods < 0:
            raise ConfigError("layout margins must be positive")
        if not lay.probe_offsets or any(p < 1 for p in lay.probe_offsets):
            raise ConfigError("layout.probe_offsets must be positive cell counts")
        if set(self.boundaries) != set(EDGES):
            raise ConfigError(f"boundaries must name exactly the edges {EDGES}")
        for e, kind in self.boundaries.items():
            if kind not in ("pec", "pml", "mur", "pmc"):
                raise ConfigError(f"boundary {e}={kind!r}: finite-structure runs allow pec|pml|mur|pmc"
                                  " (periodic edges are set up by the sweep itself)")
            if kind == "pmc" and e[0] != "y":
                raise ConfigError("pmc is only allowed on y edges")
        if self.half_domain and self.boundaries["ylo"] != "pmc":
            raise ConfigError("half_domain requires boundaries.ylo = 'pmc'")
        if self.asm.order is not None and self.asm.order < 1:
            raise ConfigError("asm.order must be >= 1")
        if self.asm.t0 is not None and self.asm.t0 < 0:
            raise ConfigError("asm.t0 must be >= 0")
        if self.asm.a is not None and self.asm.a < 0:
            raise ConfigError("asm.a must be >= 0")
        if self.source.delay_widths < 3:
            raise ConfigError("source.delay_widths must be >= 3")
        return self


def desk_profile() -> ScenarioConfig:
    return ScenarioConfig().validate()


def paper_profile() -> ScenarioConfig:
    """lambda/160 resolution, 40-cell PMLs, 2^12 steps, 5 cm end space."""
    cfg = ScenarioConfig(
        grid=GridConfig(period_cells=8, n_steps=4096, pml_thickness=40),
        layout=LayoutConfig(x_margin=31, x_margin_after=49, source_to_grating=40, probe_offsets=(8, 160),
                            end_space=320, sf_gap_periods=1),
        structure=StructureConfig(strip_half_width=2),
        hybrid=HybridConfig(n_inner=29, n_edge=30),
    )
    return cfg.validate()


PROFILES = {"desk": desk_profile, "paper": paper_profile}


def _merge(obj, data: dict, where: str):
    if not dataclasses.is_dataclass(obj):
        raise ConfigError(f"{where} is not a table")
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, val in data.items():
        if key not in names:
            raise ConfigError(f"unknown key {where}.{key}")
        cur = getattr(obj, key)
        if dataclasses.is_dataclass(cur):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}.{key} must be a table")
            _merge(cur, val, f"{where}.{key}")
        elif isinstance(cur, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}.{key} must be a table")
            cur.update(val)
        else:
            if isinstance(cur, tuple):
                val = tuple(val) if isinstance(val, (list, tuple)) else (val,)
            setattr(obj, key, val)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``section.key=value`` strings (values parsed as TOML literals)."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        data: dict = {}
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _parse_value(text.strip())
        _merge(cfg, data, "config")
    return cfg


def load_config(path: str | Path | None = None, profile: str = "desk", overrides=()) -> ScenarioConfig:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    cfg = PROFILES[profile]()
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}")
        _merge(cfg, data, "config")
    apply_overrides(cfg, overrides)
    try:
        # rebuild dataclasses so their own checks run on the merged values
        cfg.hybrid = HybridConfig(**dataclasses.asdict(cfg.hybrid))
    except TypeError as exc:
        raise ConfigError(str(exc))
    return cfg.validate()


def config_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)
