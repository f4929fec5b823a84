"""Soft current sources, tangential-field line recording and TF/SF replay.

Timing convention (H leads E by half a step).  During step ``n``:

* H is advanced from (n-1/2)dt to (n+1/2)dt using Ez at n*dt,
* Ez is advanced from n*dt to (n+1)dt using H at (n+1/2)dt; the soft source
  is evaluated at (n+1/2)dt.

A recorder therefore stores Ez(n*dt) and Hx((n+1/2)dt) as sample ``n``, and a
TF/SF replay uses sample ``n`` of each in exactly the same places.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import C0, EPS0, MU0, FieldState, GridSpec, MaterialMap


def gaussian_width_for(f_op: float, edge_factor: float = 2.0, edge_level: float = 0.1) -> float:
    """Pulse width whose amplitude spectrum falls to ``edge_level`` at ``edge_factor*f_op``.

    The spectrum of exp(-(t/w)^2) is proportional to exp(-(pi f w)^2).
    """
    if f_op <= 0:
        raise ValueError("operating frequency must be positive")
    return math.sqrt(-math.log(edge_level)) / (math.pi * edge_factor * f_op)


def gaussian_spectrum_ratio(width: float, f: float) -> float:
    """|G(f)| / |G(0)| for the baseband Gaussian of the given width."""
    return math.exp(-((math.pi * f * width) ** 2))


@dataclass(frozen=True)
class SourceSpec:
    """Additive Jz line source at one Ez node.

    ``waveform`` optionally replaces the Gaussian (used for steady-state
    runs); it maps time in seconds to a complex amplitude factor.
    """

    location: tuple[int, int]
    amplitude: complex = 1.0
    pulse_delay: float = 0.0
    pulse_width: float = 1.0
    component: str = "ez"
    waveform: Callable[[float], complex] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.component != "ez":
            raise ValueError(f"only Jz (ez) sources are supported, got {self.component!r}")
        if self.waveform is None:
            if not self.pulse_width > 0:
                raise ValueError("pulse_width must be positive")
            if self.pulse_delay < 3 * self.pulse_width * (1 - 1e-12):
                raise ValueError("pulse_delay must be at least 3 pulse widths")

    @classmethod
    def gaussian_for(cls, location, f_op: float, amplitude: complex = 1.0,
                     delay_widths: float = 4.0) -> "SourceSpec":
        w = gaussian_width_for(f_op)
        return cls(tuple(location), amplitude, delay_widths * w, w)

    def value(self, t: float) -> complex:
        if self.waveform is not None:
            return self.amplitude * self.waveform(t)
        return self.amplitude * math.exp(-(((t - self.pulse_delay) / self.pulse_width) ** 2))


def inject_soft_source(state: FieldState, src: SourceSpec, t: float, grid: GridSpec,
                       materials: MaterialMap) -> FieldState:
    i, j = src.location
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise ValueError(f"source location {src.location} outside the domain {grid.shape}")
    if materials.pec_mask[i, j]:
        raise ValueError(f"source location {src.location} lies on a PEC node")
    state.ez[i, j] += src.value(t) * grid.dt / (EPS0 * materials.eps_r[i, j])
    return state


def replay_start_offset(l: float) -> float:
    """Earliest time a wave from distance ``l`` can arrive in vacuum."""
    if l < 0:
        raise ValueError("distance must be nonnegative")
    return l / C0


def grid_fingerprint(grid: GridSpec, eps_line: np.ndarray, pec_line: np.ndarray,
                     x_edges: str, side: str) -> int:
    """64-bit digest of the x discretisation, line materials and record side."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Iddd", grid.nx, grid.dx, grid.dy, grid.dt))
    h.update(np.ascontiguousarray(eps_line, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(pec_line, dtype="u1").tobytes())
    h.update(x_edges.encode())
    h.update(side.encode())
    return int.from_bytes(h.digest(), "little")


@dataclass
class BoundaryRecord:
    """Ez on a constant-y line and Hx on the adjacent half-cell row, per step.

    ``line`` holds the x node indices of the samples (the whole row).

    Sample ``i`` belongs to step ``start_step + i`` where
    ``start_step = round(t_start / dt)``; earlier samples are zero.
    """

    line: np.ndarray
    e_samples: np.ndarray
    h_samples: np.ndarray
    t_start: float
    dt: float
    grid_fingerprint: int

    def __post_init__(self):
        self.line = np.asarray(self.line, dtype=float)
        self.e_samples = np.asarray(self.e_samples, dtype=complex)
        self.h_samples = np.asarray(self.h_samples, dtype=complex)
        if self.e_samples.shape != self.h_samples.shape:
            raise ValueError("e and h sample arrays differ in shape")
        if self.e_samples.ndim != 2 or self.e_samples.shape[1] != self.line.size:
            raise ValueError("samples must be (steps, line length)")
        if self.t_start < 0:
            raise ValueError("t_start must be nonnegative")

    @property
    def steps(self) -> int:
        return self.e_samples.shape[0]

    @property
    def start_step(self) -> int:
        return int(round(self.t_start / self.dt))

    @classmethod
    def zeros_like(cls, other: "BoundaryRecord") -> "BoundaryRecord":
        return cls(other.line, np.zeros_like(other.e_samples), np.zeros_like(other.h_samples),
                   other.t_start, other.dt, other.grid_fingerprint)

    def __add__(self, other: "BoundaryRecord") -> "BoundaryRecord":
        _check_compatible(self, other)
        return BoundaryRecord(self.line, self.e_samples + other.e_samples,
                              self.h_samples + other.h_samples, self.t_start, self.dt,
                              self.grid_fingerprint)

    def scaled(self, c: complex) -> "BoundaryRecord":
        return BoundaryRecord(self.line, self.e_samples * c, self.h_samples * c, self.t_start,
                              self.dt, self.grid_fingerprint)


def _check_compatible(a: BoundaryRecord, b: BoundaryRecord) -> None:
    if a.e_samples.shape != b.e_samples.shape:
        raise ValueError(f"record lengths differ: {a.e_samples.shape} vs {b.e_samples.shape}")
    if a.dt != b.dt or a.t_start != b.t_start or a.grid_fingerprint != b.grid_fingerprint:
        raise ValueError("records differ in dt, t_start or grid fingerprint")


class BoundaryRecorder:
    """Collects Ez at ``row`` and Hx at ``row - 1/2`` (side "high") or ``row + 1/2`` ("low").

    "high" serves a replay whose total-field side lies at larger y; "low" the
    mirror case.
    """

    def __init__(self, grid: GridSpec, materials: MaterialMap, row: int, side: str,
                 x_edges: str, n_steps: int, t_start: float = 0.0):
        if side not in ("high", "low"):
            raise ValueError(f"side must be 'high' or 'low', got {side!r}")
        self.row = row
        self.side = side
        self.hx_row = row - 1 if side == "high" else row
        if not (0 <= self.hx_row < grid.ny - 1):
            raise ValueError(f"record row {row} has no adjacent Hx row on side {side}")
        self.dt = grid.dt
        self.t_start = t_start
        self.start_step = int(round(t_start / grid.dt))
        self.fingerprint = grid_fingerprint(grid, materials.eps_r[:, row],
                                            materials.pec_mask[:, row], x_edges, side)
        self.line = np.arange(grid.nx, dtype=float)
        n = max(n_steps - self.start_step, 0)
        self.e = np.zeros((n, grid.nx), complex)
        self.h = np.zeros((n, grid.nx), complex)
        self.count = 0

    def record_e(self, state: FieldState, step: int) -> None:
        i = step - self.start_step
        if 0 <= i < self.e.shape[0]:
            self.e[i] = state.ez[:, self.row]

    def record_h(self, state: FieldState, step: int) -> None:
        i = step - self.start_step
        if 0 <= i < self.h.shape[0]:
            self.h[i] = state.hx[:, self.hx_row]
            self.count = i + 1

    def result(self) -> BoundaryRecord:
        return BoundaryRecord(self.line, self.e[:self.count], self.h[:self.count], self.t_start,
                              self.dt, self.fingerprint)


def record_step(state: FieldState, recorder: BoundaryRecorder, step: int, half: str) -> BoundaryRecorder:
    """Store the Ez (``half="e"``, before the H update) or Hx half of sample ``step``."""
    if half == "e":
        recorder.record_e(state, step)
    elif half == "h":
        recorder.record_h(state, step)
    else:
        raise ValueError(f"half must be 'h' or 'e', got {half!r}")
    return recorder


@dataclass
class TfsfSpec:
    boundary_row: int
    tf_side: str
    record: BoundaryRecord

    def __post_init__(self):
        if self.tf_side not in ("high", "low"):
            raise ValueError(f"tf_side must be 'high' or 'low', got {self.tf_side!r}")


class TfsfSource:
    """One-dimensional TF/SF line spanning the full x extent.

    For ``tf_side == "high"`` the Ez row ``boundary_row`` and everything above
    it is total field; the Hx row just below is scattered field.
    """

    def __init__(self, spec: TfsfSpec, grid: GridSpec, materials: MaterialMap):
        rec = spec.record
        if abs(rec.dt - grid.dt) > 1e-12 * grid.dt:
            raise ValueError(f"record dt {rec.dt!r} differs from grid dt {grid.dt!r}")
        if rec.line.size != grid.nx:
            raise ValueError(f"record line has {rec.line.size} nodes, grid has nx={grid.nx}")
        j = spec.boundary_row
        if not (1 <= j <= grid.ny - 2):
            raise ValueError(f"TF/SF row {j} must lie strictly inside the domain")
        if rec.start_step + rec.steps < grid.n_steps:
            raise ValueError(
                f"record exhausted: covers {rec.start_step + rec.steps} steps, run needs {grid.n_steps}")
        self.spec = spec
        self.grid = grid
        self.row = j
        self.hx_row = j - 1 if spec.tf_side == "high" else j
        # high: hx[j-1] += ch*ez_inc, ez[j] += ce*hx_inc; low: both subtract
        sgn = 1.0 if spec.tf_side == "high" else -1.0
        self.ch = sgn * grid.dt / (MU0 * grid.dy)
        self.ce = sgn * grid.dt / (EPS0 * materials.eps_r[:, j] * grid.dy)

    def fingerprint_matches(self, materials: MaterialMap, x_edges: str) -> bool:
        fp = grid_fingerprint(self.grid, materials.eps_r[:, self.row], materials.pec_mask[:, self.row],
                              x_edges, self.spec.tf_side)
        return fp == self.spec.record.grid_fingerprint

    def _index(self, step: int) -> int | None:
        rec = self.spec.record
        i = step - rec.start_step
        if i < 0:
            return None
        if i >= rec.steps:
            raise RuntimeError(f"record exhausted at step {step}")
        return i

    def correct_h(self, state: FieldState, step: int) -> None:
        i = self._index(step)
        if i is not None:
            state.hx[:, self.hx_row] += self.ch * self.spec.record.e_samples[i]

    def correct_e(self, state: FieldState, step: int) -> None:
        i = self._index(step)
        if i is not None:
            upd = self.ce * self.spec.record.h_samples[i]
            state.ez[1:-1, self.row] += upd[1:-1]


def tfsf_apply(state: FieldState, source: TfsfSource, step: int, half: str) -> FieldState:
    """Functional wrapper applying the H (``half="h"``) or E correction for ``step``."""
    if half == "h":
        source.correct_h(state, step)
    elif half == "e":
        source.correct_e(state, step)
    else:
        raise ValueError(f"half must be 'h' or 'e', got {half!r}")
    return state
