"""Single-frequency Fourier analysis of probe data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ProbeSeries:
    """Ez samples at fixed positions, one row per time step (sample n at n*dt)."""

    positions: np.ndarray
    values: np.ndarray
    dt: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2 or self.values.shape[1] != self.positions.size:
            raise ValueError(f"values must be (steps, {self.positions.size}), got {self.values.shape}")
        if self.positions.size > 1 and not np.all(np.diff(self.positions) > 0):
            raise ValueError("probe positions must be strictly increasing")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class PhasorLine:
    positions: np.ndarray
    amplitude: np.ndarray
    frequency: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=complex)
        if self.amplitude.shape != self.positions.shape:
            raise ValueError("amplitude and positions differ in shape")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not np.all(np.isfinite(self.amplitude)):
            raise ValueError("phasor amplitudes must be finite")


def _check_nyquist(f: float, dt: float) -> None:
    if f <= 0:
        raise ValueError("frequency must be positive")
    if f >= 0.5 / dt:
        raise ValueError(f"frequency {f} Hz is at or above the Nyquist limit {0.5 / dt} Hz")


def dft_at(series: ProbeSeries, f: float) -> PhasorLine:
    """Single-bin DFT: sum_n values[n] exp(-j 2 pi f n dt) dt."""
    _check_nyquist(f, series.dt)
    n = np.arange(series.values.shape[0])
    kernel = np.exp(-2j * np.pi * f * n * series.dt) * series.dt
    return PhasorLine(series.positions, kernel @ series.values, f)


class DftAccumulator:
    """Running single-bin DFT of a probe, updated once per step."""

    def __init__(self, positions: np.ndarray, f: float, dt: float):
        _check_nyquist(f, dt)
        self.positions = np.asarray(positions, dtype=float)
        self.f = f
        self.dt = dt
        self.acc = np.zeros(self.positions.size, complex)
        self.n = 0

    def add(self, values: np.ndarray) -> None:
        self.acc += values * (np.exp(-2j * np.pi * self.f * self.n * self.dt) * self.dt)
        self.n += 1

    def result(self) -> PhasorLine:
        return PhasorLine(self.positions, self.acc.copy(), self.f)


def normalize_line(line: PhasorLine) -> PhasorLine:
    """Divide by the peak magnitude so the largest |amplitude| is 1."""
    peak = np.max(np.abs(line.amplitude)) if line.amplitude.size else 0.0
    if peak == 0:
        raise ValueError("cannot normalise an all-zero line")
    return PhasorLine(line.positions, line.amplitude / peak, line.frequency)


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||."""
    a = np.asarray(a)
    b = np.asarray(b)
    den = np.linalg.norm(b)
    if den == 0:
        raise ValueError("reference is identically zero")
    return float(np.linalg.norm(a - b) / den)
