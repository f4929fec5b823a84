"""File formats: phasor-line CSV, binary records and snapshots, JSON sidecars.

All binary formats are little-endian.  Writers are deterministic: identical
inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .analysis import PhasorLine
from .grid import FieldState
from .sources import BoundaryRecord

SNAPSHOT_MAGIC = b"PFDT"
RECORD_MAGIC = b"PREC"
FORMAT_VERSION = 1
LINE_COLUMNS = ["x_m", "re", "im"]

_SNAP_HEADER = struct.Struct("<4sIII")
_REC_HEADER = struct.Struct("<4sIIIddQ")


class FormatError(ValueError):
    pass


def write_csv(path, line: PhasorLine) -> Path:
    """Write a phasor line as ``x_m,re,im`` rows (shortest round-trip floats)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LINE_COLUMNS)
        for x, a in zip(line.positions, line.amplitude):
            w.writerow([repr(float(x)), repr(float(a.real)), repr(float(a.imag))])
    return path


def read_csv(path, frequency: float = 1.0) -> PhasorLine:
    rows = _read_rows(path, LINE_COLUMNS)
    if not rows:
        return PhasorLine(np.zeros(0), np.zeros(0, complex), frequency)
    arr = np.array(rows, dtype=float)
    return PhasorLine(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], frequency)


def _read_rows(path, columns):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{path}: empty file, expected header {columns}")
    if header != list(columns):
        raise FormatError(f"{path}: header {header} does not match {columns}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise FormatError(f"{path}:{lineno}: expected {len(columns)} columns, got {len(row)}")
        rows.append(row)
    return rows


def _footer(path):
    out = {}
    with open(path) as fh:
        for ln in fh:
            if ln.startswith("#"):
                for part in ln[1:].split():
                    if "=" in part:
                        k, v = part.split("=", 1)
                        out[k] = v
    return out


REPORT_COLUMNS = ["n_edge", "raw_metric", "normalized_metric", "converged"]


def write_report_csv(path, report) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for e in report.entries:
            w.writerow([e.n_edge, repr(float(e.raw)), repr(float(e.normalized)),
                        "true" if e.converged else "false"])
        fh.write(f"# threshold={report.threshold!r} p_tf={report.p_tf} "
                 f"stop_reason={report.stop_reason}\n")
    return path


def read_report_csv(path):
    from .hybrid import ConvergenceEntry, ConvergenceReport

    rows = _read_rows(path, REPORT_COLUMNS)
    foot = _footer(path)
    if "threshold" not in foot or "p_tf" not in foot:
        raise FormatError(f"{path}: missing threshold/p_tf footer")
    entries = []
    for r in rows:
        if r[3] not in ("true", "false"):
            raise FormatError(f"{path}: converged must be true/false, got {r[3]!r}")
        entries.append(ConvergenceEntry(int(r[0]), float(r[1]), float(r[2]), r[3] == "true"))
    raw = [e.raw for e in entries]
    return ConvergenceReport(entries, int(foot["p_tf"]), max(raw) if raw else 0.0,
                             float(foot["threshold"]), foot.get("stop_reason", ""))


def write_record(path, rec: BoundaryRecord) -> Path:
    steps, L = rec.e_samples.shape
    data = np.empty((steps, L, 4), "<f8")
    data[..., 0] = rec.e_samples.real
    data[..., 1] = rec.e_samples.imag
    data[..., 2] = rec.h_samples.real
    data[..., 3] = rec.h_samples.imag
    with open(path, "wb") as fh:
        fh.write(_REC_HEADER.pack(RECORD_MAGIC, FORMAT_VERSION, L, steps, rec.t_start, rec.dt,
                                  rec.grid_fingerprint))
        fh.write(data.tobytes())
    return Path(path)


def read_record(path, expected_fingerprint: int | None = None) -> BoundaryRecord:
    raw = Path(path).read_bytes()
    if len(raw) < _REC_HEADER.size:
        raise FormatError(f"{path}: truncated record header")
    magic, ver, L, steps, t_start, dt, fp = _REC_HEADER.unpack_from(raw)
    if magic != RECORD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if ver != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported record version {ver}")
    need = _REC_HEADER.size + 32 * L * steps
    if len(raw) != need:
        raise FormatError(f"{path}: length {len(raw)} bytes, expected {need}")
    if expected_fingerprint is not None and fp != expected_fingerprint:
        raise FormatError(f"{path}: grid fingerprint {fp:#x} != expected {expected_fingerprint:#x}")
    off = _REC_HEADER.size
    data = np.frombuffer(raw, "<f8", 4 * L * steps, off).reshape(steps, L, 4)
    e = data[..., 0] + 1j * data[..., 1]
    h = data[..., 2] + 1j * data[..., 3]
    return BoundaryRecord(np.arange(L, dtype=float), e, h, t_start, dt, fp)


def write_snapshot(path, state: FieldState) -> Path:
    nx, ny = state.ez.shape
    data = np.empty((nx, ny, 2), "<f8")
    data[..., 0] = state.ez.real
    data[..., 1] = state.ez.imag
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(SNAPSHOT_MAGIC, FORMAT_VERSION, nx, ny))
        fh.write(data.tobytes())
    return Path(path)


def read_snapshot(path) -> np.ndarray:
    """Return the stored Ez array (nx, ny) complex."""
    raw = Path(path).read_bytes()
    if len(raw) < _SNAP_HEADER.size:
        raise FormatError(f"{path}: truncated snapshot header")
    magic, ver, nx, ny = _SNAP_HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if ver != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported snapshot version {ver}")
    need = _SNAP_HEADER.size + 16 * nx * ny
    if len(raw) != need:
        raise FormatError(f"{path}: length {len(raw)} bytes, expected {need}")
    data = np.frombuffer(raw, "<f8", 2 * nx * ny, _SNAP_HEADER.size).reshape(nx, ny, 2)
    return data[..., 0] + 1j * data[..., 1]


def write_json(path, obj) -> Path:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return Path(path)


def read_json(path):
    return json.loads(Path(path).read_text())
