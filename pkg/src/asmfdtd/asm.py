"""Array scanning: quadrature planning, unit-cell sweeps and image removal.

A unit-cell run with Bloch wavenumber k sees the source plus all its images,
U_inf(y, k) = sum_p U(y - p d) e^{-j k p d}.  Averaging over the M midpoint
samples with weights e^{+j k n d} / M keeps only the image in cell ``n``
(up to aliases at n + qM):

    U_n(y) = (1/M) sum_m U_inf(y, k_m) e^{+j k_m n d} = U(y - n d).

So the field at physical offset +N periods from the source is U_{-N}.
"""
from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .grid import C0
from .sources import BoundaryRecord


def plan_order(t0: float, a: float, d: float) -> int:
    """Smallest M with M d >= c0 t0 + a, clamped to at least 1."""
    if not d > 0:
        raise ValueError(f"period must be positive, got {d}")
    if t0 < 0 or a < 0:
        raise ValueError("t0 and a must be nonnegative")
    q = (t0 * C0 + a) / d
    r = round(q)
    m = r if abs(q - r) <= 1e-9 * max(1.0, q) else math.ceil(q)
    return max(1, int(m))


def plan_k_samples(M: int, d: float) -> np.ndarray:
    """Midpoints of M equal subintervals of the Brillouin zone [-pi/d, pi/d)."""
    if M < 1:
        raise ValueError("order must be >= 1")
    if not d > 0:
        raise ValueError("period must be positive")
    dk = 2 * math.pi / (M * d)
    return -math.pi / d + dk * (np.arange(M) + 0.5)


def plan_half_zone(M: int, d: float) -> np.ndarray:
    """Midpoints on [0, pi/d) of the even-order rule 2*ceil(M/2) >= M."""
    if M < 1:
        raise ValueError("order must be >= 1")
    K = (M + 1) // 2
    return (math.pi / (K * d)) * (np.arange(K) + 0.5)


@dataclass(frozen=True)
class AsmPlan:
    axes: tuple[str, ...]
    periods: tuple[float, ...]
    orders: tuple[int, ...]
    k_samples: tuple[tuple[float, ...], ...]
    a: float = 0.0
    t0: float = 0.0
    symmetric: bool = False

    def __post_init__(self):
        if not (1 <= len(self.axes) <= 3):
            raise ValueError("between one and three periodic axes are supported")
        if not (len(self.axes) == len(self.periods) == len(self.orders) == len(self.k_samples)):
            raise ValueError("axes, periods, orders and k_samples must have equal lengths")
        if self.symmetric and len(self.axes) != 1:
            raise ValueError("half-zone plans are only supported on one axis")

    @property
    def full_orders(self) -> tuple[int, ...]:
        """Order of the full-zone midpoint rule the plan is equivalent to."""
        return tuple(2 * m for m in self.orders) if self.symmetric else self.orders

    @property
    def n_simulations(self) -> int:
        return int(np.prod(self.orders))

    def members(self) -> list[tuple[float, ...]]:
        """k vectors in plan order (last axis fastest)."""
        return list(itertools.product(*self.k_samples))

    def weights(self) -> np.ndarray:
        """Product-rule weights prod_i d_i dk_i / (2 pi) = prod_i 1/M_i."""
        w = 1.0 / float(np.prod(self.full_orders))
        return np.full(self.n_simulations, w)


def plan_3d(orders: Sequence[int], periods: Sequence[float], axes: Sequence[str] | None = None,
            a: float = 0.0, t0: float = 0.0) -> AsmPlan:
    orders = tuple(int(m) for m in orders)
    periods = tuple(float(d) for d in periods)
    if not (1 <= len(orders) <= 3):
        raise ValueError(f"between one and three periodic axes are supported, got {len(orders)}")
    if len(periods) != len(orders):
        raise ValueError("orders and periods differ in length")
    axes = tuple(axes) if axes is not None else ("x", "y", "z")[:len(orders)]
    ks = tuple(tuple(float(k) for k in plan_k_samples(m, d)) for m, d in zip(orders, periods))
    return AsmPlan(axes, periods, orders, ks, a, t0)


def plan_sweep(t0: float, a: float, d: float, symmetric: bool = False, order: int | None = None,
               axis: str = "y") -> AsmPlan:
    """One-axis plan from the order rule (or an explicit order)."""
    M = plan_order(t0, a, d) if order is None else int(order)
    if symmetric:
        ks = plan_half_zone(M, d)
        return AsmPlan((axis,), (d,), (len(ks),), (tuple(float(k) for k in ks),), a, t0, True)
    return AsmPlan((axis,), (d,), (M,), (tuple(float(k) for k in plan_k_samples(M, d)),), a, t0)


class UnitCell(Protocol):
    """A picklable unit-cell scenario: runs one Bloch member, returns named outputs."""

    def run_member(self, k: float) -> dict: ...


# member outputs are dicts of name -> ndarray or BoundaryRecord


def _member_files(index: int, outputs: dict) -> dict:
    return {name: f"k{index:04d}.{name}.{'prec' if isinstance(v, BoundaryRecord) else 'npy'}"
            for name, v in outputs.items()}


def _save_member(directory: Path, index: int, outputs: dict) -> dict:
    from .io import write_record

    files = _member_files(index, outputs)
    for name, v in outputs.items():
        path = directory / files[name]
        tmp = path.with_suffix(path.suffix + ".tmp")
        if isinstance(v, BoundaryRecord):
            write_record(tmp, v)
        else:
            with open(tmp, "wb") as fh:
                np.save(fh, np.asarray(v), allow_pickle=False)
        os.replace(tmp, path)
    return files


def _run_one(args):
    unit_cell, index, k, directory = args
    out = unit_cell.run_member(float(k))
    if directory is None:
        return index, out
    return index, _save_member(Path(directory), index, out)


@dataclass
class SweepResult:
    """One entry per plan member, in plan order.

    ``members[i]`` is either a dict of in-memory outputs or a dict of file
    names relative to ``directory`` (loaded lazily).
    """

    plan: AsmPlan
    members: list
    directory: Path | None = None

    @property
    def ks(self) -> np.ndarray:
        return np.array([m[0] for m in self.plan.members()])

    def names(self) -> list[str]:
        return sorted(self.members[0])

    def load(self, index: int, name: str):
        entry = self.members[index][name]
        if self.directory is None:
            return entry
        from .io import read_record

        path = self.directory / entry
        if path.suffix == ".prec":
            return read_record(path)
        return np.load(path, allow_pickle=False)

    def check_consistent(self, name: str) -> None:
        shapes = set()
        for i in range(len(self.members)):
            v = self.load(i, name)
            if isinstance(v, BoundaryRecord):
                shapes.add((v.e_samples.shape, v.dt, v.t_start))
            else:
                shapes.add(np.shape(v))
        if len(shapes) != 1:
            raise ValueError(f"sweep members disagree on {name!r}: {sorted(map(str, shapes))}")


MANIFEST = "manifest.csv"


def write_manifest(directory: Path, plan: AsmPlan, members: list) -> Path:
    names = sorted(members[0]) if members else []
    path = Path(directory) / MANIFEST
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "k"] + names)
        for i, (k, files) in enumerate(zip(plan.members(), members)):
            w.writerow([i, repr(float(k[0]))] + [files[n] for n in names])
    return path


def read_manifest(directory: Path) -> list[dict]:
    path = Path(directory) / MANIFEST
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {key: v for key, v in r.items() if key not in ("index", "k")}
        out.append({"index": int(r["index"]), "k": float(r["k"]), "files": d})
    return out


def _existing_members(directory: Path, plan: AsmPlan) -> dict:
    done = {}
    path = Path(directory) / MANIFEST
    if not path.exists():
        return done
    for row in read_manifest(directory):
        i = row["index"]
        if i >= plan.n_simulations or abs(row["k"] - plan.members()[i][0]) > 1e-12 * max(1, abs(row["k"])):
            continue
        files = row["files"]
        if files and all(f and (Path(directory) / f).exists() for f in files.values()):
            done[i] = files
    return done


def run_sweep(unit_cell: UnitCell, plan: AsmPlan, workers: int = 1,
              directory: str | Path | None = None, resume: bool = True,
              progress: Callable[[int, int], None] | None = None) -> SweepResult:
    """Run every member of a one-axis plan, optionally persisting to ``directory``.

    With a directory, members already listed in its manifest whose files
    exist are reused; only missing members are run.
    """
    if len(plan.axes) != 1:
        raise ValueError("sweep execution is implemented for one periodic axis")
    ks = [k[0] for k in plan.members()]
    directory = Path(directory) if directory is not None else None
    members: list = [None] * len(ks)
    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        if resume:
            for i, files in _existing_members(directory, plan).items():
                members[i] = files
    todo = [i for i, m in enumerate(members) if m is None]
    jobs = [(unit_cell, i, ks[i], None if directory is None else str(directory)) for i in todo]
    done = len(ks) - len(todo)
    try:
        if workers <= 1 or len(jobs) <= 1:
            for job in jobs:
                i, out = _run_one(job)
                members[i] = out
                done += 1
                if progress:
                    progress(done, len(ks))
                if directory is not None:
                    _write_partial_manifest(directory, plan, members)
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                for i, out in ex.map(_run_one, jobs):
                    members[i] = out
                    done += 1
                    if progress:
                        progress(done, len(ks))
    except Exception as exc:
        if directory is not None:
            _write_partial_manifest(directory, plan, members)
        raise RuntimeError(f"sweep member failed: {exc}") from exc
    if directory is not None:
        write_manifest(directory, plan, members)
    return SweepResult(plan, members, directory)


def _write_partial_manifest(directory: Path, plan: AsmPlan, members: list) -> None:
    rows = [(i, m) for i, m in enumerate(members) if m is not None]
    if not rows:
        return
    names = sorted(rows[0][1])
    with open(Path(directory) / MANIFEST, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "k"] + names)
        for i, files in rows:
            w.writerow([i, repr(float(plan.members()[i][0]))] + [files[n] for n in names])


def load_sweep(directory: str | Path, plan: AsmPlan) -> SweepResult:
    """Open a completed sweep directory for the given plan."""
    directory = Path(directory)
    if not (directory / MANIFEST).exists():
        raise FileNotFoundError(f"no sweep manifest in {directory}")
    done = _existing_members(directory, plan)
    missing = [i for i in range(plan.n_simulations) if i not in done]
    if missing:
        raise FileNotFoundError(f"sweep in {directory} is missing members {missing[:5]}"
                                f"{'...' if len(missing) > 5 else ''}")
    return SweepResult(plan, [done[i] for i in range(plan.n_simulations)], directory)


class _PairwiseSum:
    """Fixed-tree summation: the tree depends only on the number of terms."""

    def __init__(self):
        self.stack: list[tuple[int, np.ndarray]] = []

    def add(self, x: np.ndarray) -> None:
        level = 0
        while self.stack and self.stack[-1][0] == level:
            _, y = self.stack.pop()
            x = y + x
            level += 1
        self.stack.append((level, x))

    def total(self) -> np.ndarray:
        acc = None
        for _, x in reversed(self.stack):
            acc = x if acc is None else x + acc
        return acc


def _as_arrays(v):
    if isinstance(v, BoundaryRecord):
        return v.e_samples, v.h_samples
    return (np.asarray(v),)


def _wrap_like(template, arrays):
    if isinstance(template, BoundaryRecord):
        return BoundaryRecord(template.line, arrays[0], arrays[1], template.t_start, template.dt,
                              template.grid_fingerprint)
    return arrays[0]


def reconstruct(results: SweepResult, n, name: str = None):
    """De-imaged output ``name`` for image index ``n`` (int or sequence).

    Returns an array (or BoundaryRecord) per offset; a sequence of offsets
    yields a list in the same order.
    """
    if results.plan.symmetric:
        raise ValueError("half-zone sweeps must be combined with reconstruct_symmetric")
    name = name if name is not None else results.names()[0]
    offsets = [int(n)] if np.isscalar(n) else [int(v) for v in n]
    d = results.plan.periods[0]
    ks = results.ks
    w = results.plan.weights()
    sums = [None] * len(offsets)
    template = None
    shape = None
    for i, k in enumerate(ks):
        v = results.load(i, name)
        arrs = _as_arrays(v)
        sig = tuple(a.shape for a in arrs)
        if shape is None:
            shape, template = sig, v
            sums = [[_PairwiseSum() for _ in arrs] for _ in offsets]
        elif sig != shape:
            raise ValueError(f"member {i} output {name!r} has shape {sig}, expected {shape}")
        for s, off in zip(sums, offsets):
            ph = np.exp(1j * k * off * d) * w[i]
            for acc, a in zip(s, arrs):
                acc.add(a * ph)
    out = [_wrap_like(template, [acc.total() for acc in s]) for s in sums]
    return out[0] if np.isscalar(n) else out


def _mirror(results: SweepResult, i: int, name: str, mirror: str | None):
    if mirror is None:
        v = results.load(i, name)
        if isinstance(v, BoundaryRecord):
            raise ValueError("records need an explicit mirror output")
        return (np.asarray(v)[..., ::-1],)
    return _as_arrays(results.load(i, mirror))


def parity_residual(results: SweepResult, name: str, mirror: str | None = None) -> dict:
    """Relative mismatch of the lowest-|k| member against even and odd mirroring.

    Near k = 0 a symmetric problem gives U(y) ~ +-U(-y); the smaller residual
    identifies the source parity.
    """
    i = int(np.argmin(np.abs(results.ks)))
    u = _as_arrays(results.load(i, name))
    m = _mirror(results, i, name, mirror)
    sign_h = -1.0 if len(u) == 2 else 1.0
    out = {}
    for p, s in (("even", 1.0), ("odd", -1.0)):
        num = sum(np.linalg.norm(a - s * (sign_h if j == 1 else 1.0) * b) ** 2
                  for j, (a, b) in enumerate(zip(u, m)))
        den = sum(np.linalg.norm(a) ** 2 for a in u)
        out[p] = float(np.sqrt(num / den)) if den > 0 else 0.0
    return out


def reconstruct_symmetric(results: SweepResult, n, name: str, parity: str = "even",
                          mirror: str | None = None, check_parity: bool = True):
    """Half-zone image removal for mirror-symmetric problems.

    ``mirror`` names the output holding the values at -y; for plain arrays it
    defaults to the same output reversed along its last axis.  Records carry
    Ez (mirror parity as given) and Hx (opposite parity).
    """
    if not results.plan.symmetric:
        raise ValueError("reconstruct_symmetric needs a half-zone sweep")
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    if check_parity:
        res = parity_residual(results, name, mirror)
        other = "odd" if parity == "even" else "even"
        if res[parity] > res[other]:
            raise ValueError(f"parity {parity!r} inconsistent with the sweep (residuals {res})")
    p = 1.0 if parity == "even" else -1.0
    offsets = [int(n)] if np.isscalar(n) else [int(v) for v in n]
    d = results.plan.periods[0]
    w = results.plan.weights()
    sums = None
    template = None
    for i, k in enumerate(results.ks):
        v = results.load(i, name)
        u = _as_arrays(v)
        m = _mirror(results, i, name, mirror)
        if sums is None:
            template = v
            sums = [[_PairwiseSum() for _ in u] for _ in offsets]
        for s, off in zip(sums, offsets):
            ep = np.exp(1j * k * off * d) * w[i]
            em = np.exp(-1j * k * off * d) * w[i]
            for j, (acc, a, b) in enumerate(zip(s, u, m)):
                pj = -p if j == 1 else p
                acc.add(a * ep + pj * (b * em))
    out = [_wrap_like(template, [acc.total() for acc in s]) for s in sums]
    return out[0] if np.isscalar(n) else out


def reconstruct_any(results: SweepResult, n, name: str, parity: str = "even",
                    mirror: str | None = None):
    """Dispatch to the full-zone or half-zone reconstruction."""
    if results.plan.symmetric:
        return reconstruct_symmetric(results, n, name, parity, mirror, check_parity=False)
    return reconstruct(results, n, name)
