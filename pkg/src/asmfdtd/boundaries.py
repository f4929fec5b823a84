"""Boundary treatments applied around the core Yee update.

Edges are named ``"xlo"``, ``"xhi"``, ``"ylo"``, ``"yhi"``.  Only y may be
periodic; symmetry planes (PMC) are only supported on y edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import EPS0, ETA0, MU0, FieldState, GridSpec, MaterialMap

EDGES = ("xlo", "xhi", "ylo", "yhi")


@dataclass(frozen=True)
class BlochPhase:
    """Bloch wavenumber ``k`` along a periodic axis with period ``d``.

    ``k`` is folded into the first Brillouin zone ``[-pi/d, pi/d)``.
    ``phase`` is e^{-j k d}, the factor relating fields one period apart.
    """

    axis: str
    k: float
    d: float
    phase: complex = field(init=False)

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"period must be positive, got {self.d}")
        zone = 2 * math.pi / self.d
        k = (self.k + math.pi / self.d) % zone - math.pi / self.d
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "phase", complex(np.exp(-1j * k * self.d)))

    @property
    def inverse_phase(self) -> complex:
        return complex(np.exp(1j * self.k * self.d))


def _check_periodic(bloch: BlochPhase) -> None:
    if bloch.axis != "y":
        raise ValueError(f"axis {bloch.axis!r} is not configured periodic (only 'y' is)")


def apply_pbc_h(state: FieldState, bloch: BlochPhase) -> FieldState:
    """Fill the auxiliary Hx row half a cell above the high y edge."""
    _check_periodic(bloch)
    state.hx_ghost_hi = state.hx[:, 0] * bloch.phase
    return state


def apply_pbc_e(state: FieldState, bloch: BlochPhase) -> FieldState:
    """Set the low-edge Ez row from the high edge: E(0) = E(d) e^{+jkd}."""
    _check_periodic(bloch)
    state.ez[:, 0] = state.ez[:, -1] * bloch.inverse_phase
    return state


def apply_pmc(state: FieldState, region: str) -> FieldState:
    """Mirror-even symmetry plane through the edge Ez row.

    The ghost Hx row outside the plane is the negated first interior row, so
    the tangential H interpolated onto the plane vanishes.
    """
    if region == "ylo":
        state.hx_ghost_lo = -state.hx[:, 0]
    elif region == "yhi":
        state.hx_ghost_hi = -state.hx[:, -1]
    else:
        raise ValueError(f"symmetry planes are supported on y edges only, got {region!r}")
    return state


@dataclass(frozen=True)
class PmlSpec:
    thickness: int = 40
    grading_order: float = 3.0
    target_reflection: float = 1e-8

    def __post_init__(self):
        if self.thickness < 1:
            raise ValueError("PML thickness must be >= 1 cell")
        if self.grading_order < 1:
            raise ValueError("PML grading order must be >= 1")
        if not (0 < self.target_reflection < 1):
            raise ValueError("PML target reflection must lie in (0, 1)")


@dataclass
class _Slab:
    axis: int           # 0: x-normal layer, 1: y-normal layer
    e_idx: slice        # Ez nodes inside the layer (along `axis`)
    h_idx: slice        # H nodes inside the layer (hy for x, hx for y)
    b_e: np.ndarray
    a_e: np.ndarray
    b_h: np.ndarray
    a_h: np.ndarray
    psi_e: np.ndarray | None = None
    psi_h: np.ndarray | None = None


class Cpml:
    """Convolutional PML (kappa = 1, alpha = 0) with polynomial grading.

    The layer occupies the outermost ``thickness`` cells of each selected
    edge and is backed by the PEC wall node.  Corrections are additive and
    applied right after the plain curl updates.
    """

    def __init__(self, grid: GridSpec, spec: PmlSpec, edges):
        self.grid = grid
        self.spec = spec
        self.edges = tuple(edges)
        self.slabs: list[_Slab] = []
        for edge in self.edges:
            if edge not in EDGES:
                raise ValueError(f"unknown edge {edge!r}")
            axis = 0 if edge[0] == "x" else 1
            n = grid.shape[axis]
            step = grid.dx if axis == 0 else grid.dy
            t = spec.thickness
            if t > (n - 1) // 2:
                raise ValueError(
                    f"PML of {t} cells is thicker than half the domain along {edge[0]} ({n} nodes)")
            L = t * step
            sigma_max = -(spec.grading_order + 1) * math.log(spec.target_reflection) / (2 * ETA0 * L)
            if edge.endswith("lo"):
                e_nodes = np.arange(1, t)
                e_depth = (t - e_nodes) * step
                h_nodes = np.arange(0, t)
                h_depth = (t - h_nodes - 0.5) * step
            else:
                iface = n - 1 - t
                e_nodes = np.arange(iface + 1, n - 1)
                e_depth = (e_nodes - iface) * step
                h_nodes = np.arange(iface, n - 1)
                h_depth = (h_nodes + 0.5 - iface) * step
            b_e, a_e = self._coeffs(sigma_max * (e_depth / L) ** spec.grading_order)
            b_h, a_h = self._coeffs(sigma_max * (h_depth / L) ** spec.grading_order)
            shape = (-1, 1) if axis == 0 else (1, -1)
            self.slabs.append(_Slab(
                axis,
                slice(int(e_nodes[0]), int(e_nodes[-1]) + 1) if len(e_nodes) else slice(0, 0),
                slice(int(h_nodes[0]), int(h_nodes[-1]) + 1),
                b_e.reshape(shape), a_e.reshape(shape), b_h.reshape(shape), a_h.reshape(shape),
            ))

    def _coeffs(self, sigma: np.ndarray):
        b = np.exp(-sigma * self.grid.dt / EPS0)
        return b, b - 1.0

    def thickness_on(self, edge: str) -> int:
        return self.spec.thickness if edge in self.edges else 0

    def correct_h(self, state: FieldState) -> None:
        g = self.grid
        ch = g.dt / MU0
        for s in self.slabs:
            if s.axis == 0:
                i = s.h_idx
                d = (state.ez[i.start + 1:i.stop + 1, :] - state.ez[i, :]) / g.dx
                s.psi_h = s.a_h * d if s.psi_h is None else s.b_h * s.psi_h + s.a_h * d
                state.hy[i, :] += ch * s.psi_h
            else:
                j = s.h_idx
                d = (state.ez[:, j.start + 1:j.stop + 1] - state.ez[:, j]) / g.dy
                s.psi_h = s.a_h * d if s.psi_h is None else s.b_h * s.psi_h + s.a_h * d
                state.hx[:, j] -= ch * s.psi_h

    def correct_e(self, state: FieldState, materials: MaterialMap, rows: slice) -> None:
        g = self.grid
        for s in self.slabs:
            if s.e_idx.stop <= s.e_idx.start:
                continue
            if s.axis == 0:
                i = s.e_idx
                d = (state.hy[i, rows] - state.hy[i.start - 1:i.stop - 1, rows]) / g.dx
                s.psi_e = s.a_e * d if s.psi_e is None else s.b_e * s.psi_e + s.a_e * d
                state.ez[i, rows] += g.dt / (EPS0 * materials.eps_r[i, rows]) * s.psi_e
            else:
                j = s.e_idx
                d = (state.hx[1:-1, j] - state.hx[1:-1, j.start - 1:j.stop - 1]) / g.dy
                s.psi_e = s.a_e * d if s.psi_e is None else s.b_e * s.psi_e + s.a_e * d
                state.ez[1:-1, j] -= g.dt / (EPS0 * materials.eps_r[1:-1, j]) * s.psi_e

    def accumulators_zero(self) -> bool:
        return all((s.psi_e is None or not s.psi_e.any()) and (s.psi_h is None or not s.psi_h.any())
                   for s in self.slabs)


def apply_cpml(state: FieldState, cpml: Cpml, materials: MaterialMap, rows: slice,
               half: str) -> FieldState:
    """Functional wrapper: ``half`` is ``"h"`` or ``"e"``."""
    if half == "h":
        cpml.correct_h(state)
    elif half == "e":
        cpml.correct_e(state, materials, rows)
    else:
        raise ValueError(f"half must be 'h' or 'e', got {half!r}")
    return state


class Mur1:
    """First-order Mur absorbing condition on one or more edges.

    Call :meth:`save` before the E update and :meth:`apply` after it.  A
    corner shared by two Mur edges takes the average of the two one-way
    updates.
    """

    def __init__(self, grid: GridSpec, edges):
        self.grid = grid
        self.edges = tuple(edges)
        for e in self.edges:
            if e not in EDGES:
                raise ValueError(f"unknown edge {e!r}")
        cdt = grid.c0 * grid.dt
        self.coef = {"x": (cdt - grid.dx) / (cdt + grid.dx), "y": (cdt - grid.dy) / (cdt + grid.dy)}
        self._old = None

    @staticmethod
    def _lines(ez: np.ndarray, edge: str):
        # (boundary line, first interior line) views for an edge
        if edge == "xlo":
            return ez[0, :], ez[1, :]
        if edge == "xhi":
            return ez[-1, :], ez[-2, :]
        if edge == "ylo":
            return ez[:, 0], ez[:, 1]
        return ez[:, -1], ez[:, -2]

    def save(self, state: FieldState) -> None:
        self._old = {e: tuple(v.copy() for v in self._lines(state.ez, e)) for e in self.edges}

    def _one_way(self, state, edge):
        b_old, i_old = self._old[edge]
        _, i_new = self._lines(state.ez, edge)
        return i_old + self.coef[edge[0]] * (i_new - b_old)

    def apply(self, state: FieldState, rows: slice | None = None) -> FieldState:
        if self._old is None:
            raise RuntimeError("Mur1.save must be called before apply")
        ez = state.ez
        nx, ny = ez.shape
        rows = rows if rows is not None else slice(1, ny - 1)
        # edge nodes, corners excluded
        for e in self.edges:
            upd = self._one_way(state, e)
            if e[0] == "x":
                col = 0 if e == "xlo" else -1
                r = slice(max(rows.start, 1), min(rows.stop, ny - 1))
                ez[col, r] = upd[r]
                # rows outside 1..ny-2 that are updated (periodic/PMC y edges)
                if rows.start == 0:
                    ez[col, 0] = upd[0]
                if rows.stop == ny:
                    ez[col, -1] = upd[-1]
            else:
                row = 0 if e == "ylo" else -1
                ez[1:-1, row] = upd[1:-1]
        for cx in ("xlo", "xhi"):
            for cy in ("ylo", "yhi"):
                if cx in self.edges and cy in self.edges:
                    i = 0 if cx == "xlo" else -1
                    j = 0 if cy == "ylo" else -1
                    ux = self._one_way(state, cx)[j]
                    uy = self._one_way(state, cy)[i]
                    ez[i, j] = 0.5 * (ux + uy)
        self._old = None
        return state


def apply_mur1(state: FieldState, mur: Mur1, rows: slice | None = None) -> FieldState:
    return mur.apply(state, rows)
