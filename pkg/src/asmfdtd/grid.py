"""Complex-valued 2D TE Yee grid: geometry, field storage and curl updates.

Layout (index order ``[i, j]`` = ``[x, y]``)::

    ez[i, j]   at (i*dx,        j*dy)         shape (nx,     ny)
    hx[i, j]   at (i*dx,       (j+1/2)*dy)    shape (nx,     ny - 1)
    hy[i, j]   at ((i+1/2)*dx,  j*dy)         shape (nx - 1, ny)

H leads E by half a step: a full step takes H from (n-1/2)dt to (n+1/2)dt
using E at n*dt, then E from n*dt to (n+1)dt.  Outer Ez nodes are not
touched by :func:`step_e`; they stay at zero (PEC walls) unless a boundary
treatment writes them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

C0 = 299_792_458.0
MU0 = 4e-7 * math.pi
EPS0 = 1.0 / (MU0 * C0**2)
ETA0 = MU0 * C0


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    dx: float
    dy: float
    dt: float
    courant: float
    n_steps: int
    c0: float = C0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)


def make_grid(nx: int, ny: int, dx: float, dy: float, courant: float, n_steps: int) -> GridSpec:
    """Build a grid with the time step set by the 2D stability bound."""
    if nx < 1 or ny < 1 or n_steps < 1:
        raise ValueError(f"cell and step counts must be >= 1 (nx={nx}, ny={ny}, n_steps={n_steps})")
    if not (dx > 0 and dy > 0):
        raise ValueError(f"cell sizes must be positive (dx={dx}, dy={dy})")
    if not (0 < courant <= 1):
        raise ValueError(f"courant number must lie in (0, 1], got {courant}")
    dt = courant / (C0 * math.sqrt(1.0 / dx**2 + 1.0 / dy**2))
    return GridSpec(int(nx), int(ny), float(dx), float(dy), dt, float(courant), int(n_steps))


@dataclass
class MaterialMap:
    eps_r: np.ndarray
    pec_mask: np.ndarray

    def __post_init__(self):
        self.eps_r = np.asarray(self.eps_r, dtype=float)
        self.pec_mask = np.asarray(self.pec_mask, dtype=bool)
        if self.eps_r.shape != self.pec_mask.shape:
            raise ValueError("eps_r and pec_mask shapes differ")
        if np.any(self.eps_r < 1):
            raise ValueError("relative permittivity must be >= 1 everywhere")

    @classmethod
    def vacuum(cls, grid: GridSpec) -> "MaterialMap":
        return cls(np.ones(grid.shape), np.zeros(grid.shape, dtype=bool))

    def check(self, grid: GridSpec) -> None:
        if self.eps_r.shape != grid.shape:
            raise ValueError(f"material shape {self.eps_r.shape} does not match grid {grid.shape}")


@dataclass
class FieldState:
    """Staggered Ez/Hx/Hy arrays at one time step.

    ``hx_ghost_lo`` / ``hx_ghost_hi`` are optional Hx rows half a cell outside
    the low/high y edge.  When present, :func:`step_e` also advances the
    corresponding edge row of Ez (periodic and symmetry-plane edges).
    """

    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    step_index: int = 0
    hx_ghost_lo: np.ndarray | None = None
    hx_ghost_hi: np.ndarray | None = None

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FieldState":
        nx, ny = grid.shape
        return cls(
            np.zeros((nx, ny), complex),
            np.zeros((nx, ny - 1), complex),
            np.zeros((nx - 1, ny), complex),
        )

    def copy(self) -> "FieldState":
        def _c(a):
            return None if a is None else a.copy()

        return FieldState(self.ez.copy(), self.hx.copy(), self.hy.copy(), self.step_index,
                          _c(self.hx_ghost_lo), _c(self.hx_ghost_hi))

    def check(self, grid: GridSpec) -> None:
        nx, ny = grid.shape
        if (self.ez.shape != (nx, ny) or self.hx.shape != (nx, ny - 1)
                or self.hy.shape != (nx - 1, ny)):
            raise ValueError(
                f"field shapes ez{self.ez.shape} hx{self.hx.shape} hy{self.hy.shape} "
                f"inconsistent with grid {grid.shape}")


def step_h(state: FieldState, grid: GridSpec) -> FieldState:
    """Advance Hx, Hy by one step from the curl of Ez (in place)."""
    state.check(grid)
    ch = grid.dt / MU0
    ez = state.ez
    state.hx -= (ch / grid.dy) * (ez[:, 1:] - ez[:, :-1])
    state.hy += (ch / grid.dx) * (ez[1:, :] - ez[:-1, :])
    return state


def e_update_rows(state: FieldState, ny: int) -> slice:
    lo = 0 if state.hx_ghost_lo is not None else 1
    hi = ny if state.hx_ghost_hi is not None else ny - 1
    return slice(lo, hi)


def _hx_dy(state: FieldState, rows: slice) -> np.ndarray:
    # hx difference across each Ez row in `rows` (interior columns), undivided by dy
    parts = [state.hx]
    off = 0
    if state.hx_ghost_lo is not None:
        parts.insert(0, state.hx_ghost_lo[:, None])
        off = 1
    if state.hx_ghost_hi is not None:
        parts.append(state.hx_ghost_hi[:, None])
    ext = np.concatenate(parts, axis=1) if len(parts) > 1 else state.hx
    # Ez row j sits between ext columns j - 1 + off and j + off
    lo, hi = rows.start + off, rows.stop + off
    return ext[1:-1, lo:hi] - ext[1:-1, lo - 1:hi - 1]


def step_e(state: FieldState, grid: GridSpec, materials: MaterialMap) -> FieldState:
    """Advance interior Ez by one step from the curl of H (in place).

    PEC nodes are forced to exactly zero and ``step_index`` is incremented.
    """
    state.check(grid)
    materials.check(grid)
    rows = e_update_rows(state, grid.ny)
    coef = grid.dt / (EPS0 * materials.eps_r[1:-1, rows])
    curl = ((state.hy[1:, rows] - state.hy[:-1, rows]) / grid.dx
            - _hx_dy(state, rows) / grid.dy)
    state.ez[1:-1, rows] += coef * curl
    state.ez[materials.pec_mask] = 0.0
    state.step_index += 1
    return state


def updated_node_count(state: FieldState, grid: GridSpec) -> int:
    """Ez nodes advanced by one call of :func:`step_e`."""
    rows = e_update_rows(state, grid.ny)
    return max(grid.nx - 2, 0) * len(range(grid.ny)[rows])


def field_energy(state: FieldState, grid: GridSpec, hx_prev: np.ndarray | None = None,
                 hy_prev: np.ndarray | None = None, mode: str = "product") -> float:
    """Discrete electromagnetic energy per unit length at Ez's time level.

    Call with Ez at n*dt, H at (n+1/2)dt in ``state`` and H at (n-1/2)dt in
    ``hx_prev``/``hy_prev``.  ``mode="product"`` uses Re(H^{n-1/2} . H^{n+1/2}),
    the quantity the leapfrog scheme conserves exactly in a closed lossless
    cavity; ``mode="average"`` uses |(H^{n-1/2} + H^{n+1/2}) / 2|^2.  Without
    previous H the plain half-step values are used.
    """
    area = grid.dx * grid.dy
    we = EPS0 * np.sum(np.abs(state.ez) ** 2)
    if hx_prev is None or hy_prev is None:
        wm = np.sum(np.abs(state.hx) ** 2) + np.sum(np.abs(state.hy) ** 2)
    elif mode == "product":
        wm = np.sum((hx_prev * state.hx.conj()).real) + np.sum((hy_prev * state.hy.conj()).real)
    elif mode == "average":
        wm = (np.sum(np.abs(0.5 * (state.hx + hx_prev)) ** 2)
              + np.sum(np.abs(0.5 * (state.hy + hy_prev)) ** 2))
    else:
        raise ValueError(f"mode must be 'product' or 'average', got {mode!r}")
    return float(0.5 * area * (we + MU0 * wm))
