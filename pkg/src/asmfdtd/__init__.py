"""Finite periodic structures in 2D FDTD via unit-cell sweeps and edge simulations."""

from .grid import C0, EPS0, ETA0, MU0, FieldState, GridSpec, MaterialMap, make_grid, step_e, step_h

__all__ = ["C0", "EPS0", "ETA0", "MU0", "FieldState", "GridSpec", "MaterialMap", "make_grid",
           "step_e", "step_h"]
