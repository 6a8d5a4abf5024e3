"""Numerical toolkit for weighted Calderón-Hardy spaces and polyharmonic equations."""

__version__ = "0.1.0"

from .atoms import Atom, AtomicSeries, make_atom, random_atom, validate_atom
from .core_grid import Cube, Grid, GridFunction, RadiusLadder
from .maximal import grand_maximal, hl_maximal, n_maximal, smooth_maximal
from .polyharmonic import fundamental_solution, potential, t_star
from .solver import CalderonHardyElement, solve_polyharmonic, triviality_probe
from .weights import Weight, ap_constant, critical_indices, rh_constant

__all__ = [
    "Atom",
    "AtomicSeries",
    "CalderonHardyElement",
    "Cube",
    "Grid",
    "GridFunction",
    "RadiusLadder",
    "Weight",
    "ap_constant",
    "critical_indices",
    "fundamental_solution",
    "grand_maximal",
    "hl_maximal",
    "make_atom",
    "n_maximal",
    "potential",
    "random_atom",
    "rh_constant",
    "smooth_maximal",
    "solve_polyharmonic",
    "t_star",
    "triviality_probe",
    "validate_atom",
]
