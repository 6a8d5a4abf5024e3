"""Cubes, cell-centred lattices, grid functions and the local norms built on them.

All quadrature is the midpoint rule on a cell-centred lattice.  A cube that
does not line up with the cells is handled by weighting every node with the
fraction of its cell that lies inside the cube, so averages over arbitrary
cubes stay consistent with the cell decomposition.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SUPPORTED_DIMENSIONS = (1, 2, 3)

# Overlap fractions below this are treated as round-off.
_OVERLAP_EPS = 1e-12


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube ``Q(center, side)``."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0 or not math.isfinite(self.side):
            raise ValueError(f"cube side must be positive, got {self.side}")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * self.side

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * self.side

    @property
    def volume(self) -> float:
        return self.side**self.n

    def dilate(self, delta: float) -> Cube:
        return Cube(self.center, delta * self.side)

    def translate(self, shift: Sequence[float]) -> Cube:
        return Cube(np.asarray(self.center) + np.asarray(shift, dtype=float), self.side)

    def contains(self, points: np.ndarray, closed: bool = True) -> np.ndarray:
        """Boolean mask of ``points`` (shape ``(..., n)``) lying in the cube."""
        d = np.abs(np.asarray(points, dtype=float) - np.asarray(self.center))
        half = 0.5 * self.side
        inside = d <= half * (1 + 1e-12) if closed else d < half
        return np.all(inside, axis=-1)

    def within(self, other: Cube, rtol: float = 1e-12) -> bool:
        slack = rtol * other.side
        return bool(np.all(self.lo >= other.lo - slack) and np.all(self.hi <= other.hi + slack))


@dataclass(frozen=True)
class Grid:
    """Cell-centred lattice with ``points_per_axis`` cells per axis over ``domain``.

    Nodes sit at ``lo + (i + 1/2) h``.  The origin is never allowed to be a
    node, so power weights singular at 0 can always be sampled.
    """

    domain: Cube
    points_per_axis: int

    def __post_init__(self) -> None:
        if self.domain.n not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"dimension {self.domain.n} not supported (n must be 1, 2 or 3)")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 1:
            raise ValueError("points_per_axis must be a positive integer")
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))
        h = self.h
        on_origin = [np.any(np.abs(ax) < 1e-9 * h) for ax in self.axes]
        if all(on_origin):
            raise ValueError("lattice contains the origin; shift the domain or use an even point count")

    @classmethod
    def centered(cls, n: int, side: float, points_per_axis: int) -> Grid:
        return cls(Cube((0.0,) * n, side), points_per_axis)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def h(self) -> float:
        return self.domain.side / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n

    @property
    def size(self) -> int:
        return self.points_per_axis**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def axes(self) -> list[np.ndarray]:
        idx = np.arange(self.points_per_axis) + 0.5
        return [lo + idx * self.h for lo in self.domain.lo]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``, row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def refine(self, factor: int = 2) -> Grid:
        return Grid(self.domain, self.points_per_axis * factor)

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Index of the node nearest to ``x``."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.domain.lo) / self.h).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.points_per_axis - 1))

    def same_as(self, other: Grid) -> bool:
        return self.domain == other.domain and self.points_per_axis == other.points_per_axis


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on every node of a grid (array shape ``grid.shape``)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise ValueError(f"sample count {vals.size} does not match grid size {self.grid.size}")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function samples must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, func) -> GridFunction:
        return cls(grid, func(*grid.mesh()))

    @classmethod
    def zeros(cls, grid: Grid) -> GridFunction:
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values: np.ndarray) -> GridFunction:
        return GridFunction(self.grid, values)

    def __add__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> GridFunction:
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return self.with_values(-self.values)

    def abs(self) -> GridFunction:
        return self.with_values(np.abs(self.values))

    def lp_norm(self, p: float, weight: np.ndarray | None = None) -> float:
        """``(sum |f|^p w h^n)^(1/p)``; ``weight`` are node samples of a weight."""
        vals = np.abs(self.values) ** p
        if weight is not None:
            vals = vals * weight
        return float(np.sum(vals) * self.grid.cell_volume) ** (1.0 / p)


def _check_same_grid(f: GridFunction, g: GridFunction) -> None:
    if not f.grid.same_as(g.grid):
        raise ValueError("grid functions live on different grids")


@dataclass(frozen=True)
class RadiusLadder:
    """Finite increasing list of radii that stands in for ``sup over r > 0``."""

    radii: tuple[float, ...]

    def __post_init__(self) -> None:
        r = tuple(float(x) for x in self.radii)
        if not r:
            raise ValueError("radius ladder is empty")
        if r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be positive and strictly increasing")
        object.__setattr__(self, "radii", r)

    @classmethod
    def dyadic(cls, h: float, r_max: float, min_cells: int = 1) -> RadiusLadder:
        """Radii ``h * 2**j`` from ``min_cells * h`` (rounded up to a power of two) to ``r_max``."""
        j0 = max(0, math.ceil(math.log2(min_cells) - 1e-12))
        radii = []
        j = j0
        while h * 2**j <= r_max * (1 + 1e-12):
            radii.append(h * 2**j)
            j += 1
        if not radii:
            raise ValueError(f"no dyadic radius between {min_cells * h} and {r_max}")
        return cls(tuple(radii))

    def check(self, grid: Grid) -> None:
        if self.radii[0] < grid.h * (1 - 1e-12):
            raise ValueError("ladder outside grid: smallest radius below grid spacing")
        if self.radii[-1] > grid.domain.side * (1 + 1e-12):
            raise ValueError("ladder outside grid: largest radius exceeds the domain")

    def __iter__(self):
        return iter(self.radii)

    def __len__(self) -> int:
        return len(self.radii)


def cube_weights(grid: Grid, Q: Cube) -> tuple[tuple[slice, ...], np.ndarray]:
    """Slices of the node block meeting ``Q`` and each node's cell-overlap fraction."""
    if Q.n != grid.n:
        raise ValueError("cube and grid dimensions differ")
    h = grid.h
    slices, fracs = [], []
    for ax, dlo, lo, hi in zip(grid.axes, grid.domain.lo, Q.lo, Q.hi):
        i0 = max(0, int(math.floor((lo - dlo) / h)) - 1)
        i1 = min(grid.points_per_axis, int(math.ceil((hi - dlo) / h)) + 1)
        if i1 <= i0:
            raise ValueError("empty cube: no lattice point inside")
        seg = ax[i0:i1]
        frac = (np.minimum(seg + 0.5 * h, hi) - np.maximum(seg - 0.5 * h, lo)) / h
        frac = np.clip(frac, 0.0, 1.0)
        frac[frac < _OVERLAP_EPS] = 0.0
        nz = np.nonzero(frac)[0]
        if nz.size == 0:
            raise ValueError("empty cube: no lattice point inside")
        slices.append(slice(i0 + nz[0], i0 + nz[-1] + 1))
        fracs.append(frac[nz[0] : nz[-1] + 1])
    weights = fracs[0]
    for f in fracs[1:]:
        weights = np.multiply.outer(weights, f)
    return tuple(slices), weights


def local_norm(g: GridFunction, q: float, Q: Cube) -> float:
    """Normalized local norm ``(|Q|^-1 int_Q |g|^q)^(1/q)`` by midpoint quadrature.

    Only the part of ``Q`` inside the grid domain contributes, and the
    average is taken with respect to that part's measure.
    """
    if not q >= 1:
        raise ValueError(f"invalid exponent q={q}; need q >= 1")
    sl, wts = cube_weights(g.grid, Q)
    vals = np.abs(g.values[sl])
    # Factor out the max so tiny or huge values neither underflow nor overflow.
    top = float(np.max(vals * (wts > 0)))
    if top == 0:
        return 0.0
    return top * float(np.sum(wts * (vals / top) ** q) / np.sum(wts)) ** (1.0 / q)


def integrate(f: GridFunction, region: Cube | None = None) -> float:
    """Midpoint-rule integral of ``f`` over ``region`` (default: the whole domain)."""
    if region is None:
        return float(np.sum(f.values) * f.grid.cell_volume)
    sl, wts = cube_weights(f.grid, region)
    return float(np.sum(wts * f.values[sl]) * f.grid.cell_volume)


# --- homogeneous integrands -------------------------------------------------

# Beyond this |exponent| shell integrals over/underflow; homogeneity gives the ratio exactly.
_MEASURABLE_EXPONENT = 60.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _gauss_box(b: float, lo: np.ndarray, hi: np.ndarray, scale: float = 1.0) -> float:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = [m + s * _GL_NODES for m, s in zip(mid, half)]
    grids = np.meshgrid(*nodes, indexing="ij")
    r2 = sum(g * g for g in grids) / (scale * scale)
    w = _GL_WEIGHTS * half[0]
    for s in half[1:]:
        w = np.multiply.outer(w, _GL_WEIGHTS * s)
    return float(np.sum(w * r2 ** (0.5 * b)))


def _smooth_box(b: float, lo: np.ndarray, hi: np.ndarray, scale: float = 1.0, depth: int = 0) -> float:
    # Box not containing the origin; bisect until it is small relative to its distance.
    nearest = np.clip(0.0, lo, hi)
    dist = float(np.linalg.norm(nearest))
    diam = float(np.linalg.norm(hi - lo))
    if diam <= 0.5 * dist or depth >= 48:
        return _gauss_box(b, lo, hi, scale)
    mid = 0.5 * (lo + hi)
    total = 0.0
    for choice in itertools.product((0, 1), repeat=len(lo)):
        c = np.array(choice, dtype=bool)
        total += _smooth_box(b, np.where(c, mid, lo), np.where(c, hi, mid), scale, depth + 1)
    return total


def _corner_shells(b: float, c: np.ndarray, scale: float = 1.0) -> tuple[float, float]:
    """Integrals of |x|^b over [0,c] minus [0,c/2], and over [0,c/2] minus [0,c/4]."""

    def shell(cc: np.ndarray) -> float:
        half = 0.5 * cc
        total = 0.0
        for choice in itertools.product((0, 1), repeat=len(cc)):
            if not any(choice):
                continue
            ch = np.array(choice, dtype=bool)
            total += _smooth_box(b, np.where(ch, half, 0.0), np.where(ch, cc, half), scale)
        return total

    return shell(c), shell(0.5 * c)


@functools.lru_cache(maxsize=4096)
def shell_ratio(b: float, n: int) -> float:
    """Measured ratio of consecutive dyadic-shell integrals of ``|x|^b`` at the origin.

    The integral near 0 is a geometric series in this ratio, so it converges
    iff the ratio is below 1; for homogeneous integrands it equals ``2**-(n+b)``.
    """
    if abs(b) > _MEASURABLE_EXPONENT:
        e = -(n + b)
        return math.inf if e > 1000 else 2.0**e
    s0, s1 = _corner_shells(b, np.ones(n))
    return s1 / s0


def power_integral(b: float, lo: Sequence[float], hi: Sequence[float], scale: float = 1.0) -> float:
    """``int (|x|/scale)^b dx`` over the box ``[lo, hi]``; ``inf`` when the origin makes it diverge."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    snap = 1e-12 * float(np.max(hi - lo))
    lo = np.where(np.abs(lo) < snap, 0.0, lo)
    hi = np.where(np.abs(hi) < snap, 0.0, hi)
    if not (np.all(lo <= 0.0) and np.all(hi >= 0.0)):
        return _smooth_box(b, lo, hi, scale)
    # Origin in the closed box: split into orthant boxes with the origin at a vertex.
    ratio = shell_ratio(float(b), int(n))
    if ratio >= 1.0 - 1e-12:
        return math.inf
    total = 0.0
    for choice in itertools.product((0, 1), repeat=n):
        c = np.array([hi[i] if choice[i] else -lo[i] for i in range(n)])
        if np.any(c <= 0.0):
            continue
        s0, _ = _corner_shells(b, c, scale)
        total += s0 / (1.0 - ratio)
    return total


def power_mass_closed_form(a: float, side: float) -> float:
    """``int_{Q(0,side)} |x|^a dx`` in one dimension."""
    if a <= -1:
        return math.inf
    return 2.0 * (side / 2.0) ** (a + 1) / (a + 1)


def weight_mass(w, Q: Cube) -> float:
    """``w(Q) = int_Q w``.

    Power weights use the shell quadrature of :func:`power_integral`;
    tabulated weights use the midpoint rule on their own grid.
    """
    if w.kind == "power":
        if w.a <= -w.n:
            raise ValueError(f"non-integrable weight: a={w.a} <= -n={-w.n}")
        return power_integral(w.a, Q.lo, Q.hi)
    sl, wts = cube_weights(w.table.grid, Q)
    return float(np.sum(wts * w.table.values[sl]) * w.table.grid.cell_volume)
