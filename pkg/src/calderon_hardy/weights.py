"""Muckenhoupt and reverse Hölder constants, critical indices, Fefferman-Stein ratios.

Class constants are maxima over an explicit finite cube family.  A constant
"diverges" when one of the cube averages involved is infinite; this is
detected by quadrature through the ratio of consecutive dyadic shells around
the singular point (ratio >= 1 means the shell series does not converge).
That ratio is reported as the growth rate of the estimate per cube halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_grid import (
    Cube,
    Grid,
    GridFunction,
    cube_weights,
    power_integral,
    shell_ratio,
    weight_mass,
)

# Shell ratio at or above which a tabulated average is declared divergent.
TABULATED_DIVERGENCE_RATIO = 0.95
DEFAULT_MAX_CUBES = 10_000


@dataclass(frozen=True, eq=False)
class Weight:
    """A power weight ``|x|^a`` or a tabulated positive grid function."""

    kind: str
    n: int
    a: float | None = None
    table: GridFunction | None = None

    def __post_init__(self) -> None:
        if self.kind == "power":
            if self.a is None:
                raise ValueError("power weight needs an exponent")
            if self.a <= -self.n:
                raise ValueError(f"non-integrable weight: a={self.a} <= -n={-self.n}")
        elif self.kind == "tabulated":
            if self.table is None or np.any(self.table.values <= 0):
                raise ValueError("tabulated weight samples must all be positive")
        else:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def power(cls, a: float, n: int) -> Weight:
        return cls("power", int(n), a=float(a))

    @classmethod
    def unit(cls, n: int) -> Weight:
        return cls.power(0.0, n)

    @classmethod
    def tabulated(cls, table: GridFunction) -> Weight:
        return cls("tabulated", table.grid.n, table=table)

    @property
    def label(self) -> str:
        return f"power(a={self.a!r})" if self.kind == "power" else "tabulated"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.kind == "power":
            r = np.linalg.norm(pts.reshape(-1, self.n), axis=-1).reshape(pts.shape[:-1])
            return r**self.a
        grid = self.table.grid
        idx = np.floor((pts - grid.domain.lo) / grid.h).astype(int)
        idx = np.clip(idx, 0, grid.points_per_axis - 1)
        return self.table.values[tuple(np.moveaxis(idx, -1, 0))]

    def on_grid(self, grid: Grid) -> np.ndarray:
        """Node samples of the weight on ``grid``."""
        if self.kind == "power":
            if self.a == 0:
                return np.ones(grid.shape)
            r = np.sqrt(sum(m * m for m in grid.mesh()))
            return r**self.a
        if not self.table.grid.same_as(grid):
            raise ValueError("tabulated weight lives on a different grid")
        return self.table.values

    def cube_average(self, Q: Cube, s: float = 1.0) -> float:
        """``|Q|^-1 int_Q w^s``, possibly ``inf``."""
        return math.exp(self.log_cube_average(Q, s))

    def log_cube_average(self, Q: Cube, s: float = 1.0) -> float:
        """Logarithm of :meth:`cube_average`; stays finite for large ``|s|``."""
        if self.kind == "power":
            b = self.a * s
            far = float(np.linalg.norm(np.maximum(np.abs(Q.lo), np.abs(Q.hi))))
            near = float(np.linalg.norm(np.clip(0.0, Q.lo, Q.hi)))
            scale = near if (b < 0 and near > 0) else far
            integral = power_integral(b, Q.lo, Q.hi, scale)
            if not math.isfinite(integral):
                return math.inf
            return b * math.log(scale) + math.log(integral / Q.volume)
        sl, wts = cube_weights(self.table.grid, Q)
        logv = s * np.log(self.table.values[sl])
        top = float(np.max(logv))
        return top + math.log(float(np.sum(wts * np.exp(logv - top)) / np.sum(wts)))

    def mass(self, Q: Cube) -> float:
        return weight_mass(self, Q)

    def growth_rate(self, s: float) -> float:
        """Dyadic shell ratio of ``w^s`` at its most singular point."""
        if self.kind == "power":
            return shell_ratio(self.a * s, self.n)
        return _tabulated_shell_ratio(self.table, s)


def _tabulated_shell_ratio(table: GridFunction, s: float) -> float:
    vals = table.values**s
    grid = table.grid
    center = np.array([ax[i] for ax, i in zip(grid.axes, np.unravel_index(np.argmax(vals), vals.shape))])
    side = grid.domain.side / 2
    masses = []
    while side >= 4 * grid.h:
        sl, wts = cube_weights(grid, Cube(center, side))
        masses.append(float(np.sum(wts * vals[sl])))
        side /= 2
    if len(masses) < 4:
        return 0.0
    shells = [m0 - m1 for m0, m1 in zip(masses, masses[1:])]
    return shells[-1] / shells[-2] if shells[-2] > 0 else math.inf


@dataclass(frozen=True)
class ClassConstant:
    """Maximum of a class ratio over a cube family, or a divergence flag."""

    value: float
    diverged: bool
    growth_rate: float | None
    max_attained_on: Cube | None
    family_size: int

    def __float__(self) -> float:
        return float(self.value)


def ap_constant(w: Weight, p: float, cubes: Sequence[Cube]) -> ClassConstant:
    """Estimate of ``[w]_{A_p}``: max over ``cubes`` of ``avg(w) * avg(w^(-1/(p-1)))^(p-1)``."""
    if not p > 1:
        raise ValueError(f"A_p needs p > 1, got {p}")
    dual = -1.0 / (p - 1.0)

    def ratio(Q: Cube) -> float:
        return math.exp(w.log_cube_average(Q) + (p - 1) * w.log_cube_average(Q, dual))

    return _family_max(w, cubes, ratio, dual)


def rh_constant(w: Weight, s: float, cubes: Sequence[Cube]) -> ClassConstant:
    """Estimate of ``[w]_{RH_s}``: max over ``cubes`` of ``avg(w^s)^(1/s) / avg(w)``."""
    if not s > 1:
        raise ValueError(f"RH_s needs s > 1, got {s}")

    def ratio(Q: Cube) -> float:
        return math.exp(w.log_cube_average(Q, s) / s - w.log_cube_average(Q))

    return _family_max(w, cubes, ratio, s)


def _family_max(w: Weight, cubes: Sequence[Cube], ratio, singular_exponent: float) -> ClassConstant:
    cubes = list(cubes)
    if not cubes:
        raise ValueError("empty cube family")
    if w.kind == "tabulated":
        rate = w.growth_rate(singular_exponent)
        if rate >= TABULATED_DIVERGENCE_RATIO:
            return ClassConstant(math.inf, True, rate, None, len(cubes))
    best, arg = -math.inf, None
    for Q in cubes:
        v = ratio(Q)
        if not math.isfinite(v):
            return ClassConstant(math.inf, True, w.growth_rate(singular_exponent), Q, len(cubes))
        if v > best:
            best, arg = v, Q
    return ClassConstant(best, False, None, arg, len(cubes))


SCAN_OFFSETS = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 4.0, 8.0)
POWER_OFFSETS = tuple(float(t) for t in np.linspace(0.0, 1.5, 49)) + (2.0, 3.0, 4.0, 8.0)


def power_family(n: int, offsets: Sequence[float] = POWER_OFFSETS) -> list[Cube]:
    """Unit cubes at several distances from the origin.

    For a power weight every class ratio depends only on the centre-to-side
    ratio, so this family covers all cube shapes up to dilation.  The default
    offsets are dense where the ratios peak (the cube edge near the origin).
    """
    cubes = []
    for t in offsets:
        cubes.append(Cube((t,) + (0.0,) * (n - 1), 1.0))
        if n > 1 and t > 0:
            cubes.append(Cube((t,) * n, 1.0))
    return cubes


def dyadic_cube_family(grid: Grid, max_cubes: int = DEFAULT_MAX_CUBES, seed: int = 0) -> list[Cube]:
    """Cubes with dyadic sides ``h 2^j`` centred at nodes, kept inside the domain.

    When the full family exceeds ``max_cubes`` each side level keeps an equal
    share chosen uniformly at random (seeded) from its admissible centres.
    """
    pts = grid.points()
    levels = []
    side = 2 * grid.h
    while side <= grid.domain.side * (1 + 1e-12):
        inside = np.all(
            (pts - side / 2 >= grid.domain.lo - 1e-12) & (pts + side / 2 <= grid.domain.hi + 1e-12), axis=1
        )
        idx = np.nonzero(inside)[0]
        if idx.size:
            levels.append((side, idx))
        side *= 2
    total = sum(idx.size for _, idx in levels)
    rng = np.random.default_rng(seed)
    share = max(1, max_cubes // max(1, len(levels)))
    cubes = []
    for side, idx in levels:
        if total > max_cubes and idx.size > share:
            idx = np.sort(rng.choice(idx, size=share, replace=False))
        cubes.extend(Cube(pts[i], side) for i in idx)
    return cubes


@dataclass(frozen=True)
class CriticalIndices:
    q_w: float
    r_w: float
    q_scan: float
    r_scan: float


def _bisect_boundary(diverges, lo: float, hi: float, tol: float) -> float:
    # diverges(lo) != diverges(hi); returns the switching point.
    d_lo = diverges(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if diverges(mid) == d_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_q_w(w: Weight, cubes: Sequence[Cube], tol: float = 1e-3, p_max: float = 1e3) -> float:
    """Infimum of ``p`` with a finite ``A_p`` estimate, found by bisection on the divergence flag."""
    div = lambda p: ap_constant(w, p, cubes).diverged  # noqa: E731
    p_lo = 1.0 + tol / 4
    if not div(p_lo):
        return 1.0
    p_hi = 2.0
    while div(p_hi):
        p_hi *= 2
        if p_hi > p_max:
            return math.inf
    return _bisect_boundary(div, p_lo, p_hi, tol)


def scan_r_w(w: Weight, cubes: Sequence[Cube], tol: float = 1e-3, s_max: float = 1e3) -> float:
    """Supremum of ``s`` with a finite ``RH_s`` estimate, by bisection."""
    div = lambda s: rh_constant(w, s, cubes).diverged  # noqa: E731
    if not div(s_max):
        return math.inf
    s_lo = 1.0 + tol / 4
    if div(s_lo):
        return 1.0
    return _bisect_log(div, s_lo, s_max, tol)


def _bisect_log(div, lo: float, hi: float, tol: float) -> float:
    # Geometric steps while the bracket is wide, arithmetic once it is narrow.
    while hi - lo > tol:
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if div(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_indices(w: Weight, cubes: Sequence[Cube] | None = None, agreement: float = 0.05) -> CriticalIndices:
    """``(q_w, r_w)`` of a weight.

    Power weights have closed forms ``q_w = 1 + max(a, 0)/n`` and
    ``r_w = n/(-a)`` for ``a < 0`` (else infinity); both are confirmed by the
    bisection scans before being returned.  Tabulated weights get the scan
    values only.
    """
    if cubes is None:
        # Divergence is decided at cubes touching the origin, so a coarse family suffices.
        cubes = power_family(w.n, SCAN_OFFSETS) if w.kind == "power" else dyadic_cube_family(w.table.grid, max_cubes=2000)
    q_scan = scan_q_w(w, cubes)
    r_scan = scan_r_w(w, cubes)
    if w.kind != "power":
        return CriticalIndices(q_scan, r_scan, q_scan, r_scan)
    q_w = 1.0 + max(w.a, 0.0) / w.n
    r_w = w.n / (-w.a) if w.a < 0 else math.inf
    if abs(q_scan - q_w) > agreement:
        raise RuntimeError(f"q_w scan {q_scan} disagrees with closed form {q_w}")
    if math.isinf(r_w) != math.isinf(r_scan) or (math.isfinite(r_w) and abs(r_scan - r_w) > agreement):
        raise RuntimeError(f"r_w scan {r_scan} disagrees with closed form {r_w}")
    return CriticalIndices(q_w, r_w, q_scan, r_scan)


@dataclass(frozen=True)
class WeightClassReport:
    weight: str
    p: float
    ap_constant_estimate: float
    ap_diverged: bool
    cube_family_size: int
    max_attained_on: Cube | None
    rh_exponent: float
    rh_constant_estimate: float
    rh_diverged: bool
    cube_family: str
    tolerance: float = 1e-2

    def to_record(self) -> str:
        """Flat ``key = value`` text record."""
        lines = []
        for key, value in self.as_dict().items():
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        q = self.max_attained_on
        return {
            "weight": self.weight,
            "p": self.p,
            "ap_constant_estimate": self.ap_constant_estimate,
            "ap_diverged": self.ap_diverged,
            "cube_family": self.cube_family,
            "cube_family_size": self.cube_family_size,
            "max_attained_on": "" if q is None else f"center={list(q.center)} side={q.side!r}",
            "rh_exponent": self.rh_exponent,
            "rh_constant_estimate": self.rh_constant_estimate,
            "rh_diverged": self.rh_diverged,
            "tolerance": self.tolerance,
        }


def classify(w: Weight, p: float, s: float, cubes: Sequence[Cube], family_name: str) -> WeightClassReport:
    ap = ap_constant(w, p, cubes)
    rh = rh_constant(w, s, cubes)
    return WeightClassReport(
        weight=w.label,
        p=p,
        ap_constant_estimate=ap.value,
        ap_diverged=ap.diverged,
        cube_family_size=ap.family_size,
        max_attained_on=ap.max_attained_on,
        rh_exponent=s,
        rh_constant_estimate=rh.value,
        rh_diverged=rh.diverged,
        cube_family=family_name,
    )


def fefferman_stein_ratio(fs: Sequence[GridFunction], u: float, p: float, w: Weight) -> float:
    """``||(sum (M f_j)^u)^(1/u)||_{L^p(w)} / ||(sum |f_j|^u)^(1/u)||_{L^p(w)}``."""
    from .maximal import hl_maximal

    if not fs:
        raise ValueError("trivial family: no functions")
    grid = fs[0].grid
    wv = w.on_grid(grid)
    num = sum(hl_maximal(f).values ** u for f in fs) ** (1.0 / u)
    den = sum(np.abs(f.values) ** u for f in fs) ** (1.0 / u)
    den_norm = float(np.sum(den**p * wv)) ** (1.0 / p)
    if den_norm == 0:
        raise ValueError("trivial family: all functions vanish")
    return float(np.sum(num**p * wv)) ** (1.0 / p) / den_norm
