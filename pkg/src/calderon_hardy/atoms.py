"""Weighted atoms: construction, validation and finite atomic series.

A ``w-(p, p0, d)`` atom centred on a cube ``Q`` is supported in ``Q``, has
``||a||_{p0} <= |Q|^{1/p0} w(Q)^{-1/p}`` and moments up to order ``d``
vanishing.  All integrals are lattice sums, so the moments produced by
:func:`make_atom` vanish to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core_grid import Cube, GridFunction, _check_same_grid
from .maximal import _basis, multi_indices
from .weights import CriticalIndices, Weight, critical_indices

MOMENT_TOL = 1e-10
NORM_RTOL = 1e-9
SUPPORT_TOL = 0.0

_INDEX_CACHE: dict = {}


def weight_indices(w: Weight) -> CriticalIndices:
    """Cached :func:`critical_indices`; power weights are keyed by ``(n, a)``."""
    key = ("power", w.n, w.a) if w.kind == "power" else ("tab", id(w))
    if key not in _INDEX_CACHE:
        _INDEX_CACHE[key] = critical_indices(w)
    return _INDEX_CACHE[key]


def min_moment_order(n: int, q_w: float, p: float, m: int | None = None) -> int:
    """Smallest admissible ``d``: ``floor(n (q_w/p - 1))``, and ``2m - 1`` when potentials are taken."""
    d = int(math.floor(n * (q_w / p - 1.0) + 1e-12))
    if m is not None:
        d = max(d, 2 * m - 1)
    return max(d, 0)


def p0_lower_bound(p: float, r_w: float) -> float:
    """``max(1, p r_w / (r_w - 1))``; ``p0`` must exceed this."""
    if math.isinf(r_w):
        return max(1.0, p)
    return max(1.0, p * r_w / (r_w - 1.0))


def check_parameters(w: Weight, p: float, p0: float, d: int, m: int | None = None) -> None:
    """Raise ``ValueError`` naming the first violated admissibility inequality."""
    if not 0 < p <= 1:
        raise ValueError(f"violated 0 < p <= 1 (p={p})")
    idx = weight_indices(w)
    d_min = min_moment_order(w.n, idx.q_w, p, m)
    if d < d_min:
        which = "d >= max(floor(n(q_w/p - 1)), 2m - 1)" if m is not None else "d >= floor(n(q_w/p - 1))"
        raise ValueError(f"violated {which}: d={d} < {d_min}")
    bound = p0_lower_bound(p, idx.r_w)
    if not p0 > bound:
        raise ValueError(f"violated p0 > max(1, p r_w/(r_w - 1)): p0={p0} <= {bound}")


@dataclass(frozen=True, eq=False)
class Atom:
    cube: Cube
    samples: GridFunction
    p: float
    p0: float
    d: int
    weight: Weight

    @property
    def grid(self):
        return self.samples.grid

    def norm_bound(self) -> float:
        """``|Q|^{1/p0} w(Q)^{-1/p}``."""
        return self.cube.volume ** (1.0 / self.p0) * self.weight.mass(self.cube) ** (-1.0 / self.p)

    def scaled(self, c: float) -> Atom:
        return Atom(self.cube, self.samples * c, self.p, self.p0, self.d, self.weight)

    def with_samples(self, samples: GridFunction) -> Atom:
        return Atom(self.cube, samples, self.p, self.p0, self.d, self.weight)


@dataclass(frozen=True)
class AtomReport:
    escaped_mass: float
    norm: float
    norm_bound: float
    moment_residual: float
    support_ok: bool
    norm_ok: bool
    moments_ok: bool

    @property
    def slack(self) -> float:
        """``||a||_{p0}`` over its bound; at most 1 for an atom."""
        return self.norm / self.norm_bound

    @property
    def passed(self) -> bool:
        return self.support_ok and self.norm_ok and self.moments_ok

    def as_dict(self) -> dict:
        return {
            "escaped_mass": self.escaped_mass,
            "norm": self.norm,
            "norm_bound": self.norm_bound,
            "slack": self.slack,
            "moment_residual": self.moment_residual,
            "support_ok": self.support_ok,
            "norm_ok": self.norm_ok,
            "moments_ok": self.moments_ok,
            "passed": self.passed,
        }


def _support_mask(samples: GridFunction, Q: Cube) -> np.ndarray:
    return Q.contains(samples.grid.points(), closed=True).reshape(samples.grid.shape)


def moment_residuals(samples: GridFunction, Q: Cube, d: int) -> np.ndarray:
    """``|sum ((y - c)/side)^alpha a(y) h^n| / ||a||_1`` for every ``|alpha| <= d``."""
    grid = samples.grid
    vals = samples.values.ravel()
    l1 = float(np.sum(np.abs(vals))) * grid.cell_volume
    if l1 == 0:
        return np.zeros(len(multi_indices(grid.n, d)))
    B = _basis([m.ravel() for m in grid.mesh()], Q.center, Q.side, tuple(multi_indices(grid.n, d)))
    return np.abs(B.T @ vals) * grid.cell_volume / l1


def validate_atom(a: Atom) -> AtomReport:
    """Check support, size and moment conditions; never raises."""
    grid = a.grid
    mask = _support_mask(a.samples, a.cube)
    escaped = float(np.sum(np.abs(a.samples.values[~mask]))) * grid.cell_volume
    total = float(np.sum(np.abs(a.samples.values))) * grid.cell_volume
    norm = a.samples.lp_norm(a.p0)
    bound = a.norm_bound()
    moments = float(np.max(moment_residuals(a.samples, a.cube, a.d))) if a.d >= 0 else 0.0
    return AtomReport(
        escaped_mass=escaped,
        norm=norm,
        norm_bound=bound,
        moment_residual=moments,
        support_ok=escaped <= SUPPORT_TOL * max(total, 1.0),
        norm_ok=norm <= bound * (1 + NORM_RTOL),
        moments_ok=moments <= MOMENT_TOL,
    )


def remove_moments(samples: GridFunction, Q: Cube, d: int) -> GridFunction:
    """Subtract the lattice ``L^2(Q)`` projection onto polynomials of degree ``<= d``; zero outside ``Q``."""
    grid = samples.grid
    mask = _support_mask(samples, Q)
    exps = tuple(multi_indices(grid.n, d))
    if np.count_nonzero(mask) < len(exps):
        raise ValueError("cube too small for degree")
    pts = grid.points()[mask.ravel()]
    B = _basis([pts[:, i] for i in range(grid.n)], Q.center, Q.side, exps)
    vals = samples.values[mask]
    # Orthonormal basis of the polynomial space restricted to Q, via QR.
    qmat, _ = np.linalg.qr(B)
    proj = vals - qmat @ (qmat.T @ vals)
    # A second pass removes the rounding left by the first.
    proj = proj - qmat @ (qmat.T @ proj)
    out = np.zeros(grid.shape)
    out[mask] = proj
    return samples.with_values(out)


def make_atom(
    bump: GridFunction, Q: Cube, w: Weight, p: float, p0: float, d: int, m: int | None = None
) -> Atom:
    """Project out moments of order ``<= d`` and rescale so the size condition is an equality.

    ``m`` (when given) adds the potential-theoretic requirement ``d >= 2m - 1``.
    """
    if bump.grid.n != Q.n or w.n != Q.n:
        raise ValueError("dimension mismatch between bump, cube and weight")
    check_parameters(w, p, p0, d, m)
    mask = _support_mask(bump, Q)
    outside = float(np.max(np.abs(bump.values[~mask]), initial=0.0))
    if outside > 0:
        raise ValueError("bump not supported in the cube")
    cleaned = remove_moments(bump, Q, d)
    size = float(np.max(np.abs(bump.values)))
    if size == 0 or float(np.max(np.abs(cleaned.values))) <= 1e-10 * size:
        raise ValueError("degenerate bump: it is a polynomial of degree <= d on the cube")
    atom = Atom(Q, cleaned, p, p0, d, w)
    atom = atom.scaled(atom.norm_bound() / cleaned.lp_norm(p0))
    report = validate_atom(atom)
    if not report.passed:
        raise RuntimeError(f"constructed atom failed validation: {report.as_dict()}")
    return atom


def smooth_bump(grid, Q: Cube, power: int = 2, seed: int | None = None, modes: int = 3) -> GridFunction:
    """``prod_i (1 - 4 u_i^2)^power`` on ``Q`` (``u = (y - c)/side``), optionally times a random trigonometric factor."""
    mesh = grid.mesh()
    u = [(m - c) / Q.side for m, c in zip(mesh, Q.center)]
    inside = np.ones(grid.shape, dtype=bool)
    val = np.ones(grid.shape)
    for ui in u:
        inside &= np.abs(ui) <= 0.5
        val = val * np.clip(1 - 4 * ui * ui, 0, None) ** power
    if seed is not None:
        rng = np.random.default_rng(seed)
        factor = np.zeros(grid.shape) + rng.normal()
        for _ in range(modes):
            k = rng.integers(1, 4, size=grid.n)
            phase = rng.uniform(0, 2 * np.pi)
            factor = factor + rng.normal() * np.cos(2 * np.pi * sum(ki * ui for ki, ui in zip(k, u)) + phase)
        val = val * factor
    return GridFunction(grid, np.where(inside, val, 0.0))


def smooth_moment_free(bump: GridFunction, Q: Cube, d: int, window_power: int = 4) -> GridFunction:
    """Remove moments of order ``<= d`` by subtracting ``psi * P`` with ``psi`` the smooth window on ``Q``.

    Unlike the plain projection this keeps a smooth bump smooth across the
    faces of ``Q``, so the :func:`make_atom` projection that follows has only
    rounding left to remove.
    """
    grid = bump.grid
    psi = smooth_bump(grid, Q, power=window_power).values.ravel()
    mask = psi > 0
    exps = tuple(multi_indices(grid.n, d))
    pts = grid.points()[mask]
    B = _basis([pts[:, i] for i in range(grid.n)], Q.center, Q.side, exps)
    f = bump.values.ravel()[mask].copy()
    sw = np.sqrt(psi[mask])
    for _ in range(2):
        # Weighted normal equations through QR of sqrt(psi) B.
        _, r = np.linalg.qr(B * sw[:, None])
        c = np.linalg.solve(r, np.linalg.solve(r.T, B.T @ f))
        f = f - psi[mask] * (B @ c)
    out = np.zeros(grid.size)
    out[mask] = f
    return bump.with_values(out.reshape(grid.shape))


def random_atom(grid, Q: Cube, w: Weight, p: float, p0: float, d: int, seed: int, m: int | None = None) -> Atom:
    """A smooth atom: random trigonometric bump with moments removed inside a smooth window."""
    bump = smooth_bump(grid, Q, power=d + 2, seed=seed)
    return make_atom(smooth_moment_free(bump, Q, d), Q, w, p, p0, d, m)


@dataclass(frozen=True, eq=False)
class AtomicSeries:
    terms: tuple[tuple[float, Atom], ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("empty atomic series")
        lam0, a0 = self.terms[0]
        for lam, a in self.terms:
            if lam < 0:
                raise ValueError("coefficients must be nonnegative")
            if (a.p, a.p0, a.d) != (a0.p, a0.p0, a0.d) or a.weight.label != a0.weight.label:
                raise ValueError("atoms in a series must share (w, p, p0, d)")

    @classmethod
    def of(cls, terms: Sequence[tuple[float, Atom]]) -> AtomicSeries:
        return cls(tuple((float(lam), a) for lam, a in terms))

    def coefficient_sum(self) -> float:
        """``sum lambda_j^p``."""
        p = self.terms[0][1].p
        return float(sum(lam**p for lam, _ in self.terms))


@dataclass(frozen=True, eq=False)
class SeriesResult:
    total: GridFunction
    tail_norms: tuple[float, ...] = field(repr=False)
    tail_bounds: tuple[float, ...] = field(repr=False)


def assemble_series(series: AtomicSeries) -> SeriesResult:
    """``f = sum lambda_j a_j`` summed in order, with ``||f - S_j||_{p0}`` and the triangle bounds for each ``j``."""
    grid = series.terms[0][1].grid
    for _, a in series.terms:
        _check_same_grid(series.terms[0][1].samples, a.samples)
    p0 = series.terms[0][1].p0
    pieces = [a.samples * lam for lam, a in series.terms]
    total = GridFunction.zeros(grid)
    for piece in pieces:
        total = total + piece
    tails, bounds = [], []
    partial = GridFunction.zeros(grid)
    norms = [pc.lp_norm(p0) for pc in pieces]
    for j in range(len(pieces) + 1):
        tails.append((total - partial).lp_norm(p0))
        bounds.append(float(sum(norms[j:])))
        if j < len(pieces):
            partial = partial + pieces[j]
    return SeriesResult(total, tuple(tails), tuple(bounds))
