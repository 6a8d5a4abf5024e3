"""Fundamental solution of the polyharmonic operator and atom potentials.

``Phi(x) = C |x|^(2m-n) ln|x|`` when ``n`` is even and ``2m >= n``, otherwise
``Phi(x) = C |x|^(2m-n)``.  The constant ``C`` is calibrated numerically from
``int Phi Delta^m phi = phi(0)`` on a polynomial bump; it is never typed in.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, interpolate, signal, special

from .atoms import Atom
from .core_grid import Cube, Grid, GridFunction
from .maximal import multi_indices

NORMALIZE_TOL = 1e-3
NEAR_CELLS = 2
REFINE = 4


def branch_of(n: int, m: int) -> str:
    return "log" if (n % 2 == 0 and 2 * m - n >= 0) else "power"


@dataclass(frozen=True)
class FundamentalSolution:
    n: int
    m: int
    C: float
    branch: str = ""

    def __post_init__(self) -> None:
        if self.n not in (1, 2, 3) or self.m not in (1, 2):
            raise ValueError("supported orders are n in {1,2,3}, m in {1,2}")
        expected = branch_of(self.n, self.m)
        if self.branch == "":
            object.__setattr__(self, "branch", expected)
        elif self.branch != expected:
            raise ValueError(f"branch {self.branch!r} inconsistent with n={self.n}, m={self.m}")

    @property
    def degree(self) -> int:
        return 2 * self.m - self.n

    def radial(self, r: np.ndarray) -> np.ndarray:
        """``Phi`` as a function of ``r > 0``."""
        r = np.asarray(r, dtype=float)
        out = self.C * r**self.degree
        return out * np.log(r) if self.branch == "log" else out

    def as_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "branch": self.branch, "C": self.C}


# --- calibration ---------------------------------------------------------------------


@dataclass(frozen=True)
class RadialBump:
    """``(1 - (r/width)^2)^order`` on the ball of radius ``width``."""

    width: float = 1.0
    order: int = 6

    def polyharmonic(self, n: int, m: int):
        """``(phi(0), Delta^m phi)`` with the latter as a callable of ``r``, by exact differentiation."""
        import sympy as sp

        r = sp.symbols("r", positive=True)
        f = (1 - (r / sp.nsimplify(self.width)) ** 2) ** self.order
        for _ in range(m):
            f = sp.simplify(sp.diff(f, r, 2) + (n - 1) / r * sp.diff(f, r))
        return 1.0, sp.lambdify(r, sp.expand(f), "numpy")


def _sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / special.gamma(n / 2)


def _pairing(n: int, m: int, bump: RadialBump) -> tuple[float, float]:
    # int Phi_1 Delta^m phi over R^n (C = 1), and phi(0).
    phi0, lap = bump.polyharmonic(n, m)
    unit = FundamentalSolution(n, m, 1.0)
    integrand = lambda r: float(unit.radial(r) * lap(r)) * r ** (n - 1)  # noqa: E731
    val, _ = integrate.quad(integrand, 0.0, bump.width, limit=400, epsabs=0.0, epsrel=1e-12)
    return _sphere_area(n) * val, phi0


def phi_normalize(n: int, m: int, probe: RadialBump | None = None, check: RadialBump | None = None) -> float:
    """``C`` with ``int Phi_C Delta^m phi = phi(0)`` on ``probe``; a second bump checks the residual."""
    probe = probe or RadialBump(1.0, 2 * m + 2)
    check = check or RadialBump(0.7, 2 * m + 4)
    pairing, phi0 = _pairing(n, m, probe)
    if pairing == 0:
        raise RuntimeError("probe pairing vanishes; choose another probe")
    C = phi0 / pairing
    trace = []
    for bump in (probe, check):
        pr, p0 = _pairing(n, m, bump)
        trace.append(abs(C * pr - p0) / abs(p0))
    if max(trace) > NORMALIZE_TOL:
        raise RuntimeError(f"normalisation residual above tolerance: {trace}")
    return C


@functools.lru_cache(maxsize=None)
def fundamental_solution(n: int, m: int) -> FundamentalSolution:
    return FundamentalSolution(n, m, phi_normalize(n, m))


# --- kernel and derivatives -------------------------------------------------------------


def _as_points(x, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0 and n == 1:
        pts = pts.reshape(1)
    if pts.ndim == 0 or pts.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}")
    return pts


def phi_eval(fs: FundamentalSolution, x) -> np.ndarray | float:
    """``Phi(x)``; raises on ``x = 0``."""
    pts = _as_points(x, fs.n)
    r = np.linalg.norm(pts, axis=-1)
    if np.any(r == 0):
        raise ValueError("kernel singularity at x = 0")
    out = fs.radial(r)
    return float(out) if np.ndim(out) == 0 else out


@functools.lru_cache(maxsize=None)
def _derivative_function(n: int, m: int, branch: str, alpha: tuple[int, ...]):
    import sympy as sp

    xs = sp.symbols(f"x0:{n}", real=True)
    s = sum(x * x for x in xs)
    deg = sp.Rational(2 * m - n, 2)
    f = s**deg * sp.log(s) / 2 if branch == "log" else s**deg
    for i, a in enumerate(alpha):
        if a:
            f = sp.diff(f, xs[i], a)
    # Distributional terms sit at the origin, where the kernel is never evaluated.
    f = sp.simplify(f).replace(sp.DiracDelta, lambda *args: sp.Integer(0))
    return sp.lambdify(xs, sp.simplify(f), "numpy")


def partial_phi(fs: FundamentalSolution, alpha: Sequence[int], x) -> np.ndarray | float:
    """``d^alpha Phi(x)`` from the symbolic derivative of the radial form, ``|alpha| <= 2m``."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != fs.n or min(alpha) < 0:
        raise ValueError("multi-index length must equal the dimension")
    if sum(alpha) > 2 * fs.m:
        raise ValueError(f"derivative order unsupported: |alpha| = {sum(alpha)} > 2m = {2 * fs.m}")
    pts = _as_points(x, fs.n)
    if np.any(np.linalg.norm(pts, axis=-1) == 0):
        raise ValueError("kernel singularity at x = 0")
    func = _derivative_function(fs.n, fs.m, fs.branch, alpha)
    out = fs.C * np.broadcast_to(func(*np.moveaxis(pts, -1, 0)), pts.shape[:-1]).astype(float)
    return float(out) if np.ndim(out) == 0 else out


def sphere_points(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on the unit sphere and weights summing to 1."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if n == 2:
        t = 2 * np.pi * np.arange(order) / order
        return np.stack([np.cos(t), np.sin(t)], axis=-1), np.full(order, 1.0 / order)
    z, wz = np.polynomial.legendre.leggauss(order)
    t = 2 * np.pi * np.arange(2 * order) / (2 * order)
    Z, T = np.meshgrid(z, t, indexing="ij")
    rho = np.sqrt(1 - Z**2)
    pts = np.stack([rho * np.cos(T), rho * np.sin(T), Z], axis=-1).reshape(-1, 3)
    wts = (wz[:, None] / 2 * np.full(2 * order, 1.0 / (2 * order))[None, :]).ravel()
    return pts, wts


def sphere_mean(fs: FundamentalSolution, alpha: Sequence[int], order: int = 64) -> float:
    """Mean of ``d^alpha Phi`` over the unit sphere; vanishes when ``|alpha| = 2m``."""
    if sum(alpha) != 2 * fs.m:
        raise ValueError("sphere mean is defined for |alpha| = 2m")
    pts, wts = sphere_points(fs.n, order)
    return float(wts @ partial_phi(fs, alpha, pts))


# --- potentials ----------------------------------------------------------------------------


def _near_average(fs: FundamentalSolution, offset: np.ndarray, h: float, refine: int) -> float:
    # Cell average of Phi over the cell centred at ``offset`` by refine^n midpoints.
    sub = (np.arange(refine) + 0.5) / refine - 0.5
    mesh = np.meshgrid(*[o + sub * h for o in offset], indexing="ij")
    r = np.sqrt(sum(m * m for m in mesh))
    return float(np.mean(fs.radial(r)))


def kernel_table(fs: FundamentalSolution, grid: Grid, refine: int = REFINE) -> np.ndarray:
    """Cell-averaged kernel on all lattice offsets ``|k_i| <= N - 1``."""
    N, h = grid.points_per_axis, grid.h
    k = np.arange(-(N - 1), N)
    mesh = np.meshgrid(*([k * h] * grid.n), indexing="ij")
    r = np.sqrt(sum(m * m for m in mesh))
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.where(r > 0, fs.radial(np.where(r > 0, r, 1.0)), 0.0)
    c = N - 1
    near = range(-NEAR_CELLS, NEAR_CELLS + 1)
    for off in np.ndindex(*([len(near)] * grid.n)):
        ks = np.array([near[i] for i in off])
        idx = tuple(c + ks)
        factor = refine * 4 if not np.any(ks) else refine
        table[idx] = _near_average(fs, ks * h, h, factor)
    return table


def _resolution_check(a: Atom) -> None:
    cells = a.cube.side / a.grid.h
    if cells < 8 - 1e-9:
        raise ValueError(f"resolution too coarse: the atom cube spans {cells:.3g} < 8 cells per axis")


def potential(fs: FundamentalSolution, a: Atom, kernel: np.ndarray | None = None) -> GridFunction:
    """``b(x) = int Phi(x - y) a(y) dy`` at every lattice point of the atom's grid."""
    if fs.n != a.grid.n:
        raise ValueError("dimension mismatch")
    _resolution_check(a)
    if kernel is None:
        kernel = kernel_table(fs, a.grid)
    vals = signal.fftconvolve(a.samples.values, kernel, mode="same") * a.grid.cell_volume
    return a.samples.with_values(vals)


def potential_at(fs: FundamentalSolution, a: Atom | GridFunction, points, alpha: Sequence[int] | None = None) -> np.ndarray:
    """``d^alpha b`` at arbitrary points off the support, by differentiating under the integral."""
    samples = a.samples if isinstance(a, Atom) else a
    grid = samples.grid
    alpha = tuple(alpha) if alpha is not None else (0,) * grid.n
    mask = samples.values != 0
    ys = grid.points()[mask.ravel()]
    vals = samples.values[mask]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts))
    for i, x in enumerate(pts):
        out[i] = float(partial_phi(fs, alpha, x[None, :] - ys) @ vals) * grid.cell_volume if len(ys) else 0.0
    return out


def probe_row(a: Atom, start: float, stop: float, count: int, direction: Sequence[float] | None = None) -> np.ndarray:
    """Points ``x0 + t u`` for ``t`` geometric in ``[start, stop]`` times ``sqrt(n) r``."""
    n = a.grid.n
    u = np.asarray(direction if direction is not None else [1.0] + [0.37] * (n - 1), dtype=float)
    u = u / np.linalg.norm(u)
    ts = np.geomspace(start, stop, count) * math.sqrt(n) * a.cube.side
    return np.asarray(a.cube.center) + ts[:, None] * u[None, :]


@dataclass(frozen=True)
class DecayReport:
    max_ratio: float
    ratios: tuple[float, ...] = field(repr=False)
    distances: tuple[float, ...] = field(repr=False)
    slope: float = math.nan

    def as_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "slope": self.slope, "ratios": list(self.ratios), "distances": list(self.distances)}


def far_field_decay_check(fs: FundamentalSolution, a: Atom, alpha: Sequence[int], points) -> DecayReport:
    """Ratios ``|d^alpha b(x)| / (r^(2m+n) w(Q)^(-1/p) |x - x0|^(-n-|alpha|))`` at far probes."""
    alpha = tuple(alpha)
    if sum(alpha) > 2 * fs.m:
        raise ValueError(f"derivative order unsupported: |alpha| = {sum(alpha)} > 2m")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x0 = np.asarray(a.cube.center)
    r = a.cube.side
    dist = np.linalg.norm(pts - x0, axis=-1)
    if np.any(dist < math.sqrt(fs.n) * r * (1 - 1e-12)):
        raise ValueError("probes too close: need |x - x0| >= sqrt(n) r")
    vals = np.abs(potential_at(fs, a, pts, alpha))
    scale = r ** (2 * fs.m + fs.n) * a.weight.mass(a.cube) ** (-1.0 / a.p) * dist ** (-fs.n - sum(alpha))
    ratios = vals / scale
    slope = math.nan
    good = vals > 0
    if np.count_nonzero(good) >= 2:
        slope = float(np.polyfit(np.log(dist[good]), np.log(vals[good]), 1)[0])
    return DecayReport(float(np.max(ratios)), tuple(float(v) for v in ratios), tuple(float(v) for v in dist), slope)


# --- truncated singular integrals -----------------------------------------------------------


def epsilon_ladder(h: float, eps_max: float, eps_min: float | None = None) -> list[float]:
    """Dyadic ``eps`` from ``eps_min`` (default ``2h``) while ``eps <= eps_max``."""
    eps = 2 * h if eps_min is None else eps_min
    if eps < h * (1 - 1e-12):
        raise ValueError(f"epsilon {eps} below the grid spacing {h}")
    out = []
    while eps <= eps_max * (1 + 1e-12):
        out.append(eps)
        eps *= 2
    return out or [eps]


class _TruncatedSums:
    """Truncated sums at ``x`` for many ``eps`` at once.

    The kernel is even with vanishing sphere means, so the first-order Taylor
    polynomial of ``a`` at ``x`` integrates to zero against it on every
    annulus, also after multiplying by a radial cutoff.  Subtracting it near
    ``x`` removes the lattice noise of the truncation sphere cutting through
    cells; the smooth cutoff avoids creating a new sharp edge.
    """

    def __init__(self, samples: GridFunction, fs: FundamentalSolution, alpha: tuple[int, ...], x: np.ndarray):
        grid = samples.grid
        ax = grid.axes
        ys, vals = self._support(samples)
        ax_val, grad = _taylor(samples, x)
        if (ax_val != 0.0 or np.any(grad)) and len(ys):
            R = float(np.max(np.linalg.norm(ys - x, axis=-1))) + grid.h
            outer = max(R / 2, 8 * grid.h)
            sl = tuple(
                slice(int(np.searchsorted(a_, xi - R, side="left")), int(np.searchsorted(a_, xi + R, side="right")))
                for a_, xi in zip(ax, x)
            )
            mesh = np.meshgrid(*[a_[s_] for a_, s_ in zip(ax, sl)], indexing="ij")
            ys = np.stack([m.ravel() for m in mesh], axis=-1)
            vals = samples.values[sl].ravel()
            vals = vals - (ax_val + (ys - x) @ grad) * _cutoff(np.linalg.norm(ys - x, axis=-1) / outer)
        diff = x[None, :] - ys
        dist = np.linalg.norm(diff, axis=-1)
        keep = (dist > 0) & (vals != 0)
        order = np.argsort(dist[keep], kind="stable")
        self.dist = dist[keep][order]
        if np.any(keep):
            contrib = partial_phi(fs, alpha, diff[keep][order]) * vals[keep][order] * grid.cell_volume
        else:
            contrib = np.zeros(0)
        self.tail = np.concatenate([np.cumsum(contrib[::-1])[::-1], [0.0]])

    @staticmethod
    def _support(samples: GridFunction) -> tuple[np.ndarray, np.ndarray]:
        mask = samples.values != 0
        return samples.grid.points()[mask.ravel()], samples.values[mask]

    def value(self, eps: float) -> float:
        i = int(np.searchsorted(self.dist, eps, side="right"))
        return float(self.tail[i])


def _cutoff(t: np.ndarray) -> np.ndarray:
    # 1 on [0, 1/2], 0 beyond 1, quintic smoothstep in between.
    u = np.clip(2 * (1 - t), 0.0, 1.0)
    return u**3 * (10 - 15 * u + 6 * u * u)


def _taylor(samples: GridFunction, x: np.ndarray) -> tuple[float, np.ndarray]:
    # Value and gradient of the multilinear interpolant of the samples at x.
    grid = samples.grid
    fields = [samples.values] + list(np.gradient(samples.values, grid.h)) if grid.n > 1 else [samples.values, np.gradient(samples.values, grid.h)]
    out = [
        float(interpolate.RegularGridInterpolator(tuple(grid.axes), f, bounds_error=False, fill_value=0.0)(x[None, :])[0])
        for f in fields
    ]
    return out[0], np.array(out[1:])


def truncated_singular(a: Atom | GridFunction, fs: FundamentalSolution, alpha: Sequence[int], x, eps: float) -> float:
    """``int_{|x-y| > eps} d^alpha Phi(x - y) a(y) dy`` by lattice quadrature."""
    samples = a.samples if isinstance(a, Atom) else a
    if eps < samples.grid.h * (1 - 1e-12):
        raise ValueError(f"epsilon {eps} below the grid spacing {samples.grid.h}")
    alpha = tuple(alpha)
    if sum(alpha) != 2 * fs.m:
        raise ValueError("truncated singular integrals use |alpha| = 2m")
    return _TruncatedSums(samples, fs, alpha, np.asarray(x, dtype=float)).value(eps)


def t_star(a: Atom | GridFunction, fs: FundamentalSolution, alpha: Sequence[int], x, ladder: Sequence[float] | None = None) -> float:
    """``max_eps |truncated_singular|`` over a dyadic ``eps`` ladder."""
    samples = a.samples if isinstance(a, Atom) else a
    grid = samples.grid
    alpha = tuple(alpha)
    if sum(alpha) != 2 * fs.m:
        raise ValueError("truncated singular integrals use |alpha| = 2m")
    if ladder is None:
        ladder = epsilon_ladder(grid.h, grid.domain.side * math.sqrt(grid.n))
    if min(ladder) < grid.h * (1 - 1e-12):
        raise ValueError("epsilon below the grid spacing")
    sums = _TruncatedSums(samples, fs, alpha, np.asarray(x, dtype=float))
    return max(abs(sums.value(e)) for e in ladder)


def top_order_indices(n: int, m: int) -> list[tuple[int, ...]]:
    return [a for a in multi_indices(n, 2 * m) if sum(a) == 2 * m]


# --- discrete polyharmonic residual ----------------------------------------------------------


def discrete_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Standard ``(2n+1)``-point Laplacian; the outermost ring is set to ``nan``."""
    out = np.full(values.shape, np.nan)
    inner = tuple(slice(1, -1) for _ in values.shape)
    acc = -2.0 * values.ndim * values[inner]
    for ax in range(values.ndim):
        plus = tuple(slice(2, None) if i == ax else slice(1, -1) for i in range(values.ndim))
        minus = tuple(slice(None, -2) if i == ax else slice(1, -1) for i in range(values.ndim))
        acc = acc + values[plus] + values[minus]
    out[inner] = acc / h**2
    return out


def laplacian_residual(b: GridFunction, a: Atom | GridFunction, m: int, region: Cube | None = None) -> float:
    """``||Delta_h^m b - a||_{L^2(R)} / ||a||_{L^2(R)}`` over ``R = 2Q`` (or the given region)."""
    grid = b.grid
    samples = a.samples if isinstance(a, Atom) else a
    if region is None:
        if not isinstance(a, Atom):
            raise ValueError("a test region is required for a plain grid function")
        region = a.cube.dilate(2.0)
    margin = m * grid.h
    if np.any(region.lo < grid.domain.lo + margin - 1e-12) or np.any(region.hi > grid.domain.hi - margin + 1e-12):
        raise ValueError("truncation contamination: the test region meets the stencil boundary layer")
    lap = b.values
    for _ in range(m):
        lap = discrete_laplacian(lap, grid.h)
    mask = region.contains(grid.points(), closed=True).reshape(grid.shape)
    diff = lap[mask] - samples.values[mask]
    denom = float(np.sqrt(np.sum(samples.values[mask] ** 2)))
    num = float(np.sqrt(np.sum(diff**2)))
    if denom == 0:
        return 0.0 if num == 0 else math.inf
    return num / denom
