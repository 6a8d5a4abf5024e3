"""Maximal operators on grid functions.

* :func:`hl_maximal` -- uncentred Hardy-Littlewood maximal function over
  lattice-aligned cubes with sides from a fine geometric ladder.
* :func:`smooth_maximal`, :func:`grand_maximal` -- ``sup_t |phi_t * f|`` for
  one polynomial bump, and the max over a finite dictionary of bumps.
* :func:`eta_maximal` -- Calderón's ``sup_r r^-gamma |g|_{q,Q(x,r)}``.
* :func:`n_maximal` -- the same supremum minimised over the polynomial
  class of ``g``, a convex minimax problem solved in epigraph form.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, signal, special

from .core_grid import Cube, Grid, GridFunction, RadiusLadder, cube_weights, local_norm

DEFAULT_SIDE_RATIO = 2.0 ** (1.0 / 16.0)
MINIMAX_TOL = 1e-6
NOISE_FLOOR = 1e-12


# --- Hardy-Littlewood ---------------------------------------------------------


def family_sides(points_per_axis: int, ratio: float = DEFAULT_SIDE_RATIO) -> list[int]:
    """Cube sides, in cells, of the maximal-function family: geometric with ``ratio``."""
    if ratio <= 1:
        raise ValueError("side ratio must exceed 1")
    sides, s = [], 1.0
    while True:
        k = int(round(s))
        if k > points_per_axis:
            break
        if not sides or k > sides[-1]:
            sides.append(k)
        s *= ratio
    if sides[-1] != points_per_axis:
        sides.append(points_per_axis)
    return sides


def _window_sums(arr: np.ndarray, k: int, axis: int) -> np.ndarray:
    # Sums over all length-k windows meeting the array (zero-extended); length N + k - 1.
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (k, k - 1)
    c = np.cumsum(np.pad(arr, pad), axis=axis)
    n_out = arr.shape[axis] + k - 1
    hi = np.take(c, np.arange(k, k + n_out), axis=axis)
    lo = np.take(c, np.arange(0, n_out), axis=axis)
    return hi - lo


def _forward_max(arr: np.ndarray, k: int, axis: int) -> np.ndarray:
    # out[i] = max(arr[i : i + k]) along axis, by doubling; output length N - k + 1.
    n_out = arr.shape[axis] - k + 1
    m = arr
    span = 1
    while 2 * span <= k:
        length = m.shape[axis] - span
        m = np.maximum(np.take(m, np.arange(length), axis=axis), np.take(m, np.arange(span, span + length), axis=axis))
        span *= 2
    first = np.take(m, np.arange(n_out), axis=axis)
    second = np.take(m, np.arange(k - span, k - span + n_out), axis=axis)
    return np.maximum(first, second)


def hl_maximal(f: GridFunction, side_ratio: float = DEFAULT_SIDE_RATIO) -> GridFunction:
    """Uncentred maximal function ``sup_{Q containing x} avg_Q |f|``.

    The family is every lattice-aligned cube whose side (in cells) belongs to
    :func:`family_sides`; ``f`` is extended by zero outside the domain.  With
    ``side_ratio=2`` this is the dyadic-side family, which approaches the true
    supremum only within a factor ``2**n``.
    """
    absf = np.abs(f.values)
    best = np.zeros_like(absf)
    for k in family_sides(f.grid.points_per_axis, side_ratio):
        s = absf
        for ax in range(absf.ndim):
            s = _window_sums(s, k, ax)
        avg = s / float(k) ** absf.ndim
        for ax in range(absf.ndim):
            avg = _forward_max(avg, k, ax)
        np.maximum(best, avg, out=best)
    return f.with_values(best)


# --- smooth and grand maximal ----------------------------------------------------


@dataclass(frozen=True)
class BumpProfile:
    """Radial polynomial bump ``amplitude (1 - tilt s^2)(1 - s^2)^order``, ``s = |x|/width < 1``."""

    n: int
    width: float = 1.0
    order: int = 4
    amplitude: float = 1.0
    tilt: float = 0.0

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        s2 = sum(c * c for c in coords) / self.width**2
        inside = s2 < 1.0
        core = np.where(inside, 1.0 - s2, 0.0)
        return self.amplitude * (1.0 - self.tilt * s2) * core**self.order

    @property
    def integral(self) -> float:
        n, k = self.n, self.order
        sphere = 2.0 * math.pi ** (n / 2) / special.gamma(n / 2)
        # int_0^1 s^(n-1+2j) (1-s^2)^k ds = B(n/2 + j, k + 1) / 2
        i0 = 0.5 * special.beta(n / 2, k + 1)
        i1 = 0.5 * special.beta(n / 2 + 1, k + 1)
        return float(self.amplitude * self.width**n * sphere * (i0 - self.tilt * i1))

    def scaled(self, amplitude: float) -> BumpProfile:
        return BumpProfile(self.n, self.width, self.order, amplitude, self.tilt)

    def seminorm(self, N: int, samples: int = 33) -> float:
        """``p_N`` of the profile: sum over ``|beta| <= N`` of ``sup (1+|x|)^N |d^beta phi|``."""
        return self.amplitude * _unit_seminorm(self.n, self.width, self.order, self.tilt, N, samples)


@functools.lru_cache(maxsize=64)
def _unit_seminorm(n: int, width: float, order: int, tilt: float, N: int, samples: int) -> float:
    import sympy as sp

    xs = sp.symbols(f"x0:{n}", real=True)
    s2 = sum(x * x for x in xs) / sp.nsimplify(width) ** 2
    poly = sp.Poly(sp.expand((1 - sp.nsimplify(tilt) * s2) * (1 - s2) ** order), *xs)
    axis = np.linspace(-width, width, samples)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    r = np.sqrt(sum(m * m for m in mesh))
    inside = r < width
    weight = np.where(inside, (1.0 + r) ** N, 0.0)
    powers = [[m**j for j in range(poly.total_degree() + 1)] for m in mesh]
    total = 0.0
    for beta in multi_indices(n, N):
        d = poly
        for i, b in enumerate(beta):
            if b:
                d = d.diff((xs[i], b))
        vals = np.zeros(r.shape)
        for mono, coef in d.terms():
            term = float(coef)
            for i, e in enumerate(mono):
                term = term * powers[i][e]
            vals = vals + term
        total += float(np.max(np.abs(vals) * weight))
    return total


def default_scales(grid: Grid, width: float = 1.0) -> list[float]:
    """Dyadic scales ``t`` with ``t >= 2h`` and ``t * width <= side/4``."""
    t, out = 2 * grid.h, []
    while t * width <= grid.domain.side / 4 * (1 + 1e-12):
        out.append(t)
        t *= 2
    return out


def _kernel(profile: BumpProfile, t: float, h: float, n: int) -> np.ndarray:
    half = int(math.floor(profile.width * t / h))
    offs = np.arange(-half, half + 1) * h
    mesh = np.meshgrid(*([offs] * n), indexing="ij")
    return profile(*[m / t for m in mesh]) * t ** (-n) * h**n


def smooth_maximal(
    f: GridFunction, profile: BumpProfile, scales: Sequence[float] | None = None, method: str = "fft"
) -> GridFunction:
    """``sup_t |(t^-n phi(./t) * f)(x)|`` over the scale ladder, ``f`` zero outside the domain."""
    if abs(profile.integral) < 1e-14 * abs(profile.amplitude) * profile.width**profile.n:
        raise ValueError("degenerate profile: integral vanishes")
    grid = f.grid
    if scales is None:
        scales = default_scales(grid, profile.width)
    if not scales:
        raise ValueError("empty scale ladder")
    for t in scales:
        if t < 2 * grid.h * (1 - 1e-12) or t * profile.width > grid.domain.side / 4 * (1 + 1e-12):
            raise ValueError(f"scale {t} outside [2h, side/4] for this grid")
    best = np.zeros(grid.shape)
    for t in scales:
        conv = signal.convolve(f.values, _kernel(profile, t, grid.h, grid.n), mode="same", method=method)
        np.maximum(best, np.abs(conv), out=best)
    return f.with_values(best)


@dataclass(frozen=True)
class TestFunctionDictionary:
    """Finite family of ``p_N``-normalised bumps and the scales they are dilated by."""

    __test__ = False  # not a pytest class

    profiles: tuple[BumpProfile, ...]
    N: int
    scales: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.profiles:
            raise ValueError("empty dictionary")


def default_order(n: int, q_w: float, p: float) -> int:
    """``N = floor(n (q_w/p - 1)) + n + 2``."""
    return int(math.floor(n * (q_w / p - 1.0) + 1e-12)) + n + 2


def normalized_bump(n: int, width: float, N: int) -> BumpProfile:
    """Bump of the given width rescaled so that ``p_N <= 1``; order ``N + 1`` keeps it C^N."""
    base = BumpProfile(n, width, N + 1, 1.0)
    # Sampled suprema can undershoot slightly; keep a safety margin.
    return base.scaled(1.0 / (base.seminorm(N) * 1.01))


def default_dictionary(n: int, N: int, widths: Sequence[float] = (1.0, 0.75, 0.5, 0.25)) -> TestFunctionDictionary:
    return TestFunctionDictionary(tuple(normalized_bump(n, w, N) for w in widths), N)


def grand_maximal(f: GridFunction, dictionary: TestFunctionDictionary) -> GridFunction:
    """Pointwise max of :func:`smooth_maximal` over the dictionary; a lower bound of the grand maximal."""
    best = None
    for prof in dictionary.profiles:
        scales = dictionary.scales if dictionary.scales is not None else default_scales(f.grid, prof.width)
        m = smooth_maximal(f, prof, scales).values
        best = m if best is None else np.maximum(best, m)
    return f.with_values(best)


# --- polynomials -----------------------------------------------------------------


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All multi-indices of length ``n`` with ``|alpha| <= k``, graded then lexicographic."""
    out = []
    for deg in range(k + 1):
        out.extend(sorted((a for a in itertools.product(range(deg + 1), repeat=n) if sum(a) == deg), reverse=True))
    return out


@dataclass(frozen=True, eq=False)
class LocalPolynomial:
    """``sum_alpha c_alpha ((y - center)/scale)^alpha``."""

    center: tuple[float, ...]
    scale: float
    exponents: tuple[tuple[int, ...], ...]
    coeffs: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return max(sum(a) for a in self.exponents)

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        return _basis(coords, self.center, self.scale, self.exponents) @ self.coeffs

    def on_grid(self, grid: Grid) -> GridFunction:
        mesh = grid.mesh()
        return GridFunction(grid, self(*[m.ravel() for m in mesh]).reshape(grid.shape))


def _basis(coords, center, scale, exponents) -> np.ndarray:
    u = [(np.asarray(c, dtype=float).ravel() - x0) / scale for c, x0 in zip(coords, center)]
    cols = []
    for a in exponents:
        col = np.ones_like(u[0])
        for ui, ai in zip(u, a):
            if ai:
                col = col * ui**ai
        cols.append(col)
    return np.stack(cols, axis=-1)


def _block(g: GridFunction, Q: Cube):
    sl, wts = cube_weights(g.grid, Q)
    coords = [ax[s] for ax, s in zip(g.grid.axes, sl)]
    mesh = np.meshgrid(*coords, indexing="ij")
    return [m.ravel() for m in mesh], wts.ravel(), g.values[sl].ravel()


def best_local_polynomial(
    g: GridFunction, q: float, k: int, Q: Cube, tol: float = 1e-8, max_iter: int = 200
) -> tuple[LocalPolynomial, float]:
    """Degree ``<= k`` polynomial minimising ``|g - P|_{q,Q}``, and that minimum.

    ``q = 2`` is a weighted least-squares solve; other ``q`` use iteratively
    reweighted least squares (``q < 2``) or damped Newton (``q > 2``) until the
    objective stalls at relative ``tol``.
    """
    if q < 1:
        raise ValueError(f"invalid exponent q={q}")
    coords, wts, vals = _block(g, Q)
    exps = tuple(multi_indices(g.grid.n, k))
    if np.count_nonzero(wts) < 3 * len(exps):
        raise ValueError("cube too small for degree")
    B = _basis(coords, Q.center, Q.side, exps)

    def solve(weights: np.ndarray) -> np.ndarray:
        sw = np.sqrt(weights)
        c, *_ = np.linalg.lstsq(B * sw[:, None], vals * sw, rcond=None)
        return c

    def objective(c: np.ndarray) -> float:
        return float(np.sum(wts * np.abs(vals - B @ c) ** q) / np.sum(wts)) ** (1.0 / q)

    c = solve(wts)
    if q < 2:
        # Majorise-minimise reweighting; monotone for 1 <= q < 2.
        obj = objective(c)
        floor = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
        for _ in range(max_iter):
            res = np.maximum(np.abs(vals - B @ c), floor)
            c_new = solve(wts * res ** (q - 2))
            new = objective(c_new)
            if new > obj:
                break
            c, done = c_new, obj - new <= tol * max(obj, 1e-300)
            obj = new
            if done:
                break
    elif q > 2:
        # Damped Newton on sum w |res|^q, which is smooth and convex here.
        wn = wts / np.sum(wts)
        F = lambda cc: float(wn @ np.abs(vals - B @ cc) ** q)  # noqa: E731
        for _ in range(max_iter):
            res = vals - B @ c
            grad = -q * (B.T @ (wn * np.abs(res) ** (q - 1) * np.sign(res)))
            hess = q * (q - 1) * (B.T @ (B * (wn * np.abs(res) ** (q - 2))[:, None]))
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
            f0, t = F(c), 1.0
            while t > 1e-12 and F(c - t * step) > f0:
                t *= 0.5
            c_new = c - t * step
            done = f0 - F(c_new) <= tol * max(f0, 1e-300)
            c = c_new
            if done:
                break
    return LocalPolynomial(Q.center, Q.side, exps, c), objective(c)


# --- Calderón maximal functions --------------------------------------------------------


def eta_maximal(g: GridFunction, q: float, gamma: float, x: Sequence[float], ladder: RadiusLadder) -> float:
    """``max_r r^-gamma |g|_{q,Q(x,r)}`` over the ladder."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    ladder.check(g.grid)
    if not g.grid.domain.contains(np.asarray(x, dtype=float)):
        raise ValueError("point outside the grid domain")
    return max(r ** (-gamma) * local_norm(g, q, Cube(x, r)) for r in ladder)


def split_gamma(gamma: float) -> tuple[int, float]:
    """``gamma = k + t`` with ``k`` a nonnegative integer and ``0 < t <= 1``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    k = math.ceil(gamma) - 1
    return k, gamma - k


@dataclass(frozen=True, eq=False)
class QuotientElement:
    """A grid function regarded modulo polynomials of degree ``<= degree``."""

    representative: GridFunction
    degree: int

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError("modulus degree must be nonnegative")

    def equivalent(self, other: QuotientElement, tol: float = 1e-9) -> bool:
        """True iff the difference of representatives is a degree ``<= degree`` polynomial."""
        diff = self.representative - other.representative
        scale = max(float(np.max(np.abs(self.representative.values))), float(np.max(np.abs(other.representative.values))), 1e-300)
        _, res = best_local_polynomial(diff, 2, self.degree, diff.grid.domain)
        return res <= tol * scale

    def __add__(self, other: QuotientElement) -> QuotientElement:
        return QuotientElement(self.representative + other.representative, self.degree)

    def __mul__(self, c: float) -> QuotientElement:
        return QuotientElement(self.representative * c, self.degree)

    __rmul__ = __mul__


class NMaximalError(RuntimeError):
    """The minimax solver did not reach tolerance; carries its best iterate."""

    def __init__(self, message: str, best_value: float, best_coeffs: np.ndarray):
        super().__init__(message)
        self.best_value = best_value
        self.best_coeffs = best_coeffs


@dataclass(frozen=True, eq=False)
class NMaximalResult:
    value: float
    polynomial: LocalPolynomial
    scale_values: tuple[float, ...] = field(repr=False)
    ladder: RadiusLadder = field(repr=False)

    def representative(self, G: QuotientElement) -> GridFunction:
        """The minimising representative ``g - P``."""
        return G.representative - self.polynomial.on_grid(G.representative.grid)


class _ScaleData:
    """Per-radius data of ``r^-gamma |g - P|_{q,Q(x,r)}`` in a common polynomial basis."""

    def __init__(self, g: GridFunction, q: float, gamma: float, x, ladder: RadiusLadder, exps, scale: float):
        self.q = q
        self.raw = []
        for r in ladder:
            coords, wts, vals = _block(g, Cube(x, r))
            B = _basis(coords, tuple(x), scale, exps)
            wn = wts / np.sum(wts)
            factor = r ** (-gamma * q)
            self.raw.append((factor, B, wn, vals))
        self.recenter(np.zeros(len(exps)))

    def recenter(self, c0: np.ndarray) -> None:
        """Express every block in the offset ``c - c0``; keeps the q = 2 forms free of cancellation."""
        self.blocks, self.residuals = [], []
        for factor, B, wn, vals in self.raw:
            res = vals - B @ c0
            self.residuals.append(res)
            if self.q == 2:
                Bw = B * wn[:, None]
                self.blocks.append((factor, B.T @ Bw, Bw.T @ res, float(wn @ (res * res))))
            else:
                self.blocks.append((factor, B, wn, res))

    def values(self, c: np.ndarray) -> np.ndarray:
        """``r^(-gamma q) avg |g - P|^q`` per radius."""
        out = np.empty(len(self.blocks))
        for i, blk in enumerate(self.blocks):
            if self.q == 2:
                f, A, b, e = blk
                out[i] = f * max(c @ A @ c - 2 * b @ c + e, 0.0)
            else:
                f, B, wn, vals = blk
                out[i] = f * float(wn @ np.abs(vals - B @ c) ** self.q)
        return out

    def jacobian(self, c: np.ndarray) -> np.ndarray:
        rows = []
        for blk in self.blocks:
            if self.q == 2:
                f, A, b, _ = blk
                rows.append(f * 2 * (A @ c - b))
            else:
                f, B, wn, vals = blk
                res = vals - B @ c
                rows.append(-f * self.q * ((wn * np.abs(res) ** (self.q - 1) * np.sign(res)) @ B))
        return np.array(rows)

    def ls_fits(self) -> list[np.ndarray]:
        fits = []
        for blk in self.blocks:
            if self.q == 2:
                _, A, b, _ = blk
                fits.append(np.linalg.lstsq(A, b, rcond=None)[0])
        return fits


def _cone_minimax(data: _ScaleData, q: float) -> np.ndarray | None:
    """Conic fallback: ``min t`` with ``r^-gamma |res - B c|_{q,w} <= t`` for every radius."""
    import cvxpy as cp

    nc = data.raw[0][1].shape[1]
    c, t = cp.Variable(nc), cp.Variable()
    cons = []
    for (factor, B, wn, _), res in zip(data.raw, data.residuals):
        if q == 2:
            # The block reduced to its QR factor plus the orthogonal remainder.
            sw = np.sqrt(wn)
            Qm, R = np.linalg.qr(sw[:, None] * B)
            z = Qm.T @ (sw * res)
            rem = math.sqrt(max(float(wn @ (res * res) - z @ z), 0.0))
            cons.append(math.sqrt(factor) * cp.norm(cp.hstack([R @ c - z, np.array([rem])]), 2) <= t)
        else:
            cons.append(factor ** (1 / q) * cp.pnorm(cp.multiply(wn ** (1 / q), res - B @ c), q) <= t)
    prob = cp.Problem(cp.Minimize(t), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        return None
    if prob.status not in ("optimal", "optimal_inaccurate") or c.value is None:
        return None
    return np.asarray(c.value, dtype=float)


def n_maximal(
    G: QuotientElement,
    q: float,
    gamma: float,
    x: Sequence[float],
    ladder: RadiusLadder,
    tol: float = MINIMAX_TOL,
    max_iter: int = 500,
) -> NMaximalResult:
    """``min_P max_r r^-gamma |g - P|_{q,Q(x,r)}`` over polynomials of degree ``<= k``.

    Solved as ``min t`` subject to ``r^(-gamma q) avg_Q |g - P|^q <= t`` for
    every ladder radius, a smooth convex program handed to SLSQP; the value
    returned is ``t^(1/q)``.
    """
    k, _ = split_gamma(gamma)
    if k != G.degree:
        raise ValueError(f"modulus degree {G.degree} does not match gamma={gamma} (k={k})")
    if q < 1:
        raise ValueError(f"invalid exponent q={q}")
    g = G.representative
    ladder.check(g.grid)
    x = tuple(float(v) for v in np.atleast_1d(x))
    if not g.grid.domain.contains(np.asarray(x)):
        raise ValueError("point outside the grid domain")
    exps = tuple(multi_indices(g.grid.n, k))
    scale = ladder.radii[-1]
    data = _ScaleData(g, q, gamma, x, ladder, exps, scale)

    candidates = [np.zeros(len(exps))] + data.ls_fits()
    origin = min(candidates, key=lambda c: float(np.max(data.values(c))))
    data.recenter(origin)
    start = np.zeros(len(exps))
    f0 = float(np.max(data.values(start)))
    poly = lambda c: LocalPolynomial(x, scale, exps, origin + np.asarray(c, dtype=float))  # noqa: E731
    # Below this the representative is rounding noise and there is nothing to optimise.
    noise = (NOISE_FLOOR * float(np.max(np.abs(g.values))) * ladder.radii[0] ** (-gamma)) ** q
    if f0 <= noise:
        vals = data.values(start)
        return NMaximalResult(f0 ** (1.0 / q), poly(start), tuple(float(v) ** (1.0 / q) for v in vals), ladder)

    nc = len(exps)
    z0 = np.append(start, 1.0)
    cons = {
        "type": "ineq",
        "fun": lambda z: z[-1] - data.values(z[:nc]) / f0,
        "jac": lambda z: np.hstack([-data.jacobian(z[:nc]) / f0, np.ones((len(data.blocks), 1))]),
    }
    res = optimize.minimize(
        lambda z: z[-1],
        z0,
        jac=lambda z: np.append(np.zeros(nc), 1.0),
        constraints=[cons],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": max_iter},
    )
    c = res.x[:nc] if np.max(data.values(res.x[:nc])) <= f0 else start
    if not res.success:
        c_cone = _cone_minimax(data, q)
        if c_cone is None:
            best = float(np.max(data.values(c)))
            raise NMaximalError(f"minimax solver failed at x={x}: {res.message}", best ** (1 / q), origin + c)
        if np.max(data.values(c_cone)) <= np.max(data.values(c)):
            c = c_cone
    vals = data.values(c)
    best = float(np.max(vals))
    scale_vals = tuple(float(v) ** (1.0 / q) for v in vals)
    return NMaximalResult(best ** (1.0 / q), poly(c), scale_vals, ladder)


def n_maximal_grid_search(
    g: GridFunction, q: float, gamma: float, x: Sequence[float], ladder: RadiusLadder, box: Sequence[tuple[float, float]], points: int = 201
) -> tuple[float, np.ndarray]:
    """Brute-force minimax over a coefficient box (at most 3 coefficients); oracle for tests."""
    k, _ = split_gamma(gamma)
    exps = tuple(multi_indices(g.grid.n, k))
    if len(exps) > 3 or len(box) != len(exps):
        raise ValueError("grid search supports at most 3 coefficients with one range each")
    x = tuple(float(v) for v in np.atleast_1d(x))
    scale = ladder.radii[-1]
    axes = [np.linspace(lo, hi, points) for lo, hi in box]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
    worst = np.zeros(len(mesh))
    for r in ladder:
        coords, wts, vals = _block(g, Cube(x, r))
        B = _basis(coords, x, scale, exps)
        wn = wts / np.sum(wts)
        res = np.abs(vals[None, :] - mesh @ B.T) ** q
        worst = np.maximum(worst, r ** (-gamma * q) * (res @ wn))
    i = int(np.argmin(worst))
    return float(worst[i]) ** (1.0 / q), mesh[i]
