"""Solving ``Delta^m G = f`` for atomic ``f`` and measuring both sides.

``G`` is the class modulo polynomials of degree ``<= 2m - 1`` of
``sum lambda_j b_j``, with ``b_j`` the potential of the ``j``-th atom.  Its
Calderón-Hardy norm is ``||N_{q,2m}(G; .)||_{L^p(w)}`` over a probe
sub-lattice; the Hardy norm of ``f`` uses a fixed smooth maximal function.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .atoms import Atom, AtomicSeries, assemble_series, min_moment_order, weight_indices
from .core_grid import Cube, Grid, GridFunction, RadiusLadder
from .maximal import (
    BumpProfile,
    QuotientElement,
    best_local_polynomial,
    default_scales,
    hl_maximal,
    n_maximal,
    normalized_bump,
    smooth_maximal,
)
from .polyharmonic import (
    FundamentalSolution,
    _TruncatedSums,
    epsilon_ladder,
    kernel_table,
    laplacian_residual,
    potential,
    top_order_indices,
)
from .weights import Weight, ap_constant, power_family

RESIDUAL_TOL = 5e-2
PROBE_STRIDE = 4
LADDER_RATIO = math.sqrt(2.0)
DOMAIN_FACTOR = 8
CONVERGENCE_RATIO = 0.9


# --- parameter windows ------------------------------------------------------------------


def check_window(n: int, m: int, p: float, q: float, mu: float, w: Weight) -> None:
    """Raise ``ValueError`` naming the first violated hypothesis for existence of a solution."""
    if not q > 1:
        raise ValueError(f"violated q > 1 (q={q})")
    if not 0 < mu < 2 * m:
        raise ValueError(f"violated 0 < mu < 2m (mu={mu}, m={m})")
    lower = n / (2 * m + n / q)
    if not lower < p <= 1:
        raise ValueError(f"violated n/(2m + n/q) < p <= 1: p={p}, n/(2m + n/q)={lower}")
    s = (2 * m + n / q - mu) * p
    if not n < s:
        raise ValueError(f"violated n < (2m + n/q - mu) p: {n} >= {s}")
    cls = s / n
    if w.kind == "power":
        if not -n < w.a < n * (cls - 1):
            raise ValueError(f"violated w in A_(2m+n/q-mu)p/n: power a={w.a} outside (-n, n({cls} - 1))")
        cubes = power_family(n)
    else:
        from .weights import dyadic_cube_family

        cubes = dyadic_cube_family(w.table.grid, max_cubes=2000)
    if ap_constant(w, cls, cubes).diverged:
        raise ValueError(f"violated w in A_(2m+n/q-mu)p/n: A_{cls} constant diverges")


def domain_for(cubes: Sequence[Cube], cells_per_side: int, factor: int = DOMAIN_FACTOR) -> Grid:
    """Grid on the box of side ``factor`` times the largest cube, centred on the first cube.

    ``cells_per_side`` is the resolution of the largest cube, so its faces fall on cell faces.
    """
    big = max(cubes, key=lambda c: c.side)
    return Grid(Cube(cubes[0].center, factor * big.side), factor * cells_per_side)


def default_ladder(grid: Grid, ratio: float = LADDER_RATIO, min_cells: int = 4) -> RadiusLadder:
    radii, r = [], min_cells * grid.h
    while r <= grid.domain.side / 2 * (1 + 1e-12):
        radii.append(r)
        r *= ratio
    return RadiusLadder(radii)


def probe_points(grid: Grid, stride: int = PROBE_STRIDE) -> np.ndarray:
    """Every ``stride``-th lattice point per axis, starting half a stride in."""
    axes = [ax[stride // 2 :: stride] for ax in grid.axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# --- the Calderón-Hardy element -----------------------------------------------------------


@dataclass(eq=False)
class CalderonHardyElement:
    representative: GridFunction
    m: int
    q: float
    w: Weight
    p: float
    stride: int = PROBE_STRIDE
    ladder: RadiusLadder | None = None
    threads: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.ladder is None:
            self.ladder = default_ladder(self.representative.grid)

    @property
    def degree(self) -> int:
        return 2 * self.m - 1

    @property
    def gamma(self) -> float:
        return float(2 * self.m)

    @property
    def grid(self) -> Grid:
        return self.representative.grid

    @property
    def quotient(self) -> QuotientElement:
        return QuotientElement(self.representative, self.degree)

    def probes(self) -> np.ndarray:
        return probe_points(self.grid, self.stride)

    def probe_volume(self) -> float:
        return (self.stride * self.grid.h) ** self.grid.n

    def n_values(self) -> np.ndarray:
        """``N_{q,2m}(G; x)`` on the probe set, computed once."""
        if "n" not in self._cache:
            G = self.quotient

            def one(x: np.ndarray) -> float:
                try:
                    return n_maximal(G, self.q, self.gamma, x, self.ladder).value
                except RuntimeError as exc:
                    raise RuntimeError(f"n_maximal failed at x={tuple(x)}: {exc}") from exc

            probes = list(self.probes())
            if self.threads > 1:
                # map keeps probe order, so the result does not depend on scheduling.
                with ThreadPoolExecutor(self.threads) as pool:
                    out = list(pool.map(one, probes))
            else:
                out = [one(x) for x in probes]
            self._cache["n"] = np.array(out)
        return self._cache["n"]

    def scaled(self, c: float) -> CalderonHardyElement:
        out = CalderonHardyElement(self.representative * c, self.m, self.q, self.w, self.p, self.stride, self.ladder, self.threads)
        if "n" in self._cache:
            out._cache["n"] = abs(c) * self._cache["n"]
        return out


def calderon_hardy_norm(G: CalderonHardyElement) -> float:
    """``(sum_x N(G; x)^p w(x) (stride h)^n)^(1/p)`` over the probe set."""
    vals = G.n_values()
    wx = G.w(G.probes())
    return float(np.sum(vals**G.p * wx) * G.probe_volume()) ** (1.0 / G.p)


def default_profile(n: int, m: int) -> BumpProfile:
    """The fixed Hardy-norm profile: unit-width bump with ``p_{2m+n} <= 1``."""
    return normalized_bump(n, 1.0, 2 * m + n)


def hardy_norm(f: GridFunction, w: Weight, p: float, profile: BumpProfile) -> float:
    """``(int (M_phi f)^p w)^(1/p)`` on the grid; a single-profile proxy for the grand maximal norm."""
    mf = smooth_maximal(f, profile, default_scales(f.grid, profile.width))
    wx = w.on_grid(f.grid)
    return float(np.sum(mf.values**p * wx) * f.grid.cell_volume) ** (1.0 / p)


# --- solve ------------------------------------------------------------------------------------


def _series_region(series: AtomicSeries) -> Cube:
    lo = np.min([a.cube.dilate(2.0).lo for _, a in series.terms], axis=0)
    hi = np.max([a.cube.dilate(2.0).hi for _, a in series.terms], axis=0)
    return Cube((lo + hi) / 2, float(np.max(hi - lo)))


@dataclass(frozen=True, eq=False)
class SolveResult:
    element: CalderonHardyElement
    f: GridFunction
    residual: float
    potentials: tuple[GridFunction, ...] = field(repr=False)


def solve_polyharmonic(
    series: AtomicSeries | None,
    fs: FundamentalSolution,
    q: float = 2.0,
    mu: float | None = None,
    grid: Grid | None = None,
    w: Weight | None = None,
    p: float | None = None,
    check_residual: bool = True,
) -> SolveResult:
    """``G = sum lambda_j [b_j]`` with a residual check of ``Delta_h^m G`` against ``f``.

    An empty series needs ``grid``, ``w`` and ``p`` and returns the zero class.
    """
    m = fs.m
    mu = float(m) if mu is None else mu
    if series is None or not series.terms:
        if grid is None or w is None or p is None:
            raise ValueError("an empty series needs grid, weight and p")
        zero = GridFunction.zeros(grid)
        return SolveResult(CalderonHardyElement(zero, m, q, w, p), zero, 0.0, ())
    first = series.terms[0][1]
    w, p, n = first.weight, first.p, fs.n
    check_window(n, m, p, q, mu, w)
    d_min = min_moment_order(n, weight_indices(w).q_w, p, m)
    if first.d < d_min:
        raise ValueError(f"violated d >= max(floor(n(q_w/p - 1)), 2m - 1): d={first.d} < {d_min}")
    kernel = kernel_table(fs, first.grid)
    pots = tuple(potential(fs, a, kernel) for _, a in series.terms)
    total = GridFunction.zeros(first.grid)
    for (lam, _), b in zip(series.terms, pots):
        total = total + b * lam
    f = assemble_series(series).total
    residual = laplacian_residual(total, f, m, _series_region(series))
    if check_residual and not residual <= RESIDUAL_TOL:
        raise RuntimeError(f"residual {residual} of Delta_h^m G - f exceeds {RESIDUAL_TOL}")
    return SolveResult(CalderonHardyElement(total, m, q, w, p), f, residual, pots)


@dataclass(frozen=True)
class DoubleInequality:
    hardy: float
    calderon_hardy: float

    @property
    def lower(self) -> float:
        """``||Delta^m G||_{H^p(w)} / ||G||``."""
        return self.hardy / self.calderon_hardy

    @property
    def upper(self) -> float:
        return self.calderon_hardy / self.hardy

    def as_dict(self) -> dict:
        return {"hardy_norm": self.hardy, "calderon_hardy_norm": self.calderon_hardy, "lower": self.lower, "upper": self.upper}


def double_inequality_report(result: SolveResult, profile: BumpProfile | None = None) -> DoubleInequality:
    G = result.element
    if not np.any(result.f.values):
        raise ValueError("trivial input: the ratios are undefined for f = 0")
    profile = profile or default_profile(G.grid.n, G.m)
    return DoubleInequality(hardy_norm(result.f, G.w, G.p, profile), calderon_hardy_norm(G))


@dataclass(frozen=True)
class SolveReport:
    n: int
    m: int
    p: float
    q: float
    mu: float
    weight: str
    atoms: int
    residual: float
    norms: DoubleInequality | None
    potential_max: tuple[float, ...]
    ladder: tuple[float, ...]
    grid_points: int
    grid_side: float

    def as_dict(self) -> dict:
        return {
            "config": {"n": self.n, "m": self.m, "p": self.p, "q": self.q, "mu": self.mu, "weight": self.weight},
            "atoms": self.atoms,
            "residual": self.residual,
            "residual_order": 2,
            "norms": self.norms.as_dict() if self.norms else None,
            "potential_max": list(self.potential_max),
            "ladder": list(self.ladder),
            "grid": {"points_per_axis": self.grid_points, "side": self.grid_side},
        }


def solve_report(series: AtomicSeries, fs: FundamentalSolution, q: float = 2.0, mu: float | None = None) -> SolveReport:
    res = solve_polyharmonic(series, fs, q, mu)
    G = res.element
    return SolveReport(
        fs.n,
        fs.m,
        G.p,
        q,
        float(fs.m if mu is None else mu),
        G.w.label,
        len(series.terms),
        res.residual,
        double_inequality_report(res),
        tuple(float(np.max(np.abs(b.values))) for b in res.potentials),
        tuple(G.ladder.radii),
        G.grid.points_per_axis,
        G.grid.domain.side,
    )


# --- pointwise majorant -------------------------------------------------------------------------


@dataclass(frozen=True)
class MajorantReport:
    max_ratio: float
    ratios: tuple[float, ...] = field(repr=False)
    lhs: tuple[float, ...] = field(repr=False)
    rhs: tuple[float, ...] = field(repr=False)

    def as_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "ratios": list(self.ratios), "lhs": list(self.lhs), "rhs": list(self.rhs)}


def majorant_terms(a: Atom, fs: FundamentalSolution, q: float, mu: float, points: np.ndarray) -> np.ndarray:
    """The right-hand side of the pointwise estimate at lattice points."""
    grid = a.grid
    n, m = fs.n, fs.m
    idx = [grid.index_of(x) for x in points]
    chi = GridFunction(grid, a.cube.contains(grid.points(), closed=True).reshape(grid.shape).astype(float))
    m_chi = hl_maximal(chi).values
    ma = hl_maximal(a.samples)
    # M^q(a) read as M(|a|^q); the majorant term is M(M(|a|^q))^(1/q).
    mmq = hl_maximal(hl_maximal(a.samples.with_values(np.abs(a.samples.values) ** q))).values
    near = a.cube.dilate(4 * math.sqrt(n))
    first = a.weight.mass(a.cube) ** (-1.0 / a.p)
    expo = (2 * m + n / q - mu) / n
    eps = epsilon_ladder(grid.h, grid.domain.side * math.sqrt(n))
    out = []
    for x, i in zip(points, idx):
        val = first * m_chi[i] ** expo
        if near.contains(np.asarray(x)[None, :])[0]:
            ts = sum(max(abs(s.value(e)) for e in eps) for s in (_TruncatedSums(a.samples, fs, al, np.asarray(x, dtype=float)) for al in top_order_indices(n, m)))
            val += ma.values[i] + mmq[i] ** (1.0 / q) + ts
        out.append(val)
    return np.array(out)


def pointwise_majorant_check(
    a: Atom,
    fs: FundamentalSolution,
    mu: float,
    points: np.ndarray,
    q: float = 2.0,
    b: GridFunction | None = None,
    ladder: RadiusLadder | None = None,
) -> MajorantReport:
    """``max_x N_{q,2m}(B; x) / RHS(x)`` over lattice probe points."""
    if not 0 < mu < 2 * fs.m:
        raise ValueError(f"violated 0 < mu < 2m (mu={mu})")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    b = potential(fs, a) if b is None else b
    ladder = ladder or default_ladder(a.grid)
    G = QuotientElement(b, 2 * fs.m - 1)
    lhs = np.array([n_maximal(G, q, 2 * fs.m, x, ladder).value for x in pts])
    rhs = majorant_terms(a, fs, q, mu, pts)
    ratios = lhs / rhs
    return MajorantReport(float(np.max(ratios)), tuple(ratios.tolist()), tuple(lhs.tolist()), tuple(rhs.tolist()))


# --- triviality and injectivity ----------------------------------------------------------------------


@dataclass(frozen=True)
class TrivialityReport:
    verdict: str
    below_threshold: bool
    threshold: float
    slope: float
    predicted_slope: float
    lower_constant: float
    radii: tuple[float, ...]
    partial_integrals: tuple[float, ...]
    increments: tuple[float, ...]
    increment_ratios: tuple[float, ...]
    normalized_increments: tuple[float, ...]

    @property
    def slope_matches(self) -> bool:
        return abs(self.slope - self.predicted_slope) <= 0.2

    @property
    def lower_bound_holds(self) -> bool:
        return self.lower_constant > 0 and self.slope >= self.predicted_slope - 0.2

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(slope_matches=self.slope_matches, lower_bound_holds=self.lower_bound_holds)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _sphere_measure(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def triviality_probe(
    g: GridFunction,
    q: float,
    m: int,
    a: float,
    p: float,
    base: Cube,
    radii: Sequence[float] = (8.0, 16.0, 32.0, 64.0),
    samples_per_octave: int = 6,
    ladder: RadiusLadder | None = None,
) -> TrivialityReport:
    """Growth of ``int_{2 sqrt(n) r <= |x| <= R} N_{q,2m}(G; x)^p |x|^a dx`` in ``R``.

    ``N`` is sampled along the ``2n`` coordinate rays; the radial integral is
    a trapezoid rule in ``log |x|``.  The verdict is ``"converges"`` when the
    increments per doubling of ``R`` shrink geometrically, else ``"diverges"``.
    """
    n = g.grid.n
    k = 2 * m - 1
    _, res = best_local_polynomial(g, 2, k, base)
    scale = float(np.max(np.abs(g.values)))
    if scale == 0 or res <= 1e-8 * scale:
        raise ValueError("polynomial input: g is a polynomial of degree <= 2m - 1 on the base cube")
    radii = sorted(float(r) for r in radii)
    gamma = 2 * m + n / q
    threshold = (n + min(a, 0.0)) / gamma
    ladder = ladder or RadiusLadder([r for r in default_ladder(g.grid, 2 ** 0.25).radii])
    r0 = 2 * math.sqrt(n) * base.side
    octaves = math.log2(radii[-1] / r0)
    rho = np.geomspace(r0, radii[-1], int(math.ceil(octaves * samples_per_octave)) + 1)
    for R in radii:
        if not np.any(np.isclose(rho, R)):
            rho = np.sort(np.append(rho, R))
    G = QuotientElement(g, k)
    center = np.asarray(base.center)
    vals = np.zeros((2 * n, len(rho)))
    for j, (axis, sign) in enumerate((i, s) for i in range(n) for s in (1.0, -1.0)):
        for t, r in enumerate(rho):
            x = center.copy()
            x[axis] += sign * r
            node = g.grid.points()[np.ravel_multi_index(g.grid.index_of(x), g.grid.shape)]
            vals[j, t] = n_maximal(G, q, 2 * m, node, ladder).value
    nvals = vals.mean(axis=0)
    slope, _ = np.polyfit(np.log(rho), np.log(nvals), 1)
    lower_c = float(np.min(vals.min(axis=0) * rho**gamma))
    integrand = _sphere_measure(n) * nvals**p * rho**a * rho**n  # d(log rho) measure
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(np.log(rho)))])
    partial = [float(cum[int(np.argmin(np.abs(rho - R)))]) for R in radii]
    inc = [partial[i + 1] - partial[i] for i in range(len(partial) - 1)]
    ratios = [inc[i + 1] / inc[i] for i in range(len(inc) - 1)] if len(inc) > 1 else []
    norm = _sphere_measure(n) * lower_c**p if lower_c > 0 else math.nan
    verdict = "converges" if ratios and max(ratios) <= CONVERGENCE_RATIO else "diverges"
    return TrivialityReport(
        verdict,
        p <= threshold + 1e-12,
        threshold,
        float(slope),
        -gamma,
        lower_c,
        tuple(radii),
        tuple(partial),
        tuple(inc),
        tuple(ratios),
        tuple(x / norm for x in inc),
    )


@dataclass(frozen=True)
class InjectivityReport:
    exceptional_measure: float
    radii: tuple[float, ...]
    tail_integrals: tuple[float, ...]
    increments: tuple[float, ...]
    exceptional_mask: np.ndarray = field(repr=False)

    @property
    def increments_shrink(self) -> bool:
        inc = self.increments
        return all(inc[i + 1] <= inc[i] + 1e-300 for i in range(len(inc) - 1))

    def as_dict(self) -> dict:
        return {
            "exceptional_measure": self.exceptional_measure,
            "radii": list(self.radii),
            "tail_integrals": list(self.tail_integrals),
            "increments": list(self.increments),
            "increments_shrink": self.increments_shrink,
        }


def injectivity_tail_check(G: CalderonHardyElement, r: float, radii: Sequence[float] | None = None) -> InjectivityReport:
    """The set ``O = {w^(1/p) N > 1}`` and ``int_{O^c, |x - c| <= R} N^r`` for growing ``R``."""
    w, p, n = G.w, G.p, G.grid.n
    if w.kind != "power":
        raise ValueError("injectivity is only established for power weights")
    if r < G.q:
        raise ValueError(f"violated r >= q (r={r}, q={G.q})")
    if not 0 <= w.a < n * p / r:
        raise ValueError(f"violated 0 <= a < np/r: a={w.a}, np/r={n * p / r}")
    pts = G.probes()
    vals = G.n_values()
    mask = w(pts) ** (1.0 / p) * vals > 1.0
    vol = G.probe_volume()
    center = np.asarray(G.grid.domain.center)
    dist = np.max(np.abs(pts - center), axis=-1)
    if radii is None:
        top = G.grid.domain.side / 2
        radii = [top / 2**k for k in range(3, -1, -1)]
    tails = [float(np.sum(np.where(~mask & (dist <= R), vals**r, 0.0)) * vol) for R in radii]
    inc = tuple(tails[i + 1] - tails[i] for i in range(len(tails) - 1))
    return InjectivityReport(float(np.count_nonzero(mask)) * vol, tuple(radii), tuple(tails), inc, mask)


__all__ = [
    "CalderonHardyElement",
    "DoubleInequality",
    "InjectivityReport",
    "MajorantReport",
    "SolveReport",
    "SolveResult",
    "TrivialityReport",
    "calderon_hardy_norm",
    "check_window",
    "default_ladder",
    "default_profile",
    "domain_for",
    "double_inequality_report",
    "hardy_norm",
    "injectivity_tail_check",
    "majorant_terms",
    "pointwise_majorant_check",
    "probe_points",
    "solve_polyharmonic",
    "solve_report",
    "triviality_probe",
]
