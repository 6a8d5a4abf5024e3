import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calderon_hardy import Cube, Grid, GridFunction, RadiusLadder
from calderon_hardy.core_grid import local_norm
from calderon_hardy.maximal import (
    BumpProfile,
    QuotientElement,
    TestFunctionDictionary,
    best_local_polynomial,
    default_dictionary,
    default_order,
    eta_maximal,
    grand_maximal,
    hl_maximal,
    multi_indices,
    n_maximal,
    n_maximal_grid_search,
    normalized_bump,
    smooth_maximal,
    split_gamma,
)


def fine_line(side=8.0, npts=2048):
    return Grid(Cube((0.0,), side), npts)


def y_power(grid, k):
    return GridFunction.from_callable(grid, lambda y: y**k)


def node(grid, x):
    return np.array([ax[i] for ax, i in zip(grid.axes, grid.index_of(x))])


# --- Hardy-Littlewood -----------------------------------------------------------------


def test_hl_constant():
    g = Grid(Cube((0.0,), 4.0), 64)
    out = hl_maximal(GridFunction(g, np.full(g.shape, -2.5)))
    # Zero extension lowers M only where every containing cube leaves the domain: nowhere.
    np.testing.assert_allclose(out.values, 2.5)


def test_hl_indicator_at_three():
    g = Grid(Cube((2.0,), 8.0), 2048)
    chi = GridFunction(g, Cube((0.5,), 1.0).contains(g.points()).astype(float))
    val = hl_maximal(chi).values[g.index_of((3.0,))]
    assert val == pytest.approx(1 / 3, rel=0.05)


def test_hl_indicator_inside_is_one(square):
    Q = Cube((0.25, -0.25), 1.0)
    chi = GridFunction(square, Q.contains(square.points()).reshape(square.shape).astype(float))
    out = hl_maximal(chi)
    assert out.values[square.index_of((0.25, -0.25))] == pytest.approx(1.0)


def test_hl_dominates_cube_averages():
    rng = np.random.default_rng(1)
    g = Grid(Cube((0.0,), 4.0), 64)
    f = GridFunction(g, rng.normal(size=64))
    M = hl_maximal(f).values
    for k in (1, 2, 4, 8, 16):
        for start in range(0, 64 - k):
            avg = np.mean(np.abs(f.values[start : start + k]))
            assert np.all(M[start : start + k] >= avg - 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 1000))
def test_hl_homogeneous(c, seed):
    g = Grid(Cube((0.0,), 4.0), 32)
    f = GridFunction(g, np.random.default_rng(seed).normal(size=32))
    np.testing.assert_allclose(hl_maximal(f * c).values, abs(c) * hl_maximal(f).values, rtol=1e-12, atol=1e-300)


# --- smooth and grand maximal -----------------------------------------------------------------


def test_bump_integral_matches_quadrature():
    prof = BumpProfile(2, 0.7, 3, 2.0, 0.3)
    g = Grid(Cube((0.0, 0.0), 2.0), 400)
    vals = prof(*g.mesh())
    assert prof.integral == pytest.approx(np.sum(vals) * g.cell_volume, rel=1e-4)


def test_smooth_maximal_constant():
    g = Grid(Cube((0.0,), 16.0), 512)
    prof = BumpProfile(1, 1.0, 4)
    out = smooth_maximal(GridFunction(g, np.full(g.shape, 3.0)), prof, [0.5, 1.0])
    centre = out.values[g.index_of((0.0,))]
    assert centre == pytest.approx(3.0 * abs(prof.integral), rel=1e-3)


def test_smooth_maximal_zero(line):
    assert np.all(smooth_maximal(GridFunction.zeros(line), BumpProfile(1)).values == 0)


def test_smooth_maximal_fft_matches_direct(line):
    f = GridFunction(line, np.random.default_rng(0).normal(size=line.shape))
    prof = BumpProfile(1, 1.0, 3)
    a = smooth_maximal(f, prof, [0.25, 0.5], method="fft").values
    b = smooth_maximal(f, prof, [0.25, 0.5], method="direct").values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_smooth_maximal_errors(line):
    f = GridFunction.zeros(line)
    # (1 - tilt s^2)(1 - s^2)^k integrates to zero for tilt = (n + 2k + 2)/n.
    with pytest.raises(ValueError, match="degenerate profile"):
        smooth_maximal(f, BumpProfile(1, 1.0, 1, 1.0, tilt=5.0))
    with pytest.raises(ValueError, match="outside"):
        smooth_maximal(f, BumpProfile(1), [10.0])


def test_smooth_maximal_decays_with_moments():
    from calderon_hardy import Weight, random_atom

    g = Grid(Cube((0.0,), 64.0), 2048)
    a = random_atom(g, Cube((0.0,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=3)
    prof = BumpProfile(1, 1.0, 6)
    M = smooth_maximal(a.samples, prof, [2.0, 4.0]).values
    near = M[g.index_of((3.0,))]
    far = M[g.index_of((6.0,))]
    assert far == 0.0 or far < near


def test_normalized_bump_seminorm():
    prof = normalized_bump(1, 1.0, 3)
    assert prof.seminorm(3) <= 1.0
    assert prof.seminorm(3) == pytest.approx(1 / 1.01, rel=1e-9)


def test_default_order():
    assert default_order(1, 1.0, 1.0) == 3
    assert default_order(2, 1.5, 0.5) == math.floor(2 * 2) + 4


def test_dictionary_singleton_and_domination(line):
    from calderon_hardy import Weight, random_atom

    a = random_atom(line, Cube((0.0,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=2)
    single = normalized_bump(1, 1.0, 3)
    one = grand_maximal(a.samples, TestFunctionDictionary((single,), 3))
    np.testing.assert_allclose(one.values, smooth_maximal(a.samples, single).values)
    d = default_dictionary(1, 3)
    G = grand_maximal(a.samples, d).values
    for prof in d.profiles:
        assert np.all(G >= smooth_maximal(a.samples, prof).values - 1e-15)
    with pytest.raises(ValueError, match="empty dictionary"):
        TestFunctionDictionary((), 3)


# --- local polynomials ---------------------------------------------------------------------


def test_multi_indices():
    assert multi_indices(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert len(multi_indices(3, 2)) == 10


def test_best_local_polynomial_y2():
    g = y_power(fine_line(), 2)
    P, res = best_local_polynomial(g, 2, 1, Cube((0.0,), 1.0))
    assert P(np.array([0.0]))[0] == pytest.approx(1 / 12, rel=1e-3)
    assert res == pytest.approx(math.sqrt(1 / 180), rel=1e-3)


def test_best_local_polynomial_reproduces_polynomial():
    g = GridFunction.from_callable(fine_line(), lambda y: 3 - 2 * y + 0.5 * y * y)
    P, res = best_local_polynomial(g, 3.0, 2, Cube((0.2,), 1.5))
    assert res < 1e-8
    np.testing.assert_allclose(P(np.array([0.0, 0.5])), [3.0, 3 - 1 + 0.125], atol=1e-7)


def test_best_local_polynomial_odd_symmetric():
    g = y_power(fine_line(), 3)
    for q in (1.5, 2.0, 4.0):
        P, _ = best_local_polynomial(g, q, 0, Cube((0.0,), 1.0))
        assert abs(P.coeffs[0]) < 1e-6


def test_best_local_polynomial_q_one_is_median():
    g = GridFunction.from_callable(fine_line(), lambda y: np.exp(y))
    P, res = best_local_polynomial(g, 1.0, 0, Cube((0.0,), 1.0))
    assert P.coeffs[0] == pytest.approx(1.0, abs=1e-2)


def test_best_local_polynomial_too_small():
    g = y_power(Grid(Cube((0.0,), 8.0), 64), 2)
    with pytest.raises(ValueError, match="cube too small"):
        best_local_polynomial(g, 2, 3, Cube((0.0,), 0.25))


# --- eta and N -----------------------------------------------------------------------------


def test_split_gamma():
    assert split_gamma(2.0) == (1, 1.0)
    assert split_gamma(2.5) == (2, 0.5)
    with pytest.raises(ValueError):
        split_gamma(0.0)


def test_eta_examples():
    g = fine_line()
    ladder = RadiusLadder((0.5, 1.0, 2.0))
    assert eta_maximal(GridFunction.zeros(g), 2, 1.0, (0.0,), ladder) == 0.0
    assert eta_maximal(GridFunction.from_callable(g, np.abs), 2, 1.0, (0.0,), ladder) == pytest.approx(1 / (2 * math.sqrt(3)), rel=1e-4)
    assert eta_maximal(y_power(g, 2), 2, 2.0, (0.0,), ladder) == pytest.approx(1 / math.sqrt(80), rel=1e-4)


def test_n_maximal_polynomial_class_is_zero():
    G = QuotientElement(GridFunction.from_callable(fine_line(), lambda y: 1 + 4 * y), 1)
    assert n_maximal(G, 2, 2.0, (0.0,), RadiusLadder((0.5, 1.0))).value == pytest.approx(0.0, abs=1e-10)


def _zoom_oracle(g, x, ladder, q=2.0, gamma=2.0):
    # Independent oracle: nested zooming grid search over (c0, c1) of c0 + c1 (y - x).
    centre = np.array([0.0, 0.0])
    width = np.array([1.0, 1.0])
    blocks = []
    for r in ladder:
        Q = Cube(x, r)
        mask = Q.contains(g.grid.points(), closed=False)
        y = g.grid.points()[mask][:, 0] - x[0]
        blocks.append((r, y, g.values.ravel()[mask]))
    best = None
    for _ in range(12):
        c0 = np.linspace(centre[0] - width[0], centre[0] + width[0], 81)
        c1 = np.linspace(centre[1] - width[1], centre[1] + width[1], 81)
        A, B = np.meshgrid(c0, c1, indexing="ij")
        worst = np.zeros_like(A)
        for r, y, v in blocks:
            res = v[None, None, :] - A[..., None] - B[..., None] * y[None, None, :]
            worst = np.maximum(worst, r ** (-gamma * q) * np.mean(np.abs(res) ** q, axis=-1))
        i = np.unravel_index(np.argmin(worst), worst.shape)
        best = worst[i] ** (1 / q)
        centre = np.array([A[i], B[i]])
        width = width / 4
    return best


def test_n_maximal_y2_single_radius():
    g = y_power(fine_line(), 2)
    ladder = RadiusLadder((1.0,))
    val = n_maximal(QuotientElement(g, 1), 2, 2.0, (0.0,), ladder).value
    assert val == pytest.approx(1 / (6 * math.sqrt(5)), rel=1e-2)
    assert val == pytest.approx(_zoom_oracle(g, (0.0,), ladder), rel=1e-3)


def test_n_maximal_y2_ladder_matches_oracles():
    g = y_power(fine_line(), 2)
    ladder = RadiusLadder((0.25, 0.5, 1.0, 2.0))
    val = n_maximal(QuotientElement(g, 1), 2, 2.0, (0.0,), ladder).value
    grid_val, _ = n_maximal_grid_search(g, 2, 2.0, (0.0,), ladder, [(-0.5, 0.5), (-0.5, 0.5)], points=201)
    assert val <= grid_val * (1 + 1e-6)
    assert val == pytest.approx(_zoom_oracle(g, (0.0,), ladder), rel=1e-3)


def test_n_maximal_translation_covariance():
    g = fine_line()
    shift = 0.5
    f = GridFunction.from_callable(g, lambda y: np.sin(3 * y) + y**3)
    shifted = GridFunction.from_callable(g, lambda y: np.sin(3 * (y + shift)) + (y + shift) ** 3)
    ladder = RadiusLadder((0.25, 0.5, 1.0))
    x0 = node(g, (shift,))
    a = n_maximal(QuotientElement(shifted, 1), 2, 2.0, x0 - shift, ladder).value
    b = n_maximal(QuotientElement(f, 1), 2, 2.0, x0, ladder).value
    assert a == pytest.approx(b, rel=1e-4)


def test_n_maximal_below_eta_and_equal_for_minimiser():
    g = GridFunction.from_callable(fine_line(), lambda y: np.cos(2 * y))
    G = QuotientElement(g, 1)
    ladder = RadiusLadder((0.25, 0.5, 1.0))
    res = n_maximal(G, 2, 2.0, (0.1,), ladder)
    assert res.value <= eta_maximal(g, 2, 2.0, (0.1,), ladder) * (1 + 1e-9)
    assert eta_maximal(res.representative(G), 2, 2.0, (0.1,), ladder) == pytest.approx(res.value, rel=1e-5)


def test_n_maximal_q_not_two():
    g = y_power(fine_line(), 2)
    ladder = RadiusLadder((1.0,))
    v = n_maximal(QuotientElement(g, 1), 3.0, 2.0, (0.0,), ladder).value
    assert v == pytest.approx(_zoom_oracle(g, (0.0,), ladder, q=3.0), rel=2e-3)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_n_maximal_subadditive(seed):
    rng = np.random.default_rng(seed)
    g = Grid(Cube((0.0,), 4.0), 256)
    parts = [GridFunction(g, np.cumsum(rng.normal(size=256)) * 0.05) for _ in range(3)]
    ladder = RadiusLadder((0.25, 0.5, 1.0))
    vals = [n_maximal(QuotientElement(p, 1), 2, 2.0, (0.0,), ladder).value for p in parts]
    total = parts[0] + parts[1] + parts[2]
    assert n_maximal(QuotientElement(total, 1), 2, 2.0, (0.0,), ladder).value <= sum(vals) * (1 + 1e-5) + 1e-12


@settings(max_examples=8, deadline=None)
@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_n_maximal_homogeneous(c):
    g = GridFunction.from_callable(fine_line(4.0, 512), lambda y: np.cos(2 * y))
    ladder = RadiusLadder((0.25, 0.5, 1.0))
    base = n_maximal(QuotientElement(g, 1), 2, 2.0, (0.0,), ladder).value
    assert n_maximal(QuotientElement(g * c, 1), 2, 2.0, (0.0,), ladder).value == pytest.approx(abs(c) * base, rel=1e-5)


def test_n_maximal_lower_semicontinuous_under_refinement():
    vals = []
    for npts in (256, 512, 1024):
        g = GridFunction.from_callable(Grid(Cube((0.0,), 4.0), npts), lambda y: np.abs(y) ** 2.5)
        vals.append(n_maximal(QuotientElement(g, 1), 2, 2.0, (0.0,), RadiusLadder((0.25, 0.5, 1.0))).value)
    assert vals[1] >= vals[0] * (1 - 1e-2)
    assert vals[2] >= vals[1] * (1 - 1e-2)


def test_quotient_equivalence():
    g = fine_line(4.0, 256)
    f = GridFunction.from_callable(g, np.sin)
    G = QuotientElement(f, 1)
    H = QuotientElement(f + GridFunction.from_callable(g, lambda y: 2 - y), 1)
    assert G.equivalent(H)
    assert not G.equivalent(QuotientElement(f * 2.0, 1))
