import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calderon_hardy import Atom, AtomicSeries, Cube, Grid, GridFunction, Weight, make_atom, random_atom, validate_atom
from calderon_hardy.atoms import (
    assemble_series,
    check_parameters,
    min_moment_order,
    moment_residuals,
    p0_lower_bound,
    remove_moments,
    smooth_bump,
    smooth_moment_free,
)


@pytest.fixture
def unit_line():
    return Grid(Cube((0.5,), 4.0), 512)


def test_parameter_windows():
    assert min_moment_order(1, 1.0, 1.0) == 0
    assert min_moment_order(1, 1.0, 1.0, m=1) == 1
    assert min_moment_order(1, 1.5, 0.5) == 2
    assert p0_lower_bound(1.0, math.inf) == 1.0
    assert p0_lower_bound(1.0, 2.0) == 2.0
    with pytest.raises(ValueError, match=r"d >= max"):
        check_parameters(Weight.unit(1), 1.0, 2.0, 0, m=1)
    with pytest.raises(ValueError, match=r"p0 > max"):
        check_parameters(Weight.power(-0.5, 1), 1.0, 2.0, 1)
    with pytest.raises(ValueError, match=r"0 < p <= 1"):
        check_parameters(Weight.unit(1), 1.5, 2.0, 1)


def test_antisymmetric_bump_unchanged(unit_line):
    Q = Cube((0.5,), 1.0)
    y = unit_line.axes[0]
    vals = np.where((y > 0) & (y < 0.5), 1.0, 0.0) - np.where((y > 0.5) & (y < 1.0), 1.0, 0.0)
    a = make_atom(GridFunction(unit_line, vals), Q, Weight.unit(1), 1.0, 2.0, 0)
    assert a.samples.lp_norm(2) == pytest.approx(1.0)
    ratio = a.samples.values[vals != 0] / vals[vals != 0]
    np.testing.assert_allclose(ratio, ratio[0])


def test_constant_bump_degenerate(unit_line):
    Q = Cube((0.5,), 1.0)
    bump = GridFunction(unit_line, Q.contains(unit_line.points()).astype(float))
    with pytest.raises(ValueError, match="degenerate bump"):
        make_atom(bump, Q, Weight.unit(1), 1.0, 2.0, 0)


def test_bump_outside_cube_rejected(unit_line):
    with pytest.raises(ValueError, match="not supported"):
        make_atom(GridFunction(unit_line, np.ones(unit_line.shape)), Cube((0.5,), 1.0), Weight.unit(1), 1.0, 2.0, 0)


def test_quartic_bump_moments_and_tight_size():
    g = Grid(Cube((0.0,), 4.0), 512)
    Q = Cube((0.0,), 1.0)
    bump = GridFunction.from_callable(g, lambda y: np.where(np.abs(y) <= 0.5, (1 - 4 * y * y) ** 2, 0.0))
    a = make_atom(bump, Q, Weight.unit(1), 1.0, 2.0, 1)
    rep = validate_atom(a)
    assert rep.passed
    assert rep.moment_residual <= 1e-10
    assert rep.slack == pytest.approx(1.0, rel=1e-9)
    # Independent check of the projection through the explicit Gram matrix of {1, y}.
    mask = Q.contains(g.points())
    y = g.points()[mask][:, 0]
    f = bump.values[mask]
    gram = np.array([[np.sum(y**i * y**j) for j in range(2)] for i in range(2)])
    c = np.linalg.solve(gram, [np.sum(f), np.sum(f * y)])
    expected = f - c[0] - c[1] * y
    np.testing.assert_allclose(a.samples.values[mask] / a.samples.values[mask][0], expected / expected[0], rtol=1e-8)


def test_validate_detects_scaling_and_escape():
    g = Grid(Cube((0.0,), 4.0), 256)
    a = random_atom(g, Cube((0.0,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=4)
    assert validate_atom(a).passed
    doubled = validate_atom(a.scaled(2.0))
    assert not doubled.norm_ok
    assert doubled.slack == pytest.approx(2.0, rel=1e-9)
    moved = Atom(Cube((0.5,), 1.0), a.samples, a.p, a.p0, a.d, a.weight)
    rep = validate_atom(moved)
    assert not rep.support_ok and rep.escaped_mass > 0


def test_w_unit_size_bound_is_classical():
    Q = Cube((0.0,), 0.5)
    g = Grid(Cube((0.0,), 4.0), 512)
    a = random_atom(g, Q, Weight.unit(1), 0.8, 2.0, 1, seed=1)
    assert a.norm_bound() == pytest.approx(Q.volume ** (1 / 2 - 1 / 0.8))


def test_make_atom_idempotent_in_moments():
    g = Grid(Cube((0.0, 0.0), 4.0), 64)
    a = random_atom(g, Cube((0.0, 0.0), 1.0), Weight.unit(2), 1.0, 2.0, 1, seed=0)
    again = remove_moments(a.samples, a.cube, a.d)
    assert (again - a.samples).lp_norm(2) < 1e-12 * a.samples.lp_norm(2)


def test_power_weight_atom_2d():
    g = Grid(Cube((0.0, 0.0), 4.0), 64)
    w = Weight.power(0.25, 2)
    a = random_atom(g, Cube((0.5, 0.5), 1.0), w, 1.0, 2.0, 1, seed=9)
    rep = validate_atom(a)
    assert rep.passed and rep.slack == pytest.approx(1.0, rel=1e-9)


def test_moment_residuals_of_projection_scale_with_h():
    # The plain lattice moments of a smooth bump against the exact moments.
    Q = Cube((0.0,), 1.0)
    errs = []
    for npts in (128, 256):
        g = Grid(Cube((0.0,), 4.0), npts)
        b = smooth_bump(g, Q, power=3, seed=5)
        errs.append(abs(np.sum(b.values) * g.cell_volume - _exact_mass(5)))
    assert math.log2(errs[0] / errs[1]) >= 1


def _exact_mass(seed):
    g = Grid(Cube((0.0,), 4.0), 1 << 15)
    b = smooth_bump(g, Cube((0.0,), 1.0), power=3, seed=seed)
    return np.sum(b.values) * g.cell_volume


def test_smooth_moment_free_is_smooth_at_faces():
    g = Grid(Cube((0.0,), 4.0), 512)
    Q = Cube((0.0,), 1.0)
    f = smooth_moment_free(smooth_bump(g, Q, power=3, seed=2), Q, 1)
    assert np.max(moment_residuals(f, Q, 1)) < 1e-12
    i = g.index_of((0.5 - g.h / 2,))
    plain = remove_moments(smooth_bump(g, Q, power=3, seed=2), Q, 1)
    assert abs(f.values[i]) < 1e-4 * np.max(np.abs(f.values))
    assert abs(plain.values[i]) > 1e-2 * np.max(np.abs(plain.values))


def test_series_examples():
    g = Grid(Cube((0.0,), 8.0), 512)
    a1 = random_atom(g, Cube((-1.0,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=1)
    a2 = random_atom(g, Cube((1.5,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=2)
    single = assemble_series(AtomicSeries.of([(1.0, a1)]))
    np.testing.assert_array_equal(single.total.values, a1.samples.values)
    res = assemble_series(AtomicSeries.of([(2.0, a1), (0.5, a2)]))
    lhs = res.total.lp_norm(2) ** 2
    rhs = 4.0 * a1.samples.lp_norm(2) ** 2 + 0.25 * a2.samples.lp_norm(2) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert res.tail_norms[0] >= res.tail_norms[1] >= res.tail_norms[2] == 0.0


def test_series_tail_triangle_bound():
    g = Grid(Cube((0.0,), 8.0), 512)
    rng = np.random.default_rng(0)
    terms = []
    for j in range(10):
        c = float(rng.integers(-8, 8)) / 4
        terms.append((float(rng.uniform(0.1, 2)), random_atom(g, Cube((c,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=j)))
    res = assemble_series(AtomicSeries.of(terms))
    for t, b in zip(res.tail_norms, res.tail_bounds):
        assert t <= b * (1 + 1e-12) + 1e-15


def test_series_validation():
    g = Grid(Cube((0.0,), 8.0), 512)
    a = random_atom(g, Cube((0.0,), 1.0), Weight.unit(1), 1.0, 2.0, 1, seed=1)
    b = random_atom(g, Cube((0.0,), 1.0), Weight.unit(1), 1.0, 3.0, 1, seed=1)
    with pytest.raises(ValueError, match="empty"):
        AtomicSeries.of([])
    with pytest.raises(ValueError, match="nonnegative"):
        AtomicSeries.of([(-1.0, a)])
    with pytest.raises(ValueError, match="share"):
        AtomicSeries.of([(1.0, a), (1.0, b)])
    assert AtomicSeries.of([(0.5, a), (2.0, a)]).coefficient_sum() == pytest.approx(2.5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 2))
def test_random_atoms_always_validate(seed, d):
    g = Grid(Cube((0.0,), 4.0), 256)
    a = random_atom(g, Cube((0.0,), 1.0), Weight.power(0.5, 1), 0.9, 2.0, max(d, 1), seed=seed)
    rep = validate_atom(a)
    assert rep.passed
