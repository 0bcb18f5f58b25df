from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import periodic_points_grid
from toralspec.errors import CosetError, InfinitePeriodicSetError, InputError, NotInvariantError
from toralspec.exact import RatMatrix
from toralspec.torus import (Subtorus, TorusPoint, orbit, periodic_count, periodic_points, quotient_distance,
                             restrict_to_subtorus, solve_periodic_in_coset, torus_distance)

CAT = [[2, 1], [1, 1]]
EXT = [[1, 0, 0], [1, 2, 1], [0, 1, 1]]


def test_torus_distance_wraps():
    assert torus_distance("9/10,0", "1/10,0") == Fraction(1, 5)
    assert torus_distance([0.9, 0.0], [0.1, 0.0]) == pytest.approx(0.2)
    assert torus_distance("1/3,1/5", "1/3,1/5") == 0


def test_point_parsing():
    p = TorusPoint("3/2,-1/4")
    assert p.coords == (Fraction(1, 2), Fraction(3, 4)) and p.exact
    with pytest.raises(InputError):
        TorusPoint([float("nan"), 0.0])


def test_orbit_of_zero_and_thirds():
    assert all(p == TorusPoint("0,0") for p in orbit(CAT, "0,0", 5))
    for p in orbit(CAT, "1/3,1/3", 12):
        assert all(3 % c.denominator == 0 for c in p.coords)


def test_periodic_points_small():
    assert periodic_points(CAT, 1) == [TorusPoint("0,0")]
    assert len(periodic_points(CAT, 2)) == 5
    with pytest.raises(InfinitePeriodicSetError):
        periodic_points([[1, 1], [0, 1]], 3)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_periodic_points_match_grid_scan(n):
    got = {p.coords for p in periodic_points(CAT, n)}
    assert got == periodic_points_grid(CAT, n)
    assert len(got) == periodic_count(CAT, n)


@pytest.mark.parametrize("n,m", [(1, 2), (2, 2), (2, 3), (3, 2), (1, 4), (4, 2)])
def test_periodic_points_nested(n, m):
    small = set(periodic_points(CAT, n))
    big = set(periodic_points(CAT, n * m))
    assert small <= big


def test_quotient_distance_example():
    Y = Subtorus("0;1")
    assert quotient_distance([0.3, 0.7], [0.1, 0.2], Y) == pytest.approx(0.2, abs=1e-6)
    assert quotient_distance([0.3, 0.7], [0.3, 0.1], Y) == pytest.approx(0.0, abs=1e-6)


@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=6, max_size=6))
@settings(max_examples=50, deadline=None)
def test_quotient_distance_below_torus_distance(v):
    x, y = v[:3], v[3:]
    for Y in (Subtorus("0,0;1,0;0,1"), Subtorus("1;1;0")):
        assert quotient_distance(x, y, Y) <= torus_distance(x, y) + 1e-9


def test_restrict_to_subtorus():
    Y = Subtorus("0,0;1,0;0,1")
    assert restrict_to_subtorus(EXT, Y) == RatMatrix(CAT)
    full = Subtorus("1,0;0,1")
    assert restrict_to_subtorus(CAT, full) == RatMatrix(CAT)
    with pytest.raises(NotInvariantError):
        restrict_to_subtorus(CAT, Subtorus("1;0"))


def test_subtorus_must_be_primitive():
    with pytest.raises(InputError):
        Subtorus("2;0")


def test_solve_periodic_in_coset_example():
    Y = Subtorus("0,0;1,0;0,1")
    x = solve_periodic_in_coset(EXT, Y, TorusPoint("1/2,0,0"), 1)
    assert x == TorusPoint("1/2,0,1/2")
    # membership in x + Y: first coordinate unchanged
    assert x.coords[0] == Fraction(1, 2)
    fixed = TorusPoint("0,0,0")
    assert solve_periodic_in_coset(EXT, Y, fixed, 3) == fixed


def test_solve_periodic_in_coset_trivial_subtorus():
    with pytest.raises((CosetError, InputError)):
        solve_periodic_in_coset(CAT, Subtorus(None, dim=2), TorusPoint("1/7,0"), 1)


@given(st.integers(1, 6), st.integers(0, 11), st.integers(1, 12))
@settings(max_examples=30, deadline=None)
def test_coset_solution_in_coset(n, a, b):
    Y = Subtorus("0,0;1,0;0,1")
    x = TorusPoint([Fraction(a, 12), Fraction(b, 7), Fraction(1, 3)])
    try:
        y = solve_periodic_in_coset(EXT, Y, x, n)
    except CosetError:
        return
    assert y.coords[0] == x.coords[0]
    m = np.linalg.matrix_power(np.array(EXT), n)
    assert TorusPoint(RatMatrix(m.tolist()).apply(y.coords), exact=True) == y
