from fractions import Fraction

import numpy as np
import pytest

from toralspec.errors import InputError
from toralspec.subshift import (CylinderMeasure, Word, canonical_words, cylinder_empirical, diagonal_mass,
                                factor_curve, has_cube, product_distance, product_lower_bound, shift_distance,
                                substitute, thue_morse, tm_reference, xp_periodic_point, xp_windows_ok)


def test_thue_morse_prefix():
    assert thue_morse(8) == "01101001"


@pytest.mark.parametrize("n", [1, 3, 8, 100, 1000])
def test_substitution_fixed_point(n):
    assert thue_morse(2 * n) == substitute(thue_morse(n))


def test_cube_free():
    assert not has_cube(thue_morse(2 ** 14))
    assert has_cube("0110110110")
    assert has_cube("000")
    assert not has_cube("0110")


def test_xp_points():
    assert xp_periodic_point(2, 2).symbols == "011a"
    assert xp_periodic_point(2, 1).symbols == "0a"
    for p, n in ((2, 3), (3, 2), (3, 4)):
        w = xp_periodic_point(p, n)
        assert w.least_period() == p ** n
    with pytest.raises(InputError):
        xp_periodic_point(1, 3)


def test_periodic_window():
    w = Word("011a", periodic=True)
    assert w.window(2, 7) == "1a011a0"
    assert w.window(-1, 3) == "a01"


def test_cylinder_counts():
    m = cylinder_empirical(Word("0", periodic=True), 2)
    assert m.freq("00") == 1
    m = cylinder_empirical(Word("0a", periodic=True), 1)
    assert m.freq("0") == m.freq("a") == Fraction(1, 2)
    assert m.consistent()


@pytest.mark.parametrize("p,n,L", [(2, 3, 4), (3, 2, 5), (2, 6, 6)])
def test_cylinder_consistency(p, n, L):
    assert cylinder_empirical(xp_periodic_point(p, n), L).consistent()


def test_tm_reference_balance():
    ref = tm_reference(4)
    assert ref.freq("0") == ref.freq("1") == Fraction(1, 2)
    assert ref.freq("000") == 0
    assert ref.consistent()


def test_shift_distance_basics():
    a = cylinder_empirical(xp_periodic_point(2, 5), 6)
    b = cylinder_empirical(xp_periodic_point(3, 3), 6)
    assert shift_distance(a, a) == 0
    assert shift_distance(a, b) == shift_distance(b, a)
    assert 0 < shift_distance(a, b) <= 1


def test_factor_curves_decrease():
    for p, top in ((2, 10), (3, 7)):
        c = factor_curve(p, top, 6)
        assert c[-1] < 0.05 and c[-1] < c[0]


@pytest.mark.parametrize("p,n", [(2, 1), (2, 4), (2, 8), (3, 3), (3, 5)])
def test_window_lemma(p, n):
    assert xp_windows_ok(p, n, 6)


def test_diagonal_measure_off_diagonal_zero():
    ref = tm_reference(3)
    assert diagonal_mass(ref, "0", "1") == 0
    assert diagonal_mass(ref, "01", "01") == ref.freq("01")


def test_product_lower_bound_holds():
    ref = tm_reference(4)
    bound = product_lower_bound(float(ref.freq("0")), float(ref.freq("1")))
    assert bound > 0
    rng = np.random.default_rng(4)
    factors = [cylinder_empirical(xp_periodic_point(p, n), 4) for p, n in ((2, 1), (2, 5), (3, 2), (3, 4))]
    for m1 in factors:
        for m2 in factors:
            assert product_distance(m1, m2, ref) >= bound
    # random product measures on the first letter also respect the bound
    for _ in range(50):
        a = rng.dirichlet([1, 1, 1])
        b = rng.dirichlet([1, 1, 1])
        m1 = CylinderMeasure(1, {s: int(1000 * v) for s, v in zip("01a", a)}, 0)
        m2 = CylinderMeasure(1, {s: int(1000 * v) for s, v in zip("01a", b)}, 0)
        m1.total, m2.total = sum(m1.counts.values()), sum(m2.counts.values())
        ref1 = tm_reference(1)
        assert product_distance(m1, m2, ref1) >= product_lower_bound(0.5, 0.5)


def test_canonical_words_order():
    assert canonical_words(2, "01") == ["0", "1", "00", "01", "10", "11"]
