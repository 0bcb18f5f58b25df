import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import gauss_norm_product, lcm_of_denominators, random_test_polynomials
from toralspec.errors import NotSemisimpleError, RootOfUnityError
from toralspec.exact import RatMatrix, as_poly
from toralspec.spectral import (adapted_distance, archimedean_splitting, bounded_below_set, companion_system,
                                has_root_of_unity, newton_polygon, unstable_product_check, vp)

QUASI = as_poly("1,-1,-1,-1,1")  # x^4 - x^3 - x^2 - x + 1


def test_cat_map_splitting():
    sp = archimedean_splitting([[2, 1], [1, 1]])
    assert sp.dims == (1, 0, 1)
    assert sp.rho == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-8)


def test_quasi_hyperbolic_splitting():
    a, _ = companion_system(QUASI)
    sp = archimedean_splitting(a)
    assert sp.dims == (1, 2, 1)
    central = [l for l, k in zip(sp.eigvals, sp.kinds) if k == "c"]
    assert np.real(central[0]) == pytest.approx((1 - math.sqrt(13)) / 4, abs=1e-9)


def test_shear_not_semisimple():
    with pytest.raises(NotSemisimpleError):
        archimedean_splitting([[1, 1], [0, 1]])


def test_adapted_norm_contracts_and_expands():
    rng = np.random.default_rng(1)
    for mat in ([[2, 1], [1, 1]], companion_system(QUASI)[0]):
        sp = archimedean_splitting(mat)
        A = sp.A
        for _ in range(100):
            v = rng.normal(size=A.shape[0])
            vs, vc, vu = sp.P_s @ v, sp.P_c @ v, sp.P_u @ v
            for k in range(11):
                Ak = np.linalg.matrix_power(A, k)
                tol = 1e-7
                assert sp.norm(Ak @ vs) <= sp.rho ** -k * sp.norm(vs) * (1 + tol) + 1e-12
                assert sp.norm(Ak @ vu) >= sp.rho ** k * sp.norm(vu) * (1 - tol) - 1e-12
                assert sp.norm(Ak @ vc) == pytest.approx(sp.norm(vc), rel=tol, abs=1e-12)


def test_adapted_distance_against_translate_search():
    sp = archimedean_splitting([[2, 1], [1, 1]])
    assert adapted_distance(sp, [0.3, 0.3], [0.3, 0.3]) == 0
    best = min(sp.norm(np.array([0.5 + i, 0.0 + j])) for i in range(-3, 4) for j in range(-3, 4))
    assert adapted_distance(sp, [0.5, 0], [0, 0]) == pytest.approx(best)


def test_vp():
    assert vp(Fraction(12), 2) == 2
    assert vp(Fraction(3, 8), 2) == -3
    assert vp(0, 5) == math.inf


def test_newton_examples():
    assert all(s == 0 for s, _ in newton_polygon(as_poly("1,-3,1"), 2).slopes)
    poly = newton_polygon(as_poly("-1/2,-3/2,1"), 2)
    assert sorted(s for s, _ in poly.slopes) == [0, 1]
    assert poly.unstable_multiplicity() == 1
    # x - 3: single root 3 with |3|_3 = 1/3
    (rv,) = newton_polygon(as_poly("-3,1"), 3).root_valuations
    assert rv == (1, 1)


@pytest.mark.parametrize("f", random_test_polynomials(12, seed=5), ids=lambda f: f.to_text())
def test_newton_slope_sum(f):
    # slopes weighted by length sum to v_p(c_d) - v_p(c_0) with this hull orientation
    for p in (2, 3, 5):
        poly = newton_polygon(f, p)
        total = sum(s * n for s, n in poly.slopes)
        assert total == vp(f.coeffs[-1], p) - vp(f.coeffs[0], p)


def test_product_formula_examples():
    rep = unstable_product_check(as_poly("-1/2,-3/2,1"))
    assert rep.ell == 2 and rep.finite_product == 2 and rep.archimedean_expanding
    rep = unstable_product_check(as_poly("1,-3,1"))
    assert rep.ell == 1 and rep.finite_product == 1 and rep.archimedean_expanding
    with pytest.raises(RootOfUnityError):
        unstable_product_check(as_poly("1,-1,1"))


@pytest.mark.parametrize("f", random_test_polynomials(20, seed=0), ids=lambda f: f.to_text())
def test_product_formula_generated(f):
    rep = unstable_product_check(f)
    assert rep.finite_product == lcm_of_denominators(f)
    assert rep.finite_product == gauss_norm_product(f)


def test_companion_examples():
    a, s = companion_system(as_poly("1,-3,1"))
    assert a == RatMatrix([[0, -1], [1, 3]]) and s == {math.inf}
    a, s = companion_system(as_poly("-1,-3,2"))
    assert s == {2, math.inf}
    assert a == RatMatrix([[0, "1/2"], [1, "3/2"]])
    a, s = companion_system(as_poly("-2,1"))
    assert a == RatMatrix([[2]]) and s == {2, math.inf}


def test_root_of_unity_detection():
    assert has_root_of_unity(as_poly("1,-1,1")) == 6
    assert has_root_of_unity(QUASI) is None


def test_bounded_below_hyperbolic():
    P = bounded_below_set(as_poly("1,-3,1"), 1, 100)
    assert P.elements == tuple(range(1, 101))
    assert P.gap_bound == 1 and P.delta == math.inf


def test_bounded_below_quasi_hyperbolic():
    P = bounded_below_set(QUASI, 1, 10**4)
    assert P.max_gap() <= 3 and P.delta > 0
    # independent check with the closed-form angle
    theta = math.acos((1 - math.sqrt(13)) / 4)
    ns = np.array(P.elements)
    assert np.min(np.abs(np.exp(1j * theta * ns) - 1)) >= P.delta - 1e-9


def test_bounded_below_multiples():
    P = bounded_below_set(QUASI, 6, 2000)
    assert all(n % 6 == 0 for n in P.elements)
    assert P.max_gap() <= P.gap_bound
