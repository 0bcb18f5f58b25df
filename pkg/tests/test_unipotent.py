import math
from fractions import Fraction

import numpy as np
import pytest

from toralspec.errors import BudgetError, CoprimalityError, InputError, NotInvariantError
from toralspec.measures import EmpiricalMeasure, HaarCoset, torus_family, weak_star_distance
from toralspec.symbolic import SymbolicPoint, SymbolicReal
from toralspec.torus import TorusPoint, as_automorphism, torus_distance
from toralspec.unipotent import (SupportDescriptor, check_descriptor, interval_permutation, least_period,
                                 periodic_approximants, point_orbit, strong_dpm_sequence)

U2 = [[1, 1], [0, 1]]
U3 = [[1, 1, 0], [0, 1, 1], [0, 0, 1]]
PHI = (math.sqrt(5) - 1) / 2
LEB_PHI = "a = 0, phi; H = 1;0; m = 1"


def circ(a, b):
    t = np.abs(a - b) % 1.0
    return np.minimum(t, 1 - t)


def test_descriptor_text_round_trip():
    mu = SupportDescriptor.from_text(LEB_PHI)
    again = SupportDescriptor.from_text(mu.to_text())
    assert again.H.k == 1 and again.m == 1
    assert again.a.to_floats() == pytest.approx([0, PHI])
    assert check_descriptor(U2, mu)


def test_descriptor_not_invariant():
    # one component cannot work: U a - a = (phi, 1/2, 0) leaves H + Z^3
    mu = SupportDescriptor.from_text("a = 0, phi, 1/2; H = 1;0;0; m = 1")
    assert not check_descriptor(U3, mu)
    with pytest.raises(NotInvariantError):
        check_descriptor(U2, SupportDescriptor.from_text("a = 0, phi; H = 0;1; m = 1"))


def test_approximants_example():
    t = SymbolicReal.parse("sqrt(2)/2")
    out = periodic_approximants(U2, [Fraction(1, 2), 0], [[0, 1]], [t], [5, 10, 40])
    for ap in out:
        assert ap.period == 4 * ap.n
        assert ap.point.coords == (Fraction(1, 2), Fraction(round(ap.n / math.sqrt(2)), ap.n) % 1)
        P = as_automorphism(U2).power(ap.period)
        assert TorusPoint(P.apply(ap.point.coords), exact=True) == ap.point


def test_approximants_converge():
    t = SymbolicReal.parse("sqrt(2)/2")
    out = periodic_approximants(U2, [Fraction(1, 2), 0], [[0, 1]], [t], [10, 100, 1000])
    errs = [torus_distance(ap.point, [0.5, 1 / math.sqrt(2)]) for ap in out]
    assert errs[-1] < 1e-3 and errs == sorted(errs, reverse=True)


def test_approximant_rational_target_is_exact():
    out = periodic_approximants(U2, [0, 0], [[0, 1]], [Fraction(2, 7)], [7, 14])
    assert all(ap.point == TorusPoint("0,2/7") for ap in out)


def test_least_period():
    assert least_period(U2, TorusPoint("0,1/5")) == 5
    assert least_period(U2, TorusPoint("1/3,0")) == 1
    with pytest.raises(BudgetError):
        least_period(U2, SymbolicPoint.parse("0, phi"), bound=50)


def test_strong_dpm_finite_support():
    mu = SupportDescriptor.from_text("a = 1/2, 1/3; H = ; m = 3")
    seq = strong_dpm_sequence(U2, mu, [4, 9])
    assert seq.finite and seq.c == 3  # (1/2 + 3 * 1/3, 1/3) = (1/2, 1/3)
    assert all(p == TorusPoint("1/2,1/3") for p in seq.points.values())


def test_strong_dpm_periods_and_convergence():
    mu = SupportDescriptor.from_text(LEB_PHI)
    ns = [25, 50, 100, 200]
    seq = strong_dpm_sequence(U2, mu, ns)
    fam = torus_family(2)
    ref = HaarCoset.from_descriptor(U2, mu)
    dists = []
    for n in ns:
        p = seq.points[n]
        q = seq.c * n
        P = as_automorphism(U2).power(q)
        assert TorusPoint(P.apply(p.coords), exact=True) == p
        dists.append(weak_star_distance(EmpiricalMeasure.from_floats("torus-2", point_orbit(U2, p, q)), ref, fam)[0])
    assert dists[-1] < 0.05


def test_subsampled_measures_share_the_limit():
    mu = SupportDescriptor.from_text(LEB_PHI)
    seq = strong_dpm_sequence(U2, mu, [200])
    z, q = seq.points[200], seq.c * 200
    fam = torus_family(2)
    ref = HaarCoset.from_descriptor(U2, mu)
    full = weak_star_distance(EmpiricalMeasure.from_floats("torus-2", point_orbit(U2, z, q)), ref, fam)[0]
    for K in (3, 7):
        sub = point_orbit(U2, z, q // K, stride=K)
        d = weak_star_distance(EmpiricalMeasure.from_floats("torus-2", sub), ref, fam)[0]
        assert abs(d - full) < 0.05


def test_unique_ergodicity_on_support():
    # powers U^n coprime to m = 1 from different starting points in the support
    mu = SupportDescriptor.from_text(LEB_PHI)
    fam = torus_family(2)
    ref = HaarCoset.from_descriptor(U2, mu)
    for start in ("0, phi", "sqrt(2)-1, phi"):
        x = SymbolicPoint.parse(start)
        for n in (1, 2, 5):
            orb = point_orbit(U2, x, 20000, stride=n)
            d = weak_star_distance(EmpiricalMeasure.from_floats("torus-2", orb), ref, fam)[0]
            assert d < 0.05


def test_two_component_measure_charges_both():
    mu = SupportDescriptor.from_text("a = 0, phi, 1/2; H = 1;0;0; m = 2")
    assert check_descriptor(U3, mu)
    seq = strong_dpm_sequence(U3, mu, [50, 100])
    assert seq.c == 12
    for n, p in seq.points.items():
        orb = point_orbit(U3, p, seq.c * n)
        first = circ(orb[:, 1], PHI) < circ(orb[:, 1], PHI + 0.5)
        assert abs(first.mean() - 0.5) <= 0.01


def test_interval_permutation_identity_case():
    mu = SupportDescriptor.from_text("a = 1/3, 0; H = ; m = 1")
    x = TorusPoint("1/3,0")
    match = interval_permutation(U2, mu, x, 1, 0.2)
    assert match.pi == list(range(len(match.pi)))
    assert match.good_fraction == 1


def test_interval_permutation_inequality():
    mu = SupportDescriptor.from_text(LEB_PHI)
    x = SymbolicPoint.parse("sqrt(2)-1, phi")
    K, eps = 7, 0.2
    match = interval_permutation(U2, mu, x, K, eps)
    assert sorted(match.pi) == [j * K for j in range(len(match.pi))]
    # recount the good indices from fresh orbits
    P = len(match.pi)
    zs = point_orbit(U2, match.z, P, stride=K)
    xs = point_orbit(U2, x, P, stride=K)
    idx = [p // K for p in match.pi]
    good = np.max(circ(zs, xs[idx]), axis=1) < eps
    assert good.sum() == match.good_count
    assert good.sum() > (1 - Fraction(1, 5)) * Fraction(match.q, K)


def test_interval_permutation_coprimality():
    mu = SupportDescriptor.from_text("a = 0, phi, 1/2; H = 1;0;0; m = 2")
    with pytest.raises(CoprimalityError):
        interval_permutation(U3, mu, SymbolicPoint.parse("0, phi, 1/2"), 4, 0.2)


def test_interval_permutation_budget():
    mu = SupportDescriptor.from_text(LEB_PHI)
    with pytest.raises(BudgetError) as info:
        interval_permutation(U2, mu, SymbolicPoint.parse("sqrt(2)-1, phi"), 7, 0.01, budget=200)
    assert "budget" in str(info.value)


def test_interval_permutation_rejects_eps():
    mu = SupportDescriptor.from_text(LEB_PHI)
    with pytest.raises(InputError):
        interval_permutation(U2, mu, SymbolicPoint.parse("0, phi"), 7, 1.5)
