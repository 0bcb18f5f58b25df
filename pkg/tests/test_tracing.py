from fractions import Fraction

import numpy as np
import pytest

from oracles import periodic_points_hnf, tracing_errors
from toralspec.errors import ClosingFailedError, InputError, SpacingTooSmallError
from toralspec.torus import TorusPoint, as_automorphism, orbit
from toralspec.tracing import (Specification, check_partial_trace, check_pseudo_orbit, close_orbit,
                               minimal_spacing, pseudo_orbit_to_spec, pseudo_trace_fraction, shadow_pseudo_orbit,
                               shadowing_parameters, trace_spec, trace_spec_periodic)

CAT = [[2, 1], [1, 1]]


def exact_orbit_points(x, n):
    return orbit(CAT, TorusPoint(x), n)


# ------------------------------------------------------------ predicates


def test_partial_trace_trivial():
    spec = Specification([(TorusPoint("1/5,2/5"), 0, 10)])
    rep = check_partial_trace(CAT, spec, TorusPoint("1/5,2/5"), Fraction(1, 10))
    assert rep.ok and rep.full and rep.fractions == [1]
    rep = check_partial_trace(CAT, spec, TorusPoint("0,0"), Fraction(1, 2))
    assert rep.ok  # eps at the diameter of the torus


def test_specification_text_round_trip():
    spec = Specification([(TorusPoint("0,0"), 0, 5), (TorusPoint("1/2,1/2"), 17, 22)], 12)
    back = Specification.from_text(spec.to_text())
    assert back.segments == spec.segments and back.spacing == 12
    with pytest.raises(InputError):
        Specification([(TorusPoint("0,0"), 0, 5), (TorusPoint("0,0"), 6, 8)], 3)


def test_pseudo_orbit_predicate():
    pts = exact_orbit_points("1/7,3/7", 20)
    assert check_pseudo_orbit(CAT, pts, Fraction(1, 100))
    assert check_pseudo_orbit(CAT, pts[:1], Fraction(1, 100))
    delta = Fraction(1, 10)
    bad = list(pts)
    # ceil(delta * N) + 1 corrupted links
    for i in (3, 9, 15):
        bad[i] = TorusPoint([c + Fraction(1, 3) for c in bad[i].coords])
    assert not check_pseudo_orbit(CAT, bad, delta)


# ------------------------------------------------------------ closing lemma


def test_close_orbit_fixed_point():
    for n in (1, 5, 12):
        assert close_orbit(CAT, TorusPoint("0,0"), n, 0.1).point == TorusPoint("0,0")


def test_close_orbit_thirds():
    res = close_orbit(CAT, TorusPoint("1/3,1/3"), 8, 0.1)
    A8 = as_automorphism(CAT).power(8)
    assert TorusPoint(A8.apply(res.point.coords), exact=True) == res.point


def test_close_orbit_against_brute_force():
    x = TorusPoint("1/5,2/5")
    n, eps = 12, Fraction(1, 10)
    res = close_orbit(CAT, x, n, eps)
    assert res.window == 10 and res.max_error < eps
    pts = periodic_points_hnf(CAT, n)
    errs = tracing_errors(CAT, x.coords, pts, res.window)
    assert np.min(errs) < eps  # the brute force agrees that a tracer exists
    assert float(res.max_error) == pytest.approx(np.min(errs), abs=1e-9)


def test_close_orbit_failure_carries_best():
    with pytest.raises(ClosingFailedError) as info:
        close_orbit(CAT, TorusPoint("307829/1000000,40973/1000000"), 20, 0.05)
    assert info.value.best is None or info.value.error >= Fraction(1, 20)


def test_close_orbit_rejects_bad_eps():
    with pytest.raises(InputError):
        close_orbit(CAT, TorusPoint("0,0"), 3, 1.5)


# ------------------------------------------------------------ specification


@pytest.fixture(scope="module")
def spacing():
    return minimal_spacing(CAT, 0.1)


def test_trace_spec_single_segment():
    x = TorusPoint("1/9,4/9")
    assert trace_spec(CAT, Specification([(x, 0, 7)]), 0.1) == x


def test_trace_spec_two_segments(spacing):
    M = spacing
    spec = Specification([(TorusPoint("0,0"), 0, 5), (TorusPoint("1/2,1/2"), 5 + M, 10 + M)], M)
    y = trace_spec(CAT, spec, 0.1)
    rep = check_partial_trace(CAT, spec, y, 0.1)
    assert rep.ok and rep.full


def test_trace_spec_zero_spacing():
    spec = Specification([(TorusPoint("0,0"), 0, 5), (TorusPoint("1/2,1/2"), 5, 10)], 0)
    with pytest.raises(SpacingTooSmallError):
        trace_spec(CAT, spec, 0.01)


def test_trace_spec_periodic(spacing):
    M = spacing
    spec = Specification([(TorusPoint("0,0"), 0, 5), (TorusPoint("1/2,1/2"), 5 + M, 10 + M)], M)
    y = trace_spec_periodic(CAT, spec, 40, 0.1)
    A40 = as_automorphism(CAT).power(40)
    assert TorusPoint(A40.apply(y.coords), exact=True) == y
    assert check_partial_trace(CAT, spec, y, 0.1).ok
    with pytest.raises(InputError):
        trace_spec_periodic(CAT, spec, 10 + M, 0.1)
    fixed = Specification([(TorusPoint("0,0"), 0, 4)])
    assert trace_spec_periodic(CAT, fixed, 6, 0.1) == TorusPoint("0,0")


# ------------------------------------------------------------ shadowing


def noisy_orbit(x0, N, delta, seed, breaks=()):
    """Pseudo-orbit with link defects below delta, plus big jumps at `breaks`."""
    rng = np.random.default_rng(seed)
    A = as_automorphism(CAT)
    den = 2 ** (delta.denominator.bit_length() + 8)
    cap = int(delta * den) - 1
    pts = [TorusPoint(x0)]
    for n in range(1, N):
        nxt = A.apply(pts[-1])
        if n in breaks:
            nxt = TorusPoint([Fraction(int(rng.integers(1000)), 1000) for _ in range(2)])
        else:
            noise = [Fraction(int(rng.integers(-cap, cap + 1)), den) for _ in range(2)]
            nxt = TorusPoint([a + b for a, b in zip(nxt.coords, noise)])
        pts.append(nxt)
    return pts


def test_subdivision_arithmetic(spacing):
    M = spacing
    L, C, delta = shadowing_parameters(CAT, 0.4, M)
    assert M / L < 0.1 and (L + M) / C < 0.1 and L < C
    seq = noisy_orbit("1/3,1/7", 1500, delta, 1, breaks=(400, 900))
    sub = pseudo_orbit_to_spec(CAT, seq, 0.4, M)
    assert sub.breakpoints == [401, 901]
    assert sub.runs == [(1, 401), (401, 901), (901, 1501)]
    assert all(g >= M for g in sub.spec.gaps())
    for n0, n1 in sub.runs:
        inside = [s for s in sub.spec.segments if n0 <= s[1] < n1]
        # windows [a, a + L) start every L + M steps and leave a gap of M before the break
        assert len(inside) == (n1 - n0) // (L + M)
        assert all(s[2] - s[1] == L for s in inside)


def test_short_clean_pseudo_orbit_traced_by_first_point(spacing):
    L, C, delta = shadowing_parameters(CAT, 0.1, spacing)
    seq = noisy_orbit("2/9,5/9", 60, delta, 3)
    y, frac, sub = shadow_pseudo_orbit(CAT, seq, 0.1, spacing)
    assert sub.trace_by_first and not sub.spec.segments
    assert frac > Fraction(9, 10)


def test_long_pseudo_orbit_subdivision_branch(spacing):
    eps = Fraction(2, 5)
    L, C, delta = shadowing_parameters(CAT, eps, spacing)
    seq = noisy_orbit("1/3,1/7", 2000, delta, 7)
    assert check_pseudo_orbit(CAT, seq, delta)
    y, frac, sub = shadow_pseudo_orbit(CAT, seq, eps, spacing)
    assert not sub.trace_by_first and sub.spec.r > 1
    assert frac > 1 - eps
    assert frac == pseudo_trace_fraction(CAT, seq, y, eps)
