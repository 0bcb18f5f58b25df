"""Periodic approximation of ergodic measures of unipotent toral maps."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import BudgetError, CoprimalityError, InputError, NotInvariantError, NotUnipotentError
from .exact import RatMatrix, as_matrix, exact_inverse, jordan_unipotent, lcm_denominators, to_fraction
from .symbolic import SymbolicPoint, SymbolicReal, _independent_directions, expanded_base
from .torus import (Subtorus, TorusPoint, as_automorphism, fixed_point_orbit, numerator_orbit,
                    restrict_to_subtorus, torus_distance_array)


@dataclass
class SupportDescriptor:
    """Support of an ergodic measure: union of U^j(a + H) for j < m, with Haar
    measure on each coset.  `a` carries its own closure data (v0, v_j, t_j)."""

    a: SymbolicPoint
    H: Subtorus
    m: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise InputError("m must be positive")
        if self.H.dim != self.a.dim:
            raise InputError("dimension mismatch")

    @property
    def dim(self) -> int:
        return self.a.dim

    @property
    def finite(self) -> bool:
        return self.H.k == 0

    def to_text(self) -> str:
        return f"a = {self.a.to_text()}; H = {self.H.to_text()}; m = {self.m}"

    @classmethod
    def from_text(cls, text: str) -> "SupportDescriptor":
        fields = {}
        for part in text.split(";"):
            if not part.strip():
                continue
            if "=" not in part:
                # continuation of the H matrix rows
                fields["H"] = fields.get("H", "") + ";" + part.strip()
                continue
            key, val = part.split("=", 1)
            key = key.strip()
            if key not in ("a", "H", "m"):
                # a row of H written after "H = ..."
                fields["H"] = fields.get("H", "") + ";" + part.strip()
                continue
            fields[key] = val.strip()
        if "a" not in fields:
            raise InputError("descriptor needs a = <point>")
        a = SymbolicPoint.parse(fields["a"])
        h = fields.get("H", "").strip()
        H = Subtorus(h, dim=a.dim) if h else Subtorus(None, dim=a.dim)
        return cls(a, H, int(fields.get("m", "1")))


def _in_H_plus_Z(H: Subtorus, p: SymbolicPoint) -> bool:
    """Exact test of p in H + Z^d, treating irrational atoms as independent."""
    for vec in _independent_directions(p):
        if any(c != 0 for c in H.split_coords(vec)[1]):
            return False
    return all(c.denominator == 1 for c in H.split_coords(expanded_base(p))[1])


def check_descriptor(U, mu: SupportDescriptor) -> bool:
    """U^m H = H and U^m a - a in H + Z^d."""
    U = as_automorphism(U)
    Um = U.power(mu.m)
    if mu.H.k:
        restrict_to_subtorus(Um, mu.H)
    return _in_H_plus_Z(mu.H, mu.a.apply(Um) - mu.a)


# ------------------------------------------------------------ approximants


@dataclass
class Approximant:
    n: int
    point: TorusPoint
    period: int


def _jordan_data(U, v0, vs):
    q, _ = jordan_unipotent(U)
    qinv = exact_inverse(q)
    w0 = qinv.apply(v0)
    ws = [qinv.apply(v) for v in vs]
    D = lcm_denominators(x for w in ws for x in w)
    ell = lcm_denominators(w0)
    return q, w0, ws, D, ell


def periodic_approximants(U, v0: Sequence, vs: Sequence[Sequence], targets: Sequence,
                          n_range: Iterable[int]) -> list[Approximant]:
    """x_n = v0 + sum_i (r_{i,n}/n) D v_i with r_{i,n} = round(n t_i / D), of period d! ell n.

    D clears the denominators of the Jordan coordinates of the v_i, and ell those of v0.
    Periodicity is verified exactly.
    """
    U = as_automorphism(U)
    d = U.dim
    v0 = [to_fraction(c) for c in v0]
    vs = [[to_fraction(c) for c in v] for v in vs]
    ts = [SymbolicReal.of(t) if not isinstance(t, SymbolicReal) else t for t in targets]
    if len(ts) != len(vs):
        raise InputError("one target per direction")
    _, w0, ws, D, ell = _jordan_data(U.matrix, v0, vs)
    c = math.factorial(d) * ell
    out = []
    for n in n_range:
        if n < 1:
            raise InputError("n must be positive")
        pt = list(v0)
        for t, v in zip(ts, vs):
            with mpmath.workprec(160 + int(math.log2(n + 1))):
                r = int(mpmath.nint(t.mp(160) * n / D))
            for i in range(d):
                pt[i] += Fraction(r, n) * D * v[i]
        x = TorusPoint(pt, exact=True)
        p = c * n
        if TorusPoint(U.power(p).apply(x.coords), exact=True) != x:
            raise NotUnipotentError("approximant failed the periodicity check")
        out.append(Approximant(n, x, p))
    return out


def least_period(U, x, bound: int = 10**6) -> int:
    """Least p with U^p x = x for a rational or symbolic point."""
    U = as_automorphism(U)
    m = RatMatrix.identity(U.dim)
    for p in range(1, bound + 1):
        m = m @ U.matrix
        if isinstance(x, SymbolicPoint):
            if x.is_fixed_by(m):
                return p
        elif TorusPoint(m.apply(x.coords), exact=True) == x:
            return p
    raise BudgetError("no period found within the bound")


@dataclass
class StrongDPM:
    c: int
    points: dict  # n -> TorusPoint or SymbolicPoint of period c n
    finite: bool


def strong_dpm_sequence(U, mu: SupportDescriptor, n_range: Iterable[int]) -> StrongDPM:
    """Points x_n of period c n whose orbit measures converge to mu."""
    U = as_automorphism(U)
    ns = list(n_range)
    if mu.finite:
        a = mu.a if not mu.a.is_rational else TorusPoint(mu.a.base, exact=True)
        c = least_period(U, a)
        return StrongDPM(c, {n: a for n in ns}, True)
    a = mu.a
    approx = periodic_approximants(U, a.base, a.directions, a.params, ns)
    c = approx[0].period // approx[0].n if approx else math.factorial(U.dim) * lcm_denominators(
        _jordan_data(U.matrix, a.base, a.directions)[1])
    return StrongDPM(c, {ap.n: ap.point for ap in approx}, False)


def point_orbit(U, x, length: int, stride: int = 1) -> np.ndarray:
    """Floats of U^{i*stride} x for i < length (exact for rational x)."""
    U = as_automorphism(U)
    if isinstance(x, SymbolicPoint) and x.is_rational:
        x = TorusPoint(x.base, exact=True)
    if isinstance(x, TorusPoint) and x.exact:
        step = as_automorphism(U.power(stride))
        orb, D = numerator_orbit(step, x, 0, length)
        return np.array([[v / D for v in row] for row in orb], dtype=float).reshape(-1, U.dim)
    return fixed_point_orbit(U, x, length, stride=stride)


# ------------------------------------------------------------ interval permutations


@dataclass
class IntervalMatch:
    z: object
    q: int
    K: int
    pi: list[int]  # pi[i] = pi(iK)
    good_fraction: Fraction
    good: list[bool]
    ok: bool
    grid: int
    boxes: int = 0
    max_count_gap: int = 0
    balanced: bool = False

    @property
    def good_count(self) -> int:
        return sum(self.good)


def box_grid(mu: SupportDescriptor, U, eps: float) -> tuple[int, np.ndarray]:
    """Grid size g (side 1/g < eps / sqrt(d)) and a jitter keeping walls off the support."""
    d = mu.dim
    g = int(math.floor(math.sqrt(d) / eps)) + 1
    U = as_automorphism(U)
    # axes along which every component of the support is a single hyperplane
    fixed_axes = [k for k in range(d) if mu.H.k == 0 or all(mu.H.basis[k, j] == 0 for j in range(mu.H.k))]
    supp_vals = []
    pt = mu.a
    for _ in range(mu.m):
        supp_vals.append(pt.to_floats())
        pt = pt.apply(U.matrix)
    for attempt in range(1, 100):
        offset = np.array([(math.sqrt(2) * attempt * (k + 1) + math.sqrt(3) * k) % 1.0 for k in range(d)]) / g
        clear = True
        for k in fixed_axes:
            for vals in supp_vals:
                t = (vals[k] - offset[k]) * g
                if abs(t - round(t)) < 1e-6:
                    clear = False
        if clear:
            return g, offset
    raise RuntimeError("could not place grid walls")


def _cells(points: np.ndarray, g: int, offset: np.ndarray) -> list[tuple]:
    idx = np.floor(((points - offset) % 1.0) * g).astype(np.int64) % g
    return [tuple(r) for r in idx]


def match_at_period(U, mu: SupportDescriptor, z, q: int, x_orbit: np.ndarray, K: int, eps: float,
                    grid=None) -> IntervalMatch:
    """Pair same-box visits of U^{iK} z and U^{jK} x (i, j < ceil(q/K)) and
    evaluate the interval-permutation inequality."""
    U = as_automorphism(U)
    P = -(-q // K)
    if len(x_orbit) < P:
        raise InputError("x orbit too short")
    g, offset = grid if grid is not None else box_grid(mu, U, eps)
    zs = point_orbit(U, z, P, stride=K)
    xs = x_orbit[:P]
    zc, xc = _cells(zs, g, offset), _cells(xs, g, offset)
    pi = [-1] * P
    used = [False] * P
    # keep i fixed when both orbits sit in the same box at time iK
    for i in range(P):
        if zc[i] == xc[i]:
            pi[i] = i
            used[i] = True
    free = defaultdict(list)
    for j in reversed(range(P)):
        if not used[j]:
            free[xc[j]].append(j)
    for i in range(P):
        if pi[i] >= 0:
            continue
        lst = free.get(zc[i])
        if lst:
            j = lst.pop()
            pi[i] = j
            used[j] = True
    rest = iter(j for j in range(P) if not used[j])
    for i in range(P):
        if pi[i] < 0:
            pi[i] = next(rest)
    dist = torus_distance_array(zs, xs[pi])
    good = [bool(v < eps) for v in dist]
    cnt = sum(good)
    epsF = Fraction(repr(float(eps)))
    ok = cnt > (1 - epsF) * Fraction(q, K)
    cz, cx = defaultdict(int), defaultdict(int)
    for c in zc:
        cz[c] += 1
    for c in xc:
        cx[c] += 1
    keys = set(cz) | set(cx)
    gap = max(abs(cz[k] - cx[k]) for k in keys)
    balanced = gap < epsF * Fraction(q, 2 * len(keys) * K)
    return IntervalMatch(z, q, K, [j * K for j in pi], Fraction(cnt, P), good, ok, g, len(keys), gap, balanced)


def interval_permutation(U, mu: SupportDescriptor, x, K: int, eps: float, n_start: int = 8,
                         growth: float = 1.5, budget: int = 10**6) -> IntervalMatch:
    """Find z of period q and a permutation of the K-multiples below q with
    |{i : d(U^{iK} z, U^{pi(iK)} x) < eps}| > (1 - eps) q / K.

    q grows until the per-box visit counts of the two K-subsampled orbits
    differ by less than eps q / (2 r K), r the number of visited boxes, and
    the inequality holds.
    """
    U = as_automorphism(U)
    if math.gcd(K, mu.m) != 1:
        raise CoprimalityError("K must be coprime to the number of components")
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    grid = box_grid(mu, U, eps)
    n = n_start
    x_orbit = np.zeros((0, U.dim))
    last = None
    while True:
        dpm = strong_dpm_sequence(U, mu, [n])
        q = dpm.c * n
        if q > budget:
            diag = "" if last is None else f" (last q={last.q}, good={float(last.good_fraction):.3f}, gap={last.max_count_gap})"
            raise BudgetError("period budget exhausted" + diag)
        P = -(-q // K)
        if q > K:
            if len(x_orbit) < P:
                x_orbit = point_orbit(U, x, max(P, 2 * len(x_orbit)), stride=K)
            last = match_at_period(U, mu, dpm.points[n], q, x_orbit, K, eps, grid)
            if last.ok and last.balanced:
                return last
        n = max(n + 1, int(n * growth))
