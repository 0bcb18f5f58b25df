"""Points, subtori and automorphisms of the torus R^d / Z^d."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (CosetError, InfinitePeriodicSetError, InputError, NonErgodicFiberError,
                     NotInvariantError)
from .exact import (RatMatrix, as_matrix, determinant, exact_inverse, invariant_factors,
                    smith_normal_form, to_fraction)
from .spectral import archimedean_splitting
from .symbolic import SymbolicPoint, _independent_directions, expanded_base


def frac(x: Fraction) -> Fraction:
    return x - math.floor(x)


class TorusPoint:
    """Point of the torus, either exact (Fractions) or float, always reduced mod 1."""

    __slots__ = ("coords", "exact")

    def __init__(self, coords, exact: bool | None = None):
        if isinstance(coords, TorusPoint):
            coords, exact = coords.coords, coords.exact if exact is None else exact
        if isinstance(coords, str):
            coords = [c.strip() for c in coords.split(",")]
        coords = list(coords)
        if not coords:
            raise InputError("empty point")
        if exact is None:
            exact = all(isinstance(c, (int, Fraction, str, np.integer)) for c in coords)
        if exact:
            self.coords = tuple(frac(to_fraction(c)) for c in coords)
        else:
            vals = np.asarray([float(c) for c in coords])
            if not np.all(np.isfinite(vals)):
                raise InputError("non-finite coordinate")
            self.coords = tuple(float(v) for v in vals % 1.0)
        self.exact = exact

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])

    def to_exact(self) -> "TorusPoint":
        return self if self.exact else TorusPoint([Fraction(c) for c in self.coords], exact=True)

    def __eq__(self, other):
        if not isinstance(other, TorusPoint):
            return NotImplemented
        return self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        return f"TorusPoint({','.join(str(c) for c in self.coords)})"

    def to_text(self) -> str:
        return ",".join(str(c) for c in self.coords)


def as_point(x) -> TorusPoint:
    return x if isinstance(x, TorusPoint) else TorusPoint(x)


def circle_distance(a, b):
    t = abs(a - b) % 1
    return min(t, 1 - t)


def torus_distance(x, y):
    """Max over coordinates of the circle distance; exact for exact points."""
    x, y = as_point(x), as_point(y)
    if x.dim != y.dim:
        raise InputError("dimension mismatch")
    if x.exact and y.exact:
        return max(circle_distance(a, b) for a, b in zip(x.coords, y.coords))
    return float(max(circle_distance(float(a), float(b)) for a, b in zip(x.coords, y.coords)))


def torus_distance_array(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise torus distance of float arrays of shape (..., d)."""
    t = np.abs(x - y) % 1.0
    return np.max(np.minimum(t, 1 - t), axis=-1)


class ToralAutomorphism:
    """Integer matrix with determinant +-1 acting on the torus."""

    def __init__(self, matrix):
        m = as_matrix(matrix)
        if not m.is_square or not m.is_integral():
            raise InputError("automorphism must be a square integer matrix")
        if abs(determinant(m)) != 1:
            raise InputError("automorphism must have determinant +-1")
        self.matrix = m
        self.rows = m.int_rows()
        self.dim = m.shape[0]

    @cached_property
    def inverse(self) -> RatMatrix:
        return exact_inverse(self.matrix)

    @cached_property
    def splitting(self):
        return archimedean_splitting(self.matrix)

    @cached_property
    def array(self) -> np.ndarray:
        return self.matrix.to_numpy()

    def power(self, n: int) -> RatMatrix:
        return self.matrix ** n

    def apply(self, x) -> TorusPoint:
        x = as_point(x)
        if x.exact:
            return TorusPoint(self.matrix.apply(x.coords), exact=True)
        return TorusPoint(self.array @ x.as_array(), exact=False)


def as_automorphism(a) -> ToralAutomorphism:
    return a if isinstance(a, ToralAutomorphism) else ToralAutomorphism(a)


def apply_exact(rows: list[list[int]], v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(frac(sum(a * b for a, b in zip(r, v))) for r in rows)


def exact_orbit(A, x, n: int) -> list[tuple[Fraction, ...]]:
    """[x, Ax, ..., A^{n-1}x] reduced mod 1, exact."""
    A = as_automorphism(A)
    v = as_point(x).to_exact().coords
    out = []
    for _ in range(n):
        out.append(v)
        v = apply_exact(A.rows, v)
    return out


def orbit(A, x, n: int) -> list[TorusPoint]:
    """First n orbit points, in the arithmetic of x (exact or float)."""
    A = as_automorphism(A)
    x = as_point(x)
    if x.exact:
        return [TorusPoint(v, exact=True) for v in exact_orbit(A, x, n)]
    out, v = [], x.as_array()
    for _ in range(n):
        out.append(TorusPoint(v, exact=False))
        v = (A.array @ v) % 1.0
    return out


def periodic_points(A, n: int) -> list[TorusPoint]:
    """All x with A^n x = x, from the Smith form U (A^n - I) V = D: x = V (k_i / d_i)."""
    A = as_automorphism(A)
    if n < 1:
        raise InputError("period must be positive")
    b = A.power(n) - RatMatrix.identity(A.dim)
    if determinant(b) == 0:
        raise InfinitePeriodicSetError("A^n - I is singular")
    _, dmat, v = smith_normal_form(b)
    diag = [int(dmat[i, i]) for i in range(A.dim)]
    pts = set()
    for ks in itertools.product(*[range(d) for d in diag]):
        pts.add(TorusPoint(v.apply([Fraction(k, d) for k, d in zip(ks, diag)]), exact=True))
    return sorted(pts, key=lambda p: p.coords)


def periodic_count(A, n: int) -> int:
    A = as_automorphism(A)
    det = determinant(A.power(n) - RatMatrix.identity(A.dim))
    if det == 0:
        raise InfinitePeriodicSetError("A^n - I is singular")
    return abs(int(det))


# ------------------------------------------------------------ subtori


class Subtorus:
    """Connected closed subgroup spanned by a primitive integer basis (columns)."""

    def __init__(self, basis, dim: int | None = None):
        if isinstance(basis, str):
            basis = RatMatrix.from_text(basis) if basis.strip() else None
        if basis is None or (not isinstance(basis, RatMatrix) and len(basis) == 0):
            if dim is None:
                raise InputError("empty subtorus needs an ambient dimension")
            self.basis = None
            self.dim, self.k = dim, 0
            return
        m = as_matrix(basis)
        if not m.is_integral():
            raise InputError("subtorus basis must be integral")
        self.basis = m
        self.dim, self.k = m.shape
        if self.k > self.dim:
            raise InputError("too many basis vectors")
        if invariant_factors(m)[: self.k] != [1] * self.k:
            raise InputError("subtorus basis is not primitive")

    @classmethod
    def from_columns(cls, cols) -> "Subtorus":
        return cls(RatMatrix.from_columns(cols))

    @cached_property
    def frame(self):
        """(U, V) with U B V = [I; 0]; rows k.. of U give quotient coordinates."""
        if self.k == 0:
            return RatMatrix.identity(self.dim), None
        u, _, v = smith_normal_form(self.basis)
        return u, v

    @cached_property
    def lift_matrix(self) -> RatMatrix:
        return exact_inverse(self.frame[0])

    def split_coords(self, v):
        """(Y-coordinates, quotient coordinates) of a rational vector v."""
        u, vv = self.frame
        w = u.apply(v)
        if self.k == 0:
            return (), w
        return vv.apply(w[: self.k]), w[self.k:]

    def embed(self, c) -> tuple[Fraction, ...]:
        """B c."""
        if self.k == 0:
            return tuple(Fraction(0) for _ in range(self.dim))
        return self.basis.apply(c)

    def lift_quotient(self, q) -> tuple[Fraction, ...]:
        """A representative in R^d of quotient coordinates q."""
        return self.lift_matrix.apply([Fraction(0)] * self.k + list(q))

    @property
    def lipschitz(self) -> float:
        if self.k == 0:
            return 0.0
        return float(max(sum(abs(x) for x in r) for r in self.basis.rows))

    def to_text(self) -> str:
        return "" if self.k == 0 else self.basis.to_text()


def quotient_distance(x, y, Y: Subtorus, tol: float = 1e-6) -> float:
    """min over h in Y of torus_distance(x, y + h), by Lipschitz branch and bound."""
    x, y = as_point(x).as_array(), as_point(y).as_array()
    diff = x - y
    if Y.k == 0:
        return float(torus_distance_array(diff, np.zeros_like(diff)))
    B = Y.basis.to_numpy()
    # coordinate i moves at rate sum_j |B_ij| in t, so max_i (g_i(c) - lip_i r) is a lower bound
    lips = np.abs(B).sum(axis=1)
    k = Y.k

    def g(t):
        s = np.abs(diff - t @ B.T) % 1.0
        return np.minimum(s, 1 - s)

    def bound(vals, r):
        return np.max(vals - lips * r, axis=-1)

    gg = 8
    centers = (np.array(list(itertools.product(range(gg), repeat=k))) + 0.5) / gg
    r0 = 0.5 / gg
    vals = g(centers)
    best = min(float(vals.max(axis=1).min()), float(g(np.zeros((1, k))).max()))
    heap = [(float(b), r0, tuple(c)) for b, c in zip(bound(vals, r0), centers)]
    heapq.heapify(heap)
    while heap:
        lb, r, c = heapq.heappop(heap)
        if best - lb < tol:
            break
        r2 = r / 2
        offs = np.array(list(itertools.product([-r2, r2], repeat=k)))
        kids = np.array(c) + offs
        kv = g(kids)
        best = min(best, float(kv.max(axis=1).min()))
        for b, kc in zip(bound(kv, r2), kids):
            if b < best - tol:
                heapq.heappush(heap, (float(b), r2, tuple(kc)))
    return max(best, 0.0)


def restrict_to_subtorus(A, Y: Subtorus) -> RatMatrix:
    """Integer M with A B = B M; raises NotInvariantError."""
    A = as_matrix(A.matrix if isinstance(A, ToralAutomorphism) else A)
    if Y.k == 0:
        raise InputError("trivial subtorus")
    ab = A @ Y.basis
    bt = Y.basis.T
    m = exact_inverse(bt @ Y.basis) @ (bt @ ab)
    if Y.basis @ m != ab:
        raise NotInvariantError("subtorus is not invariant")
    return m


def quotient_matrix(A, Y: Subtorus) -> RatMatrix:
    """Matrix of the induced map on quotient coordinates."""
    A = as_matrix(A.matrix if isinstance(A, ToralAutomorphism) else A)
    if Y.k:
        restrict_to_subtorus(A, Y)
    u, _ = Y.frame
    conj = u @ A @ Y.lift_matrix
    d, k = Y.dim, Y.k
    return RatMatrix([[conj[i, j] for j in range(k, d)] for i in range(k, d)])


def solve_periodic_in_coset(A, Y: Subtorus, x, n: int):
    """Point x' in x + Y with A^n x' = x'.

    x may be a TorusPoint (exact) or a SymbolicPoint; the result has the same kind.
    """
    A = as_automorphism(A)
    M = restrict_to_subtorus(A.matrix, Y)
    An = A.power(n)
    lhs = M ** n - RatMatrix.identity(Y.k)
    if determinant(lhs) == 0:
        raise NonErgodicFiberError("M^n - I is singular on the fiber")
    inv = exact_inverse(lhs)

    def correction(v, need_integral):
        yc, qc = Y.split_coords(v)
        if need_integral:
            if any(c.denominator != 1 for c in qc):
                raise CosetError("A^n x - x is not in Y + Z^d")
        elif any(c != 0 for c in qc):
            raise CosetError("symbolic part leaves the coset")
        return Y.embed(inv.apply(yc))

    if isinstance(x, SymbolicPoint):
        base = x.base
        v = [a - b for a, b in zip(base, An.apply(base))]
        new_base = tuple(a + b for a, b in zip(base, correction(v, True)))
        new_dirs = []
        for d in x.directions:
            vd = [a - b for a, b in zip(d, An.apply(d))]
            new_dirs.append(tuple(a + b for a, b in zip(d, correction(vd, False))))
        out = SymbolicPoint(new_base, tuple(new_dirs), x.params).reduce_base()
        if not out.is_fixed_by(An):
            raise CosetError("periodicity check failed")
        return out
    x = as_point(x).to_exact()
    v = [a - b for a, b in zip(x.coords, An.apply(x.coords))]
    out = TorusPoint([a + b for a, b in zip(x.coords, correction(v, True))], exact=True)
    if TorusPoint(An.apply(out.coords), exact=True) != out:
        raise CosetError("periodicity check failed")
    return out


# ------------------------------------------------------------ high precision orbits


def growth_bits(A, n: int) -> int:
    """Bits of precision lost over n steps of A (spectral radius plus a polynomial guard)."""
    a = as_matrix(A).to_numpy()
    rad = max(1.0, float(np.max(np.abs(np.linalg.eigvals(a)))))
    d = a.shape[0]
    return int(math.ceil(n * math.log2(rad) * (1 + 1e-9))) + int(math.ceil(d * math.log2(n + 2))) + 8


def fixed_point_orbit(A, start, n: int, stride: int = 1, guard: int = 64) -> np.ndarray:
    """Floats of A^{i*stride} x mod 1 for i < n, accurate to about 2**-guard.

    `start` is a SymbolicPoint, TorusPoint or coordinate list.  The orbit is
    iterated in integer fixed point with precision shed as the remaining
    horizon shrinks.
    """
    A = as_automorphism(A)
    step = A.power(stride).int_rows()
    d = A.dim
    total = growth_bits(A.matrix, n * stride)
    per_step = max(0.0, (total - 8) / max(n, 1))
    prec = guard + 53 + total
    if isinstance(start, SymbolicPoint):
        state = start.scaled_floor(prec)
    else:
        p = as_point(start)
        if p.exact:
            state = [math.floor(c * (1 << prec)) for c in p.coords]
        else:
            state = [int(Fraction(c) * (1 << prec)) for c in p.coords]
    out = np.empty((n, d))
    mask = (1 << prec) - 1
    for i in range(n):
        sh = prec - 53
        out[i] = [(s >> sh) / 9007199254740992.0 for s in state]
        state = [sum(a * s for a, s in zip(r, state)) & mask for r in step]
        if i % 32 == 31:
            target = guard + 53 + int(math.ceil(per_step * (n - i))) + 8
            if prec > target + 64:
                drop = prec - target
                state = [s >> drop for s in state]
                prec -= drop
                mask = (1 << prec) - 1
    return out


# ------------------------------------------------------------ exact orbits over a common denominator


def common_form(x) -> tuple[list[int], int]:
    """(numerators, D) with x = numerators / D mod 1."""
    x = as_point(x).to_exact()
    D = 1
    for c in x.coords:
        D = math.lcm(D, c.denominator)
    return [int(c * D) % D for c in x.coords], D


def numerator_orbit(A, x, start: int, stop: int) -> tuple[list[tuple[int, ...]], int]:
    """Numerators of A^n x for start <= n < stop over the common denominator of x."""
    A = as_automorphism(A)
    num, D = common_form(x)
    if start:
        p = A.power(start).int_rows()
        num = [sum(a * s for a, s in zip(r, num)) % D for r in p]
    rows = A.rows
    out = []
    for _ in range(start, stop):
        out.append(tuple(num))
        num = [sum(a * s for a, s in zip(r, num)) % D for r in rows]
    return out, D


def exact_distance_num(u, Du, v, Dv) -> Fraction:
    """Torus distance between u/Du and v/Dv, exact."""
    P = Du * Dv
    best = 0
    for a, b in zip(u, v):
        t = (a * Dv - b * Du) % P
        best = max(best, min(t, P - t))
    return Fraction(best, P)
