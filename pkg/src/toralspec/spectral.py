"""Spectral splittings, Newton polygons, the product formula and bounded-below sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np
import sympy

from .errors import InputError, NotSemisimpleError, RootOfUnityError
from .exact import (Polynomial, RatMatrix, as_matrix, as_poly, char_poly, exact_inverse,
                    is_square_free, lcm_denominators, poly_gcd)

UNIMODULAR_TOL = 1e-9


@dataclass
class Splitting:
    """Eigen-splitting R^d = E^s + E^c + E^u of a real semisimple matrix.

    The adapted norm of v is the max modulus of its coordinates in the
    eigenbasis `V` (unit columns); on E^s it is contracted by 1/rho per step
    and on E^u expanded by at least rho.
    """

    A: np.ndarray
    eigvals: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    kinds: tuple[str, ...]
    rho: float
    basis_s: np.ndarray = field(repr=False, default=None)
    basis_c: np.ndarray = field(repr=False, default=None)
    basis_u: np.ndarray = field(repr=False, default=None)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(sum(k == c for k in self.kinds) for c in "scu")

    def projection(self, kind: str) -> np.ndarray:
        mask = np.array([k == kind for k in self.kinds], dtype=float)
        return np.real(self.V @ np.diag(mask) @ self.Vinv)

    @cached_property
    def P_s(self):
        return self.projection("s")

    @cached_property
    def P_c(self):
        return self.projection("c")

    @cached_property
    def P_u(self):
        return self.projection("u")

    def coords(self, v) -> np.ndarray:
        """Eigen-coordinates (complex) of real vectors; v may be (d,) or (m, d)."""
        v = np.asarray(v, dtype=float)
        return (self.Vinv @ v.T).T

    def norm(self, v) -> np.ndarray | float:
        """Adapted norm: max modulus of eigen-coordinates."""
        return np.max(np.abs(self.coords(v)), axis=-1)

    @cached_property
    def to_adapted(self) -> float:
        """kappa with ||v||_adapted <= kappa ||v||_inf."""
        return float(np.max(np.sum(np.abs(self.Vinv), axis=1)))

    @cached_property
    def to_sup(self) -> float:
        """kappa with ||v||_inf <= kappa ||v||_adapted."""
        return float(np.max(np.sum(np.abs(self.V), axis=1)))

    @property
    def cond(self) -> float:
        return self.to_adapted * self.to_sup

    def mp_projection(self, kind: str, prec: int):
        """Projection onto E^kind as an mpmath matrix at `prec` bits."""
        d = self.A.shape[0]
        with mpmath.workprec(prec):
            m = mpmath.matrix(self._exact_rows())
            ev, er = mpmath.eig(m)
            mask = []
            for lam in ev:
                a = abs(lam)
                if abs(a - 1) < UNIMODULAR_TOL:
                    mask.append(kind == "c")
                elif a < 1:
                    mask.append(kind == "s")
                else:
                    mask.append(kind == "u")
            inv = mpmath.inverse(er)
            diag = mpmath.diag([1 if k else 0 for k in mask])
            p = er * diag * inv
            return mpmath.matrix([[mpmath.re(p[i, j]) for j in range(d)] for i in range(d)])

    def _exact_rows(self):
        rows = getattr(self, "_rows", None)
        if rows is None:
            return [[mpmath.mpf(float(x)) for x in r] for r in self.A]
        return [[mpmath.mpf(x.numerator) / x.denominator for x in r] for r in rows]


def archimedean_splitting(A, tol: float = 1e-9) -> Splitting:
    """Stable/central/unstable splitting of a rational matrix with square-free
    characteristic polynomial; raises NotSemisimpleError otherwise."""
    m = as_matrix(A)
    if not m.is_square:
        raise InputError("matrix must be square")
    f = char_poly(m)
    if not is_square_free(f):
        raise NotSemisimpleError("characteristic polynomial is not square-free")
    a = m.to_numpy()
    w, v = np.linalg.eig(a)
    v = v / np.linalg.norm(v, axis=0)
    order = np.lexsort((np.angle(w), np.abs(w)))
    w, v = w[order], v[:, order]
    kinds = []
    for lam in w:
        mod = abs(lam)
        if abs(mod - 1) < UNIMODULAR_TOL:
            kinds.append("c")
        elif mod < 1:
            kinds.append("s")
        else:
            kinds.append("u")
    if any(k == "c" and abs(lam.imag) > UNIMODULAR_TOL for k, lam in zip(kinds, w)):
        # a non-real unimodular root forces a common factor with the reciprocal
        if poly_gcd(f, f.reciprocal()).degree == 0:
            raise NotSemisimpleError("unimodular classification inconsistent with reciprocal gcd")
    hyper = [abs(lam) for lam, k in zip(w, kinds) if k != "c"]
    rho = min(max(x, 1 / x) for x in hyper) * (1 - tol) if hyper else math.inf
    vinv = np.linalg.inv(v)
    sp = Splitting(a, w, v, vinv, tuple(kinds), rho)
    sp._rows = m.rows
    for kind in "scu":
        cols = []
        for lam, k, vec in zip(w, kinds, v.T):
            if k != kind:
                continue
            if abs(lam.imag) <= UNIMODULAR_TOL * max(1, abs(lam)):
                cols.append(np.real(vec))
            elif lam.imag > 0:
                cols.extend([np.real(vec), np.imag(vec)])
        setattr(sp, f"basis_{kind}", np.array(cols).T if cols else np.zeros((a.shape[0], 0)))
    return sp


def adapted_distance(split: Splitting, x, y) -> float:
    """Torus distance in the adapted norm: min over integer translates of x - y."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    diff = diff - np.round(diff)
    d = diff.size
    radius = int(math.ceil(split.cond)) + 1
    grid = np.array(np.meshgrid(*[np.arange(-radius, radius + 1)] * d, indexing="ij")).reshape(d, -1).T
    return float(np.min(split.norm(diff + grid)))


# ------------------------------------------------------------ p-adic side


def vp(x, p: int) -> int | float:
    """p-adic valuation of a rational; +inf for zero."""
    x = Fraction(x)
    if x == 0:
        return math.inf
    v, n, d = 0, x.numerator, x.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


@dataclass
class NewtonPolygon:
    p: int
    vertices: list[tuple[int, int]]
    slopes: list[tuple[Fraction, int]]  # (slope, horizontal length), slopes increasing

    @property
    def root_valuations(self) -> list[tuple[Fraction, int]]:
        """v_p of the roots with multiplicities (negated slopes)."""
        return [(-s, n) for s, n in self.slopes]

    def unstable_multiplicity(self) -> int:
        return sum(n for s, n in self.slopes if s > 0)


def newton_polygon(f, p: int) -> NewtonPolygon:
    """Lower convex hull of (i, v_p(c_i)) over nonzero coefficients."""
    f = as_poly(f)
    if f.degree < 1:
        raise InputError("polynomial must have positive degree")
    if p < 2 or not sympy.isprime(p):
        raise InputError(f"{p} is not a prime")
    pts = [(i, vp(c, p)) for i, c in enumerate(f.coeffs) if c != 0]
    hull: list[tuple[int, int]] = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point when it lies on or above the chord
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    slopes = [(Fraction(y2 - y1, x2 - x1), x2 - x1) for (x1, y1), (x2, y2) in zip(hull, hull[1:])]
    return NewtonPolygon(p, hull, slopes)


def prime_factors(n: int) -> list[int]:
    return sorted(sympy.primefactors(abs(n))) if abs(n) > 1 else []


def _phi(n: int) -> int:
    return int(sympy.totient(n))


def has_root_of_unity(f: Polynomial) -> int | None:
    """Smallest n with gcd(f, x^n - 1) nontrivial, or None."""
    d = f.degree
    for n in range(1, 2 * d * d + 3):
        if _phi(n) > d:
            continue
        xn1 = Polynomial([-1] + [0] * (n - 1) + [1])
        if poly_gcd(f, xn1).degree > 0:
            return n
    return None


def is_irreducible(f: Polynomial) -> bool:
    x = sympy.Symbol("x")
    expr = sum(sympy.Rational(c.numerator, c.denominator) * x**i for i, c in enumerate(f.coeffs))
    return bool(sympy.Poly(expr, x, domain="QQ").is_irreducible)


@dataclass
class ProductFormulaReport:
    poly: str
    ell: int
    primes: list[int]
    per_prime: dict
    finite_product: Fraction
    archimedean_expanding: bool
    ok: bool


def unstable_product_check(f, irreducible: bool | None = None) -> ProductFormulaReport:
    """Product over p | ell of |lambda|_p for roots with |lambda|_p > 1; must equal ell."""
    f = as_poly(f)
    if f.degree < 1:
        raise InputError("polynomial must have positive degree")
    g = f.monic()
    if g.coeffs[0] == 0:
        raise InputError("zero is a root")
    if irreducible is None:
        irreducible = is_irreducible(g)
    if not irreducible:
        raise InputError("polynomial is not irreducible over Q")
    if has_root_of_unity(g) is not None:
        raise RootOfUnityError("polynomial has a root of unity")
    ell = lcm_denominators(g.coeffs)
    primes = prime_factors(ell)
    per_prime, prod = {}, Fraction(1)
    for p in primes:
        poly = newton_polygon(g, p)
        e = sum(-v * n for v, n in poly.root_valuations if v < 0)
        per_prime[p] = int(e)
        prod *= Fraction(p) ** int(e)
    expanding = bool(np.any(np.abs(g.roots()) > 1 + UNIMODULAR_TOL))
    ok = prod == ell and (ell > 1 or expanding)
    return ProductFormulaReport(g.to_text(), ell, primes, per_prime, prod, expanding, ok)


def companion_system(f) -> tuple[RatMatrix, frozenset]:
    """Companion matrix of f / lc(f) and the place set S (primes and math.inf)."""
    f = as_poly(f)
    if f.degree < 1:
        raise InputError("polynomial must have positive degree")
    g = f.monic()
    if g.coeffs[0] == 0:
        raise InputError("companion matrix would be singular")
    d = g.degree
    rows = [[0] * d for _ in range(d)]
    for i in range(1, d):
        rows[i][i - 1] = 1
    for i in range(d):
        rows[i][d - 1] = -g.coeffs[i]
    a = RatMatrix(rows)
    ainv = exact_inverse(a)
    den = lcm_denominators(list(x for r in a.rows for x in r) + list(x for r in ainv.rows for x in r))
    return a, frozenset(prime_factors(den)) | {math.inf}


# ------------------------------------------------------------ bounded-below sets


@dataclass
class PeriodSet:
    modulus: int
    elements: tuple[int, ...]
    gap_bound: int
    delta: float

    def __contains__(self, n) -> bool:
        return n in self._set

    @cached_property
    def _set(self):
        return frozenset(self.elements)

    def max_gap(self) -> int:
        e = self.elements
        return max((b - a for a, b in zip(e, e[1:])), default=0)

    def first_at_least(self, n: int) -> int | None:
        return next((e for e in self.elements if e >= n), None)


def unimodular_angles(f: Polynomial) -> list[float]:
    """Angles in (0, pi) of unimodular roots, one per conjugate pair."""
    with mpmath.workdps(40):
        roots = mpmath.polyroots([mpmath.mpf(c.numerator) / c.denominator for c in reversed(f.coeffs)],
                                 maxsteps=200, extraprec=200)
        out = []
        for r in roots:
            if abs(abs(r) - 1) < UNIMODULAR_TOL and mpmath.im(r) > UNIMODULAR_TOL:
                out.append(float(mpmath.arg(r)))
    return sorted(out)


def bounded_below_set(f, c: int, horizon: int) -> PeriodSet:
    """Multiples of c along which |lambda^n - 1| stays >= delta for every
    unimodular root, with gaps at most c(r+1)."""
    f = as_poly(f)
    if c < 1 or horizon < 1:
        raise InputError("c and horizon must be positive")
    if has_root_of_unity(f.monic()) is not None:
        raise RootOfUnityError("polynomial has a root of unity")
    angles = unimodular_angles(f.monic())
    r = len(angles)
    if r == 0:
        elems = tuple(range(c, horizon + 1, c))
        return PeriodSet(c, elems, c, math.inf)
    lam = np.exp(1j * np.array(angles))

    def dist(n):
        return np.abs(lam ** n - 1)

    delta = min(float(np.min(dist(c * m))) for m in range(1, r + 2)) / 2
    ns = [1]
    while c * ns[-1] <= horizon:
        for m in range(1, r + 2):
            if np.all(dist(c * (ns[-1] + m)) >= delta):
                ns.append(ns[-1] + m)
                break
        else:  # cannot happen by the pigeonhole argument; kept as a guard
            raise RuntimeError("no admissible step")
    elems = tuple(c * n for n in ns if c * n <= horizon)
    ps = PeriodSet(c, elems, c * (r + 1), delta)
    worst = min(float(np.min(dist(n))) for n in elems) if elems else math.inf
    if worst < delta:
        raise RuntimeError("bounded-below verification failed")
    return ps
