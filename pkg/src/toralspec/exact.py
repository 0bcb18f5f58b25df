"""Exact rational linear algebra: matrices, polynomials, Smith and Jordan forms.

Everything here works over `fractions.Fraction` and Python integers, so
results are exact regardless of size.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, NotUnipotentError, SingularError

Rational = Fraction


def to_fraction(v) -> Fraction:
    """Convert ints, Fractions, decimal strings, "p/q" strings or floats exactly."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational number: {v!r}") from exc
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise InputError(f"non-finite value {v}")
        return Fraction(float(v))
    raise InputError(f"cannot interpret {v!r} as a rational")


def eps_fraction(eps) -> Fraction:
    """Tolerance as the rational it was written as (0.05 -> 1/20, not the binary float)."""
    if isinstance(eps, Fraction):
        return eps
    if isinstance(eps, (float, np.floating)):
        return Fraction(repr(float(eps)))
    return to_fraction(eps)


def lcm_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, Fraction(v).denominator)
    return out


class RatMatrix:
    """Immutable rational matrix stored as a tuple of row tuples."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        if isinstance(rows, RatMatrix):
            rows = rows.rows
        if isinstance(rows, str):
            rows = RatMatrix.from_text(rows).rows
        if isinstance(rows, np.ndarray):
            rows = rows.tolist()
        rows = tuple(tuple(to_fraction(x) for x in r) for r in rows)
        if not rows or not rows[0]:
            raise InputError("empty matrix")
        if any(len(r) != len(rows[0]) for r in rows):
            raise InputError("ragged matrix")
        self.rows = rows

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, n: int, m: int | None = None) -> "RatMatrix":
        return cls([[0] * (n if m is None else m) for _ in range(n)])

    @classmethod
    def from_columns(cls, cols) -> "RatMatrix":
        cols = [list(c) for c in cols]
        return cls([[c[i] for c in cols] for i in range(len(cols[0]))])

    @classmethod
    def from_text(cls, text: str) -> "RatMatrix":
        """Parse "2,1;1,1" style text; entries may be "p/q"."""
        text = text.strip()
        if not text:
            raise InputError("empty matrix text")
        try:
            rows = [[Fraction(e.strip()) for e in r.split(",")] for r in text.split(";")]
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad matrix text {text!r}") from exc
        return cls(rows)

    def to_text(self) -> str:
        return ";".join(",".join(str(x) for x in r) for r in self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0])

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    def __getitem__(self, idx):
        i, j = idx
        return self.rows[i][j]

    def __eq__(self, other):
        if not isinstance(other, RatMatrix):
            try:
                other = RatMatrix(other)
            except Exception:
                return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"RatMatrix({self.to_text()!r})"

    def column(self, j: int) -> tuple[Fraction, ...]:
        return tuple(r[j] for r in self.rows)

    def columns(self) -> list[tuple[Fraction, ...]]:
        return [self.column(j) for j in range(self.shape[1])]

    @property
    def T(self) -> "RatMatrix":
        return RatMatrix(list(zip(*self.rows)))

    def __add__(self, other):
        other = RatMatrix(other)
        return RatMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other):
        other = RatMatrix(other)
        return RatMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __neg__(self):
        return RatMatrix([[-a for a in r] for r in self.rows])

    def scale(self, c) -> "RatMatrix":
        c = to_fraction(c)
        return RatMatrix([[c * a for a in r] for r in self.rows])

    def __matmul__(self, other):
        if isinstance(other, RatMatrix):
            if self.shape[1] != other.shape[0]:
                raise InputError("shape mismatch")
            cols = list(zip(*other.rows))
            return RatMatrix([[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self.rows])
        return self.apply(other)

    def apply(self, v: Sequence) -> tuple[Fraction, ...]:
        """Matrix times vector, exact."""
        v = [to_fraction(x) for x in v]
        if len(v) != self.shape[1]:
            raise InputError("shape mismatch")
        return tuple(sum(a * b for a, b in zip(r, v)) for r in self.rows)

    def __pow__(self, n: int) -> "RatMatrix":
        if not self.is_square:
            raise InputError("power of non-square matrix")
        if n < 0:
            return exact_inverse(self) ** (-n)
        result = RatMatrix.identity(self.shape[0])
        base = self
        while n:
            if n & 1:
                result = result @ base
            base = base @ base
            n >>= 1
        return result

    def is_integral(self) -> bool:
        return all(x.denominator == 1 for r in self.rows for x in r)

    def int_rows(self) -> list[list[int]]:
        if not self.is_integral():
            raise InputError("matrix is not integral")
        return [[int(x) for x in r] for r in self.rows]

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.rows], dtype=float)

    def det(self) -> Fraction:
        return determinant(self)


def as_matrix(m) -> RatMatrix:
    if isinstance(m, RatMatrix):
        return m
    if isinstance(m, str):
        return RatMatrix.from_text(m)
    return RatMatrix(m)


def _row_scaled(m: RatMatrix) -> tuple[list[list[int]], int]:
    """Scale each row to integers; returns rows and the product of scales."""
    rows, total = [], 1
    for r in m.rows:
        s = lcm_denominators(r)
        rows.append([int(x * s) for x in r])
        total *= s
    return rows, total


def bareiss_det_int(a: list[list[int]]) -> int:
    """Fraction-free determinant of an integer matrix."""
    a = [r[:] for r in a]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if piv is None:
                return 0
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        pk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (pk * row_i[j] - aik * row_k[j]) // prev
        prev = pk
    return sign * a[n - 1][n - 1]


def determinant(m) -> Fraction:
    m = as_matrix(m)
    if not m.is_square:
        raise InputError("determinant of non-square matrix")
    rows, scale = _row_scaled(m)
    return Fraction(bareiss_det_int(rows), scale)


def exact_inverse(m) -> RatMatrix:
    """Inverse by fraction-free Gauss-Jordan elimination; raises SingularError."""
    m = as_matrix(m)
    if not m.is_square:
        raise InputError("inverse of non-square matrix")
    n = m.shape[0]
    rows, _ = _row_scaled(m)
    scales = [lcm_denominators(r) for r in m.rows]
    aug = [rows[i] + [int(i == j) for j in range(n)] for i in range(n)]
    prev = 1
    for k in range(n):
        piv = next((i for i in range(k, n) if aug[i][k] != 0), None)
        if piv is None:
            raise SingularError("matrix is singular")
        if piv != k:
            aug[k], aug[piv] = aug[piv], aug[k]
        pk = aug[k][k]
        row_k = aug[k]
        for i in range(n):
            if i == k:
                continue
            aik = aug[i][k]
            aug[i] = [(pk * x - aik * y) // prev for x, y in zip(aug[i], row_k)]
        prev = pk
    # left block is now prev * I; right block is prev * inverse of the row-scaled matrix
    inv_scaled = [[Fraction(aug[i][n + j], prev) for j in range(n)] for i in range(n)]
    # (S M)^{-1} = M^{-1} S^{-1}, so M^{-1} = (S M)^{-1} S
    return RatMatrix([[inv_scaled[i][j] * scales[j] for j in range(n)] for i in range(n)])


def rref(m) -> tuple[RatMatrix, list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = as_matrix(m)
    a = [list(r) for r in m.rows]
    nr, nc = m.shape
    pivots, r = [], 0
    for c in range(nc):
        piv = next((i for i in range(r, nr) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(nr):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == nr:
            break
    return RatMatrix(a), pivots


def rank(m) -> int:
    return len(rref(m)[1])


def nullspace(m) -> list[tuple[Fraction, ...]]:
    """Basis of the right kernel, one vector per free column."""
    m = as_matrix(m)
    red, pivots = rref(m)
    nc = m.shape[1]
    free = [c for c in range(nc) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * nc
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -red[i, f]
        basis.append(tuple(v))
    return basis


def solve(m, b) -> tuple[Fraction, ...]:
    """Solve m x = b for square nonsingular m."""
    return exact_inverse(m).apply(b)


# ---------------------------------------------------------------- polynomials


class Polynomial:
    """Polynomial with rational coefficients, stored constant term first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = [to_fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def from_text(cls, text: str) -> "Polynomial":
        """Parse "1,-3,1" (constant term first)."""
        try:
            return cls([Fraction(t.strip()) for t in text.strip().split(",")])
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad polynomial text {text!r}") from exc

    def to_text(self) -> str:
        return ",".join(str(c) for c in self.coeffs) or "0"

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lc(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Polynomial({self.to_text()!r})"

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __add__(self, other):
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return Polynomial([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        if self.is_zero() or other.is_zero():
            return Polynomial([])
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    def __divmod__(self, other):
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [Fraction(0)] * max(len(rem) - other.degree, 1)
        while len(rem) - 1 >= other.degree and any(rem):
            shift = len(rem) - 1 - other.degree
            f = rem[-1] / other.lc
            q[shift] = f
            for i, c in enumerate(other.coeffs):
                rem[i + shift] -= f * c
            rem.pop()
            while rem and rem[-1] == 0:
                rem.pop()
        return Polynomial(q), Polynomial(rem)

    def __mod__(self, other):
        return divmod(self, other)[1]

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def monic(self) -> "Polynomial":
        if self.is_zero():
            return self
        return Polynomial([c / self.lc for c in self.coeffs])

    def derivative(self) -> "Polynomial":
        return Polynomial([i * c for i, c in enumerate(self.coeffs)][1:])

    def reciprocal(self) -> "Polynomial":
        """x^d f(1/x)."""
        return Polynomial(list(reversed(self.coeffs)))

    def roots(self) -> np.ndarray:
        """Complex roots in floating point."""
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return np.roots([float(c) for c in reversed(self.coeffs)]).astype(complex)


def poly_gcd(f: Polynomial, g: Polynomial) -> Polynomial:
    """Monic gcd over the rationals."""
    a, b = f, g
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def is_square_free(f: Polynomial) -> bool:
    return poly_gcd(f, f.derivative()).degree == 0


def as_poly(f) -> Polynomial:
    if isinstance(f, Polynomial):
        return f
    if isinstance(f, str):
        return Polynomial.from_text(f)
    return Polynomial(f)


def char_poly(m) -> Polynomial:
    """det(xI - M), from fraction-free determinants at d+1 nodes and exact interpolation."""
    m = as_matrix(m)
    if not m.is_square:
        raise InputError("characteristic polynomial of non-square matrix")
    d = m.shape[0]
    nodes = list(range(d + 1))
    values = []
    for t in nodes:
        shifted = RatMatrix([[(t if i == j else 0) - m[i, j] for j in range(d)] for i in range(d)])
        values.append(determinant(shifted))
    # Newton divided differences, then expand to the monomial basis
    coef = list(values)
    for k in range(1, d + 1):
        for i in range(d, k - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (nodes[i] - nodes[i - k])
    poly = Polynomial([coef[d]])
    for k in range(d - 1, -1, -1):
        poly = poly * Polynomial([-nodes[k], 1]) + Polynomial([coef[k]])
    return poly


# ---------------------------------------------------------------- Smith form


def smith_normal_form(m) -> tuple[RatMatrix, RatMatrix, RatMatrix]:
    """Return unimodular U, V and diagonal D with U M V = D and d_i | d_{i+1}."""
    m = as_matrix(m)
    a = m.int_rows()
    nr, nc = len(a), len(a[0])
    u = [[int(i == j) for j in range(nr)] for i in range(nr)]
    v = [[int(i == j) for j in range(nc)] for i in range(nc)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in v:
            r[i], r[j] = r[j], r[i]

    def add_row(src, dst, f):  # row dst += f * row src
        a[dst] = [x + f * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + f * y for x, y in zip(u[dst], u[src])]

    def add_col(src, dst, f):
        for r in a:
            r[dst] += f * r[src]
        for r in v:
            r[dst] += f * r[src]

    for t in range(min(nr, nc)):
        while True:
            nz = [(abs(a[i][j]), i, j) for i in range(t, nr) for j in range(t, nc) if a[i][j] != 0]
            if not nz:
                break
            _, pi, pj = min(nz)
            swap_rows(t, pi)
            swap_cols(t, pj)
            done = True
            for i in range(t + 1, nr):
                q = a[i][t] // a[t][t]
                if q:
                    add_row(t, i, -q)
                if a[i][t]:
                    done = False
            for j in range(t + 1, nc):
                q = a[t][j] // a[t][t]
                if q:
                    add_col(t, j, -q)
                if a[t][j]:
                    done = False
            if not done:
                continue
            # pivot must divide the rest of the block
            bad = next(((i, j) for i in range(t + 1, nr) for j in range(t + 1, nc)
                        if a[i][j] % a[t][t]), None)
            if bad is None:
                break
            add_row(bad[0], t, 1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            u[t] = [-x for x in u[t]]
    return RatMatrix(u), RatMatrix(a), RatMatrix(v)


def invariant_factors(m) -> list[int]:
    _, d, _ = smith_normal_form(m)
    r, c = d.shape
    return [int(d[i, i]) for i in range(min(r, c))]


# ---------------------------------------------------------------- Jordan form


def _in_span(vectors, w) -> bool:
    if not vectors:
        return all(x == 0 for x in w)
    return rank(RatMatrix.from_columns(list(vectors) + [w])) == rank(RatMatrix.from_columns(vectors))


def jordan_unipotent(u) -> tuple[RatMatrix, RatMatrix]:
    """Integer Q and Jordan matrix J (ones above the diagonal) with U = Q J Q^{-1}.

    Raises NotUnipotentError when U - I is not nilpotent.
    """
    u = as_matrix(u)
    if not u.is_square:
        raise InputError("non-square matrix")
    d = u.shape[0]
    n = u - RatMatrix.identity(d)
    powers = [RatMatrix.identity(d)]
    while len(powers) <= d:
        powers.append(powers[-1] @ n)
    if any(x != 0 for r in powers[d].rows for x in r):
        raise NotUnipotentError("U - I is not nilpotent")
    index = next(k for k in range(d + 1) if all(x == 0 for r in powers[k].rows for x in r))
    kernels = [nullspace(p) if k else [] for k, p in enumerate(powers[: index + 1])]

    tops: list[tuple[tuple[Fraction, ...], int]] = []
    for j in range(index, 0, -1):
        span = list(kernels[j - 1])
        for v, length in tops:
            span.append(powers[length - j].apply(v))
        for b in kernels[j]:
            if not _in_span(span, b):
                tops.append((b, j))
                span.append(b)
    cols, sizes = [], []
    for v, length in tops:
        chain = [powers[length - 1 - i].apply(v) for i in range(length)]
        s = lcm_denominators(x for c in chain for x in c)
        cols.extend(tuple(x * s for x in c) for c in chain)
        sizes.append(length)
    q = RatMatrix.from_columns(cols)
    jm = [[0] * d for _ in range(d)]
    pos = 0
    for size in sizes:
        for i in range(size):
            jm[pos + i][pos + i] = 1
            if i + 1 < size:
                jm[pos + i][pos + i + 1] = 1
        pos += size
    return q, RatMatrix(jm)
