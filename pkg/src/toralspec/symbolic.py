"""Symbolic irrationals and affine symbolic torus points.

A `SymbolicReal` is a rational plus a rational combination of a few fixed
irrational atoms (square roots of non-square integers, pi, e).  That covers
quadratic irrationals and rational multiples of known constants.  A
`SymbolicPoint` is v0 + sum_j t_j v_j with rational v0, rational directions
v_j and symbolic parameters t_j.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath

from .errors import InputError
from .exact import RatMatrix, as_matrix, lcm_denominators, to_fraction

ENCLOSURE_BITS = 128


def _atom_value(atom: str, prec: int):
    with mpmath.workprec(prec):
        if atom == "pi":
            return +mpmath.pi
        if atom == "e":
            return +mpmath.e
        if atom.startswith("sqrt"):
            return mpmath.sqrt(int(atom[4:]))
    raise InputError(f"unknown atom {atom}")


def _sqrt_atom(n: int) -> tuple[Fraction, str | None]:
    """sqrt(n) = c * sqrt(m) with m square-free; returns (c, atom) or (sqrt(n), None)."""
    if n < 0:
        raise InputError("square root of a negative number")
    c, m, p = 1, n, 2
    while p * p <= m:
        while m % (p * p) == 0:
            m //= p * p
            c *= p
        p += 1
    if m == 1:
        return Fraction(c), None
    return Fraction(c), f"sqrt{m}"


@dataclass(frozen=True)
class SymbolicReal:
    rational: Fraction
    terms: tuple[tuple[str, Fraction], ...] = ()

    @staticmethod
    def of(v) -> "SymbolicReal":
        if isinstance(v, SymbolicReal):
            return v
        return SymbolicReal(to_fraction(v))

    @staticmethod
    def sqrt(n: int) -> "SymbolicReal":
        c, atom = _sqrt_atom(int(n))
        if atom is None:
            return SymbolicReal(c)
        return SymbolicReal(Fraction(0), ((atom, c),))

    @staticmethod
    def const(name: str) -> "SymbolicReal":
        if name == "phi":
            # fractional part of the golden ratio
            return SymbolicReal(Fraction(-1, 2), (("sqrt5", Fraction(1, 2)),))
        if name in ("pi", "e"):
            return SymbolicReal(Fraction(0), ((name, Fraction(1)),))
        raise InputError(f"unknown constant {name}")

    @staticmethod
    def parse(text: str) -> "SymbolicReal":
        """Parse expressions like "(sqrt(5)-1)/2", "pi/4", "1/3", "phi"."""
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            raise InputError(f"bad number {text!r}") from exc
        return _eval_node(tree.body)

    @property
    def is_rational(self) -> bool:
        return not self.terms

    def _combine(self, other, sign):
        other = SymbolicReal.of(other)
        d = dict(self.terms)
        for a, c in other.terms:
            d[a] = d.get(a, Fraction(0)) + sign * c
        terms = tuple(sorted((a, c) for a, c in d.items() if c != 0))
        return SymbolicReal(self.rational + sign * other.rational, terms)

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return SymbolicReal.of(other)._combine(self, -1)

    def __neg__(self):
        return SymbolicReal(-self.rational, tuple((a, -c) for a, c in self.terms))

    def __mul__(self, other):
        if isinstance(other, SymbolicReal):
            if not other.is_rational:
                if self.is_rational:
                    return other * self.rational
                raise InputError("product of two irrationals is not supported")
            other = other.rational
        q = to_fraction(other)
        return SymbolicReal(self.rational * q, tuple((a, c * q) for a, c in self.terms if c * q != 0))

    __rmul__ = __mul__

    def __truediv__(self, other):
        q = SymbolicReal.of(other)
        if not q.is_rational or q.rational == 0:
            raise InputError("division only by nonzero rationals")
        return self * (1 / q.rational)

    def mp(self, prec: int = 160):
        with mpmath.workprec(prec + 16):
            acc = mpmath.mpf(self.rational.numerator) / self.rational.denominator
            for a, c in self.terms:
                acc += _atom_value(a, prec + 16) * c.numerator / c.denominator
            return acc

    def __float__(self):
        return float(self.mp(80))

    def scaled_floor(self, bits: int) -> int:
        """floor(self * 2**bits), computed with enough working precision."""
        if self.is_rational:
            return math.floor(self.rational * (1 << bits))
        with mpmath.workprec(bits + 64):
            return int(mpmath.floor(self.mp(bits + 64) * mpmath.mpf(2) ** bits))

    def enclosure(self) -> tuple[Fraction, Fraction]:
        """Rational interval of width 2**-ENCLOSURE_BITS containing the value."""
        f = self.scaled_floor(ENCLOSURE_BITS)
        return Fraction(f - 1, 1 << ENCLOSURE_BITS), Fraction(f + 2, 1 << ENCLOSURE_BITS)

    def to_text(self) -> str:
        parts = [str(self.rational)] if self.rational or not self.terms else []
        for a, c in self.terms:
            atom = f"sqrt({a[4:]})" if a.startswith("sqrt") else a
            parts.append(f"{c}*{atom}")
        return "+".join(parts).replace("+-", "-")

    def __str__(self):
        return self.to_text()


def _eval_node(node) -> SymbolicReal:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return SymbolicReal(Fraction(repr(node.value)) if isinstance(node.value, float) else Fraction(node.value))
    if isinstance(node, ast.Name):
        return SymbolicReal.const(node.id)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _eval_node(node.left), _eval_node(node.right)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt"
            and len(node.args) == 1):
        arg = _eval_node(node.args[0])
        if not arg.is_rational or arg.rational.denominator != 1:
            raise InputError("sqrt takes a non-negative integer")
        return SymbolicReal.sqrt(int(arg.rational))
    raise InputError("unsupported expression")


@dataclass(frozen=True)
class SymbolicPoint:
    """Point v0 + sum_j t_j v_j on the torus, reduced mod 1 only on evaluation."""

    base: tuple[Fraction, ...]
    directions: tuple[tuple[Fraction, ...], ...] = ()
    params: tuple[SymbolicReal, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.base)

    @property
    def is_rational(self) -> bool:
        return not self.params

    @staticmethod
    def from_coords(coords: Sequence) -> "SymbolicPoint":
        """Build from coordinate values; each distinct irrational coordinate value
        becomes one parameter whose direction is the sum of the unit vectors
        where it occurs."""
        vals = [c if isinstance(c, SymbolicReal) else SymbolicReal.of(c) for c in coords]
        d = len(vals)
        base = [Fraction(0)] * d
        params: list[SymbolicReal] = []
        dirs: list[list[Fraction]] = []
        for i, v in enumerate(vals):
            if v.is_rational:
                base[i] = v.rational
                continue
            for j, t in enumerate(params):
                if t == v:
                    dirs[j][i] = Fraction(1)
                    break
            else:
                params.append(v)
                e = [Fraction(0)] * d
                e[i] = Fraction(1)
                dirs.append(e)
        return SymbolicPoint(tuple(base), tuple(tuple(x) for x in dirs), tuple(params))

    @staticmethod
    def parse(text: str) -> "SymbolicPoint":
        parts = [p for p in text.replace(" ", "").split(",")]
        if not parts or any(not p for p in parts):
            raise InputError(f"bad point {text!r}")
        return SymbolicPoint.from_coords([SymbolicReal.parse(p) for p in parts])

    def coords(self) -> tuple[SymbolicReal, ...]:
        out = []
        for i in range(self.dim):
            v = SymbolicReal(self.base[i])
            for t, vec in zip(self.params, self.directions):
                if vec[i]:
                    v = v + t * vec[i]
            out.append(v)
        return tuple(out)

    def to_text(self) -> str:
        return ",".join(c.to_text() for c in self.coords())

    def apply(self, m) -> "SymbolicPoint":
        m = as_matrix(m)
        return SymbolicPoint(m.apply(self.base), tuple(m.apply(v) for v in self.directions), self.params)

    def reduce_base(self) -> "SymbolicPoint":
        return SymbolicPoint(tuple(x - math.floor(x) for x in self.base), self.directions, self.params)

    def __add__(self, other: "SymbolicPoint") -> "SymbolicPoint":
        base = tuple(a + b for a, b in zip(self.base, other.base))
        return _merge(base, list(zip(self.params, self.directions)) + list(zip(other.params, other.directions)))

    def __neg__(self):
        return SymbolicPoint(tuple(-x for x in self.base), tuple(tuple(-x for x in v) for v in self.directions),
                             self.params)

    def __sub__(self, other):
        return self + (-other)

    def magnitude_bits(self) -> int:
        """Bits of integer part that evaluation must carry before reducing mod 1."""
        big = 1
        for vec in (self.base,) + tuple(self.directions):
            for c in vec:
                big = max(big, abs(c.numerator) // c.denominator + 1)
        return big.bit_length()

    def mp_coords(self, prec: int) -> list:
        work = prec + 32 + self.magnitude_bits()
        with mpmath.workprec(work):
            vals = [mpmath.mpf(b.numerator) / b.denominator for b in self.base]
            for t, vec in zip(self.params, self.directions):
                tv = t.mp(work)
                for i, c in enumerate(vec):
                    if c:
                        vals[i] += tv * c.numerator / c.denominator
            return [v - mpmath.floor(v) for v in vals]

    def to_floats(self) -> list[float]:
        return [float(v) for v in self.mp_coords(96)]

    def scaled_floor(self, bits: int) -> list[int]:
        """Coordinates mod 1 as integers floor(x * 2**bits)."""
        if self.is_rational:
            mod = 1 << bits
            return [math.floor(b * mod) % mod for b in self.base]
        with mpmath.workprec(bits + 64):
            scale = mpmath.mpf(2) ** bits
            return [int(mpmath.floor(v * scale)) % (1 << bits) for v in self.mp_coords(bits + 64)]

    def is_fixed_by(self, m) -> bool:
        """Exact test of m p = p mod Z^d (parameters treated as independent irrationals)."""
        return symbolic_fixed_by(self, m)

    def denominator(self) -> int:
        return lcm_denominators(self.base)


def _merge(base, pairs) -> SymbolicPoint:
    params: list[SymbolicReal] = []
    dirs: list[list[Fraction]] = []
    for t, v in pairs:
        for j, s in enumerate(params):
            if s == t:
                dirs[j] = [a + b for a, b in zip(dirs[j], v)]
                break
        else:
            params.append(t)
            dirs.append(list(v))
    keep = [(t, tuple(v)) for t, v in zip(params, dirs) if any(v)]
    return SymbolicPoint(tuple(base), tuple(v for _, v in keep), tuple(t for t, _ in keep))


def _independent_directions(p: SymbolicPoint):
    """Directions attached to each irrational atom after expanding parameters.

    Expanding t_j = r_j + sum_a c_{j,a} atom_a moves the rational parts into
    the base; the remaining direction per atom must be fixed exactly.
    """
    per_atom: dict[str, list[Fraction]] = {}
    for t, v in zip(p.params, p.directions):
        for a, c in t.terms:
            acc = per_atom.setdefault(a, [Fraction(0)] * p.dim)
            for i in range(p.dim):
                acc[i] += c * v[i]
    return [tuple(v) for v in per_atom.values() if any(v)]


def expanded_base(p: SymbolicPoint) -> tuple[Fraction, ...]:
    """Base point after moving rational parts of the parameters into it."""
    base = list(p.base)
    for t, v in zip(p.params, p.directions):
        for i in range(p.dim):
            base[i] += t.rational * v[i]
    return tuple(base)


def symbolic_fixed_by(p: SymbolicPoint, m) -> bool:
    """Exact periodicity test using the atom expansion."""
    m = as_matrix(m)
    for vec in _independent_directions(p):
        if tuple(m.apply(vec)) != tuple(vec):
            return False
    b = expanded_base(p)
    return all((x - y).denominator == 1 for x, y in zip(m.apply(b), b))
