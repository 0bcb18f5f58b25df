"""Thue-Morse words, the subshifts X_p, and the product counterexample."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import InputError

ALPHABET = "01a"


def thue_morse(n: int) -> str:
    """u[0, n) with u[i] = parity of the binary digit sum of i."""
    if n < 1:
        raise InputError("n must be positive")
    return "".join("1" if bin(i).count("1") % 2 else "0" for i in range(n))


def substitute(word: str) -> str:
    """Image under 0 -> 01, 1 -> 10."""
    return "".join("01" if c == "0" else "10" for c in word)


def has_cube(word: str) -> bool:
    """True if word contains www for some nonempty w."""
    a = np.frombuffer(word.encode(), dtype=np.uint8)
    n = len(a)
    for p in range(1, n // 3 + 1):
        eq = a[:-p] == a[p:]
        # a cube of period p is a run of 2p positions with a[i] == a[i+p]
        best = 0
        if not eq.any():
            continue
        padded = np.concatenate(([0], eq.view(np.int8), [0]))
        edges = np.flatnonzero(np.diff(padded))
        if len(edges):
            best = int(np.max(edges[1::2] - edges[0::2]))
        if best >= 2 * p:
            return True
    return False


@dataclass(frozen=True)
class Word:
    """A finite word, or the bi-infinite periodic word repeating `symbols`."""

    symbols: str
    periodic: bool = False

    def __len__(self):
        return len(self.symbols)

    @property
    def period(self) -> int:
        return len(self.symbols)

    def least_period(self) -> int:
        n = len(self.symbols)
        for d in range(1, n + 1):
            if n % d == 0 and self.symbols[:d] * (n // d) == self.symbols:
                return d
        return n

    def window(self, start: int, length: int) -> str:
        if not self.periodic:
            return self.symbols[start:start + length]
        s = self.symbols
        reps = (start % len(s) + length) // len(s) + 1
        t = s * reps
        i = start % len(s)
        return t[i:i + length]


def xp_periodic_point(p: int, n: int) -> Word:
    """The periodic word u[0, p^n - 1) a of exact period p^n."""
    if p < 2 or n < 1:
        raise InputError("need p >= 2 and n >= 1")
    m = p ** n
    return Word(thue_morse(m - 1) + "a" if m > 1 else "a", periodic=True)


def canonical_words(L: int, alphabet: str = ALPHABET) -> list[str]:
    """Words of length 1..L ordered by length, then lexicographically in alphabet order."""
    return ["".join(t) for ell in range(1, L + 1) for t in itertools.product(alphabet, repeat=ell)]


@dataclass
class CylinderMeasure:
    """Cylinder frequencies counts[w] / total for words of length <= L (windows starting at 0)."""

    L: int
    counts: dict
    total: int
    alphabet: str = ALPHABET

    def freq(self, w: str) -> Fraction:
        return Fraction(self.counts.get(w, 0), self.total)

    def vector(self, ell: int) -> np.ndarray:
        """Frequencies of all length-ell words in canonical order."""
        return np.array([self.counts.get("".join(t), 0) for t in itertools.product(self.alphabet, repeat=ell)],
                        dtype=float) / self.total

    def consistent(self) -> bool:
        """freq(w) = sum_s freq(ws) for |w| < L, and length-1 frequencies sum to 1."""
        if sum(self.counts.get(s, 0) for s in self.alphabet) != self.total:
            return False
        for w in canonical_words(self.L - 1, self.alphabet):
            if self.counts.get(w, 0) != sum(self.counts.get(w + s, 0) for s in self.alphabet):
                return False
        return True


def cylinder_empirical(w, L: int, alphabet: str = ALPHABET) -> CylinderMeasure:
    """Sliding-window frequencies over one period of a periodic word (cyclically),
    or over all complete windows of a finite sample."""
    if L < 1:
        raise InputError("L must be positive")
    if isinstance(w, str):
        w = Word(w, periodic=False)
    s = w.symbols
    if w.periodic:
        ext = s * (L // len(s) + 2)
        starts = len(s)
    else:
        ext = s
        starts = len(s)
    counts: dict[str, int] = {}
    for ell in range(1, L + 1):
        stop = starts if w.periodic else len(s) - ell + 1
        for i in range(stop):
            key = ext[i:i + ell]
            counts[key] = counts.get(key, 0) + 1
    if not w.periodic:
        # finite samples: normalise each length by its own window count
        per_len = {ell: len(s) - ell + 1 for ell in range(1, L + 1)}
        if len(set(per_len.values())) > 1:
            den = math.lcm(*per_len.values())
            counts = {k: v * (den // per_len[len(k)]) for k, v in counts.items()}
            return CylinderMeasure(L, counts, den, alphabet)
    return CylinderMeasure(L, counts, starts, alphabet)


def _weights(count: int, offset: int = 0) -> np.ndarray:
    n = np.arange(1 + offset, count + 1 + offset, dtype=float)
    return np.exp2(-(n + 1))


def shift_distance(mu: CylinderMeasure, nu: CylinderMeasure) -> float:
    """sum_n 2^-(n+1) |mu(C_n) - nu(C_n)| over the canonical cylinder list."""
    if mu.alphabet != nu.alphabet or mu.L != nu.L:
        raise InputError("alphabet or length mismatch")
    val, offset = 0.0, 0
    for ell in range(1, mu.L + 1):
        diff = np.abs(mu.vector(ell) - nu.vector(ell))
        val += float(np.dot(_weights(len(diff), offset), diff))
        offset += len(diff)
    return val


def cylinder_tail(L: int, alphabet: str = ALPHABET, pairs: bool = False) -> float:
    """Weight of all cylinders beyond the truncation (indicators have sup-norm 1)."""
    k = len(alphabet) ** (2 if pairs else 1)
    n = sum(k ** ell for ell in range(1, L + 1))
    return 2.0 ** -(n + 1)


@lru_cache(maxsize=None)
def tm_reference(L: int, length: int = 2 ** 16) -> CylinderMeasure:
    """TM cylinder frequencies from u[0, length) read cyclically."""
    return cylinder_empirical(Word(thue_morse(length), periodic=True), L)


# ------------------------------------------------------------ products


def product_distance(m1: CylinderMeasure, m2: CylinderMeasure, nu: CylinderMeasure) -> float:
    """Distance between m1 x m2 and the diagonal image of nu, over pair cylinders
    [w1] x [w2] with |w1| = |w2| <= L, ordered by length then lexicographically."""
    val, offset = 0.0, 0
    for ell in range(1, m1.L + 1):
        a, b, c = m1.vector(ell), m2.vector(ell), nu.vector(ell)
        prod = np.outer(a, b)
        prod[np.diag_indices_from(prod)] -= c
        diff = np.abs(prod).reshape(-1)
        val += float(np.dot(_weights(len(diff), offset), diff))
        offset += len(diff)
    return val


def _pair_index(w1: str, w2: str, alphabet: str = ALPHABET) -> int:
    """1-based position of the length-1 pair cylinder [w1] x [w2]."""
    return alphabet.index(w1) * len(alphabet) + alphabet.index(w2) + 1


def product_lower_bound(nu00: float, nu11: float, grid: int = 200) -> float:
    """Certified lower bound on the product distance from the cylinders
    U1 = [0], U2 = [1]: min over factor masses (a_i = m_i[0], b_i = m_i[1]) of

        w00 |a1 a2 - nu00| + w01 a1 b2 + w10 b1 a2 + w11 |b1 b2 - nu11|

    with a_i, b_i >= 0 and a_i + b_i <= 1.  The diagonal measure gives zero
    mass to U1 x U2 and U2 x U1.
    """
    w = {k: 2.0 ** -(_pair_index(*k) + 1) for k in [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]}
    w00, w01, w10, w11 = w["0", "0"], w["0", "1"], w["1", "0"], w["1", "1"]

    def inner(a1, b1):
        # convex piecewise linear in (a2, b2): minimum sits at a vertex of the
        # simplex cut by the lines a1 a2 = nu00 and b1 b2 = nu11
        cands_a = [0.0, 1.0] + ([nu00 / a1] if a1 > 0 and nu00 / a1 <= 1 else [])
        cands_b = [0.0, 1.0] + ([nu11 / b1] if b1 > 0 and nu11 / b1 <= 1 else [])
        pts = []
        for x in cands_a:
            for y in cands_b:
                if x + y <= 1:
                    pts.append((x, y))
            pts.append((x, 1 - x))
        for y in cands_b:
            pts.append((1 - y, y))
        best = math.inf
        for a2, b2 in pts:
            if a2 < 0 or b2 < 0 or a2 + b2 > 1 + 1e-15:
                continue
            v = w00 * abs(a1 * a2 - nu00) + w01 * a1 * b2 + w10 * b1 * a2 + w11 * abs(b1 * b2 - nu11)
            best = min(best, v)
        return best

    h = 1.0 / grid
    # |d/da1| <= w00 a2 + w01 b2 <= max(w00, w01); likewise for b1
    lip = max(w00, w01) + max(w10, w11)
    best = math.inf
    for i in range(grid + 1):
        for j in range(grid + 1 - i):
            best = min(best, inner(i * h, j * h))
    # every simplex point is within h of a grid point in each coordinate
    return best - lip * h


@dataclass
class ProductReport:
    factor_curves: dict
    product_min_distance: float
    delta0: float
    budgets: dict
    delta0_by_L: dict = field(default_factory=dict)
    product_min_by_L: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> dict:
        return {"factor_curves": self.factor_curves, "product_min_distance": self.product_min_distance,
                "delta0": self.delta0, "budgets": self.budgets, "delta0_by_L": self.delta0_by_L,
                "product_min_by_L": self.product_min_by_L, "checks": self.checks}


def factor_curve(p: int, maxpow: int, L: int) -> list[float]:
    ref = tm_reference(L)
    return [shift_distance(cylinder_empirical(xp_periodic_point(p, n), L), ref) for n in range(1, maxpow + 1)]


def product_counterexample_report(maxpow2: int = 10, maxpow3: int = 7, L: int = 6,
                                  L_range=(4, 5, 6)) -> ProductReport:
    if maxpow2 < 1 or maxpow3 < 1 or L < 1:
        raise InputError("budgets must be positive")
    curves = {"2": factor_curve(2, maxpow2, L), "3": factor_curve(3, maxpow3, L)}
    checks = []
    for p, c in curves.items():
        checks.append({"name": f"factor_{p}_final_below_0.05", "passed": c[-1] < 0.05, "value": c[-1], "bound": 0.05})
        checks.append({"name": f"factor_{p}_decreases", "passed": c[-1] < c[0], "value": c[-1], "bound": c[0]})
    delta_by_L, pmin_by_L = {}, {}
    for ell in sorted(set(L_range) | {L}):
        ref = tm_reference(ell)
        nu00, nu11 = float(ref.freq("0")), float(ref.freq("1"))
        delta_by_L[ell] = product_lower_bound(nu00, nu11)
        f2 = [cylinder_empirical(xp_periodic_point(2, a), ell) for a in range(1, maxpow2 + 1)]
        f3 = [cylinder_empirical(xp_periodic_point(3, b), ell) for b in range(1, maxpow3 + 1)]
        # periods 2^a and 3^b are coprime, so the product orbit measure factorizes
        pmin_by_L[ell] = min(product_distance(m1, m2, ref) for m1 in f2 for m2 in f3)
    delta0 = delta_by_L[L]
    pmin = pmin_by_L[L]
    checks.append({"name": "delta0_positive", "passed": delta0 > 0, "value": delta0, "bound": 0.0})
    checks.append({"name": "product_min_exceeds_delta0", "passed": pmin >= delta0, "value": pmin, "bound": delta0})
    spread = max(abs(v - delta0) for v in delta_by_L.values()) / delta0 if delta0 > 0 else math.inf
    checks.append({"name": "delta0_stable_10pct", "passed": spread <= 0.1, "value": spread, "bound": 0.1})
    ref = tm_reference(L)
    off = float(diagonal_mass(ref, "0", "1") + diagonal_mass(ref, "1", "0"))
    checks.append({"name": "diagonal_disjoint_cylinders", "passed": off == 0, "value": off, "bound": 0.0})
    return ProductReport(curves, pmin, delta0, {"maxpow2": maxpow2, "maxpow3": maxpow3, "L": L},
                         delta_by_L, pmin_by_L, checks)


def diagonal_mass(nu: CylinderMeasure, w1: str, w2: str) -> Fraction:
    """Mass of [w1] x [w2] under the image of nu by y -> (y, y)."""
    if len(w1) != len(w2):
        raise InputError("cylinders must have equal length")
    return nu.freq(w1) if w1 == w2 else Fraction(0)


def xp_windows_ok(p: int, n: int, L: int) -> bool:
    """Every length-2L window of the X_p point either shows 'a' exactly p^n apart
    or is a factor of u."""
    w = xp_periodic_point(p, n)
    m = p ** n
    u = thue_morse(max(2 ** 16, 8 * m))
    factors = {u[i:i + 2 * L] for i in range(len(u) - 2 * L + 1)}
    for i in range(m):
        win = w.window(i, 2 * L)
        pos = [j for j, c in enumerate(win) if c == "a"]
        if pos:
            if any(b - a != m for a, b in zip(pos, pos[1:])):
                return False
            if len(pos) == 1 and (pos[0] + m < 2 * L or pos[0] - m >= 0):
                return False
        elif win not in factors:
            return False
    return True
