"""Empirical measures, a weak-* metric on the torus, and related checks."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import InputError
from .symbolic import SymbolicPoint
from .torus import (Subtorus, TorusPoint, as_automorphism, as_point, fixed_point_orbit, numerator_orbit,
                    torus_distance_array)


# ------------------------------------------------------------ function families


def torus_frequencies(d: int, count: int) -> np.ndarray:
    """The first `count` nonzero k in Z^d with first nonzero entry positive,
    ordered by max-norm, then lexicographically."""
    out: list[tuple[int, ...]] = []
    r = 1
    while len(out) < count:
        shell = []
        for k in itertools.product(range(-r, r + 1), repeat=d):
            if max(abs(c) for c in k) != r:
                continue
            first = next(c for c in k if c)
            if first > 0:
                shell.append(k)
        out.extend(sorted(shell))
        r += 1
    return np.array(out[:count], dtype=np.int64)


@dataclass(frozen=True)
class MetricFamily:
    """f_1, f_2, ... : cos(2 pi k.x), sin(2 pi k.x) over torus_frequencies, each
    with sup-norm 1 and weight 2^-(n+1)."""

    space: str
    n_terms: int = 64

    @property
    def dim(self) -> int:
        return int(self.space.split("-")[1])

    @property
    def frequencies(self) -> np.ndarray:
        return torus_frequencies(self.dim, (self.n_terms + 1) // 2)

    @property
    def weights(self) -> np.ndarray:
        return np.array([2.0 ** -(n + 1) for n in range(1, self.n_terms + 1)])

    @property
    def tail(self) -> float:
        """Bound on the omitted terms: sum_{n > N} 2^-(n+1) * 2."""
        return 2.0 ** -self.n_terms

    def lipschitz(self) -> float:
        """Lipschitz constant of x -> (truncated distance of point masses) in the sup metric."""
        ks = self.frequencies
        l1 = np.repeat(np.abs(ks).sum(axis=1), 2)[: self.n_terms]
        return float(np.sum(self.weights * 2 * math.pi * l1))


def torus_family(d: int, n_terms: int = 64) -> MetricFamily:
    return MetricFamily(f"torus-{d}", n_terms)


def _character_table(points: np.ndarray, ks: np.ndarray, n_terms: int) -> np.ndarray:
    ph = 2 * math.pi * (points @ ks.T)
    tab = np.empty((len(points), 2 * ks.shape[0]))
    tab[:, 0::2] = np.cos(ph)
    tab[:, 1::2] = np.sin(ph)
    return tab[:, :n_terms]


# ------------------------------------------------------------ measures


class EmpiricalMeasure:
    """Finitely supported probability measure with weights counts / total."""

    def __init__(self, space: str, points, counts, exact_points=None):
        self.space = space
        self.points = np.asarray(points, dtype=float).reshape(len(counts), -1)
        self.counts = np.asarray(counts, dtype=np.int64)
        if np.any(self.counts <= 0):
            raise InputError("weights must be positive")
        self.total = int(self.counts.sum())
        self.exact_points = exact_points

    def __len__(self):
        return len(self.counts)

    @property
    def weights(self) -> list[Fraction]:
        return [Fraction(int(c), self.total) for c in self.counts]

    @classmethod
    def from_exact(cls, space: str, pts: Sequence[tuple[Fraction, ...]]) -> "EmpiricalMeasure":
        merged: dict[tuple, int] = {}
        for p in pts:
            merged[p] = merged.get(p, 0) + 1
        keys = list(merged)
        arr = np.array([[float(c) for c in p] for p in keys], dtype=float)
        return cls(space, arr, [merged[k] for k in keys], keys)

    @classmethod
    def from_floats(cls, space: str, pts: np.ndarray) -> "EmpiricalMeasure":
        pts = np.asarray(pts, dtype=float)
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        counts = np.bincount(inv.reshape(-1), minlength=len(uniq))
        return cls(space, uniq, counts)

    def integrals(self, family: MetricFamily) -> np.ndarray:
        if family.space != self.space:
            raise InputError(f"space mismatch: {family.space} vs {self.space}")
        tab = _character_table(self.points, family.frequencies, family.n_terms)
        return (self.counts @ tab) / self.total

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.counts, f(self.points)) / self.total)

    def to_json(self) -> dict:
        atoms = []
        for i, c in enumerate(self.counts):
            if self.exact_points is not None:
                pt = [str(x) for x in self.exact_points[i]]
            else:
                pt = [float(x) for x in self.points[i]]
            atoms.append({"point": pt, "weight": str(Fraction(int(c), self.total))})
        return {"space": self.space, "atoms": atoms}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data) -> "EmpiricalMeasure":
        if isinstance(data, str):
            data = json.loads(data)
        ws = [Fraction(a["weight"]) for a in data["atoms"]]
        den = math.lcm(*[w.denominator for w in ws]) if ws else 1
        counts = [int(w * den) for w in ws]
        if sum(counts) != den:
            raise InputError("weights do not sum to 1")
        pts = [a["point"] for a in data["atoms"]]
        if pts and isinstance(pts[0][0], str):
            exact = [tuple(Fraction(x) for x in p) for p in pts]
            return cls(data["space"], [[float(x) for x in p] for p in exact], counts, exact)
        return cls(data["space"], pts, counts)


class HaarCoset:
    """Haar measure on the union of the cosets t_j + H, each of mass 1 / m."""

    def __init__(self, translates: Sequence, H: Subtorus):
        self.H = H
        self.space = f"torus-{H.dim}"
        self.translates = np.array([p.to_floats() if isinstance(p, SymbolicPoint) else as_point(p).as_array()
                                    for p in translates], dtype=float)

    @classmethod
    def from_descriptor(cls, U, mu) -> "HaarCoset":
        U = as_automorphism(U)
        pts, p = [], mu.a
        for _ in range(mu.m):
            pts.append(p)
            p = p.apply(U.matrix)
        return cls(pts, mu.H)

    def integrals(self, family: MetricFamily) -> np.ndarray:
        if family.space != self.space:
            raise InputError("space mismatch")
        ks = family.frequencies
        if self.H.k:
            B = self.H.basis.to_numpy()
            perp = np.all(ks @ B == 0, axis=1)
        else:
            perp = np.ones(len(ks), dtype=bool)
        tab = _character_table(self.translates, ks, 2 * len(ks)).mean(axis=0)
        mask = np.repeat(perp, 2)
        return (tab * mask)[: family.n_terms]


def weak_star_distance(mu, nu, family: MetricFamily | None = None) -> tuple[float, float]:
    """(sum_{n<=N} 2^-(n+1) |int f_n dmu - int f_n dnu|, bound on the omitted tail)."""
    if family is None:
        if mu.space != nu.space:
            raise InputError("space mismatch")
        family = torus_family(int(mu.space.split("-")[1]))
    a, b = mu.integrals(family), nu.integrals(family)
    diff = np.abs(a - b)
    val = 0.0
    for w, t in zip(family.weights, diff):  # fixed summation order
        val += w * t
    return float(val), family.tail


def empirical_measure(T, x, n: int, space: str | None = None) -> EmpiricalMeasure:
    """m_{T,x,n} = (1/n) sum_{i<n} delta_{T^i x}; exact when x is rational."""
    if n < 1:
        raise InputError("n must be positive")
    T = as_automorphism(T)
    space = space or f"torus-{T.dim}"
    if isinstance(x, SymbolicPoint) and x.is_rational:
        x = TorusPoint(x.base, exact=True)
    if isinstance(x, SymbolicPoint):
        return EmpiricalMeasure.from_floats(space, fixed_point_orbit(T, x, n))
    p = as_point(x)
    if p.exact:
        orb, D = numerator_orbit(T, p, 0, n)
        return EmpiricalMeasure.from_exact(space, [tuple(Fraction(v, D) for v in row) for row in orb])
    return EmpiricalMeasure.from_floats(space, fixed_point_orbit(T, p, n))


def measure_from_points(pts, space: str | None = None) -> EmpiricalMeasure:
    """Uniform measure on a list of points (repetitions add weight)."""
    if len(pts) and isinstance(pts[0], TorusPoint) and all(p.exact for p in pts):
        return EmpiricalMeasure.from_exact(space or f"torus-{pts[0].dim}", [p.coords for p in pts])
    arr = np.array([as_point(p).as_array() if isinstance(p, TorusPoint) else np.asarray(p, float) % 1.0
                    for p in pts])
    return EmpiricalMeasure.from_floats(space or f"torus-{arr.shape[1]}", arr)


def calibrate_delta(family: MetricFamily, eps: float) -> float:
    """delta with d(delta_x, delta_y) < eps whenever d(x, y) < delta.

    Uses the certified Lipschitz bound of the truncated series.
    """
    return eps / family.lipschitz()


@dataclass
class PairingCheck:
    lhs: float
    rhs: float
    ok: bool
    far: int = 0


def pairing_distance_bound_check(xs, ys, eps: float, delta: float | None = None,
                                 family: MetricFamily | None = None) -> PairingCheck:
    """d(m_xs, m_ys) <= eps + |{n : d(x_n, y_n) >= delta}| / q."""
    xs = np.asarray(xs, dtype=float) % 1.0
    ys = np.asarray(ys, dtype=float) % 1.0
    if xs.shape != ys.shape:
        raise InputError("equal lengths required")
    q, d = xs.shape
    family = family or torus_family(d)
    if delta is None:
        delta = calibrate_delta(family, eps)
    far = int(np.sum(torus_distance_array(xs, ys) >= delta))
    lhs, _ = weak_star_distance(EmpiricalMeasure.from_floats(family.space, xs),
                                EmpiricalMeasure.from_floats(family.space, ys), family)
    rhs = eps + far / q
    return PairingCheck(lhs, rhs, lhs <= rhs, far)


def average_pushforwards(T, mu: EmpiricalMeasure, k: int) -> EmpiricalMeasure:
    """(1/k) sum_{j<k} T^j_* mu."""
    if k < 1:
        raise InputError("k must be positive")
    T = as_automorphism(T)
    if mu.exact_points is not None:
        pts: list[tuple] = []
        for p, c in zip(mu.exact_points, mu.counts):
            cur = TorusPoint(p, exact=True)
            for _ in range(k):
                pts.extend([cur.coords] * int(c))
                cur = T.apply(cur)
        return EmpiricalMeasure.from_exact(mu.space, pts)
    A = T.array
    pts_f, counts = [], []
    cur = mu.points.copy()
    for _ in range(k):
        pts_f.append(cur)
        counts.append(mu.counts)
        cur = (cur @ A.T) % 1.0
    allp = np.concatenate(pts_f)
    allc = np.concatenate(counts)
    uniq, inv = np.unique(allp, axis=0, return_inverse=True)
    return EmpiricalMeasure(mu.space, uniq, np.bincount(inv.reshape(-1), weights=allc).astype(np.int64))


def birkhoff_periodic_sum(f: Callable[[np.ndarray], np.ndarray], T, x, n: int) -> float:
    """sum_{i<n} f(T^i x) over one exact period of x."""
    T = as_automorphism(T)
    p = as_point(x).to_exact()
    if TorusPoint(T.power(n).apply(p.coords), exact=True) != p:
        raise InputError("orbit is not periodic with the given period")
    orb, D = numerator_orbit(T, p, 0, n)
    pts = np.array([[v / D for v in row] for row in orb], dtype=float)
    return float(np.sum(f(pts)))
