"""Specifications, partial tracing, pseudo-orbits, the closing lemma and
tracing constructions for toral automorphisms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .errors import ClosingFailedError, CheckFailedError, InputError, SpacingTooSmallError
from .exact import RatMatrix, eps_fraction, exact_inverse
from .lattice import box_points
from .spectral import PeriodSet
from .torus import (TorusPoint, as_automorphism, as_point, common_form, exact_distance_num, frac,
                    numerator_orbit)


# ------------------------------------------------------------ data types


@dataclass
class Specification:
    """Segments (x_i; a_i, b_i) with a_1 < b_1 <= a_2 < ... and a_{i+1} - b_i >= spacing."""

    segments: list[tuple[TorusPoint, int, int]]
    spacing: int = 0

    def __post_init__(self):
        segs = []
        for x, a, b in self.segments:
            x = as_point(x).to_exact()
            a, b = int(a), int(b)
            if a < 0 or b <= a:
                raise InputError(f"bad segment [{a}, {b})")
            segs.append((x, a, b))
        for (_, _, b0), (_, a1, _) in zip(segs, segs[1:]):
            if a1 - b0 < self.spacing:
                raise InputError("segments violate the spacing")
        self.segments = segs

    @property
    def r(self) -> int:
        return len(self.segments)

    @property
    def b_r(self) -> int:
        return self.segments[-1][2] if self.segments else 0

    def gaps(self) -> list[int]:
        return [a1 - b0 for (_, _, b0), (_, a1, _) in zip(self.segments, self.segments[1:])]

    def to_text(self) -> str:
        lines = [f"M={self.spacing}"]
        lines += [f"{x.to_text()} ; {a} ; {b}" for x, a, b in self.segments]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Specification":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or not lines[0].replace(" ", "").startswith("M="):
            raise InputError("specification must start with M=<int>")
        try:
            spacing = int(lines[0].split("=", 1)[1])
            segs = []
            for ln in lines[1:]:
                x, a, b = (p.strip() for p in ln.split(";"))
                segs.append((TorusPoint(x), int(a), int(b)))
        except ValueError as exc:
            raise InputError(f"bad specification text: {exc}") from exc
        return cls(segs, spacing)


@dataclass
class TraceReport:
    epsilon: Fraction
    index_sets: list[list[int]]
    fractions: list[Fraction]
    ok: bool

    @property
    def full(self) -> bool:
        return all(f == 1 for f in self.fractions)


@dataclass
class PseudoOrbit:
    points: list[TorusPoint]
    delta: Fraction

    def __post_init__(self):
        if not self.points:
            raise InputError("pseudo-orbit must be nonempty")


# ------------------------------------------------------------ predicates


def check_partial_trace(A, spec: Specification, y, eps) -> TraceReport:
    """Lambda_i = {a_i <= n < b_i : d(A^n x_i, A^n y) < eps}; ok iff every
    |Lambda_i| / (b_i - a_i) > 1 - eps.  Exact arithmetic throughout."""
    A = as_automorphism(A)
    epsF = eps_fraction(eps)
    y = as_point(y).to_exact()
    sets, fracs = [], []
    if not spec.segments:
        return TraceReport(epsF, [], [], True)
    yorb, Dy = numerator_orbit(A, y, 0, spec.b_r)
    for x, a, b in spec.segments:
        xorb, Dx = numerator_orbit(A, x, a, b)
        lam = [n for n, u in zip(range(a, b), xorb) if exact_distance_num(u, Dx, yorb[n], Dy) < epsF]
        sets.append(lam)
        fracs.append(Fraction(len(lam), b - a))
    return TraceReport(epsF, sets, fracs, all(f > 1 - epsF for f in fracs))


def check_pseudo_orbit(A, seq, delta) -> bool:
    """True iff N = 1 or more than a (1 - delta) fraction of links are delta-good."""
    A = as_automorphism(A)
    pts = [as_point(p).to_exact() for p in seq]
    if not pts:
        raise InputError("empty sequence")
    if len(pts) == 1:
        return True
    dF = eps_fraction(delta)
    good = sum(link_defect(A, p, q) < dF for p, q in zip(pts, pts[1:]))
    return Fraction(good, len(pts) - 1) > 1 - dF


def link_defect(A, p: TorusPoint, q: TorusPoint) -> Fraction:
    """d(A p, q), exact."""
    u, Du = common_form(p)
    u = [sum(a * s for a, s in zip(r, u)) % Du for r in A.rows]
    v, Dv = common_form(q)
    return exact_distance_num(u, Du, v, Dv)


def pseudo_trace_fraction(A, seq, y, eps) -> Fraction:
    """|{1 <= n <= N : d(x_n, A^n y) < eps}| / N."""
    A = as_automorphism(A)
    epsF = eps_fraction(eps)
    yorb, Dy = numerator_orbit(A, y, 1, len(seq) + 1)
    hits = 0
    for x, u in zip(seq, yorb):
        v, Dx = common_form(x)
        hits += exact_distance_num(v, Dx, u, Dy) < epsF
    return Fraction(hits, len(seq))


# ------------------------------------------------------------ shadowing subdivision


def sup_norm(m: RatMatrix) -> Fraction:
    return max(sum(abs(x) for x in r) for r in m.rows)


def shadowing_parameters(A, eps, M: int) -> tuple[int, int, Fraction]:
    """(L, C, delta): L least with M/L < eps/4, C > L least with (L+M)/C < eps/4,
    delta < 1/C with d(x,y) < delta => d(A^n x, A^n y) < eps/(2C) for n <= C."""
    A = as_automorphism(A)
    epsF = eps_fraction(eps)
    if not 0 < epsF < 1:
        raise InputError("eps must lie in (0, 1)")
    return _shadowing_parameters(tuple(tuple(r) for r in A.matrix.rows), epsF, M)


@lru_cache(maxsize=64)
def _shadowing_parameters(rows: tuple, epsF: Fraction, M: int) -> tuple[int, int, Fraction]:
    q = epsF / 4
    L = max(1, math.floor(M / q) + 1)
    C = max(L + 1, math.floor((L + M) / q) + 1)
    a = RatMatrix(rows)
    lip, p = Fraction(1), RatMatrix.identity(a.shape[0])
    for _ in range(C):
        p = p @ a
        lip = max(lip, sup_norm(p))
    delta = min(epsF / (2 * C * lip), Fraction(1, 2 * C))
    return L, C, delta


@dataclass
class Subdivision:
    spec: Specification
    L: int
    C: int
    delta: Fraction
    breakpoints: list[int]
    trace_by_first: bool
    runs: list[tuple[int, int]] = field(default_factory=list)


def pseudo_orbit_to_spec(A, seq, eps, M: int, delta=None) -> Subdivision:
    """Cut a pseudo-orbit x_1..x_N at its broken links and subdivide each run
    into length-L windows separated by gaps of M."""
    A = as_automorphism(A)
    pts = [as_point(p).to_exact() for p in seq]
    L, C, chain_delta = shadowing_parameters(A, eps, M)
    dF = chain_delta if delta is None else eps_fraction(delta)
    N = len(pts)
    breaks = [n for n in range(2, N + 1) if link_defect(A, pts[n - 2], pts[n - 1]) >= dF]
    if N <= C and not breaks:
        return Subdivision(Specification([], M), L, C, dF, [], True, [(1, N + 1)])
    bounds = [1] + breaks + [N + 1]
    segs, runs = [], []
    Ainv = A.inverse
    for n0, n1 in zip(bounds, bounds[1:]):
        runs.append((n0, n1))
        a = n0
        while a + L + M <= n1:
            x = pts[a - 1]
            back = TorusPoint((Ainv ** a).apply(x.coords), exact=True)
            segs.append((back, a, a + L))
            a += L + M
    spec = Specification(segs, M)
    assert all(g >= M for g in spec.gaps())
    return Subdivision(spec, L, C, dF, breaks, False, runs)


def shadow_pseudo_orbit(A, seq, eps, M: int, delta=None):
    """Tracer y for a pseudo-orbit plus its tracing fraction and the subdivision."""
    A = as_automorphism(A)
    sub = pseudo_orbit_to_spec(A, seq, eps, M, delta)
    first = as_point(seq[0]).to_exact()
    if sub.trace_by_first or not sub.spec.segments:
        # indices start at 1, so the tracer is the preimage of x_1
        y = TorusPoint(A.inverse.apply(first.coords), exact=True)
    else:
        y = trace_spec(A, sub.spec, eps_fraction(eps) / 4)
    return y, pseudo_trace_fraction(A, seq, y, eps), sub


# ------------------------------------------------------------ closing lemma


@dataclass
class ClosingResult:
    point: TorusPoint
    n: int
    window: int
    max_error: Fraction
    w: tuple[int, ...]
    candidates: int


@lru_cache(maxsize=64)
def _closing_inverse(rows: tuple, n: int) -> tuple[RatMatrix, RatMatrix]:
    A = RatMatrix(rows)
    An = A ** n
    return An, exact_inverse(RatMatrix.identity(A.shape[0]) - An)


def _response(lam: np.ndarray, n: int, times: np.ndarray) -> np.ndarray:
    """H[i, j] = lam_j^{t_i} / (1 - lam_j^n), computed without overflow."""
    loglam = np.log(lam.astype(complex))
    H = np.empty((len(times), len(lam)), dtype=complex)
    for j, (l, ll) in enumerate(zip(lam, loglam)):
        if abs(l) > 1:
            inv = np.exp(-n * ll)
            H[:, j] = -np.exp((times - n) * ll) / (1 - inv)
        else:
            H[:, j] = np.exp(times * ll) / (1 - np.exp(n * ll))
    return H


def _log_abs_one_minus_pow(l: complex, n: int) -> float:
    if abs(l) > 1:
        return n * math.log(abs(l)) + math.log(abs(1 - np.exp(-n * np.log(complex(l)))))
    v = abs(1 - np.exp(n * np.log(complex(l))))
    return math.log(v) if v > 0 else -math.inf


def close_orbit(A, x, n: int, eps, period_set: PeriodSet | None = None, budget: int = 20000,
                tries: int = 16, window: int | None = None) -> ClosingResult:
    """Exactly n-periodic y with d(A^i x, A^i y) < eps for 0 <= i <= (1 - eps) n.

    A smaller `window` asks for tracing on 0..window only.

    Integer w whose eigen-coordinates admit tracing are enumerated (a small
    box first, then up to the budget) and ranked by predicted tracing error;
    ties go to the lexicographically smallest w.  The first candidate whose
    exact error is below eps is returned.
    """
    A = as_automorphism(A)
    if n < 1:
        raise InputError("period must be positive")
    epsF = eps_fraction(eps)
    if not 0 < epsF < 1:
        raise InputError("eps must lie in (0, 1)")
    sp = A.splitting
    if period_set is not None and sp.dims[1] and n not in period_set:
        raise InputError("n is not in the supplied period set")
    full = math.floor((1 - epsF) * n)
    if window is None:
        window = full
    elif not 0 <= window <= full:
        raise InputError("window must lie in [0, (1 - eps) n]")
    An, inv = _closing_inverse(A.matrix.rows, n)
    x = as_point(x).to_exact()
    r_exact = [frac(a - b) for a, b in zip(x.coords, An.apply(x.coords))]
    center = np.array([float(c) for c in r_exact])

    lam = sp.eigvals
    log_w = []
    for l in lam:
        grow = window * math.log(abs(l)) if abs(l) > 1 else 0.0
        log_w.append(math.log(sp.to_adapted * float(epsF)) - grow + _log_abs_one_minus_pow(l, n))
    times = np.arange(window + 1, dtype=float)
    H = _response(lam, n, times)
    xo, Dx = numerator_orbit(A, x, 0, window + 1)
    best, total = None, 0
    # a small box first: most closings succeed there and enumeration is cheap
    tiers = sorted({min(budget, 1000), budget})
    for b in tiers:
        pts, coords, lw_used = box_points(sp.Vinv, center, np.array(log_w), b)
        total = len(pts)
        if len(pts) == 0:
            continue
        errs = np.empty(len(pts))
        for s in range(0, len(pts), 256):
            c = coords[s:s + 256]
            traj = np.real(np.einsum("ij,mj,kj->imk", H, c, sp.V))
            errs[s:s + 256] = np.max(np.abs(traj), axis=(0, 2))
        order = sorted(range(len(pts)), key=lambda i: (round(float(errs[i]), 12), tuple(pts[i])))
        for idx in order[:tries]:
            k = [int(v) for v in pts[idx]]
            e = inv.apply([a - b for a, b in zip(r_exact, k)])
            y = TorusPoint([a - b for a, b in zip(x.coords, e)], exact=True)
            if TorusPoint(An.apply(y.coords), exact=True) != y:
                raise CheckFailedError("periodicity check failed")
            yo, Dy = numerator_orbit(A, y, 0, window + 1)
            err = max(exact_distance_num(u, Dx, v, Dy) for u, v in zip(xo, yo))
            if best is None or err < best[1]:
                best = (y, err, k)
            if err < epsF:
                return ClosingResult(y, n, window, err, tuple(k), len(pts))
        if np.allclose(lw_used, log_w):
            break  # the box was not capped, a bigger budget finds nothing new
    if best is None:
        raise ClosingFailedError("no lattice candidate can trace", best=None)
    raise ClosingFailedError(f"best candidate error {float(best[1]):.4g} >= eps", best=best[0], error=best[1])


# ------------------------------------------------------------ specification tracing


def _choose(pts, coords, widths):
    score = np.max(np.abs(coords) / widths[None, :], axis=1)
    i = min(range(len(pts)), key=lambda t: (round(float(score[t]), 12), tuple(pts[t])))
    return [int(v) for v in pts[i]]


def _tracing_delta(sp, eps: Fraction) -> float:
    shrink = 1 - 1 / sp.rho if math.isfinite(sp.rho) else 1.0
    return shrink * float(eps) / sp.to_sup * (1 - 1e-9)


def minimal_spacing(A, eps, grid: int = 6, seed: int = 0) -> int:
    """Empirical M(eps): least m for which every tested offset admits a lattice
    decomposition with unstable width delta * |lambda|^m, then doubled."""
    A = as_automorphism(A)
    sp = A.splitting
    delta = _tracing_delta(sp, eps_fraction(eps))
    d = A.dim
    rng = np.random.default_rng(seed)
    axes = [np.arange(grid) / grid] * d
    offsets = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
    offsets = np.vstack([offsets, rng.random((64, d))])
    for m in range(0, 400):
        lw = np.array([math.log(delta) + (m * math.log(abs(l)) if k == "u" else 0.0)
                       for l, k in zip(sp.eigvals, sp.kinds)])
        if all(len(box_points(sp.Vinv, o, lw, 5000)[0]) for o in offsets):
            return 2 * m
    raise SpacingTooSmallError("no spacing found below 400")


def trace_spec(A, spec: Specification, eps) -> TorusPoint:
    """A point eps-tracing every segment of the specification at every index.

    Inductive construction: y_1 = x_1, and y_{k+1} = y_k + A^{-a_{k+1}} D_u where
    D = A^{a_{k+1}}(x_{k+1} - y_k) - w is split by a lattice search so that its
    stable and central parts are below delta and its unstable part is below
    delta after contracting over the gap.
    """
    A = as_automorphism(A)
    epsF = eps_fraction(eps)
    if not spec.segments:
        raise InputError("empty specification")
    segs = spec.segments
    y = segs[0][0].to_exact()
    if len(segs) == 1:
        return y
    sp = A.splitting
    delta = _tracing_delta(sp, epsF)
    lmax = max(1.0, float(np.max(np.abs(sp.eigvals))))
    bits = 96 + int(math.ceil(spec.b_r * math.log2(lmax))) + 4 * A.dim
    prec = 2 * bits + 64
    Pu = sp.mp_projection("u", prec)
    scale = 1 << bits
    for k in range(1, len(segs)):
        x_next, a_next, _ = segs[k]
        gap = a_next - segs[k - 1][2]
        Ap = A.power(a_next)
        p = Ap.apply(x_next.coords)
        q = Ap.apply(y.coords)
        diff = [frac(u - v) for u, v in zip(p, q)]
        center = np.array([float(c) for c in diff])
        lw = np.array([math.log(delta) + (gap * math.log(abs(l)) if kd == "u" else 0.0)
                       for l, kd in zip(sp.eigvals, sp.kinds)])
        pts, coords, lw_used = box_points(sp.Vinv, center, lw)
        if len(pts) == 0:
            raise SpacingTooSmallError(f"no decomposition across gap {gap} before segment {k + 1}")
        w = _choose(pts, coords, np.exp(lw_used))
        D = [c - wi for c, wi in zip(diff, w)]
        back = A.power(-a_next).int_rows()
        with mpmath.workprec(prec):
            Dm = [mpmath.mpf(c.numerator) / c.denominator for c in D]
            Du = [mpmath.fsum(Pu[i, j] * Dm[j] for j in range(A.dim)) for i in range(A.dim)]
            corr = [mpmath.fsum(back[i][j] * Du[j] for j in range(A.dim)) for i in range(A.dim)]
            corr = [Fraction(int(mpmath.nint(c * scale)), scale) for c in corr]
        y = TorusPoint([a + b for a, b in zip(y.coords, corr)], exact=True)
    report = check_partial_trace(A, spec, y, epsF)
    if not report.ok:
        raise CheckFailedError("constructed point does not trace the specification")
    return y


def trace_spec_periodic(A, spec: Specification, n: int, eps, P: PeriodSet | None = None) -> TorusPoint:
    """Exactly n-periodic point eps-partially tracing the specification."""
    A = as_automorphism(A)
    epsF = eps_fraction(eps)
    if P is not None and n not in P:
        raise InputError("n is not in the period set")
    if n < (1 + epsF) * spec.b_r:
        raise InputError("n must be at least (1 + eps) b_r")
    x = trace_spec(A, spec, epsF / 2)
    # tracing is only needed on [0, b_r), and (1 + eps) b_r <= n keeps that inside the window
    y = close_orbit(A, x, n, epsF / 2, period_set=P, window=spec.b_r - 1).point
    report = check_partial_trace(A, spec, y, epsF)
    if not report.ok:
        raise CheckFailedError("periodic point does not trace the specification")
    return y
