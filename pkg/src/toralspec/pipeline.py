"""Periodic measures approximating an invariant measure of a toral extension.

The torus X = T^d carries an invariant subtorus Y on which A is hyperbolic
(partial specification) and the induced map on X / Y is unipotent.  Starting
from a generic point x, the pipeline builds z - w of period q with
m_{T, z - w, q} close to m_{T, x, q}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetError, InputError, NotInvariantError, NotUnipotentError, ToralSpecError
from .exact import RatMatrix, to_fraction
from .measures import (EmpiricalMeasure, HaarCoset, calibrate_delta, empirical_measure, pairing_distance_bound_check,
                       torus_family, weak_star_distance)
from .symbolic import SymbolicPoint
from .torus import (Subtorus, TorusPoint, as_automorphism, fixed_point_orbit, frac, quotient_matrix,
                    restrict_to_subtorus, solve_periodic_in_coset)
from .tracing import Specification, minimal_spacing, sup_norm, trace_spec_periodic
from .unipotent import SupportDescriptor, match_at_period, point_orbit, strong_dpm_sequence


def _stage(name: str):
    """Decorate an exception with the pipeline stage it came from."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if ev is not None and isinstance(ev, (ToralSpecError, ValueError)) and not hasattr(ev, "stage"):
                ev.stage = name
                if ev.args and isinstance(ev.args[0], str):
                    ev.args = (f"[{name}] {ev.args[0]}",) + ev.args[1:]
            return False

    return _Ctx()


def final_bound(eps: float) -> float:
    """eps + 1 - (1 - eps)^2 (1/(1 + eps) - 2 eps)."""
    return eps + 1 - (1 - eps) ** 2 * (1 / (1 + eps) - 2 * eps)


@dataclass
class PipelineResult:
    point: SymbolicPoint
    period: int
    measure: EmpiricalMeasure
    distance_to_target: float
    certified_error: float
    bound: float
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.distance_to_target <= self.bound + self.certified_error


def _as_symbolic(x) -> SymbolicPoint:
    if isinstance(x, SymbolicPoint):
        return x
    if isinstance(x, str):
        return SymbolicPoint.parse(x)
    if isinstance(x, TorusPoint):
        return SymbolicPoint(tuple(x.to_exact().coords))
    return SymbolicPoint.from_coords(list(x))


def _lift_quotient(Y: Subtorus, p: SymbolicPoint) -> SymbolicPoint:
    return SymbolicPoint(Y.lift_quotient(p.base), tuple(Y.lift_quotient(v) for v in p.directions), p.params)


def _quotient_part(Y: Subtorus, p: SymbolicPoint) -> SymbolicPoint:
    base = Y.split_coords(p.base)[1]
    dirs = tuple(Y.split_coords(v)[1] for v in p.directions)
    return SymbolicPoint(tuple(base), dirs, p.params)


def _is_unipotent(U: RatMatrix) -> bool:
    d = U.shape[0]
    N = U - RatMatrix.identity(d)
    return all(c == 0 for row in (N ** d).rows for c in row)


def _fiber_vector(A, Y: Subtorus, z: SymbolicPoint, x: SymbolicPoint, s: int, t: int, bits: int):
    """Rational y in Y + Z^d with d(A^s z - A^t x, y) tiny, and that distance."""
    zs = z.apply(A.power(s)).scaled_floor(bits)
    xt = x.apply(A.power(t)).scaled_floor(bits)
    mod = 1 << bits
    diff = []
    for a, b in zip(zs, xt):
        v = (a - b) % mod
        if v > mod // 2:
            v -= mod
        diff.append(Fraction(v, mod))
    _, qc = Y.split_coords(diff)
    small = [c - round(c) for c in qc]
    corr = Y.lift_quotient(small)
    y = [a - b for a, b in zip(diff, corr)]
    err = max(abs(c) for c in corr) if corr else Fraction(0)
    return y, err


def dpm_pipeline(A, Y: Subtorus, mu_quotient: SupportDescriptor, x, eps: float, blocks: int = 16,
                 budget: int = 10**6, reference_length: int = 10**5, target=None,
                 family=None) -> PipelineResult:
    """Periodic z - w whose orbit measure approximates the measure generic for x.

    `target` overrides the reference measure (default: the empirical measure of
    x over `reference_length` steps).
    """
    A = as_automorphism(A)
    d = A.dim
    family = family or torus_family(d)
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")

    with _stage("0:setup"):
        if isinstance(x, TorusPoint) and x.exact:
            return _periodic_target(A, x, eps, family, target)
        xs = _as_symbolic(x)
        if xs.dim != d:
            raise InputError("point dimension mismatch")
        if Y.k == 0:
            raise InputError("Y must be a proper nontrivial subtorus")
        MY = restrict_to_subtorus(A.matrix, Y)
        U = quotient_matrix(A.matrix, Y)
        if not _is_unipotent(U):
            raise NotUnipotentError("induced quotient map is not unipotent")
        sp_y = as_automorphism(MY).splitting
        if sp_y.dims[1]:
            raise InputError("restriction to Y has central directions")
        lipB = Y.lipschitz

    with _stage("1:calibrate"):
        delta = calibrate_delta(family, eps)
        eps_y = delta / 2 / lipB
        M = minimal_spacing(MY, eps_y)
        K = math.ceil(M / eps) + 1
        while math.gcd(K, mu_quotient.m) != 1:
            K += 1
        growth = max(float(sup_norm(A.power(k))) for k in range(K))
        eta = min(delta / (2 * growth), eps) * (1 - 1e-9)

    with _stage("2:interval-permutation"):
        xq = _quotient_part(Y, xs)
        q = None
        n = max(1, blocks)
        while True:
            dpm = strong_dpm_sequence(U, mu_quotient, [n])
            cand = dpm.c * n
            if cand > budget:
                raise BudgetError("period budget exhausted before the matching succeeded")
            if cand >= blocks * K:
                P = -(-cand // K)
                xq_orb = point_orbit(U, xq, P, stride=K)
                match = match_at_period(U, mu_quotient, dpm.points[n], cand, xq_orb, K, eta,
                                        grid=_fine_grid(mu_quotient, U, eta))
                if match.ok:
                    q = cand
                    break
            n += 1
        zq = dpm.points[n]

    with _stage("3:lift"):
        zq_sym = zq if isinstance(zq, SymbolicPoint) else SymbolicPoint(tuple(zq.coords))
        z = solve_periodic_in_coset(A, Y, _lift_quotient(Y, zq_sym), q)

    with _stage("4:fiber-specification"):
        r = 0
        while (1 + Fraction(delta) / 2) * ((r + 2) * K - M) <= q:
            r += 1
        bits = 64 + math.ceil(-math.log2(eta))
        segments, errs = [], []
        for i in range(r + 1):
            a_i, b_i = i * K, (i + 1) * K - M
            y, err = _fiber_vector(A, Y, z, xs, a_i, match.pi[i], bits)
            errs.append(err)
            yc = Y.split_coords(y)[0]
            back = (MY ** (-a_i)).apply(yc)
            segments.append((TorusPoint([frac(c) for c in back], exact=True), a_i, b_i))
        spec = Specification(segments, M)
        in_lambda = [bool(g) and e < Fraction(eta) for g, e in zip(match.good, errs)]

    with _stage("5:trace-in-fiber"):
        w_y = trace_spec_periodic(MY, spec, q, eps_y)
        w = Y.embed(w_y.coords)

    with _stage("6:assemble"):
        out = (z - SymbolicPoint(tuple(w))).reduce_base()
        if not out.is_fixed_by(A.power(q)):
            raise ToralSpecError("z - w is not periodic")
        orbit = fixed_point_orbit(A, out, q)
        measure = EmpiricalMeasure.from_floats(family.space, orbit)
        if target is None:
            target = empirical_measure(A, xs, reference_length, family.space)
        dist, err = weak_star_distance(measure, target, family)
        # pairing against x along the extended permutation n = a_i + k -> pi(a_i) + k
        x_orbit = fixed_point_orbit(A, xs, q + K)
        perm = _extend_permutation(match.pi, K, q, r)
        pair = pairing_distance_bound_check(orbit, x_orbit[perm], eps, delta, family)

    diagnostics = {
        "segments": r + 1,
        "lambda_fraction": float(match.good_fraction),
        "fiber_errors_below_eta": sum(in_lambda),
        "pairing_lhs": pair.lhs,
        "pairing_rhs": pair.rhs,
        "pairing_ok": pair.ok,
        "far_fraction": pair.far / q,
    }
    params = {"eps": eps, "delta": delta, "M": M, "K": K, "eta": eta, "q": q}
    return PipelineResult(out, q, measure, dist, err, final_bound(eps), params, diagnostics)


def _extend_permutation(pi: list[int], K: int, q: int, r: int) -> np.ndarray:
    """Permutation of 0..q-1 sending a_i + k to pi(a_i) + k inside blocks, the rest arbitrary."""
    out = np.full(q, -1, dtype=np.int64)
    used = np.zeros(q + K, dtype=bool)
    for i, p in enumerate(pi):
        for k in range(K):
            n = i * K + k
            if n >= q:
                break
            t = p + k
            if t < q and not used[t]:
                out[n] = t
                used[t] = True
    rest = iter(np.flatnonzero(~used[:q]))
    for n in range(q):
        if out[n] < 0:
            out[n] = next(rest)
    return out


def _fine_grid(mu: SupportDescriptor, U, eta: float):
    from .unipotent import box_grid

    g, off = box_grid(mu, U, max(eta, 2.0 ** -40))
    return g, off


def _periodic_target(A, x: TorusPoint, eps: float, family, target) -> PipelineResult:
    """A target that is itself a periodic orbit measure: return that orbit."""
    from .unipotent import least_period

    q = least_period(A, x)
    measure = empirical_measure(A, x, q, family.space)
    ref = target if target is not None else measure
    dist, err = weak_star_distance(measure, ref, family)
    return PipelineResult(SymbolicPoint(tuple(x.coords)), q, measure, dist, err, final_bound(eps),
                          {"eps": eps, "q": q}, {"segments": 0})
