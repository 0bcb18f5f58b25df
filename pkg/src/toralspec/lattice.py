"""Integer points in eigen-coordinate boxes (Fincke-Pohst enumeration)."""

from __future__ import annotations

import math

import numpy as np

from .errors import BudgetError


def ellipsoid_points(G: np.ndarray, center: np.ndarray, radius2: float, limit: int = 200000) -> np.ndarray:
    """All integer k with (k - c)^T G (k - c) <= radius2, for positive definite G."""
    d = G.shape[0]
    R = np.linalg.cholesky(G).T  # upper triangular, G = R^T R
    out: list[list[int]] = []
    k = [0] * d

    def rec(i: int, rem: float):
        # s = sum_{j>i} R_ij (k_j - c_j)
        s = sum(R[i, j] * (k[j] - center[j]) for j in range(i + 1, d))
        half = math.sqrt(max(rem, 0.0)) / R[i, i]
        mid = center[i] - s / R[i, i]
        lo, hi = math.ceil(mid - half - 1e-12), math.floor(mid + half + 1e-12)
        for v in range(lo, hi + 1):
            k[i] = v
            t = R[i, i] * (v - center[i]) + s
            r2 = rem - t * t
            if r2 < -1e-12:
                continue
            if i == 0:
                out.append(list(k))
                if len(out) > limit:
                    raise BudgetError("too many lattice points")
            else:
                rec(i - 1, r2)

    rec(d - 1, radius2)
    return np.array(out, dtype=np.int64).reshape(-1, d)


def box_points(Vinv: np.ndarray, center: np.ndarray, log_widths: np.ndarray, budget: int = 20000):
    """Integer k with |(Vinv (center - k))_j| <= W_j for every j.

    Widths are given by their logs so expanding directions can be huge; the
    widest directions are shrunk until the expected count fits `budget`.
    Returns (points, eigen-coordinates of center - k, capped log widths).
    """
    d = len(center)
    lw = np.array(log_widths, dtype=float)
    logdet = math.log(abs(np.linalg.det(Vinv)))
    unit_ball = d / 2 * math.log(math.pi) - math.lgamma(d / 2 + 1)
    log_vol = unit_ball + d / 2 * math.log(d) + float(np.sum(lw)) - logdet
    excess = log_vol - math.log(budget)
    if excess > 0:
        # water-filling: cap widths at a level that removes exactly `excess`
        srt = np.sort(lw)[::-1]
        for cnt in range(1, d + 1):
            level = (float(np.sum(srt[:cnt])) - excess) / cnt
            if cnt == d or level >= srt[cnt]:
                break
        lw = np.minimum(lw, level)
    lw = np.minimum(lw, 300.0)
    w = np.exp(lw)
    M = Vinv / w[:, None]
    G = np.real(M.conj().T @ M)
    G = (G + G.T) / 2
    pts = ellipsoid_points(G, center, float(d), limit=max(50 * budget, 100000))
    if len(pts) == 0:
        return pts, np.zeros((0, d), dtype=complex), lw
    coords = (Vinv @ (center[None, :] - pts).T).T
    keep = np.all(np.abs(coords) <= w[None, :] * (1 + 1e-12), axis=1)
    return pts[keep], coords[keep], lw
