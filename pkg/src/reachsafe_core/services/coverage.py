"""
Coverage of reachable boxes by safe cells.

Computes, for a stack of boxes, the δ-scaled volume covered by the union
of Safe leaves and the cube-root violation metric

    V(X) = max(0, Vol_δ(X)^{1/3} − (Σ_{X'} Vol_δ(X ∩ X') + ε_smooth)^{1/3})

together with its gradient with respect to the box endpoints. θ intervals
are wrapped onto [0, 2π] before intersecting; a box that crosses the seam
is handled as two fragments whose pinned endpoints carry no gradient.
Safe leaves overlap only on faces, so summing pairwise overlaps gives the
volume of the covered part.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..domain.intervals import theta_fragments

THETA_AXIS = 2
CHUNK = 256


@dataclass
class Coverage:
    """Per-box volumes and metric values (all arrays of length N)."""
    volume: np.ndarray
    covered: np.ndarray
    v: np.ndarray
    dv_dlo: np.ndarray = None    # (N, n), present when requested
    dv_dhi: np.ndarray = None

    @property
    def outside(self) -> np.ndarray:
        return np.maximum(self.volume - self.covered, 0.0)

    @property
    def active(self) -> np.ndarray:
        return self.v > 0.0


def _fragments(lo: np.ndarray, hi: np.ndarray):
    """Split each box's θ interval at the seam; returns stacked fragments and routing info."""
    f_lo, f_hi, owner, lo_tracks, hi_tracks = [], [], [], [], []
    for i in range(lo.shape[0]):
        for a, b, lt, ht in theta_fragments(float(lo[i, THETA_AXIS]), float(hi[i, THETA_AXIS])):
            row_lo = lo[i].copy()
            row_hi = hi[i].copy()
            row_lo[THETA_AXIS] = a
            row_hi[THETA_AXIS] = b
            f_lo.append(row_lo)
            f_hi.append(row_hi)
            owner.append(i)
            lo_tracks.append(lt)
            hi_tracks.append(ht)
    n = lo.shape[1]
    if not f_lo:
        return np.zeros((0, n)), np.zeros((0, n)), np.zeros(0, dtype=int), np.zeros(0, bool), np.zeros(0, bool)
    return (np.array(f_lo), np.array(f_hi), np.array(owner, dtype=int),
            np.array(lo_tracks, dtype=bool), np.array(hi_tracks, dtype=bool))


def _overlap(f_lo: np.ndarray, f_hi: np.ndarray, s_lo: np.ndarray, s_hi: np.ndarray,
             delta: np.ndarray, with_grad: bool):
    """Σ_j Vol_δ(fragment ∩ safe_j) per fragment, plus endpoint derivatives."""
    n_frag, n = f_lo.shape
    covered = np.zeros(n_frag)
    d_lo = np.zeros((n_frag, n)) if with_grad else None
    d_hi = np.zeros((n_frag, n)) if with_grad else None
    if n_frag == 0 or s_lo.shape[0] == 0:
        return covered, d_lo, d_hi

    for start in range(0, n_frag, CHUNK):
        stop = min(start + CHUNK, n_frag)
        a_lo = f_lo[start:stop, None, :]
        a_hi = f_hi[start:stop, None, :]
        top = np.minimum(a_hi, s_hi[None, :, :])
        bottom = np.maximum(a_lo, s_lo[None, :, :])
        ov = np.maximum(top - bottom, 0.0) * delta          # (c, S, n)
        covered[start:stop] = np.prod(ov, axis=2).sum(axis=1)
        if not with_grad:
            continue
        positive = ov > 0.0
        for d in range(n):
            others = np.prod(np.delete(ov, d, axis=2), axis=2) if n > 1 else np.ones(ov.shape[:2])
            scale = delta[d] * others * positive[:, :, d]
            hi_moves = a_hi[:, :, d] < s_hi[None, :, d]
            lo_moves = a_lo[:, :, d] > s_lo[None, :, d]
            d_hi[start:stop, d] = np.sum(scale * hi_moves, axis=1)
            d_lo[start:stop, d] = -np.sum(scale * lo_moves, axis=1)
    return covered, d_lo, d_hi


def coverage(lo: np.ndarray, hi: np.ndarray, safe_lo: np.ndarray, safe_hi: np.ndarray,
             delta: Sequence[float], eps_smooth: float = 1e-12, with_grad: bool = False) -> Coverage:
    """
    Evaluate covered volume and the metric V for every row box.

    Args:
        lo, hi: (N, n) box endpoints
        safe_lo, safe_hi: (S, n) Safe-leaf endpoints
        delta: Per-dimension scaling factors
        eps_smooth: Added inside the covered-volume cube root
        with_grad: Also return ∂V/∂lo and ∂V/∂hi

    Returns:
        Coverage
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    delta = np.asarray(delta, dtype=float)
    widths = (hi - lo) * delta
    volume = np.prod(widths, axis=1)

    f_lo, f_hi, owner, lo_tracks, hi_tracks = _fragments(lo, hi)
    frag_cov, frag_dlo, frag_dhi = _overlap(f_lo, f_hi, np.asarray(safe_lo, dtype=float),
                                            np.asarray(safe_hi, dtype=float), delta, with_grad)
    covered = np.zeros(lo.shape[0])
    np.add.at(covered, owner, frag_cov)

    root_vol = np.cbrt(volume)
    root_cov = np.cbrt(covered + eps_smooth)
    v = np.maximum(root_vol - root_cov, 0.0)
    result = Coverage(volume=volume, covered=covered, v=v)
    if not with_grad:
        return result

    n = lo.shape[1]
    dc_dlo = np.zeros_like(lo)
    dc_dhi = np.zeros_like(hi)
    if owner.size:
        theta_keep_lo = np.ones((owner.size, n), dtype=bool)
        theta_keep_hi = np.ones((owner.size, n), dtype=bool)
        theta_keep_lo[:, THETA_AXIS] = lo_tracks
        theta_keep_hi[:, THETA_AXIS] = hi_tracks
        np.add.at(dc_dlo, owner, frag_dlo * theta_keep_lo)
        np.add.at(dc_dhi, owner, frag_dhi * theta_keep_hi)

    # ∂Vol/∂hi_d = δ_d·Π_{i≠d} δ_i w_i, ∂Vol/∂lo_d = −∂Vol/∂hi_d
    dvol = np.zeros_like(lo)
    for d in range(n):
        others = np.prod(np.delete(widths, d, axis=1), axis=1) if n > 1 else np.ones(lo.shape[0])
        dvol[:, d] = delta[d] * others

    active = v > 0.0
    coef_vol = np.zeros(lo.shape[0])
    coef_cov = np.zeros(lo.shape[0])
    coef_vol[active] = 1.0 / (3.0 * root_vol[active] ** 2)
    coef_cov[active] = 1.0 / (3.0 * root_cov[active] ** 2)
    result.dv_dhi = coef_vol[:, None] * dvol - coef_cov[:, None] * dc_dhi
    result.dv_dlo = -coef_vol[:, None] * dvol - coef_cov[:, None] * dc_dlo
    return result


def metric_v(box_lo: Sequence[float], box_hi: Sequence[float], safe_lo: np.ndarray, safe_hi: np.ndarray,
             delta: Sequence[float], eps_smooth: float = 1e-12) -> float:
    """V for a single box against the Safe leaves."""
    return float(coverage(np.asarray(box_lo)[None, :], np.asarray(box_hi)[None, :],
                          safe_lo, safe_hi, delta, eps_smooth).v[0])
