"""Loading-matrix estimation on pure rows and the plug-in completion.

Within a pure group the squared scaled loading equals the denoised
diagonal entry M_ii, so loadings are recovered as signed square roots,
anchored at the first group member.  The factor covariance follows from
sandwiching the denoised pure block with the left inverse of the pure
loading block, and the non-pure rows from a plug-in inversion of the
cross-correlation block.  Factors are only identified up to a signed
permutation, so the alignment utilities below are the unit in which all
estimation errors are measured.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    EmptyGroup,
    InvalidArgument,
    RankDeficientLoadings,
    SingularSigmaZ,
)
from .parallel import GroupPartition
from .prune import PruneTrace, pinv_rcond
from .rank import LowRankEstimate


@dataclass(frozen=True)
class FactorEstimate:
    """The fitted model: pure groups, loadings, factor covariance, noise."""

    k_hat: int
    pure_partition: GroupPartition
    b_hat: Optional[np.ndarray] = None
    a_hat: Optional[np.ndarray] = None
    sigma_z_hat: Optional[np.ndarray] = None
    gamma_hat: Optional[np.ndarray] = None
    trace: Optional[PruneTrace] = None

    def to_json_dict(self) -> dict:
        def arr(a):
            if a is None:
                return None
            return [[None if not math.isfinite(v) else float(v) for v in row]
                    for row in np.atleast_2d(np.asarray(a, dtype=float))]

        gamma = None
        if self.gamma_hat is not None:
            gamma = [None if not math.isfinite(v) else float(v) for v in self.gamma_hat]
        return {
            "k_hat": self.k_hat,
            "groups": [list(g) for g in self.pure_partition.groups],
            "universe": list(self.pure_partition.universe),
            "b_hat": arr(self.b_hat),
            "a_hat": arr(self.a_hat),
            "sigma_z": arr(self.sigma_z_hat),
            "gamma": gamma,
            "trace": self.trace.to_json_dict() if self.trace else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def estimate_pure_loadings(r_hat: np.ndarray, partition: GroupPartition,
                           m_est: LowRankEstimate) -> np.ndarray:
    """Loadings of the pure rows: one column per group of the partition.

    Row order follows ``partition.universe``.  The anchor (first member of
    each group) gets a positive sign; other members take the sign of their
    correlation with the anchor.
    """
    r = np.asarray(r_hat, dtype=float)
    if partition.g == 0:
        raise EmptyGroup("no pure groups")
    universe = list(partition.universe)
    pos = {v: k for k, v in enumerate(universe)}
    m_pos = {v: k for k, v in enumerate(m_est.index_set)}
    b = np.zeros((len(universe), partition.g))
    for k, members in enumerate(partition.groups):
        if not members:
            raise EmptyGroup(f"group {k} is empty")
        anchor = members[0]
        for j in members:
            mag = math.sqrt(min(max(float(m_est.m_hat[m_pos[j], m_pos[j]]), 0.0), 1.0))
            if j == anchor:
                sign = 1.0
            else:
                sign = 1.0 if r[anchor, j] >= 0 else -1.0
            b[pos[j], k] = sign * mag
    return b


def estimate_sigma_z(r_hat: np.ndarray, gamma_on_universe: np.ndarray,
                     b_pure: np.ndarray, partition: GroupPartition) -> np.ndarray:
    """Factor covariance from the denoised pure block.

    Sandwiches R_II - Gamma_II with the left inverse of the pure loading
    block; the result is symmetrized and its diagonal forced to one.
    """
    r = np.asarray(r_hat, dtype=float)
    idx = list(partition.universe)
    gamma = np.asarray(gamma_on_universe, dtype=float)
    if gamma.shape != (len(idx),):
        raise InvalidArgument("gamma must align with the partition universe")
    b = np.asarray(b_pure, dtype=float)
    svals = np.linalg.svd(b, compute_uv=False)
    if svals.size == 0 or svals[-1] <= pinv_rcond(b) * svals[0]:
        raise RankDeficientLoadings("pure loading columns are numerically dependent")
    b_left = np.linalg.pinv(b, rcond=pinv_rcond(b))
    denoised = r[np.ix_(idx, idx)] - np.diag(gamma)
    sigma_z = b_left @ denoised @ b_left.T
    sigma_z = 0.5 * (sigma_z + sigma_z.T)
    np.fill_diagonal(sigma_z, 1.0)
    return sigma_z


def estimate_a(b_hat: np.ndarray, sigma_diag: np.ndarray) -> np.ndarray:
    """Rescale loadings back to the covariance scale: row i times sqrt(Sigma_ii)."""
    b = np.asarray(b_hat, dtype=float)
    d = np.asarray(sigma_diag, dtype=float)
    if np.any(d <= 0):
        raise InvalidArgument("covariance diagonal must be positive")
    return b * np.sqrt(d)[:, None]


def estimate_bj_plugin(sigma_z: np.ndarray, b_pure: np.ndarray,
                       r_cross: np.ndarray) -> np.ndarray:
    """Loadings of non-pure rows from the cross-correlation block.

    Solves R_IJ = B_I SigmaZ B_J' for B_J.  ``r_cross`` is |I| x |J|;
    the result is |J| x K.
    """
    b = np.asarray(b_pure, dtype=float)
    rc = np.asarray(r_cross, dtype=float)
    if rc.shape[1] == 0:
        return np.zeros((0, b.shape[1]))
    svals = np.linalg.svd(b, compute_uv=False)
    if svals.size == 0 or svals[-1] <= pinv_rcond(b) * svals[0]:
        raise RankDeficientLoadings("pure loading columns are numerically dependent")
    b_left = np.linalg.pinv(b, rcond=pinv_rcond(b))
    try:
        bj_t = np.linalg.solve(np.asarray(sigma_z, dtype=float), b_left @ rc)
    except np.linalg.LinAlgError as exc:
        raise SingularSigmaZ(str(exc)) from exc
    return bj_t.T


# ---------------------------------------------------------------------------
# Signed-permutation alignment


def _column_costs(est: np.ndarray, ref: np.ndarray, norm: str):
    if norm == "inf":
        plus = np.max(np.abs(est[:, :, None] - ref[:, None, :]), axis=0)
        minus = np.max(np.abs(est[:, :, None] + ref[:, None, :]), axis=0)
    elif norm == "fro":
        plus = np.sum((est[:, :, None] - ref[:, None, :]) ** 2, axis=0)
        minus = np.sum((est[:, :, None] + ref[:, None, :]) ** 2, axis=0)
    else:
        raise InvalidArgument(f"unknown norm {norm!r}")
    return plus, minus


def align_signed_permutation(est: np.ndarray, ref: np.ndarray, norm: str = "inf"):
    """Match estimated factor columns to reference columns up to sign.

    Returns (perm, signs) such that est[:, k] is closest to
    signs[k] * ref[:, perm[k]].  Exhaustive search over permutations for
    K <= 8 (signs decouple per column); greedy matching on the largest
    absolute column correlation otherwise.
    """
    est = np.asarray(est, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if est.shape != ref.shape:
        raise InvalidArgument("matrices to align must share a shape")
    k = est.shape[1]
    if k <= 8:
        plus, minus = _column_costs(est, ref, norm)
        best_sign = np.where(plus <= minus, 1.0, -1.0)
        cost = np.minimum(plus, minus)
        combine = max if norm == "inf" else sum
        best_perm, best_val = None, None
        for perm in itertools.permutations(range(k)):
            val = combine(cost[c, perm[c]] for c in range(k))
            if best_val is None or val < best_val:
                best_perm, best_val = perm, val
        perm = np.array(best_perm, dtype=int)
        signs = best_sign[np.arange(k), perm]
        return perm, signs

    norms_e = np.linalg.norm(est, axis=0)
    norms_r = np.linalg.norm(ref, axis=0)
    inner = est.T @ ref
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.abs(inner) / np.outer(norms_e, norms_r)
    sim = np.nan_to_num(sim, nan=-1.0)
    perm = np.full(k, -1, dtype=int)
    signs = np.ones(k)
    work = sim.copy()
    for _ in range(k):
        kk, ll = np.unravel_index(np.argmax(work), work.shape)
        perm[kk] = ll
        signs[kk] = 1.0 if inner[kk, ll] >= 0 else -1.0
        work[kk, :] = -np.inf
        work[:, ll] = -np.inf
    return perm, signs


def apply_to_columns(mat: np.ndarray, perm, signs) -> np.ndarray:
    """Reorder and sign-flip columns: out[:, k] = signs[k] * mat[:, perm[k]]."""
    return np.asarray(mat, dtype=float)[:, perm] * np.asarray(signs, dtype=float)


def apply_to_gram(m: np.ndarray, perm, signs) -> np.ndarray:
    """Conjugate a K x K matrix by the signed permutation."""
    m = np.asarray(m, dtype=float)
    s = np.asarray(signs, dtype=float)
    return m[np.ix_(perm, perm)] * np.outer(s, s)


def min_signed_permutation_distance(est: np.ndarray, ref: np.ndarray,
                                    norm: str = "inf") -> float:
    """min over signed permutations P of ||est - ref P'|| in the given norm."""
    perm, signs = align_signed_permutation(est, ref, norm)
    diff = np.asarray(est, dtype=float) - apply_to_columns(ref, perm, signs)
    if norm == "inf":
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    return float(np.linalg.norm(diff))
