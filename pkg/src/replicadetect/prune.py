"""Schur-complement pruning of the discovered groups to pure-variable groups.

The covariance of the denoised features has the low-rank form Theta; the
diagonal entry of its Schur complement on a conditioning set S is, under
Gaussian factors, the conditional variance of a denoised feature given
those in S.  Greedily selecting maximizers of this quantity yields one
index per pure-variable group, and the groups that were hit survive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import InvalidArgument, InvalidR
from .parallel import GroupPartition


@dataclass(frozen=True)
class ThetaEstimate:
    """Denoised covariance block on the discovered index set."""

    theta_hat: np.ndarray
    index_set: Tuple[int, ...]

    def positions(self, indices) -> list:
        pos = {v: k for k, v in enumerate(self.index_set)}
        return [pos[int(i)] for i in indices]


@dataclass(frozen=True)
class PruneTrace:
    """Greedy selection audit: chosen indices and their Schur values."""

    selected: Tuple[int, ...]
    schur_values: Tuple[float, ...]
    r: int

    def to_json_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "schur_values": [float(v) for v in self.schur_values],
            "r": self.r,
        }


# Relative singular-value cutoff shared by every pseudo-inverse in the
# package.  The machine-epsilon cutoff retains noise-dominated directions
# that push Schur diagonals of PSD inputs below -1e-8; 1e-10 keeps them out
# while staying orders of magnitude under any statistically meaningful
# singular value.
PINV_RTOL = 1e-10


def pinv_rcond(m: np.ndarray) -> float:
    return max(max(m.shape) * np.finfo(float).eps, PINV_RTOL)


def _pinv(m: np.ndarray) -> np.ndarray:
    if m.size == 0:
        return m.T.copy()
    return np.linalg.pinv(0.5 * (m + m.T), rcond=pinv_rcond(m))


def estimate_theta(sigma_hat: np.ndarray, gamma_hat: np.ndarray,
                   index_set: Sequence[int]) -> ThetaEstimate:
    """Theta on the index set: covariance entries off the diagonal,
    Sigma_ii * (1 - Gamma_ii) on it.

    ``gamma_hat`` is aligned with ``index_set``.
    """
    sigma = np.asarray(sigma_hat, dtype=float)
    gamma = np.asarray(gamma_hat, dtype=float)
    idx = [int(i) for i in index_set]
    if gamma.shape != (len(idx),):
        raise InvalidArgument("gamma_hat must align with index_set")
    if np.any(gamma < -1e-9) or np.any(gamma > 1.0 + 1e-9):
        raise InvalidArgument("gamma entries must lie in [0, 1]")
    theta = sigma[np.ix_(idx, idx)].copy()
    theta[np.diag_indices_from(theta)] = np.diag(sigma)[idx] * (1.0 - gamma)
    theta = 0.5 * (theta + theta.T)
    return ThetaEstimate(theta_hat=theta, index_set=tuple(idx))


def schur_complement_diag(theta: ThetaEstimate, s: Sequence[int], j: int) -> float:
    """Theta_jj - Theta_jS Theta_SS^- Theta_Sj, with the Moore-Penrose
    pseudo-inverse on the conditioning block.  Empty S returns Theta_jj."""
    t = theta.theta_hat
    (jp,) = theta.positions([j])
    sp = theta.positions(s)
    if not sp:
        return float(t[jp, jp])
    block = _pinv(t[np.ix_(sp, sp)])
    row = t[jp, sp]
    return float(t[jp, jp] - row @ block @ row)


def prune_greedy(theta: ThetaEstimate, r: int, partition: GroupPartition):
    """Keep the r groups whose members are reached by the greedy selection.

    At step k the index maximizing the Schur-complement diagonal given the
    previously selected set is chosen (ties to the smallest index);
    already-selected indices are excluded so no index is picked twice.
    r = G is a no-op passthrough with an empty trace.
    """
    g = partition.g
    if r < 1 or r > g:
        raise InvalidR(f"need 1 <= r <= {g} groups, got r={r}")
    if r == g:
        return partition, PruneTrace(selected=(), schur_values=(), r=0)

    t = theta.theta_hat
    universe = list(theta.index_set)
    selected_pos: list = []
    selected_idx: list = []
    values: list = []
    for _ in range(r):
        cand = [k for k in range(len(universe)) if k not in selected_pos]
        if selected_pos:
            block = _pinv(t[np.ix_(selected_pos, selected_pos)])
            cross = t[np.ix_(cand, selected_pos)]
            schur = np.diag(t)[cand] - np.einsum("ij,jk,ik->i", cross, block, cross)
        else:
            schur = np.diag(t)[cand]
        best = int(np.argmax(schur))
        selected_pos.append(cand[best])
        selected_idx.append(universe[cand[best]])
        values.append(float(schur[best]))

    hit = [members for members in partition.groups
           if any(i in members for i in selected_idx)]
    pruned = GroupPartition.from_groups(hit)
    trace = PruneTrace(selected=tuple(selected_idx), schur_values=tuple(values), r=r)
    return pruned, trace
