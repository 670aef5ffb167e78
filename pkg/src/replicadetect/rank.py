"""Group representatives, the denoised low-rank block and its rank.

On the discovered index set the correlation matrix decomposes into a
rank-K part M plus a diagonal noise part Gamma.  Off-diagonal entries of
M are read directly from R; diagonal entries are recovered from the norm
ratio of leave-two-out rows within a group.  The latent dimension is then
the number of eigenvalues of M restricted to one representative per group
that clear a threshold mu.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DegenerateRow, GroupTooSmall, InvalidArgument
from .parallel import GroupPartition
from .score import DEGENERATE_TOL, ScoreTable, leave_one_out_norms


@dataclass(frozen=True)
class RepresentativeSet:
    """One representative variable index per group."""

    indices: Tuple[int, ...]
    source_groups: Tuple[int, ...]


@dataclass(frozen=True)
class LowRankEstimate:
    """Denoised block M on an index set, with per-index noise Gamma."""

    m_hat: np.ndarray
    index_set: Tuple[int, ...]
    gamma_hat: np.ndarray

    def restrict(self, indices) -> np.ndarray:
        """Submatrix of m_hat at the given original variable indices."""
        pos = {v: k for k, v in enumerate(self.index_set)}
        sel = [pos[int(i)] for i in indices]
        return self.m_hat[np.ix_(sel, sel)]


def select_representatives(r_hat: np.ndarray, partition: GroupPartition,
                           q: float = 2.0) -> RepresentativeSet:
    """Pick, per group, the member with the largest leave-one-out row q-norm.

    Ties break to the smallest index.
    """
    if partition.g == 0:
        raise InvalidArgument("partition is empty")
    norms = leave_one_out_norms(np.asarray(r_hat, dtype=float), q)
    indices = []
    for members in partition.groups:
        vals = norms[list(members)]
        indices.append(members[int(np.argmax(vals))])
    return RepresentativeSet(indices=tuple(indices),
                             source_groups=tuple(range(partition.g)))


def _pair_norm(r: np.ndarray, i: int, drop: int, q: float) -> float:
    keep = np.ones(r.shape[0], dtype=bool)
    keep[[i, drop]] = False
    return float(np.linalg.norm(r[i, keep], ord=None if q == 2.0 else q))


def _diag_entry(r: np.ndarray, gram_diag, i: int, j: int, q: float) -> float:
    if q == 2.0:
        num_sq = gram_diag[i] - 1.0 - r[i, j] ** 2
        den_sq = gram_diag[j] - 1.0 - r[j, i] ** 2
        num = np.sqrt(max(num_sq, 0.0))
        den = np.sqrt(max(den_sq, 0.0))
    else:
        num = _pair_norm(r, i, j, q)
        den = _pair_norm(r, j, i, q)
    if den <= DEGENERATE_TOL:
        raise DegenerateRow(j)
    return abs(r[i, j]) * num / den


def estimate_m(r_hat: np.ndarray, partition: GroupPartition, scores: ScoreTable,
               q: float = 2.0, average_over_group: bool = False) -> LowRankEstimate:
    """Estimate M on the discovered index set.

    Off-diagonal entries are copied from R.  The diagonal entry of member i
    uses the partner j minimizing the score within i's group (or the group
    average when ``average_over_group``), and is clipped to [0, 1] so that
    Gamma = 1 - diag(M) stays a valid noise variance.
    """
    r = np.asarray(r_hat, dtype=float)
    for k, members in enumerate(partition.groups):
        if len(members) < 2:
            raise GroupTooSmall(k)
    h = list(partition.universe)
    m = r[np.ix_(h, h)].copy()
    pos = {v: k for k, v in enumerate(h)}
    gram_diag = np.einsum("ij,ij->i", r, r) if q == 2.0 else None
    svals = scores.values
    for members in partition.groups:
        mem = list(members)
        for i in mem:
            others = [l for l in mem if l != i]
            if average_over_group:
                dval = float(np.mean([_diag_entry(r, gram_diag, i, j, q) for j in others]))
            else:
                j = others[int(np.argmin(svals[i, others]))]
                dval = _diag_entry(r, gram_diag, i, j, q)
            m[pos[i], pos[i]] = min(max(dval, 0.0), 1.0)
    gamma = 1.0 - np.diag(m)
    return LowRankEstimate(m_hat=m, index_set=tuple(h), gamma_hat=gamma)


def estimate_k(m_ll: np.ndarray, mu: float):
    """Number of eigenvalues of the representative block at or above mu.

    Returns (k_hat, eigenvalues) with eigenvalues sorted descending; the
    matrix is symmetrized first to remove floating-point asymmetry.
    """
    if not (mu > 0):
        raise InvalidArgument(f"mu must be positive, got {mu}")
    m = np.asarray(m_ll, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgument("m_ll must be square")
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))[::-1]
    k_hat = int(np.sum(eig >= mu))
    return k_hat, eig
