"""Pairwise parallel-row scores.

For a correlation matrix R and a pair (i, j), the score is the minimum of
``(p-2)^(-1/q) * ||a * R_i + b * R_j||_q`` over coefficient pairs with
``max(|a|, |b|) = 1``, where R_i and R_j are the rows of R with the i-th
and j-th entries removed.  The score is zero exactly when the two features
load on the latent factors through parallel rows, which makes thresholding
it the basis of replicate-group discovery.

The minimization reduces to two one-dimensional convex problems (fix one
coefficient at 1, vary the other in [-1, 1]).  For q = 2 the minimum has a
closed form; for q = inf each slice is piecewise linear and is minimized
exactly over its breakpoints; any other q >= 1 is handled by golden-section
search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import (
    DegenerateRow,
    DimensionTooSmall,
    IndexOutOfRange,
    InvalidArgument,
)

# 2-norm below which a leave-two-out row counts as zero.
DEGENERATE_TOL = 1e-12

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ScoreTable:
    """Symmetric p x p table of pairwise scores for a fixed q.

    ``minimizers`` when present holds two p x p arrays (a, b) with the
    optimal coefficients normalized to max(|a|, |b|) = 1.
    """

    q: float
    values: np.ndarray
    minimizers: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def smallest(self, k: int):
        """The k smallest off-diagonal scores as (score, i, j), i < j."""
        iu = np.triu_indices(self.p, k=1)
        vals = self.values[iu]
        order = np.argsort(vals, kind="stable")[:k]
        return [(float(vals[m]), int(iu[0][m]), int(iu[1][m])) for m in order]

    def to_json_dict(self) -> dict:
        iu = np.triu_indices(self.p, k=1)
        return {
            "q": "inf" if np.isinf(self.q) else float(self.q),
            "p": self.p,
            "upper": [float(v) for v in self.values[iu]],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _check_q(q: float) -> float:
    q = float(q)
    if not (q >= 1.0):
        raise InvalidArgument(f"norm index q must be in [1, inf], got {q}")
    return q


def _check_matrix(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise InvalidArgument("correlation matrix must be square")
    if r.shape[0] < 3:
        raise DimensionTooSmall(f"need p >= 3, got p={r.shape[0]}")
    return r


def _check_pair(p: int, i: int, j: int) -> None:
    if not (0 <= i < p and 0 <= j < p):
        raise IndexOutOfRange(f"indices ({i}, {j}) out of range for p={p}")
    if i == j:
        raise InvalidArgument("indices must differ")


def row_leave_two_out(r: np.ndarray, i: int, j: int) -> np.ndarray:
    """Row i of r with the entries in columns i and j removed."""
    r = _check_matrix(r)
    _check_pair(r.shape[0], i, j)
    keep = np.ones(r.shape[0], dtype=bool)
    keep[[i, j]] = False
    return r[i, keep]


def _norm_factor(p: int, q: float) -> float:
    # (p - 2)^(-1/q), read as 1 in the limit q = inf
    if np.isinf(q):
        return 1.0
    return float((p - 2) ** (-1.0 / q))


def _golden_section(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Minimize a convex scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while (b - a) > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        it += 1
    cands = [(0.5 * (a + b), f(0.5 * (a + b))), (c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))]
    return min(cands, key=lambda tv: tv[1])


def _minimize_linf_slice(u: np.ndarray, v: np.ndarray):
    """Exact min over t in [-1, 1] of max_m |u_m * t + v_m|.

    The objective is piecewise linear and convex; its minimum lies at an
    endpoint, at a zero of one |u_m t + v_m|, or at a crossing of two
    envelope lines.  All O(p^2) candidates are enumerated.
    """
    cands = [-1.0, 1.0]
    nz = u != 0.0
    if np.any(nz):
        cands.extend((-v[nz] / u[nz]).tolist())
    iu = np.triu_indices(len(u), k=1)
    du = u[iu[0]] - u[iu[1]]
    dv = v[iu[0]] - v[iu[1]]
    su = u[iu[0]] + u[iu[1]]
    sv = v[iu[0]] + v[iu[1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = -dv / du
        t2 = -sv / su
    cands.extend(t1[np.isfinite(t1)].tolist())
    cands.extend(t2[np.isfinite(t2)].tolist())
    ts = np.unique(np.clip(np.asarray(cands, dtype=float), -1.0, 1.0))
    vals = np.max(np.abs(np.outer(u, ts) + v[:, None]), axis=0)
    k = int(np.argmin(vals))
    return float(ts[k]), float(vals[k])


def _leave_two_out_pair(r: np.ndarray, i: int, j: int):
    keep = np.ones(r.shape[0], dtype=bool)
    keep[[i, j]] = False
    u = r[i, keep]
    v = r[j, keep]
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu <= DEGENERATE_TOL:
        raise DegenerateRow(i)
    if nv <= DEGENERATE_TOL:
        raise DegenerateRow(j)
    return u, v


def score_s2(r: np.ndarray, i: int, j: int):
    """Closed-form q = 2 score and its minimizing coefficients.

    With V_ii, V_jj the squared 2-norms of the two leave-two-out rows and
    V_ij their inner product, the squared score is
    ``min(V_ii, V_jj) / (p - 2) * (1 - V_ij^2 / (V_ii * V_jj))``.  The value
    is evaluated as the residual norm at the closed-form minimizer, which
    avoids the cancellation the algebraic form suffers near zero.
    """
    r = _check_matrix(r)
    _check_pair(r.shape[0], i, j)
    u, v = _leave_two_out_pair(r, i, j)
    p = r.shape[0]
    vii = float(u @ u)
    vjj = float(v @ v)
    vij = float(u @ v)
    # the slice fixing the coefficient of the smaller-norm row at 1 attains
    # the minimum; on ties prefer the a-fixed slice
    if vii <= vjj:
        minimizer = (1.0, -vij / vjj)
        residual = u + minimizer[1] * v
    else:
        minimizer = (-vij / vii, 1.0)
        residual = minimizer[0] * u + v
    value = float(np.linalg.norm(residual)) / math.sqrt(p - 2)
    return value, minimizer


def score_sq(r: np.ndarray, i: int, j: int, q: float):
    """Score for general q in [1, inf] via the two 1-d convex slices.

    Returns (value, (a, b)) with max(|a|, |b|) = 1.  The slice with the
    smaller value wins; on ties the slice with a fixed at 1 is preferred.
    """
    q = _check_q(q)
    r = _check_matrix(r)
    _check_pair(r.shape[0], i, j)
    u, v = _leave_two_out_pair(r, i, j)
    p = r.shape[0]
    if np.isinf(q):
        b_star, val_b = _minimize_linf_slice(v, u)  # a = 1, vary b
        a_star, val_a = _minimize_linf_slice(u, v)  # b = 1, vary a
    else:
        b_star, val_b = _golden_section(lambda t: np.linalg.norm(u + t * v, ord=q), -1.0, 1.0)
        a_star, val_a = _golden_section(lambda t: np.linalg.norm(t * u + v, ord=q), -1.0, 1.0)
    factor = _norm_factor(p, q)
    if val_b <= val_a:
        return factor * val_b, (1.0, b_star)
    return factor * val_a, (a_star, 1.0)


def _score_table_s2(r: np.ndarray, with_minimizers: bool) -> ScoreTable:
    p = r.shape[0]
    g = r @ r
    gd = np.diag(g)
    r2 = r * r
    vii = gd[:, None] - 1.0 - r2
    vjj = gd[None, :] - 1.0 - r2
    vij = g - 2.0 * r

    off = ~np.eye(p, dtype=bool)
    deg = (vii <= DEGENERATE_TOL**2) & off
    if np.any(deg):
        raise DegenerateRow(int(np.argwhere(deg)[0][0]))

    with np.errstate(invalid="ignore", divide="ignore"):
        rho2 = vij * vij / (vii * vjj)
        sq = np.minimum(vii, vjj) / (p - 2) * np.clip(1.0 - rho2, 0.0, None)
    values = np.sqrt(np.where(off, sq, 0.0))
    np.fill_diagonal(values, 0.0)

    # the algebraic form cancels badly for near-parallel rows; re-evaluate
    # tiny entries through the residual at the closed-form minimizer
    small_i, small_j = np.nonzero(np.triu(values < 1e-6, k=1))
    for a, b in zip(small_i, small_j):
        values[a, b] = values[b, a] = score_s2(r, int(a), int(b))[0]

    minimizers = None
    if with_minimizers:
        with np.errstate(invalid="ignore", divide="ignore"):
            small_i = vii <= vjj
            a_mat = np.where(small_i, 1.0, -vij / vii)
            b_mat = np.where(small_i, -vij / vjj, 1.0)
        np.fill_diagonal(a_mat, 0.0)
        np.fill_diagonal(b_mat, 0.0)
        minimizers = (a_mat, b_mat)
    return ScoreTable(q=2.0, values=values, minimizers=minimizers)


def score_table(r: np.ndarray, q: float = 2.0, with_minimizers: bool = False) -> ScoreTable:
    """All p(p-1)/2 pairwise scores; the diagonal is zero by convention.

    q = 2 is evaluated through a single Gram product; other q fall back to
    the per-pair solvers.  Cell values do not depend on evaluation order.
    """
    q = _check_q(q)
    r = _check_matrix(r)
    # normalize so the Gram identities hold exactly
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    if q == 2.0:
        return _score_table_s2(r, with_minimizers)
    p = r.shape[0]
    values = np.zeros((p, p))
    a_mat = np.zeros((p, p))
    b_mat = np.zeros((p, p))
    for i in range(p - 1):
        for j in range(i + 1, p):
            val, (a, b) = score_sq(r, i, j, q)
            values[i, j] = values[j, i] = val
            a_mat[i, j], b_mat[i, j] = a, b
            a_mat[j, i], b_mat[j, i] = b, a
    minimizers = (a_mat, b_mat) if with_minimizers else None
    return ScoreTable(q=q, values=values, minimizers=minimizers)


def score_qr_reference(r: np.ndarray, i: int, j: int, q: float, r_norm: float,
                       n_grid: int = 4001) -> float:
    """Reference evaluation of the (q, r)-score by a grid over the r-sphere.

    Not a production path: used to check dominance of r = inf and related
    properties on small problems.
    """
    q = _check_q(q)
    if not (r_norm > 0):
        raise InvalidArgument("coefficient norm index r must be positive")
    rmat = _check_matrix(r)
    _check_pair(rmat.shape[0], i, j)
    u, v = _leave_two_out_pair(rmat, i, j)
    p = rmat.shape[0]
    theta = np.linspace(0.0, 2.0 * np.pi, n_grid)
    if np.isinf(r_norm):
        ts = np.linspace(-1.0, 1.0, n_grid)
        coeffs = np.concatenate([
            np.stack([np.ones_like(ts), ts], axis=1),
            np.stack([ts, np.ones_like(ts)], axis=1),
            np.stack([-np.ones_like(ts), ts], axis=1),
            np.stack([ts, -np.ones_like(ts)], axis=1),
        ])
    else:
        c, s = np.cos(theta), np.sin(theta)
        a = np.sign(c) * np.abs(c) ** (2.0 / r_norm)
        b = np.sign(s) * np.abs(s) ** (2.0 / r_norm)
        coeffs = np.stack([a, b], axis=1)
    combos = coeffs[:, [0]] * u[None, :] + coeffs[:, [1]] * v[None, :]
    if np.isinf(q):
        vals = np.max(np.abs(combos), axis=1)
    else:
        vals = np.sum(np.abs(combos) ** q, axis=1) ** (1.0 / q)
    return _norm_factor(p, q) * float(np.min(vals))


def leave_one_out_norms(r: np.ndarray, q: float = 2.0) -> np.ndarray:
    """||R_{i, -i}||_q for every row i (diagonal entry removed)."""
    q = _check_q(q)
    r = np.asarray(r, dtype=float)
    p = r.shape[0]
    if q == 2.0:
        g = np.einsum("ij,ij->i", r, r)
        return np.sqrt(np.clip(g - np.diag(r) ** 2, 0.0, None))
    off = np.abs(r - np.diag(np.diag(r)))
    if np.isinf(q):
        return np.max(off, axis=1)
    mask = ~np.eye(p, dtype=bool)
    return np.sum(np.where(mask, off**q, 0.0), axis=1) ** (1.0 / q)
