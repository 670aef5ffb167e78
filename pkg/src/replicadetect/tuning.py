"""Data-driven selection of the score threshold and the rank threshold,
plus pre-screening of pure-noise features.

All procedures split the sample, fit on one part and score the fit on the
held-out part through an off-diagonal Frobenius reconstruction loss, so
they are deterministic given the data and the split seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .corr import CorrelationModel, DataMatrix, sample_correlation
from .errors import (
    AllRemoved,
    DegenerateRow,
    DegenerateSplit,
    InvalidArgument,
    RankDeficientLoadings,
    ZeroVarianceColumn,
)
from .loadings import estimate_pure_loadings, estimate_sigma_z
from .parallel import GroupPartition, partitions_for_ascending
from .prune import pinv_rcond
from .rank import RepresentativeSet, estimate_k, estimate_m
from .score import ScoreTable, leave_one_out_norms, score_table


@dataclass(frozen=True)
class CvConfig:
    """Grid sizes, split seed and fold count for every tuning routine."""

    n_grid: int = 50
    split_seed: int = 0
    folds: int = 2
    mu_grid: Tuple[float, ...] = field(
        default_factory=lambda: tuple(np.round(np.arange(0.1, 0.5 + 1e-9, 0.02), 10))
    )

    def validate(self) -> None:
        if self.n_grid < 1:
            raise InvalidArgument("n_grid must be at least 1")
        if self.folds not in (2, 10):
            raise InvalidArgument(f"folds must be 2 or 10, got {self.folds}")
        if len(self.mu_grid) == 0 or any(b < a for a, b in zip(self.mu_grid, self.mu_grid[1:])):
            raise InvalidArgument("mu_grid must be nonempty and ascending")


def _as_values(x) -> np.ndarray:
    if isinstance(x, DataMatrix):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def _fold_splits(n: int, folds: int, seed: int):
    """(fit, validate) row-index pairs from a seeded shuffle.

    Every fold serves as the validation part once; for two folds this is
    a split-half run in both directions.  An odd sample puts the extra
    observation in the first part.
    """
    order = np.random.default_rng(seed).permutation(n)
    if folds == 2:
        n_fit = (n + 1) // 2
        return [(order[:n_fit], order[n_fit:]), (order[n_fit:], order[:n_fit])]
    blocks = np.array_split(order, folds)
    out = []
    for f in range(folds):
        fit = np.concatenate([b for g, b in enumerate(blocks) if g != f])
        out.append((fit, blocks[f]))
    return out


def _split_correlation(values: np.ndarray, rows: np.ndarray) -> CorrelationModel:
    if len(rows) < 2:
        raise DegenerateSplit("a split has fewer than 2 observations")
    try:
        return sample_correlation(values[rows])
    except ZeroVarianceColumn as exc:
        raise DegenerateSplit(f"zero-variance column {exc.column} in a split") from exc


def _offdiag_fro(m: np.ndarray) -> float:
    d = m.copy()
    np.fill_diagonal(d, 0.0)
    return float(np.linalg.norm(d))


def _low_rank_pinv_sandwich(x_left: np.ndarray, b: np.ndarray, sigma_z: np.ndarray,
                            x_right: np.ndarray) -> np.ndarray:
    """x_left @ pinv(b sigma_z b') @ x_right without forming the big pinv."""
    if b.shape[1] == 0:
        return np.zeros((x_left.shape[0], x_right.shape[1]))
    q, t = np.linalg.qr(b)
    inner = t @ sigma_z @ t.T
    inner_pinv = np.linalg.pinv(0.5 * (inner + inner.T), rcond=pinv_rcond(inner))
    return (x_left @ q) @ inner_pinv @ (q.T @ x_right)


def _blockwise_reconstruction(r_fit: np.ndarray, partition: GroupPartition,
                              b: np.ndarray, sigma_z: np.ndarray) -> np.ndarray:
    """Fitted correlation: low-rank block on the discovered set, observed
    cross blocks, and a pseudo-inverse sandwich on the complement."""
    p = r_fit.shape[0]
    h = list(partition.universe)
    hc = [j for j in range(p) if j not in set(h)]
    out = np.zeros((p, p))
    pure = b @ sigma_z @ b.T
    out[np.ix_(h, h)] = pure
    if hc:
        cross = r_fit[np.ix_(h, hc)]
        out[np.ix_(h, hc)] = cross
        out[np.ix_(hc, h)] = cross.T
        out[np.ix_(hc, hc)] = _low_rank_pinv_sandwich(cross.T, b, sigma_z, cross)
    return out


def _partition_loss(r_fit: np.ndarray, r_val: np.ndarray, scores_fit: ScoreTable,
                    q: float, partition: GroupPartition) -> float:
    if partition.g == 0:
        return _offdiag_fro(r_val)
    try:
        m_est = estimate_m(r_fit, partition, scores_fit, q)
        b = estimate_pure_loadings(r_fit, partition, m_est)
        sigma_z = estimate_sigma_z(r_fit, m_est.gamma_hat, b, partition)
    except (DegenerateRow, RankDeficientLoadings):
        return float("inf")
    fitted = _blockwise_reconstruction(r_fit, partition, b, sigma_z)
    return _offdiag_fro(r_val - fitted)


def _delta_grid(scores: ScoreTable, n_grid: int) -> np.ndarray:
    iu = np.triu_indices(scores.p, k=1)
    vals = scores.values[iu]
    hi = float(np.max(vals)) / 2.0
    lo = float(np.min(vals)) / 2.0
    if hi <= 0.0:
        return np.array([0.0])
    lo = max(lo, hi * 1e-10)
    if n_grid == 1:
        return np.array([hi])
    return np.exp(np.linspace(np.log(lo), np.log(hi), n_grid))


def _rate(p: int, n: int) -> float:
    return float(np.sqrt(np.log(max(p, n)) / n))


def cv_delta(x, q: float = 2.0, config: Optional[CvConfig] = None):
    """Select the score threshold by held-out reconstruction loss.

    The grid covers half the score range observed on the fit split; the
    search runs over the dimensionless constant c of
    ``delta(c) = c * sqrt(log(max(p, n)) / n)``, so that fitting inside a
    split and applying the result to the full sample use each sample's own
    deviation rate.  Returns (delta_star, diagnostics) with delta_star on
    the full-sample scale.
    """
    config = config or CvConfig()
    config.validate()
    values = _as_values(x)
    n, p = values.shape
    if n < 4:
        raise InvalidArgument(f"need n >= 4 to split, got n={n}")
    folds = _fold_splits(n, config.folds, config.split_seed)
    c_grid = None
    losses = None
    for fit_rows, val_rows in folds:
        corr_fit = _split_correlation(values, fit_rows)
        corr_val = _split_correlation(values, val_rows)
        scores_fit = score_table(corr_fit.r_hat, q)
        rate_fit = _rate(p, len(fit_rows))
        if c_grid is None:
            c_grid = _delta_grid(scores_fit, config.n_grid) / rate_fit
            losses = np.zeros(len(c_grid))
        partitions = partitions_for_ascending(scores_fit, c_grid * rate_fit)
        cache: dict = {}
        for g, partition in enumerate(partitions):
            key = partition.groups
            if key not in cache:
                cache[key] = _partition_loss(corr_fit.r_hat, corr_val.r_hat,
                                             scores_fit, q, partition)
            losses[g] += cache[key]
    best = int(np.argmin(losses))
    delta_star = float(c_grid[best]) * _rate(p, n)
    diagnostics = {
        "c_grid": [float(c) for c in c_grid],
        "losses": [float(v) for v in losses],
        "argmin": best,
        "c_star": float(c_grid[best]),
        "folds": config.folds,
        "split_seed": config.split_seed,
    }
    return delta_star, diagnostics


def _m_on_representatives(corr: CorrelationModel, partition: GroupPartition,
                          reps: RepresentativeSet, q: float) -> np.ndarray:
    scores = score_table(corr.r_hat, q)
    m_est = estimate_m(corr.r_hat, partition, scores, q)
    return m_est.restrict(reps.indices)


def _truncation_losses(m_fit: np.ndarray, m_val: np.ndarray) -> np.ndarray:
    """||M_k - m_val||_F^2 for every truncation rank k = 1..G of m_fit."""
    w, u = np.linalg.eigh(0.5 * (m_fit + m_fit.T))
    order = np.argsort(w)[::-1]
    w, u = w[order], u[:, order]
    g = len(w)
    losses = np.zeros(g)
    approx = np.zeros_like(m_fit)
    for k in range(g):
        approx = approx + w[k] * np.outer(u[:, k], u[:, k])
        losses[k] = np.sum((approx - m_val) ** 2)
    return losses


def cv_rank(x, partition: GroupPartition, representatives: RepresentativeSet,
            config: Optional[CvConfig] = None, q: float = 2.0,
            variant: str = "direct-k", delta_value: Optional[float] = None):
    """Select the latent dimension on held-out data.

    The default picks the truncation rank k in 1..G minimizing the
    validation loss directly.  The mu-grid variant scans the rank-threshold
    constant instead (it needs the selected delta to scale mu) and returns
    the selected mu.  Returns (k_hat_or_mu, diagnostics).
    """
    config = config or CvConfig()
    config.validate()
    if partition.g == 0:
        raise InvalidArgument("partition is empty")
    values = _as_values(x)
    n = values.shape[0]
    if n < 4:
        raise InvalidArgument(f"need n >= 4 to split, got n={n}")
    folds = _fold_splits(n, config.folds, config.split_seed)
    big_g = partition.g

    if variant == "direct-k":
        losses = np.zeros(big_g)
        for fit_rows, val_rows in folds:
            m_fit = _m_on_representatives(_split_correlation(values, fit_rows),
                                          partition, representatives, q)
            m_val = _m_on_representatives(_split_correlation(values, val_rows),
                                          partition, representatives, q)
            losses += _truncation_losses(m_fit, m_val)
        k_hat = int(np.argmin(losses)) + 1
        return k_hat, {"losses": [float(v) for v in losses], "variant": variant}

    if variant != "mu-grid":
        raise InvalidArgument(f"unknown cv_rank variant {variant!r}")
    if delta_value is None or delta_value <= 0:
        raise InvalidArgument("mu-grid variant needs the selected positive delta")
    mu_values = np.array([c * delta_value * (np.sqrt(big_g) + big_g * delta_value)
                          for c in config.mu_grid])
    losses = np.zeros(len(mu_values))
    for fit_rows, val_rows in folds:
        m_fit = _m_on_representatives(_split_correlation(values, fit_rows),
                                      partition, representatives, q)
        m_val = _m_on_representatives(_split_correlation(values, val_rows),
                                      partition, representatives, q)
        by_rank = _truncation_losses(m_fit, m_val)
        zero_loss = float(np.sum(m_val**2))
        for g, mu in enumerate(mu_values):
            k_mu, _ = estimate_k(m_fit, float(mu))
            losses[g] += by_rank[k_mu - 1] if k_mu >= 1 else zero_loss
    best = int(np.argmin(losses))
    diagnostics = {
        "mu_grid_constants": [float(c) for c in config.mu_grid],
        "mu_values": [float(v) for v in mu_values],
        "losses": [float(v) for v in losses],
        "variant": variant,
    }
    return float(mu_values[best]), diagnostics


def _noise_scale(p: int, n: int, q: float) -> float:
    factor = 1.0 if np.isinf(q) else float((p - 1) ** (1.0 / q))
    return factor * float(np.sqrt(np.log(max(p, n)) / n))


def prescreen(x, q: float = 2.0, config: Optional[CvConfig] = None):
    """Remove features whose leave-one-out correlation row norm falls below
    a threshold proportional to the deviation rate.

    The threshold constant is picked by split-half loss over a uniform grid
    between the 0% and 50% quantiles of the per-feature norm-to-rate
    ratios.  Returns (kept, removed, diagnostics) with kept preserving the
    original feature order.
    """
    config = config or CvConfig()
    config.validate()
    values = _as_values(x)
    n, p = values.shape
    if p < 3:
        raise InvalidArgument(f"need p >= 3, got p={p}")
    if n < 4:
        raise InvalidArgument(f"need n >= 4 to split, got n={n}")

    folds = _fold_splits(n, config.folds, config.split_seed)
    grid = None
    losses = None
    for fit_rows, val_rows in folds:
        corr_fit = _split_correlation(values, fit_rows)
        corr_val = _split_correlation(values, val_rows)
        norms_fit = leave_one_out_norms(corr_fit.r_hat, q)
        scale_fit = _noise_scale(p, len(fit_rows), q)
        if grid is None:
            ratios = norms_fit / scale_fit
            lo, hi = np.quantile(ratios, [0.0, 0.5])
            grid = np.linspace(lo, hi, config.n_grid)
            losses = np.zeros(len(grid))
        for g, c in enumerate(grid):
            removed = norms_fit <= c * scale_fit
            fitted = corr_fit.r_hat.copy()
            fitted[removed, :] = 0.0
            fitted[:, removed] = 0.0
            losses[g] += _offdiag_fro(corr_val.r_hat - fitted)
    best = int(np.argmin(losses))
    c_star = float(grid[best])

    corr_full = sample_correlation(values)
    norms_full = leave_one_out_norms(corr_full.r_hat, q)
    removed_mask = norms_full <= c_star * _noise_scale(p, n, q)
    removed = [int(j) for j in np.flatnonzero(removed_mask)]
    kept = [int(j) for j in np.flatnonzero(~removed_mask)]
    if not kept:
        raise AllRemoved("pre-screening removed every feature")
    diagnostics = {
        "grid": [float(c) for c in grid],
        "losses": [float(v) for v in losses],
        "c_star": c_star,
        "split_seed": config.split_seed,
    }
    return kept, removed, diagnostics
