"""End-to-end fitting: scores, group discovery, rank, pruning, loadings.

`fit` runs the whole procedure on a data matrix, resolving thresholds by
cross-validation when asked, and returns the estimate together with the
diagnostics needed to audit the run.  `fit_from_correlation` is the core
on a ready-made correlation model (also the population path used when an
exact covariance is available).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .corr import CorrelationModel, DataMatrix, sample_correlation
from .errors import InvalidArgument, NoParallelPairs, RankZero
from .loadings import (
    FactorEstimate,
    estimate_a,
    estimate_bj_plugin,
    estimate_pure_loadings,
    estimate_sigma_z,
)
from .parallel import GroupPartition, find_parallel
from .prune import PruneTrace, estimate_theta, prune_greedy
from .rank import estimate_k, estimate_m, select_representatives
from .score import score_table
from .tuning import CvConfig, cv_delta, cv_rank, prescreen


@dataclass(frozen=True)
class FitConfig:
    """Everything that determines a fit besides the data."""

    q: float = 2.0
    delta: Union[float, str] = "cv"
    mu: Union[float, str] = "cv-direct-k"
    prescreen: bool = False
    center: bool = True
    average_m_diag: bool = False
    compute_loadings: bool = True
    folds: int = 2
    split_seed: int = 0
    n_grid: int = 50
    # by default the rank selection reuses the threshold-selection split;
    # set this to re-randomize it
    rank_split_seed: Optional[int] = None

    def cv_config(self) -> CvConfig:
        return CvConfig(n_grid=self.n_grid, split_seed=self.split_seed, folds=self.folds)

    def rank_cv_config(self) -> CvConfig:
        seed = self.split_seed if self.rank_split_seed is None else self.rank_split_seed
        return CvConfig(n_grid=self.n_grid, split_seed=seed, folds=self.folds)


@dataclass(frozen=True)
class FitResult:
    estimate: FactorEstimate
    diagnostics: dict


def fit_from_correlation(corr: CorrelationModel, q: float = 2.0,
                         delta: float = 0.0, mu: Optional[float] = None,
                         k_hat: Optional[int] = None,
                         average_m_diag: bool = False,
                         compute_loadings: bool = True) -> FitResult:
    """Run discovery, rank selection, pruning and loadings on a correlation
    model with explicit thresholds.

    Either ``mu`` (eigenvalue threshold) or ``k_hat`` (rank picked
    elsewhere, e.g. by cross-validation) must be given.
    """
    scores = score_table(corr.r_hat, q)
    partition = find_parallel(scores, delta)
    if partition.g == 0:
        raise NoParallelPairs(f"no score at or below 2 * {delta}")
    reps = select_representatives(corr.r_hat, partition, q)
    m_est = estimate_m(corr.r_hat, partition, scores, q, average_m_diag)
    m_ll = m_est.restrict(reps.indices)
    eigenvalues = np.linalg.eigvalsh(0.5 * (m_ll + m_ll.T))[::-1]
    if k_hat is None:
        if mu is None:
            raise InvalidArgument("either mu or k_hat must be given")
        k_hat, eigenvalues = estimate_k(m_ll, mu)
        if k_hat == 0:
            raise RankZero(f"all eigenvalues below mu={mu}")
    else:
        k_hat = int(k_hat)
        if not (1 <= k_hat <= partition.g):
            raise InvalidArgument(f"k_hat={k_hat} outside 1..{partition.g}")

    if k_hat < partition.g:
        theta = estimate_theta(corr.sigma_hat, m_est.gamma_hat, m_est.index_set)
        pure, trace = prune_greedy(theta, k_hat, partition)
    else:
        pure, trace = partition, PruneTrace(selected=(), schur_values=(), r=0)

    p = corr.p
    b_hat = a_hat = sigma_z = None
    gamma_full = np.full(p, np.nan)
    h_pos = {v: k for k, v in enumerate(m_est.index_set)}
    for v, k in h_pos.items():
        gamma_full[v] = m_est.gamma_hat[k]
    if compute_loadings:
        b_pure = estimate_pure_loadings(corr.r_hat, pure, m_est)
        gamma_pure = np.array([m_est.gamma_hat[h_pos[i]] for i in pure.universe])
        sigma_z = estimate_sigma_z(corr.r_hat, gamma_pure, b_pure, pure)
        b_hat = np.zeros((p, pure.g))
        i_idx = list(pure.universe)
        for row, v in enumerate(i_idx):
            b_hat[v] = b_pure[row]
        j_idx = [j for j in range(p) if j not in set(i_idx)]
        if j_idx:
            b_hat[j_idx] = estimate_bj_plugin(sigma_z, b_pure,
                                              corr.r_hat[np.ix_(i_idx, j_idx)])
        a_hat = estimate_a(b_hat, corr.diag)

    estimate = FactorEstimate(k_hat=k_hat, pure_partition=pure, b_hat=b_hat,
                              a_hat=a_hat, sigma_z_hat=sigma_z,
                              gamma_hat=gamma_full, trace=trace)
    diagnostics = {
        "q": "inf" if np.isinf(q) else float(q),
        "delta": float(delta),
        "mu": None if mu is None else float(mu),
        "g_hat": partition.g,
        "k_hat": k_hat,
        "groups_all": [list(g) for g in partition.groups],
        "representatives": list(reps.indices),
        "m_ll_eigenvalues": [float(v) for v in eigenvalues],
        "trace": trace.to_json_dict(),
    }
    return FitResult(estimate=estimate, diagnostics=diagnostics)


def _map_indices(estimate: FactorEstimate, kept: list, p_orig: int) -> FactorEstimate:
    """Translate a fit on screened columns back to original coordinates."""
    back = np.asarray(kept, dtype=int)
    groups = [[int(back[i]) for i in g] for g in estimate.pure_partition.groups]
    pure = GroupPartition.from_groups(groups)
    b = a = None
    if estimate.b_hat is not None:
        b = np.zeros((p_orig, estimate.b_hat.shape[1]))
        b[back] = estimate.b_hat
        a = np.zeros((p_orig, estimate.a_hat.shape[1]))
        a[back] = estimate.a_hat
    gamma = np.full(p_orig, np.nan)
    gamma[back] = estimate.gamma_hat
    trace = estimate.trace
    if trace is not None and trace.selected:
        trace = PruneTrace(selected=tuple(int(back[i]) for i in trace.selected),
                           schur_values=trace.schur_values, r=trace.r)
    return FactorEstimate(k_hat=estimate.k_hat, pure_partition=pure, b_hat=b,
                          a_hat=a, sigma_z_hat=estimate.sigma_z_hat,
                          gamma_hat=gamma, trace=trace)


def fit(x, config: Optional[FitConfig] = None) -> FitResult:
    """Fit the full model on a data matrix, with optional pre-screening and
    cross-validated thresholds."""
    config = config or FitConfig()
    dm = x if isinstance(x, DataMatrix) else DataMatrix(values=np.asarray(x, dtype=float))
    dm.validate()
    p_orig = dm.p
    cv = config.cv_config()
    diagnostics: dict = {"n": dm.n, "p": p_orig, "config": {
        "q": "inf" if np.isinf(config.q) else float(config.q),
        "delta": config.delta, "mu": config.mu, "prescreen": config.prescreen,
        "center": config.center, "folds": config.folds,
        "split_seed": config.split_seed, "n_grid": config.n_grid,
    }}

    kept = list(range(p_orig))
    values = dm.values
    if config.prescreen:
        kept, removed, screen_diag = prescreen(dm, config.q, cv)
        diagnostics["prescreen"] = {"kept": kept, "removed": removed,
                                    "c_star": screen_diag["c_star"]}
        values = dm.values[:, kept]

    work = DataMatrix(values=values)
    if config.delta == "cv":
        delta, delta_diag = cv_delta(work, config.q, cv)
        diagnostics["cv_delta"] = delta_diag
    else:
        delta = float(config.delta)

    corr = sample_correlation(work, center=config.center)
    scores = score_table(corr.r_hat, config.q)
    partition = find_parallel(scores, delta)
    if partition.g == 0:
        raise NoParallelPairs(f"no score at or below 2 * {delta}")
    reps = select_representatives(corr.r_hat, partition, config.q)

    mu = k_hat = None
    if config.mu == "cv-direct-k":
        k_hat, rank_diag = cv_rank(work, partition, reps, config.rank_cv_config(),
                                   config.q, "direct-k")
        diagnostics["cv_rank"] = rank_diag
    elif config.mu == "cv-mu-grid":
        mu, rank_diag = cv_rank(work, partition, reps, config.rank_cv_config(),
                                config.q, "mu-grid", delta_value=delta)
        diagnostics["cv_rank"] = rank_diag
    else:
        mu = float(config.mu)

    result = fit_from_correlation(corr, config.q, delta, mu=mu, k_hat=k_hat,
                                  average_m_diag=config.average_m_diag,
                                  compute_loadings=config.compute_loadings)
    estimate = result.estimate
    diagnostics.update(result.diagnostics)
    if config.prescreen:
        estimate = _map_indices(estimate, kept, p_orig)
        diagnostics["groups_all"] = [[kept[i] for i in g]
                                     for g in diagnostics["groups_all"]]
        diagnostics["representatives"] = [kept[i] for i in diagnostics["representatives"]]
        diagnostics["trace"] = estimate.trace.to_json_dict() if estimate.trace else None
    return FitResult(estimate=estimate, diagnostics=diagnostics)


def pvs(x, q: float = 2.0, delta: Union[float, str] = "cv",
        mu: Union[float, str] = "cv-direct-k", **options) -> FactorEstimate:
    """Pure variable selection on a data matrix; returns the fitted model."""
    return fit(x, FitConfig(q=q, delta=delta, mu=mu, **options)).estimate
