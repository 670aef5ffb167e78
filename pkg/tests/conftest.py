"""Shared random-model builders for the test suite.

All builders return population objects (loading matrix, factor covariance,
implied covariance/correlation) with the generating group structure, so
tests can compare estimator output against exact truth.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pytest

from replicadetect import CorrelationModel


def random_correlation(rng, p: int) -> np.ndarray:
    """A random positive-definite correlation matrix."""
    a = rng.standard_normal((p, p + 2))
    s = a @ a.T + 0.05 * p * np.eye(p)
    d = 1.0 / np.sqrt(np.diag(s))
    r = s * np.outer(d, d)
    np.fill_diagonal(r, 1.0)
    return r


@dataclass(frozen=True)
class PopulationModel:
    a: np.ndarray
    sigma_z: np.ndarray
    sigma_e: np.ndarray
    sigma: np.ndarray
    groups: Tuple[Tuple[int, ...], ...]
    k: int

    @property
    def r(self) -> np.ndarray:
        return CorrelationModel.from_covariance(self.sigma).r_hat

    @property
    def h(self) -> Tuple[int, ...]:
        return tuple(sorted(i for g in self.groups for i in g))


def _factor_cov(rng, k: int) -> np.ndarray:
    while True:
        m = rng.standard_normal((k, k + 1))
        s = m @ m.T + 0.3 * np.eye(k)
        d = 1.0 / np.sqrt(np.diag(s))
        sz = s * np.outer(d, d)
        np.fill_diagonal(sz, 1.0)
        if np.linalg.eigvalsh(sz)[0] > 0.05:
            return sz


def parallel_row_model(rng, k: int = None, extra_groups: int = None,
                       n_free: int = None) -> PopulationModel:
    """A model with groups of parallel loading rows (general directions).

    The first k group directions are well conditioned so the parallel rows
    span all factors; remaining rows are random and almost surely not
    parallel to anything.
    """
    k = int(k if k is not None else rng.integers(2, 6))
    g = k + int(extra_groups if extra_groups is not None else rng.integers(0, 3))
    while True:
        base = rng.standard_normal((g, k))
        base /= np.linalg.norm(base, axis=1, keepdims=True)
        if np.linalg.svd(base[:k], compute_uv=False)[-1] > 0.35:
            break
    rows, groups = [], []
    idx = 0
    for gg in range(g):
        members = []
        for t in range(int(rng.integers(2, 4))):
            sign = 1.0 if t == 0 else float(rng.choice([-1.0, 1.0]))
            rows.append(sign * rng.uniform(0.5, 1.5) * base[gg])
            members.append(idx)
            idx += 1
        groups.append(tuple(members))
    n_free = int(n_free if n_free is not None else rng.integers(2, 6))
    for _ in range(n_free):
        rows.append(rng.uniform(0.5, 1.5) * rng.standard_normal(k))
        idx += 1
    a = np.asarray(rows)
    sigma_z = _factor_cov(rng, k)
    sigma_e = rng.uniform(0.3, 1.0, size=a.shape[0])
    sigma = a @ sigma_z @ a.T + np.diag(sigma_e)
    return PopulationModel(a=a, sigma_z=sigma_z, sigma_e=sigma_e, sigma=sigma,
                           groups=tuple(groups), k=k)


def pure_variable_model(rng, k: int = None, with_j1: bool = True,
                        n_other: int = None) -> PopulationModel:
    """A canonical-parametrization model: two or three pure variables per
    factor, optionally a group of parallel non-pure rows whose weighted
    l1 mass stays below the per-factor maxima, plus free rows under the
    same budget.

    ``groups`` holds the pure partition only.
    """
    k = int(k if k is not None else rng.integers(2, 6))
    rows, groups = [], []
    idx = 0
    for kk in range(k):
        members = []
        for t in range(int(rng.integers(2, 4))):
            e = np.zeros(k)
            sign = 1.0 if t == 0 else float(rng.choice([-1.0, 1.0]))
            e[kk] = sign * rng.uniform(0.5, 1.5)
            rows.append(e)
            members.append(idx)
            idx += 1
        groups.append(tuple(members))
    xi = np.array([max(abs(rows[i][kk]) for i in groups[kk]) for kk in range(k)])

    def budget_row(target):
        w = rng.standard_normal(k)
        return w / np.sum(np.abs(w) / xi) * target

    if with_j1:
        base = budget_row(rng.uniform(0.6, 0.9))
        rows.append(base)
        rows.append(base * rng.uniform(0.3, 0.9) * float(rng.choice([-1.0, 1.0])))
        idx += 2
    n_other = int(n_other if n_other is not None else rng.integers(2, 6))
    for _ in range(n_other):
        rows.append(budget_row(rng.uniform(0.4, 0.9)))
        idx += 1
    a = np.asarray(rows)
    sigma_z = _factor_cov(rng, k)
    sigma_e = rng.uniform(0.3, 1.0, size=a.shape[0])
    sigma = a @ sigma_z @ a.T + np.diag(sigma_e)
    return PopulationModel(a=a, sigma_z=sigma_z, sigma_e=sigma_e, sigma=sigma,
                           groups=tuple(groups), k=k)


def min_nonzero_score(table_values: np.ndarray, tol: float = 1e-8) -> float:
    iu = np.triu_indices(table_values.shape[0], k=1)
    vals = table_values[iu]
    return float(np.min(vals[vals > tol]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
