import numpy as np
import pytest

from replicadetect import (
    CorrelationModel,
    GroupPartition,
    estimate_m,
    estimate_theta,
    find_parallel,
    fit_from_correlation,
    prune_greedy,
    schur_complement_diag,
    score_table,
    select_representatives,
)
from replicadetect.errors import InvalidR, NoParallelPairs
from replicadetect.prune import ThetaEstimate

from conftest import min_nonzero_score, pure_variable_model


def example_two_theta():
    """The six-variable denoised covariance: two factors, pure groups
    {0,1} and {2,3}, mixed rows 4 and 5."""
    a = np.array([[1.1, 0.0], [0.8, 0.0], [0.0, 1.0], [0.0, 0.5],
                  [0.2, 0.4], [-0.3, -0.6]])
    theta = a @ a.T
    return ThetaEstimate(theta_hat=theta, index_set=tuple(range(6)))


def test_estimate_theta_zero_gamma(rng):
    sigma = np.array([[2.0, 0.3], [0.3, 1.5]])
    theta = estimate_theta(sigma, np.zeros(2), [0, 1])
    assert np.array_equal(theta.theta_hat, sigma)


def test_estimate_theta_full_gamma():
    sigma = np.array([[2.0, 0.3], [0.3, 1.5]])
    theta = estimate_theta(sigma, np.ones(2), [0, 1])
    assert np.allclose(np.diag(theta.theta_hat), 0.0)
    assert theta.theta_hat[0, 1] == 0.3


def test_estimate_theta_population_exact(rng):
    model = pure_variable_model(rng)
    corr = CorrelationModel.from_covariance(model.sigma)
    table = score_table(corr.r_hat, 2.0)
    part = find_parallel(table, min_nonzero_score(table.values) / 4.0)
    m_est = estimate_m(corr.r_hat, part, table)
    theta = estimate_theta(corr.sigma_hat, m_est.gamma_hat, m_est.index_set)
    h = list(theta.index_set)
    truth = (model.a @ model.sigma_z @ model.a.T)[np.ix_(h, h)]
    assert np.max(np.abs(theta.theta_hat - truth)) <= 1e-10


def test_schur_empty_set():
    theta = example_two_theta()
    assert schur_complement_diag(theta, [], 0) == pytest.approx(1.21)


def test_schur_conditioning_on_self():
    theta = example_two_theta()
    assert schur_complement_diag(theta, [0], 0) == pytest.approx(0.0, abs=1e-12)


def test_schur_example_conditional_variances():
    theta = example_two_theta()
    assert np.diag(theta.theta_hat) == pytest.approx([1.21, 0.64, 1.0, 0.25, 0.2, 0.45])
    v3 = schur_complement_diag(theta, [0], 2)
    assert v3 == pytest.approx(1.0)
    for j in (4, 5):
        assert v3 >= schur_complement_diag(theta, [0], j)


def test_prune_example_two():
    theta = example_two_theta()
    part = GroupPartition.from_groups([(0, 1), (2, 3), (4, 5)])
    pruned, trace = prune_greedy(theta, 2, part)
    assert trace.selected[0] == 0
    assert trace.schur_values[0] == pytest.approx(1.21)
    assert trace.selected[1] in (2, 3)
    assert pruned.groups == ((0, 1), (2, 3))


def test_prune_passthrough():
    theta = example_two_theta()
    part = GroupPartition.from_groups([(0, 1), (2, 3), (4, 5)])
    pruned, trace = prune_greedy(theta, 3, part)
    assert pruned == part
    assert trace.selected == () and trace.r == 0


def test_prune_invalid_r():
    theta = example_two_theta()
    part = GroupPartition.from_groups([(0, 1), (2, 3)])
    with pytest.raises(InvalidR):
        prune_greedy(theta, 0, part)
    with pytest.raises(InvalidR):
        prune_greedy(theta, 3, part)


def test_prune_one_index_per_pure_group(rng):
    for _ in range(10):
        model = pure_variable_model(rng, k=3)
        theta_mat = model.a @ model.sigma_z @ model.a.T
        # the discovered set is the pure set plus the two parallel mixed rows
        n_pure = len(model.h)
        h = list(model.h) + [n_pure, n_pure + 1]
        theta = ThetaEstimate(theta_hat=theta_mat[np.ix_(h, h)], index_set=tuple(h))
        part = GroupPartition.from_groups(list(model.groups) + [(n_pure, n_pure + 1)])
        pruned, trace = prune_greedy(theta, 3, part)
        group_of = {}
        for g, members in enumerate(model.groups):
            for i in members:
                group_of[i] = g
        hit = [group_of.get(i, -1) for i in trace.selected]
        assert -1 not in hit, "selected a non-pure row"
        assert len(set(hit)) == 3, "two selections in the same pure group"
        assert pruned.groups == tuple(sorted(model.groups, key=lambda g: g[0]))


def test_no_reselection_and_subset(rng):
    for _ in range(20):
        p = int(rng.integers(4, 10))
        u = rng.standard_normal((p, p))
        theta = ThetaEstimate(theta_hat=u @ u.T, index_set=tuple(range(p)))
        groups = [(i, i + 1) for i in range(0, p - 1, 2)]
        part = GroupPartition.from_groups(groups)
        r = int(rng.integers(1, part.g + 1))
        pruned, trace = prune_greedy(theta, r, part)
        assert len(set(trace.selected)) == len(trace.selected)
        assert set(pruned.groups) <= set(part.groups)


def test_schur_nonnegative_on_psd(rng):
    for _ in range(50):
        p = int(rng.integers(3, 10))
        u = rng.standard_normal((p, max(1, p - 2)))
        theta = ThetaEstimate(theta_hat=u @ u.T, index_set=tuple(range(p)))
        s_size = int(rng.integers(0, p - 1))
        s = list(rng.choice(p, size=s_size, replace=False))
        j = int(rng.integers(0, p))
        assert schur_complement_diag(theta, s, j) >= -1e-8


def test_schur_monotone_in_conditioning_set(rng):
    for _ in range(30):
        p = int(rng.integers(4, 10))
        u = rng.standard_normal((p, p))
        theta = ThetaEstimate(theta_hat=u @ u.T, index_set=tuple(range(p)))
        perm = rng.permutation(p)
        j = int(perm[-1])
        small = list(perm[:2])
        big = list(perm[:4])
        assert (schur_complement_diag(theta, small, j)
                >= schur_complement_diag(theta, big, j) - 1e-8)


def test_pipeline_passthrough_when_rank_equals_groups(rng):
    model = pure_variable_model(rng, with_j1=False)
    corr = CorrelationModel.from_covariance(model.sigma)
    table = score_table(corr.r_hat, 2.0)
    delta = min_nonzero_score(table.values) / 4.0
    part = find_parallel(table, delta)
    reps = select_representatives(corr.r_hat, part)
    m_est = estimate_m(corr.r_hat, part, table)
    eig = np.linalg.eigvalsh(m_est.restrict(reps.indices))[::-1]
    result = fit_from_correlation(corr, 2.0, delta, mu=eig[model.k - 1] / 2)
    assert result.estimate.pure_partition == part
    assert result.estimate.trace.selected == ()


def test_pipeline_population_recovery(rng):
    model = pure_variable_model(rng, with_j1=True)
    corr = CorrelationModel.from_covariance(model.sigma)
    table = score_table(corr.r_hat, 2.0)
    delta = min_nonzero_score(table.values) / 4.0
    part = find_parallel(table, delta)
    reps = select_representatives(corr.r_hat, part)
    m_est = estimate_m(corr.r_hat, part, table)
    eig = np.linalg.eigvalsh(m_est.restrict(reps.indices))[::-1]
    result = fit_from_correlation(corr, 2.0, delta, mu=eig[model.k - 1] / 2)
    assert result.estimate.k_hat == model.k
    assert result.estimate.pure_partition.groups == tuple(
        sorted(model.groups, key=lambda g: g[0]))


def test_pipeline_no_parallel_pairs(rng):
    x = rng.standard_normal((50, 8))
    corr = CorrelationModel.from_covariance(np.cov(x.T))
    with pytest.raises(NoParallelPairs):
        fit_from_correlation(corr, 2.0, 0.0, mu=0.1)
