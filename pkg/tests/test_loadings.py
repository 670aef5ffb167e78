import numpy as np
import pytest

from replicadetect import (
    CorrelationModel,
    GroupPartition,
    align_signed_permutation,
    estimate_a,
    estimate_bj_plugin,
    estimate_m,
    estimate_pure_loadings,
    estimate_sigma_z,
    find_parallel,
    fit_from_correlation,
    min_signed_permutation_distance,
    score_table,
    select_representatives,
)
from replicadetect.errors import InvalidArgument, RankDeficientLoadings
from replicadetect.loadings import apply_to_columns, apply_to_gram

from conftest import min_nonzero_score, pure_variable_model


def fit_population(model):
    corr = CorrelationModel.from_covariance(model.sigma)
    table = score_table(corr.r_hat, 2.0)
    delta = min_nonzero_score(table.values) / 4.0
    part = find_parallel(table, delta)
    reps = select_representatives(corr.r_hat, part)
    m_est = estimate_m(corr.r_hat, part, table)
    eig = np.linalg.eigvalsh(m_est.restrict(reps.indices))[::-1]
    return fit_from_correlation(corr, 2.0, delta, mu=eig[model.k - 1] / 2), corr


def two_group_model(load_a=0.9, load_b=-0.6):
    a = np.array([[load_a, 0.0], [load_b, 0.0], [0.0, 0.8], [0.0, 0.5],
                  [0.3, 0.2]])
    sigma_z = np.array([[1.0, 0.3], [0.3, 1.0]])
    sigma_e = np.diag([0.4, 0.5, 0.6, 0.7, 0.5])
    sigma = a @ sigma_z @ a.T + sigma_e
    return a, sigma_z, sigma


def test_pure_loadings_exact_signs():
    a, sigma_z, sigma = two_group_model()
    corr = CorrelationModel.from_covariance(sigma)
    table = score_table(corr.r_hat, 2.0)
    part = GroupPartition.from_groups([(0, 1), (2, 3)])
    m_est = estimate_m(corr.r_hat, part, table)
    b = estimate_pure_loadings(corr.r_hat, part, m_est)
    b_true = a / np.sqrt(np.diag(sigma))[:, None]
    assert b[0, 0] == pytest.approx(b_true[0, 0], abs=1e-8)
    assert b[1, 0] == pytest.approx(b_true[1, 0], abs=1e-8)  # negative recovered
    assert b[2, 1] == pytest.approx(b_true[2, 1], abs=1e-8)
    assert b[3, 1] == pytest.approx(b_true[3, 1], abs=1e-8)


def test_pure_loadings_identical_unit_pair():
    a = np.array([[1.0], [1.0], [0.4]])
    sigma = a @ a.T + np.diag([0.0, 0.0, 0.6])
    corr = CorrelationModel.from_covariance(sigma)
    table = score_table(corr.r_hat, 2.0)
    part = GroupPartition.from_groups([(0, 1)])
    m_est = estimate_m(corr.r_hat, part, table)
    b = estimate_pure_loadings(corr.r_hat, part, m_est)
    assert b[:, 0] == pytest.approx([1.0, 1.0], abs=1e-10)


def test_pure_loadings_negative_anchor_flips_column():
    # truth has a negative anchor loading; the estimate equals truth times -1
    a, sigma_z, sigma = two_group_model(load_a=-0.9, load_b=0.6)
    corr = CorrelationModel.from_covariance(sigma)
    table = score_table(corr.r_hat, 2.0)
    part = GroupPartition.from_groups([(0, 1), (2, 3)])
    m_est = estimate_m(corr.r_hat, part, table)
    b = estimate_pure_loadings(corr.r_hat, part, m_est)
    b_true = (a / np.sqrt(np.diag(sigma))[:, None])[[0, 1, 2, 3]]
    assert b[0, 0] == pytest.approx(-b_true[0, 0], abs=1e-8)
    assert b[1, 0] == pytest.approx(-b_true[1, 0], abs=1e-8)
    assert b[0, 0] >= 0.0


def test_anchor_signs_nonnegative(rng):
    for _ in range(5):
        model = pure_variable_model(rng)
        result, _ = fit_population(model)
        est = result.estimate
        for k, members in enumerate(est.pure_partition.groups):
            row = est.pure_partition.universe.index(members[0])
            assert est.b_hat[members[0], k] >= 0.0


def test_sigma_z_single_factor():
    a = np.array([[1.0], [0.7], [0.4]])
    sigma = a @ a.T + np.diag([0.3, 0.4, 0.5])
    corr = CorrelationModel.from_covariance(sigma)
    table = score_table(corr.r_hat, 2.0)
    part = GroupPartition.from_groups([(0, 1)])
    m_est = estimate_m(corr.r_hat, part, table)
    b = estimate_pure_loadings(corr.r_hat, part, m_est)
    gamma = m_est.gamma_hat[:2]
    sz = estimate_sigma_z(corr.r_hat, gamma, b, part)
    assert sz.shape == (1, 1) and sz[0, 0] == 1.0


def test_sigma_z_offdiagonal_recovery():
    a, sigma_z, sigma = two_group_model()
    corr = CorrelationModel.from_covariance(sigma)
    table = score_table(corr.r_hat, 2.0)
    part = GroupPartition.from_groups([(0, 1), (2, 3)])
    m_est = estimate_m(corr.r_hat, part, table)
    b = estimate_pure_loadings(corr.r_hat, part, m_est)
    sz = estimate_sigma_z(corr.r_hat, m_est.gamma_hat[:4], b, part)
    assert sz[0, 1] == pytest.approx(0.3, abs=1e-8)
    assert np.array_equal(sz, sz.T)
    assert np.all(np.diag(sz) == 1.0)


def test_sigma_z_independent_factors(rng):
    a = np.array([[1.0, 0.0], [0.7, 0.0], [0.0, 0.9], [0.0, 0.6], [0.2, 0.3]])
    sigma = a @ a.T + np.diag(np.full(5, 0.5))
    corr = CorrelationModel.from_covariance(sigma)
    table = score_table(corr.r_hat, 2.0)
    part = GroupPartition.from_groups([(0, 1), (2, 3)])
    m_est = estimate_m(corr.r_hat, part, table)
    b = estimate_pure_loadings(corr.r_hat, part, m_est)
    sz = estimate_sigma_z(corr.r_hat, m_est.gamma_hat[:4], b, part)
    assert abs(sz[0, 1]) <= 1e-8


def test_sigma_z_rank_deficient():
    r = np.eye(4)
    part = GroupPartition.from_groups([(0, 1), (2, 3)])
    b = np.zeros((4, 2))
    with pytest.raises(RankDeficientLoadings):
        estimate_sigma_z(r, np.zeros(4), b, part)


def test_estimate_a_scaling():
    b = np.array([[0.5, 0.1], [0.2, 0.3]])
    assert np.array_equal(estimate_a(b, np.ones(2)), b)
    scaled = estimate_a(b, np.array([4.0, 9.0]))
    assert np.allclose(scaled, b * np.array([[2.0], [3.0]]))
    with pytest.raises(InvalidArgument):
        estimate_a(b, np.array([1.0, 0.0]))


def test_bj_plugin_empty():
    out = estimate_bj_plugin(np.eye(2), np.ones((4, 2)), np.zeros((4, 0)))
    assert out.shape == (0, 2)


def test_bj_plugin_exact_mixed_row(rng):
    model = pure_variable_model(rng, k=2, with_j1=False, n_other=3)
    result, corr = fit_population(model)
    est = result.estimate
    b_true = model.a / np.sqrt(np.diag(model.sigma))[:, None]
    dist = min_signed_permutation_distance(est.b_hat, b_true, norm="inf")
    assert dist <= 1e-8


def test_bj_plugin_identity_reduction(rng):
    # sigma_z = I and orthonormal pure columns: plug-in reduces to B_I^+ R_IJ
    b_pure = np.array([[1.0, 0.0], [0.0, 1.0]])
    r_cross = rng.standard_normal((2, 3)) * 0.1
    out = estimate_bj_plugin(np.eye(2), b_pure, r_cross)
    assert np.allclose(out, (np.linalg.pinv(b_pure) @ r_cross).T, atol=1e-12)


def test_alignment_exhaustive_exact(rng):
    for k in (2, 4, 6):
        ref = rng.standard_normal((12, k))
        perm = rng.permutation(k)
        signs = rng.choice([-1.0, 1.0], size=k)
        est = apply_to_columns(ref, perm, signs)
        got_perm, got_signs = align_signed_permutation(est, ref, norm="inf")
        assert np.array_equal(got_perm, perm)
        assert np.array_equal(got_signs, signs)
        assert min_signed_permutation_distance(est, ref, norm="inf") <= 1e-12


def test_alignment_greedy_large_k(rng):
    k = 10
    ref = rng.standard_normal((40, k))
    perm = rng.permutation(k)
    signs = rng.choice([-1.0, 1.0], size=k)
    est = apply_to_columns(ref, perm, signs)
    got_perm, got_signs = align_signed_permutation(est, ref, norm="fro")
    assert np.array_equal(got_perm, perm)
    assert np.array_equal(got_signs, signs)


def test_apply_to_gram_consistency(rng):
    k = 4
    m = rng.standard_normal((k, k))
    m = m @ m.T
    perm = rng.permutation(k)
    signs = rng.choice([-1.0, 1.0], size=k)
    p_mat = np.zeros((k, k))
    p_mat[np.arange(k), perm] = signs
    direct = p_mat @ m @ p_mat.T
    assert np.allclose(apply_to_gram(m, perm, signs), direct, atol=1e-12)


def test_population_full_pipeline_signed_permutation(rng):
    for _ in range(10):
        model = pure_variable_model(rng, with_j1=True)
        result, _ = fit_population(model)
        est = result.estimate
        assert min_signed_permutation_distance(est.a_hat, model.a, norm="inf") <= 1e-7


def test_factor_estimate_json(rng):
    model = pure_variable_model(rng, with_j1=False)
    result, _ = fit_population(model)
    obj = result.estimate.to_json_dict()
    assert obj["k_hat"] == model.k
    assert len(obj["b_hat"]) == model.a.shape[0]
    # gamma entries outside the discovered set serialize as null
    outside = [g for i, g in enumerate(obj["gamma"]) if i not in set(result.estimate.pure_partition.universe)]
    assert all(g is None or isinstance(g, float) for g in outside)
