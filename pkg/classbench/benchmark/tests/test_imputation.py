import logging

import numpy as np
import pytest

from classbench.benchmark.logic import EmConvergenceError, ImputationError
from classbench.benchmark.logic.imputation import (ImputationConfig, NormalModelState, _cholesky, da_step, em_mle,
                                                   impute_summary, mean_mode_impute, missingness_summary,
                                                   multiple_impute, observed_loglikelihood, run_multiple_imputation,
                                                   with_seed)
from classbench.benchmark.tests.common import make_dataset

TRUE_MEAN = np.array([1.0, -2.0, 0.5, 3.0])
TRUE_COVARIANCE = np.array([
    [1.0, 0.6, 0.3, 0.0],
    [0.6, 2.0, 0.5, 0.4],
    [0.3, 0.5, 1.5, 0.2],
    [0.0, 0.4, 0.2, 0.8],
])


def normal_sample(n=500, missing=0.2, seed=12):
    rng = np.random.default_rng(seed)
    complete = rng.multivariate_normal(TRUE_MEAN, TRUE_COVARIANCE, size=n)
    x = complete.copy()
    x[rng.random(x.shape) < missing] = np.nan
    # keep at least one observed value per row
    empty = np.isnan(x).all(axis=1)
    x[empty, 0] = complete[empty, 0]
    return complete, x


def as_dataset(x, seed=0):
    labels = np.random.default_rng(seed).integers(0, 2, x.shape[0])
    return make_dataset(np.column_stack([x, labels]), 'n' * x.shape[1] + 'c')


def test_config():
    cfg = ImputationConfig.from_settings(m=3, thin=None)
    assert cfg.m == 3
    # settings.CLASSBENCH_IMPUTATION
    assert cfg.thin == 100 and cfg.burn_in == 200 and cfg.em_max_iter == 1000

    for arguments in [{'m': 0}, {'burn_in': -1}, {'thin': 0}, {'em_tol': 0}, {'em_max_iter': 0}]:
        with pytest.raises(ImputationError):
            ImputationConfig(**arguments)

    assert with_seed(cfg, 1) == with_seed(cfg, 1)
    assert with_seed(cfg, 1).seed != with_seed(cfg, 2).seed
    assert with_seed(cfg, 1).m == 3


def test_normal_model_state():
    state = NormalModelState(mean=[0, 0], covariance=[[1, 0.5], [0.5, 1]])
    assert state.mean.shape == (2,)

    with pytest.raises(ImputationError):
        NormalModelState(mean=[0, 0], covariance=[[1, 0.5], [0.4, 1]])
    with pytest.raises(ImputationError):
        NormalModelState(mean=[0, 0, 0], covariance=[[1, 0], [0, 1]])


def test_missingness_summary():
    d = make_dataset([[1, np.nan, 0], [np.nan, np.nan, 1], [3, 4, 0], [4, 5, np.nan]], 'nnc')
    summary = missingness_summary(d)
    assert summary.attribute_fractions == {'a0': 0.25, 'a1': 0.5, 'a2': 0.25}
    assert summary.overall == pytest.approx(4 / 12)
    assert summary.affected_attributes == 3
    assert summary.affected_instances == 3


def test_mean_mode_impute():
    d = make_dataset([[1, 0, 0], [np.nan, 1, 1], [5, np.nan, 0], [3, 1, np.nan], [np.nan, 0, 1]], 'ncc',
                     categories={1: ('a', 'b')})
    imputed = mean_mode_impute(d)

    assert list(imputed.values[:, 0]) == [1, 3, 5, 3, 3]
    # a tie between a and b: the first category
    assert imputed.values[2, 1] == 0
    # the class is left alone
    assert np.isnan(imputed.values[3, 2])
    assert mean_mode_impute(d, include_class=True).values[3, 2] == 0

    # statistics of another dataset
    reference = make_dataset([[10, 1, 0], [20, 1, 1]], 'ncc', categories={1: ('a', 'b')})
    filled = mean_mode_impute(d, reference=reference)
    assert filled.values[1, 0] == 15
    assert filled.values[2, 1] == 1

    with pytest.raises(ImputationError):
        mean_mode_impute(make_dataset([[np.nan, 0], [np.nan, 1]], 'nc'))


def test_em_without_missing_values_is_the_sample_estimate():
    complete, _ = normal_sample(n=200)
    state = em_mle(complete, tol=1e-12)

    np.testing.assert_allclose(state.mean, complete.mean(axis=0), atol=1e-10)
    np.testing.assert_allclose(state.covariance, np.cov(complete, rowvar=False, bias=True), atol=1e-10)


def test_em_on_complete_data_stops_after_one_iteration():
    complete, _ = normal_sample(n=200)
    assert em_mle(complete, tol=1e-10).iterations == 1

    # a few incomplete rows: EM starts from the complete ones and still has work to do
    x = complete.copy()
    x[:20, 1] = np.nan
    assert em_mle(x, tol=1e-10).iterations > 1


def test_em_matches_the_monotone_closed_form():
    rng = np.random.default_rng(3)
    n = 300
    first = rng.normal(2, 1.5, n)
    second = 0.8 * first + rng.normal(0, 0.5, n)
    second[rng.random(n) < 0.3] = np.nan
    x = np.column_stack([first, second])

    # regression of the second variable on the first over complete cases, the first over all cases
    complete = ~np.isnan(second)
    slope, intercept = np.polyfit(first[complete], second[complete], 1)
    residual = np.var(second[complete] - (intercept + slope * first[complete]))
    mean_first, variance_first = first.mean(), first.var()
    expected_mean = [mean_first, intercept + slope * mean_first]
    expected_covariance = [[variance_first, slope * variance_first],
                           [slope * variance_first, residual + slope ** 2 * variance_first]]

    state = em_mle(x, tol=1e-12, max_iter=5000)
    np.testing.assert_allclose(state.mean, expected_mean, atol=1e-8)
    np.testing.assert_allclose(state.covariance, expected_covariance, atol=1e-8)


def test_em_never_lowers_the_observed_likelihood():
    _, x = normal_sample(n=150, missing=0.3)
    history = []
    state = em_mle(x, tol=1e-8, history=history)

    assert len(history) >= 3
    assert (np.diff(history) >= -1e-9).all()
    assert history[-1] == pytest.approx(observed_loglikelihood(x, state))


def test_em_reports_non_convergence():
    _, x = normal_sample(n=100, missing=0.3)
    with pytest.raises(EmConvergenceError) as e:
        em_mle(x, tol=1e-12, max_iter=1)
    assert e.value.iterations == 1
    assert e.value.state.mean.shape == (4,)

    with pytest.raises(ImputationError):
        em_mle(np.array([[1.0, np.nan], [2.0, np.nan]]))


def test_em_recovers_the_mean():
    _, x = normal_sample()
    state = em_mle(x)
    observed = (~np.isnan(x)).sum(axis=0)
    standard_error = np.sqrt(np.diag(TRUE_COVARIANCE) / observed)
    assert (np.abs(state.mean - TRUE_MEAN) < 3 * standard_error).all()


def test_da_step():
    rng = np.random.default_rng(1)
    _, x = normal_sample(n=60, missing=0.2)
    state = em_mle(x)

    new_state, completed = da_step(state, x, rng)
    observed = ~np.isnan(x)
    np.testing.assert_array_equal(completed[observed], x[observed])
    assert not np.isnan(completed).any()
    np.testing.assert_allclose(new_state.covariance, new_state.covariance.T)
    assert (np.linalg.eigvalsh(new_state.covariance) > 0).all()

    with pytest.raises(ImputationError):
        da_step(state, x[:4], rng)


def test_da_step_is_reproducible_with_a_seed():
    _, x = normal_sample(n=60, missing=0.2)
    state = em_mle(x)

    first_state, first = da_step(state, x, np.random.default_rng(9))
    second_state, second = da_step(state, x, np.random.default_rng(9))
    np.testing.assert_array_equal(first, second)
    np.testing.assert_array_equal(first_state.mean, second_state.mean)
    np.testing.assert_array_equal(first_state.covariance, second_state.covariance)

    _, other = da_step(state, x, np.random.default_rng(10))
    assert not np.array_equal(first, other)


def test_da_draws_follow_a_diagonal_covariance():
    rng = np.random.default_rng(21)
    mean, variances = np.array([0.0, 1.0, 2.0]), np.array([1.0, 4.0, 0.25])
    state = NormalModelState(mean=mean, covariance=np.diag(variances))

    x = rng.normal(mean, np.sqrt(variances), size=(10010, 3))
    # the first ten rows are complete, the rest only have the first attribute
    x[10:, 1:] = np.nan
    _, completed = da_step(state, x, rng)

    drawn = completed[10:, 1:]
    np.testing.assert_allclose(drawn.var(axis=0), variances[1:], rtol=0.05)
    np.testing.assert_allclose(drawn.mean(axis=0), mean[1:], atol=0.05)
    assert abs(np.corrcoef(drawn, rowvar=False)[0, 1]) < 0.05
    assert abs(np.corrcoef(completed[10:, 0], drawn[:, 0])[0, 1]) < 0.05


def test_da_posterior_moments():
    """Complete data: the P-step draws from inverse-Wishart(N - 1, scatter) and a normal around the mean."""
    rng = np.random.default_rng(5)
    x = rng.multivariate_normal([0.0, 1.0], [[1.0, 0.3], [0.3, 0.5]], size=50)
    n, p = x.shape
    centre = x.mean(axis=0)
    scatter = (x - centre).T @ (x - centre)
    state = NormalModelState(mean=centre, covariance=scatter / n)

    draws = [da_step(state, x, rng)[0] for _ in range(2000)]
    covariances = np.mean([s.covariance for s in draws], axis=0)
    means = np.mean([s.mean for s in draws], axis=0)

    np.testing.assert_allclose(covariances, scatter / (n - p - 2), rtol=0.05, atol=0.005)
    np.testing.assert_allclose(means, centre, atol=0.02)


def test_multiple_imputation_draws_around_the_conditional_means():
    _, x = normal_sample()
    d = as_dataset(x)
    cfg = ImputationConfig(m=5, burn_in=50, thin=20, seed=3)
    datasets = multiple_impute(d, cfg)
    assert len(datasets) == 5

    missing = np.isnan(x)
    for column in range(4):
        differences = []
        for row in np.flatnonzero(missing[:, column]):
            others = np.flatnonzero(~missing[row])
            coefficients = np.linalg.solve(TRUE_COVARIANCE[np.ix_(others, others)],
                                           TRUE_COVARIANCE[others, column])
            expected = TRUE_MEAN[column] + (x[row, others] - TRUE_MEAN[others]) @ coefficients
            differences += [completed.values[row, column] - expected for completed in datasets]

        differences = np.array(differences)
        # spread of the draws plus the uncertainty of the drawn parameters, shared by every cell
        standard_error = np.sqrt(differences.var() / differences.size + TRUE_COVARIANCE[column, column] / len(x))
        assert abs(differences.mean()) < 3 * standard_error, f"column {column}"


def test_multiple_imputation_datasets():
    _, x = normal_sample(n=80, missing=0.15)
    d = as_dataset(x)
    values = np.array(d.values)
    # a nominal attribute with missing cells, and an instance without class
    values[:, 0] = np.where(np.isnan(values[:, 0]), np.nan, (values[:, 0] > 1).astype(float))
    values[5, 4] = np.nan
    d = make_dataset(values, 'cnnnc')

    cfg = ImputationConfig(m=3, burn_in=10, thin=5, seed=9)
    result = run_multiple_imputation(d, cfg)

    assert len(result.datasets) == 3
    assert result.em_iterations > 0
    kept = np.delete(values, 5, axis=0)
    observed = ~np.isnan(kept)
    for completed in result.datasets:
        assert completed.n_instances == 79
        assert not completed.has_missing
        np.testing.assert_array_equal(completed.values[observed], kept[observed])
        assert set(np.unique(completed.values[:, 0])) <= {0.0, 1.0}

    # the m datasets differ from each other, and the chain is reproducible
    assert not np.array_equal(result.datasets[0].values, result.datasets[1].values)
    again = run_multiple_imputation(d, cfg)
    assert all(a.equals(b) for a, b in zip(result.datasets, again.datasets))

    summary = impute_summary(d, result.datasets)
    assert set(summary) == {'a0', 'a1', 'a2', 'a3'}
    assert summary['a1']['imputed_cells'] == int(np.isnan(kept[:, 1]).sum())


def test_multiple_imputation_without_missing_values():
    d = make_dataset([[1, 2, 0], [3, 4, 1], [5, 7, 0]], 'nnc')
    datasets = multiple_impute(d, ImputationConfig(m=2, burn_in=1, thin=1))
    assert len(datasets) == 2
    assert all(completed.equals(d) for completed in datasets)


def test_singular_matrix_gets_a_ridge(caplog):
    with caplog.at_level(logging.WARNING):
        factor = _cholesky(np.array([[1.0, 1.0], [1.0, 1.0]]), 'test matrix')
    assert 'ridge' in caplog.text
    np.testing.assert_allclose(factor @ factor.T, [[1, 1], [1, 1]], atol=1e-6)

    with pytest.raises(ImputationError):
        _cholesky(np.array([[1.0, 0.0], [0.0, -1e6]]), 'test matrix')
