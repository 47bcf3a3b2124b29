import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from lrcox.coxph import make_population
from lrcox.errors import DataError
from lrcox.metrics import (
    breslow_baseline,
    brier_score,
    c_index_censored,
    c_index_uncensored,
    factor_transfer,
    model_error,
    quantile_lower,
)
from oracles import cindex_pairs_censored, cindex_pairs_strict, newton_cox


class TestModelError:
    def test_zero_at_truth(self, rng):
        B = rng.standard_normal((4, 3))
        Sigma = np.eye(4)
        assert model_error(B, B, Sigma) == 0.0

    def test_identity_sigma_is_frobenius(self, rng):
        B1 = rng.standard_normal((4, 3))
        B2 = rng.standard_normal((4, 3))
        assert model_error(B1, B2, np.eye(4)) == pytest.approx(
            float(np.sum((B1 - B2) ** 2))
        )

    def test_correlated_sigma_example(self):
        diff = np.array([[1.0], [1.0]])
        Sigma = np.array([[1.0, 0.7], [0.7, 1.0]])
        assert model_error(diff, np.zeros((2, 1)), Sigma) == pytest.approx(3.4)

    def test_rejects_asymmetric_sigma(self, rng):
        B = rng.standard_normal((2, 2))
        with pytest.raises(DataError):
            model_error(B, B, np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_nonnegative_property(self, rng):
        for _ in range(20):
            B1 = rng.standard_normal((3, 2))
            B2 = rng.standard_normal((3, 2))
            A = rng.standard_normal((3, 3))
            Sigma = A @ A.T
            assert model_error(B1, B2, Sigma) >= -1e-10


class TestCIndexUncensored:
    def test_perfect_antiordering_scores_one(self, rng):
        times = rng.exponential(1.0, 20)
        assert c_index_uncensored(times, -times) == 1.0

    def test_perfect_coordering_scores_zero(self, rng):
        times = rng.exponential(1.0, 20)
        assert c_index_uncensored(times, times) == 0.0

    def test_constant_predictor_scores_zero(self, rng):
        times = rng.exponential(1.0, 10)
        assert c_index_uncensored(times, np.zeros(10)) == 0.0

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_pair_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        times = rng.exponential(1.0, 15)
        eta = rng.standard_normal(15)
        assert c_index_uncensored(times, eta) == pytest.approx(
            cindex_pairs_strict(times, None, eta)
        )

    def test_all_times_tied_rejected(self):
        with pytest.raises(DataError):
            c_index_uncensored(np.ones(4), np.arange(4.0))


class TestCIndexCensored:
    def test_spec_example(self):
        c = c_index_censored(
            np.array([1.0, 2.0, 3.0]),
            np.array([1, 1, 0]),
            np.array([3.0, 1.0, 2.0]),
        )
        assert c == pytest.approx(2.0 / 3.0)

    def test_no_censoring_perfect_score(self, rng):
        times = rng.exponential(1.0, 15)
        assert c_index_censored(times, np.ones(15, dtype=int), -times) == 1.0

    def test_all_censored_returns_none(self, rng):
        times = rng.exponential(1.0, 5)
        assert c_index_censored(times, np.zeros(5, dtype=int), times) is None

    def test_agrees_with_strict_when_uncensored_untied(self, rng):
        times = rng.exponential(1.0, 12)
        eta = rng.standard_normal(12)
        strict = c_index_uncensored(times, eta)
        harrell = c_index_censored(times, np.ones(12, dtype=int), eta)
        assert harrell == pytest.approx(strict)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_pair_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        times = rng.integers(1, 8, size=14).astype(float)
        status = rng.integers(0, 2, size=14)
        eta = rng.integers(-2, 3, size=14).astype(float)  # forces eta ties
        expected = cindex_pairs_censored(times, status, eta)
        got = c_index_censored(times, status, eta)
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected)


class TestBreslowBaseline:
    def test_null_model_increments(self):
        pop = make_population("a", [1.0, 2.0, 3.0], [1, 1, 1], np.zeros((3, 1)))
        baseline = breslow_baseline(pop, np.zeros(1))
        np.testing.assert_allclose(baseline.times, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(baseline.increments, [1 / 3, 1 / 2, 1.0])

    def test_survival_before_first_event_is_one(self, rng):
        data = random_dataset(rng, n_pops=1, n=20, p=3)
        pop = data.populations[0]
        b = 0.2 * rng.standard_normal(3)
        baseline = breslow_baseline(pop, b)
        eta = pop.covariates @ b
        s0 = baseline.survival(float(baseline.times[0]) - 1e-9, eta)
        np.testing.assert_allclose(s0, np.ones(pop.n))

    def test_survival_nonincreasing_in_time(self, rng):
        data = random_dataset(rng, n_pops=1, n=25, p=3)
        pop = data.populations[0]
        b = 0.3 * rng.standard_normal(3)
        baseline = breslow_baseline(pop, b)
        grid = np.linspace(0.0, pop.times.max() * 1.2, 40)
        eta = pop.covariates[:4] @ b
        surv = baseline.survival(grid, eta)
        assert (np.diff(surv, axis=1) <= 1e-12).all()

    def test_cumulative_hazard_nondecreasing(self, rng):
        data = random_dataset(rng, n_pops=1, n=25, p=3, tied=True)
        pop = data.populations[0]
        baseline = breslow_baseline(pop, np.zeros(3))
        assert (baseline.increments >= 0).all()
        grid = np.linspace(0, pop.times.max(), 30)
        assert (np.diff(baseline.cumulative(grid)) >= 0).all()


class TestBrierScore:
    def test_perfect_survival_prediction(self):
        pop = make_population("a", [5.0, 6.0], [1, 1], np.zeros((2, 1)))
        baseline = breslow_baseline(pop, np.zeros(1))
        # t before every event: S = 1 and both subjects survive past t
        assert brier_score(pop.times, np.zeros(2), baseline, 0.5) == 0.0

    def test_half_probability_scores_quarter(self):
        class Half:
            def survival(self, t, eta):
                return np.full(np.shape(eta), 0.5)

        times = np.array([1.0, 10.0, 3.0])
        assert brier_score(times, np.zeros(3), Half(), 2.0) == pytest.approx(0.25)

    def test_two_subject_example(self):
        class Fixed:
            def survival(self, t, eta):
                return np.array([0.2, 0.9])

        score = brier_score(np.array([1.0, 3.0]), np.zeros(2), Fixed(), 2.0)
        assert score == pytest.approx(0.025)

    def test_invariant_to_subject_relabeling(self, rng):
        data = random_dataset(rng, n_pops=1, n=20, p=3)
        pop = data.populations[0]
        b = 0.2 * rng.standard_normal(3)
        baseline = breslow_baseline(pop, b)
        eta = pop.covariates @ b
        t = quantile_lower(pop.times, 0.5)
        base = brier_score(pop.times, eta, baseline, t)
        perm = rng.permutation(pop.n)
        assert brier_score(pop.times[perm], eta[perm], baseline, t) == pytest.approx(base)


class TestQuantile:
    def test_lower_interpolation(self):
        values = np.array([1.0, 2.0, 3.0, 4.0])
        assert quantile_lower(values, 0.5) == 2.0
        assert quantile_lower(values, 0.25) == 1.0


class TestFactorTransfer:
    def test_identity_factors_match_direct_fit(self, rng):
        data = random_dataset(rng, n_pops=1, n=50, p=3, censor_frac=0.3)
        pop = data.populations[0]
        model = factor_transfer(np.eye(3), pop.times, pop.status, pop.covariates)
        direct = newton_cox(pop.times, pop.status, pop.covariates, ridge=1e-6)
        np.testing.assert_allclose(model.coefficients, direct, atol=1e-6)

    def test_single_basis_vector_matches_univariate_oracle(self, rng):
        data = random_dataset(rng, n_pops=1, n=60, p=4, censor_frac=0.3)
        pop = data.populations[0]
        U = np.zeros((4, 1))
        U[0, 0] = 1.0
        model = factor_transfer(U, pop.times, pop.status, pop.covariates)
        oracle = newton_cox(pop.times, pop.status, pop.covariates[:, :1], ridge=1e-6)
        assert abs(model.coefficients[0] - oracle[0]) < 1e-6

    def test_same_factors_fingerprint(self, rng):
        data = random_dataset(rng, n_pops=1, n=30, p=4)
        pop = data.populations[0]
        U = rng.standard_normal((4, 2))
        m1 = factor_transfer(U, pop.times, pop.status, pop.covariates)
        m2 = factor_transfer(U.copy(), pop.times, pop.status, pop.covariates)
        assert m1.fingerprint == m2.fingerprint
        test_X = rng.standard_normal((5, 4))
        np.testing.assert_array_equal(m1.transform(test_X), test_X @ U)

    def test_name_mismatch_is_fatal(self, rng):
        data = random_dataset(rng, n_pops=1, n=20, p=2)
        pop = data.populations[0]
        with pytest.raises(DataError, match="mismatch"):
            factor_transfer(
                np.eye(2),
                pop.times,
                pop.status,
                pop.covariates,
                feature_names=["x1", "x2"],
                factor_feature_names=["x2", "x1"],
            )

    def test_wrong_row_count_rejected(self, rng):
        data = random_dataset(rng, n_pops=1, n=20, p=3)
        pop = data.populations[0]
        with pytest.raises(DataError):
            factor_transfer(np.eye(2), pop.times, pop.status, pop.covariates)


def test_cindex_of_truth_clears_chance_by_five_ses():
    from lrcox.simulate import SimulationSpec, generate_truth, sample_survival

    spec = SimulationSpec(
        p=20, n_populations=12, n_pattern=(50,), r_star=2, s_star=8,
        n_validation=10, n_test=1000, seed=77,
    )
    truth = generate_truth(spec)
    test = sample_survival(spec, truth, (1000,) * 12, "test")
    cs = np.array(
        [
            c_index_uncensored(pop.times, pop.covariates @ truth.B_star[:, j])
            for j, pop in enumerate(test.populations)
        ]
    )
    se = cs.std(ddof=1) / np.sqrt(len(cs))
    assert cs.mean() > 0.5 + 5.0 * se


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_cindex_extremes_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 25))
    times = np.unique(rng.exponential(1.0, n))
    if len(times) < 2:
        return
    assert c_index_uncensored(times, -times) == 1.0
    assert c_index_uncensored(times, times) == 0.0
