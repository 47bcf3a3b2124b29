import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from lrcox.coxph import (
    build_dataset,
    derivatives_eta,
    linear_predictors,
    loglik_linear_predictors,
    make_population,
    partial_loglik,
    penalized_objective,
    population_derivatives,
    population_loglik,
)
from lrcox.errors import DataError
from oracles import (
    fd_diag_from_gradient,
    fd_gradient,
    grad_hessian_direct,
    loglik_direct,
)

TIE_MODES = ("breslow", "tie-weighted")


class TestDatasetConstruction:
    def test_risk_sets_are_suffixes_under_descending_sort(self, rng):
        pop = make_population(
            "a", [2.0, 1.0, 2.0, 0.5], [1, 0, 1, 1], rng.standard_normal((4, 2))
        )
        t_sorted = pop.times[pop.order]
        assert (np.diff(t_sorted) <= 0).all()
        # tie group of the two time-2.0 subjects spans positions 0..1
        np.testing.assert_array_equal(pop.group_start[:2], [0, 0])
        np.testing.assert_array_equal(pop.group_last[:2], [1, 1])
        np.testing.assert_array_equal(pop.tie_counts[:2], [2.0, 2.0])

    def test_tie_counts_cover_all_subjects_at_time(self):
        # a censored subject tied with an event still sees the event count
        pop = make_population("a", [1.0, 1.0], [1, 0], np.zeros((2, 1)))
        np.testing.assert_array_equal(pop.tie_counts, [1.0, 1.0])

    def test_zero_time_censored_subject_allowed(self):
        pop = make_population("a", [0.0, 1.0], [0, 1], np.zeros((2, 1)))
        assert pop.n == 2

    def test_rejects_negative_times_and_bad_status(self):
        with pytest.raises(DataError):
            make_population("a", [-1.0, 1.0], [1, 1], np.zeros((2, 1)))
        with pytest.raises(DataError):
            make_population("a", [1.0, 1.0], [1, 2], np.zeros((2, 1)))

    def test_rejects_predictor_mismatch_across_populations(self, rng):
        with pytest.raises(DataError):
            build_dataset(
                [
                    ("a", [1.0], [1], np.zeros((1, 2))),
                    ("b", [1.0], [1], np.zeros((1, 3))),
                ]
            )


class TestPartialLoglik:
    def test_all_zero_coefficients_counts_risk_sets(self):
        data = build_dataset([("a", [1.0, 2.0, 3.0], [1, 1, 1], np.zeros((3, 2)))])
        expected = -(np.log(3.0) + np.log(2.0) + np.log(1.0))
        assert partial_loglik(data, np.zeros((2, 1))) == pytest.approx(expected)

    def test_two_subject_example(self):
        # subject 1 fails first; eta = (log 2, 0)
        pop = make_population("a", [1.0, 2.0], [1, 1], np.eye(2))
        value = population_loglik(pop, np.array([np.log(2.0), 0.0]))
        assert value == pytest.approx(np.log(2.0) - np.log(3.0))

    @pytest.mark.parametrize("tie_mode", TIE_MODES)
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_direct_oracle(self, seed, tie_mode):
        rng = np.random.default_rng(seed)
        data = random_dataset(rng, n_pops=1, n=20, p=3, tied=bool(seed % 2))
        pop = data.populations[0]
        eta = rng.standard_normal(pop.n)
        assert population_loglik(pop, eta, tie_mode) == pytest.approx(
            loglik_direct(pop.times, pop.status, eta, tie_mode), rel=1e-12
        )

    def test_modes_coincide_without_ties(self, rng):
        data = random_dataset(rng, n_pops=2, n=25, p=4, tied=False)
        B = rng.standard_normal((4, 2))
        assert partial_loglik(data, B, "breslow") == pytest.approx(
            partial_loglik(data, B, "tie-weighted"), rel=1e-12
        )

    @pytest.mark.parametrize("tie_mode", TIE_MODES)
    def test_translation_invariance_without_ties(self, rng, tie_mode):
        data = random_dataset(rng, n_pops=2, n=15, p=3, tied=False)
        etas = [rng.standard_normal(pop.n) for pop in data.populations]
        base = loglik_linear_predictors(data, etas, tie_mode)
        shifted = [eta + c for eta, c in zip(etas, (1.7, -0.4))]
        assert loglik_linear_predictors(data, shifted, tie_mode) == pytest.approx(
            base, rel=1e-10
        )

    def test_population_additivity(self, rng):
        data = random_dataset(rng, n_pops=3, n=20, p=4)
        B = rng.standard_normal((4, 3))
        total = partial_loglik(data, B)
        parts = 0.0
        for j, pop in enumerate(data.populations):
            single = build_dataset(
                [(pop.name, pop.times, pop.status, pop.covariates)]
            )
            parts += partial_loglik(single, B[:, j : j + 1])
        assert total == pytest.approx(parts, rel=1e-12)

    def test_concavity_probe(self, rng):
        data = random_dataset(rng, n_pops=2, n=25, p=4)
        for _ in range(5):
            B1 = rng.standard_normal((4, 2))
            B2 = rng.standard_normal((4, 2))
            for t in (0.25, 0.5, 0.75):
                mixed = partial_loglik(data, t * B1 + (1 - t) * B2)
                assert mixed >= (
                    t * partial_loglik(data, B1)
                    + (1 - t) * partial_loglik(data, B2)
                    - 1e-10
                )

    def test_extreme_eta_stays_finite(self):
        pop = make_population("a", [1.0, 2.0, 3.0], [1, 1, 1], np.zeros((3, 1)))
        value = population_loglik(pop, np.array([700.0, -700.0, 650.0]))
        assert np.isfinite(value)

    def test_dimension_mismatch_rejected(self, rng):
        data = random_dataset(rng, n_pops=2, n=10, p=3)
        with pytest.raises(DataError):
            partial_loglik(data, np.zeros((4, 2)))


class TestDerivatives:
    def test_hand_gradient_example(self):
        pop = make_population("a", [1.0, 2.0], [1, 1], np.eye(2))
        derivs = population_derivatives(pop, np.array([np.log(2.0), 0.0]))
        np.testing.assert_allclose(
            derivs.gradient, [-1.0 / 3.0, 1.0 / 3.0], atol=1e-12
        )

    def test_no_events_means_zero_gradient(self):
        pop = make_population("a", [1.0, 2.0, 3.0], [0, 0, 0], np.zeros((3, 1)))
        derivs = population_derivatives(pop, np.array([0.3, -0.2, 0.1]))
        np.testing.assert_array_equal(derivs.gradient, np.zeros(3))
        np.testing.assert_array_equal(derivs.hessian_diag, np.zeros(3))

    @pytest.mark.parametrize("tie_mode", TIE_MODES)
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_dense_oracle(self, seed, tie_mode):
        rng = np.random.default_rng(seed)
        data = random_dataset(rng, n_pops=1, n=18, p=3, tied=bool(seed % 2))
        pop = data.populations[0]
        eta = 0.7 * rng.standard_normal(pop.n)
        derivs = population_derivatives(pop, eta, tie_mode)
        grad_o, hess_o = grad_hessian_direct(pop.times, pop.status, eta, tie_mode)
        np.testing.assert_allclose(derivs.gradient, grad_o, atol=1e-10)
        np.testing.assert_allclose(derivs.hessian_diag, np.diag(hess_o), atol=1e-10)
        assert derivs.value == pytest.approx(
            -loglik_direct(pop.times, pop.status, eta, tie_mode), rel=1e-12
        )

    @pytest.mark.parametrize("tie_mode", TIE_MODES)
    def test_finite_difference_agreement(self, rng, tie_mode):
        data = random_dataset(rng, n_pops=1, n=30, p=5, tied=True)
        pop = data.populations[0]
        eta = 0.5 * rng.standard_normal(pop.n)
        derivs = population_derivatives(pop, eta, tie_mode)

        def value(e):
            return -population_loglik(pop, e, tie_mode)

        fd = fd_gradient(value, eta, h=1e-5)
        rel = np.linalg.norm(derivs.gradient - fd) / (1.0 + np.linalg.norm(fd))
        assert rel < 1e-6

        def grad(e):
            return population_derivatives(pop, e, tie_mode).gradient

        fd_diag = fd_diag_from_gradient(grad, eta, h=1e-5)
        rel = np.linalg.norm(derivs.hessian_diag - fd_diag) / (
            1.0 + np.linalg.norm(fd_diag)
        )
        assert rel < 1e-5

    def test_hessian_diag_nonnegative(self, rng):
        for seed in range(10):
            local = np.random.default_rng(seed)
            data = random_dataset(local, n_pops=1, n=25, p=3, tied=True)
            pop = data.populations[0]
            eta = 2.0 * local.standard_normal(pop.n)
            derivs = population_derivatives(pop, eta)
            assert (derivs.hessian_diag >= 0).all()

    def test_aggregate_wrapper_shapes(self, rng):
        data = random_dataset(rng, n_pops=3, n=12, p=4)
        B = rng.standard_normal((4, 3))
        etas = linear_predictors(data, B)
        all_derivs = derivatives_eta(data, etas)
        assert len(all_derivs) == 3
        for pop, derivs in zip(data.populations, all_derivs):
            assert derivs.gradient.shape == (pop.n,)
            assert derivs.hessian_diag.shape == (pop.n,)


class TestPenalizedObjective:
    def test_zero_matrix_reduces_to_negative_loglik(self, rng):
        data = random_dataset(rng, n_pops=2, n=15, p=3)
        B0 = np.zeros((3, 2))
        assert penalized_objective(data, B0, mu=0.7) == pytest.approx(
            -partial_loglik(data, B0)
        )

    def test_mu_zero_is_negative_loglik(self, rng):
        data = random_dataset(rng, n_pops=2, n=15, p=3)
        B = rng.standard_normal((3, 2))
        assert penalized_objective(data, B, mu=0.0) == pytest.approx(
            -partial_loglik(data, B)
        )

    def test_strictly_increasing_in_mu(self, rng):
        data = random_dataset(rng, n_pops=2, n=15, p=3)
        B = rng.standard_normal((3, 2))
        values = [penalized_objective(data, B, mu) for mu in (0.0, 0.5, 1.0)]
        assert values[0] < values[1] < values[2]

    def test_rejects_negative_mu(self, rng):
        data = random_dataset(rng, n_pops=1, n=10, p=2)
        with pytest.raises(ValueError):
            penalized_objective(data, np.zeros((2, 1)), mu=-0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3.0, 3.0))
def test_translation_invariance_property(seed, shift):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 15))
    times = rng.exponential(1.0, n)  # continuous: ties absent
    status = (rng.random(n) > 0.3).astype(int)
    status[0] = 1
    pop = make_population("a", times, status, np.zeros((n, 1)))
    eta = rng.standard_normal(n)
    for tie_mode in TIE_MODES:
        base = population_loglik(pop, eta, tie_mode)
        moved = population_loglik(pop, eta + shift, tie_mode)
        assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)
