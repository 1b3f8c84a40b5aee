"""Tests for the multivariate symmetric Laplace distribution."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from laplace_mle import mvsl
from laplace_mle.errors import (
    DimensionMismatchError,
    ExistenceViolationError,
    InsufficientDataError,
    NotPositiveDefiniteError,
)
from laplace_mle.linalg import cholesky, frobenius_norm

from _oracles import log_pdf_quadrature, weight_quadrature
from conftest import random_spd


def univariate_log_pdf(y: float, variance: float) -> float:
    """Closed-form reduction: f(y) = exp(-sqrt(2)|y|/s) / (sqrt(2) s)."""
    s = math.sqrt(variance)
    return -0.5 * math.log(2.0) - math.log(s) - math.sqrt(2.0) * abs(y) / s


class TestLogPdf:
    def test_univariate_at_origin(self):
        m = mvsl.model([[1.0]])
        assert mvsl.log_pdf(m, [0.0]) == pytest.approx(math.log(1 / math.sqrt(2)))
        assert mvsl.log_pdf(m, [0.0]) == pytest.approx(-0.3465736, abs=5e-8)

    def test_univariate_closed_form_pointwise(self):
        for variance in (1.0, 0.25, 7.0):
            m = mvsl.model([[variance]])
            for y in (-3.0, -0.4, 1e-9, 0.7, 2.5):
                assert mvsl.log_pdf(m, [y]) == pytest.approx(
                    univariate_log_pdf(y, variance), abs=1e-10
                )

    def test_bivariate_pole(self):
        m = mvsl.model(np.eye(2))
        assert mvsl.log_pdf(m, [0.0, 0.0]) == math.inf

    def test_bivariate_matches_joint_density_quadrature(self):
        m = mvsl.model(np.eye(2))
        want = log_pdf_quadrature(1.0, 2, 0.0)
        assert mvsl.log_pdf(m, [1.0, 0.0]) == pytest.approx(want, rel=1e-10)
        # frozen from the oracle
        assert mvsl.log_pdf(m, [1.0, 0.0]) == pytest.approx(
            -2.5754267658980914, abs=1e-10
        )

    def test_quadrature_agreement_random_instances(self, rng):
        for _ in range(10):
            p = int(rng.integers(1, 7))
            spd = cholesky(random_spd(rng, p))
            m = mvsl.model(spd)
            y = rng.standard_normal(p) * 2.0
            q = float(
                y @ np.linalg.solve(spd.matrix, y)
            )
            want = log_pdf_quadrature(q, p, spd.log_det)
            assert mvsl.log_pdf(m, y) == pytest.approx(want, rel=1e-9)

    def test_dimension_mismatch(self):
        m = mvsl.model(np.eye(2))
        with pytest.raises(DimensionMismatchError):
            mvsl.log_pdf(m, [1.0, 2.0, 3.0])

    def test_density_normalizes_p1(self):
        from scipy.integrate import quad

        m = mvsl.model([[1.7]])
        total, _ = quad(lambda y: math.exp(mvsl.log_pdf(m, [y])), -40, 40, limit=200)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_density_normalizes_p2(self):
        from scipy.integrate import dblquad

        # Integrate one quadrant of the box so the integrable pole sits at
        # a corner rather than on a quadrature node; the density of a
        # diagonal scale matrix is symmetric in each coordinate.
        m = mvsl.model(np.diag([1.0, 2.0]))
        quadrant, _ = dblquad(
            lambda y2, y1: math.exp(mvsl.log_pdf(m, [y1, y2])),
            0.0,
            25.0,
            0.0,
            25.0,
            epsabs=1e-7,
        )
        assert 4.0 * quadrant == pytest.approx(1.0, abs=1e-4)


class TestSample:
    def test_deterministic_given_seed(self):
        spd = cholesky(np.eye(2))
        a = mvsl.sample(spd, 50, seed=42)
        b = mvsl.sample(spd, 50, seed=42)
        np.testing.assert_array_equal(a.observations, b.observations)

    def test_different_seeds_differ(self):
        spd = cholesky(np.eye(2))
        a = mvsl.sample(spd, 50, seed=1)
        b = mvsl.sample(spd, 50, seed=2)
        assert not np.array_equal(a.observations, b.observations)

    def test_moments(self):
        # Cov Y = E[W] Sigma = Sigma and E Y = 0 under the representation.
        spd = cholesky(np.diag([2.0, 1.0]))
        data = mvsl.sample(spd, 100_000, seed=7)
        cov = np.cov(data.observations, rowvar=False)
        np.testing.assert_allclose(cov, spd.matrix, rtol=0.05, atol=0.05)
        assert np.all(np.abs(data.observations.mean(axis=0)) < 0.02)


class TestWeight:
    def test_univariate_closed_form(self):
        m = mvsl.model([[1.0]])
        assert mvsl.weight(m, [1.0]) == pytest.approx(math.sqrt(2.0), rel=1e-13)

    def test_p3_recurrence_value(self):
        # ratio K_{3/2}/K_{1/2} at sqrt(2) is 1 + 1/sqrt(2), so v = 1 + sqrt(2)
        m = mvsl.model(np.eye(3))
        assert mvsl.weight(m, [1.0, 0.0, 0.0]) == pytest.approx(
            1.0 + math.sqrt(2.0), rel=1e-12
        )

    def test_quadrature_oracle_random_instances(self, rng):
        for _ in range(50):
            p = int(rng.integers(1, 7))
            spd = cholesky(random_spd(rng, p))
            m = mvsl.model(spd)
            y = rng.standard_normal(p) * rng.uniform(0.2, 3.0)
            got = mvsl.weight(m, y)
            q = float(y @ np.linalg.solve(spd.matrix, y))
            want = weight_quadrature(q, p)
            assert got == pytest.approx(want, rel=1e-7)


class TestLogLikelihood:
    def test_equals_sum_of_log_pdf(self, rng):
        spd = cholesky(random_spd(rng, 3))
        data = mvsl.sample(spd, 40, seed=3)
        m = mvsl.model(spd)
        want = sum(mvsl.log_pdf(m, y) for y in data.observations)
        assert mvsl.log_likelihood(spd, data) == pytest.approx(want, rel=1e-12)

    def test_permutation_invariant(self, rng):
        spd = cholesky(random_spd(rng, 3))
        data = mvsl.sample(spd, 25, seed=9)
        shuffled = mvsl.MvslSample(data.observations[::-1].copy())
        assert mvsl.log_likelihood(spd, data) == pytest.approx(
            mvsl.log_likelihood(spd, shuffled), rel=1e-14
        )

    def test_univariate_closed_form(self):
        data = mvsl.MvslSample(np.array([[0.5], [-1.5], [2.0]]))
        sigma = cholesky([[1.3]])
        want = sum(univariate_log_pdf(y, 1.3) for y in (0.5, -1.5, 2.0))
        assert mvsl.log_likelihood(sigma, data) == pytest.approx(want, rel=1e-12)


class TestMomentEstimator:
    def test_rank_deficient_rejected(self):
        data = mvsl.MvslSample(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        with pytest.raises(NotPositiveDefiniteError):
            mvsl.moment_estimator(data)

    def test_plus_shape(self):
        data = mvsl.MvslSample(
            np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        )
        got = mvsl.moment_estimator(data)
        np.testing.assert_allclose(got.matrix, np.diag([2.0 / 3.0, 2.0 / 3.0]))

    def test_insufficient_data(self):
        data = mvsl.MvslSample(np.array([[1.0, 2.0]]))
        with pytest.raises(InsufficientDataError):
            mvsl.moment_estimator(data)

    def test_consistency(self):
        spd = cholesky(np.diag([2.0, 1.0]))
        data = mvsl.sample(spd, 100_000, seed=11)
        got = mvsl.moment_estimator(data)
        np.testing.assert_allclose(got.matrix, spd.matrix, rtol=0.05, atol=0.05)


class TestEmFit:
    def test_existence_gate(self):
        data = mvsl.MvslSample(np.random.default_rng(0).standard_normal((3, 4)))
        with pytest.raises(ExistenceViolationError):
            mvsl.em_fit(data)

    def test_existence_function_boundary(self):
        mvsl.require_existence(4, 4)
        with pytest.raises(ExistenceViolationError):
            mvsl.require_existence(3, 4)

    def test_univariate_two_point_fixed_point(self):
        # +1/-1 data: the EM fixed point is sigma^2 = 2 (univariate MLE
        # sigma = sqrt(2) * mean |y|), cross-checked by direct search.
        data = mvsl.MvslSample(np.array([[1.0], [-1.0]]))
        report = mvsl.em_fit(data)
        assert report.converged
        assert report.estimate.matrix[0, 0] == pytest.approx(2.0, abs=1e-6)

    def test_univariate_matches_scalar_likelihood_search(self, rng):
        ys = rng.standard_normal(30) * 1.7
        data = mvsl.MvslSample(ys[:, None])

        def negative_ll(log_var):
            return -sum(univariate_log_pdf(y, math.exp(log_var)) for y in ys)

        direct = minimize_scalar(
            negative_ll, bounds=(-8.0, 8.0), method="bounded",
            options={"xatol": 1e-12},
        )
        report = mvsl.em_fit(data)
        assert report.estimate.matrix[0, 0] == pytest.approx(
            math.exp(direct.x), rel=1e-6
        )

    def test_monotone_trace_and_fixed_point(self, rng):
        for _ in range(15):
            p = int(rng.choice([2, 3, 6]))
            n = int(p * rng.choice([1, 2, 10]))
            spd = cholesky(random_spd(rng, p))
            data = mvsl.sample(spd, n, seed=int(rng.integers(2**31)))
            report = mvsl.em_fit(data)
            assert np.all(np.diff(report.trace) >= -1e-9)
            if report.converged:
                est = report.estimate
                m = mvsl.model(est)
                v = np.array([mvsl.weight(m, y) for y in data.observations])
                refit = (data.observations.T * v) @ data.observations / n
                assert frobenius_norm(refit - est.matrix) <= 1e-8 * frobenius_norm(
                    est.matrix
                )

    def test_equivariance(self, rng):
        spd = cholesky(random_spd(rng, 3))
        data = mvsl.sample(spd, 60, seed=21)
        a = np.array([[2.0, 0.3, 0.0], [0.0, 1.0, -0.5], [0.1, 0.0, 0.7]])
        transformed = mvsl.MvslSample(data.observations @ a.T)
        base_initial = data.observations.T @ data.observations / data.n
        report_base = mvsl.em_fit(data, initial=cholesky(base_initial))
        report_tr = mvsl.em_fit(
            transformed, initial=cholesky(a @ base_initial @ a.T)
        )
        mapped = a @ report_base.estimate.matrix @ a.T
        assert frobenius_norm(
            report_tr.estimate.matrix - mapped
        ) <= 1e-6 * frobenius_norm(report_tr.estimate.matrix)

    def test_initial_agnostic_estimate(self, rng):
        # Same data, two very different initial values: same fixed point.
        spd = cholesky(random_spd(rng, 3))
        data = mvsl.sample(spd, 80, seed=33)
        r1 = mvsl.em_fit(data)
        r2 = mvsl.em_fit(data, initial=cholesky(10.0 * np.eye(3)))
        assert frobenius_norm(
            r1.estimate.matrix - r2.estimate.matrix
        ) <= 1e-6 * frobenius_norm(r1.estimate.matrix)

    def test_report_contract(self, rng):
        spd = cholesky(random_spd(rng, 2))
        data = mvsl.sample(spd, 50, seed=5)
        report = mvsl.em_fit(data)
        assert report.trace.shape == (report.iterations + 1,)
        assert report.final_log_likelihood == report.trace[-1]
        if report.converged:
            assert report.trace[-1] - report.trace[-2] < mvsl.EmConfig().epsilon

    def test_max_iterations_reported_as_unconverged(self, rng):
        spd = cholesky(random_spd(rng, 2))
        data = mvsl.sample(spd, 50, seed=6)
        report = mvsl.em_fit(data, mvsl.EmConfig(max_iterations=2))
        assert not report.converged
        assert report.iterations == 2
