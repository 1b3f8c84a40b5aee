"""Tests for the matrix-variate symmetric Laplace distribution."""

import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from laplace_mle import matsl, mvsl
from laplace_mle.errors import DimensionMismatchError, ExistenceViolationError
from laplace_mle.linalg import cholesky, frobenius_norm, kronecker, trace_quadratic_form

from _oracles import log_pdf_quadrature, weight_quadrature
from conftest import random_spd


def random_pair(rng, p, q):
    return cholesky(random_spd(rng, p)), cholesky(random_spd(rng, q))


class TestLogPdf:
    def test_scalar_case_reduces_to_mvsl(self):
        m = matsl.model([[2.0]], [[3.0]])
        mv = mvsl.model([[6.0]])
        for y in (-1.5, 0.2, 4.0):
            assert matsl.log_pdf(m, [[y]]) == pytest.approx(
                mvsl.log_pdf(mv, [y]), rel=1e-13
            )

    def test_matches_vectorized_mvsl_under_kronecker(self, rng):
        for _ in range(8):
            s1, s2 = random_pair(rng, 3, 2)
            m = matsl.model(s1, s2)
            mv = mvsl.model(cholesky(kronecker(s2.matrix, s1.matrix)))
            x = rng.standard_normal((3, 2))
            want = mvsl.log_pdf(mv, x.reshape(-1, order="F"))
            assert matsl.log_pdf(m, x) == pytest.approx(want, rel=1e-11)

    def test_scale_family_invariance(self, rng):
        s1, s2 = random_pair(rng, 3, 2)
        a = 7.0
        m1 = matsl.model(s1, s2)
        m2 = matsl.model(cholesky(a * s1.matrix), cholesky(s2.matrix / a))
        x = rng.standard_normal((3, 2))
        assert matsl.log_pdf(m1, x) == pytest.approx(
            matsl.log_pdf(m2, x), abs=1e-12
        )

    def test_pole_at_origin(self):
        m = matsl.model(np.eye(2), np.eye(2))
        assert matsl.log_pdf(m, np.zeros((2, 2))) == math.inf

    def test_quadrature_agreement(self, rng):
        for _ in range(5):
            s1, s2 = random_pair(rng, 2, 3)
            m = matsl.model(s1, s2)
            x = rng.standard_normal((2, 3))
            q = trace_quadratic_form(x, s1, s2)
            log_det = 3 * s1.log_det + 2 * s2.log_det
            want = log_pdf_quadrature(q, 6, log_det)
            assert matsl.log_pdf(m, x) == pytest.approx(want, rel=1e-9)

    def test_shape_mismatch(self):
        m = matsl.model(np.eye(2), np.eye(3))
        with pytest.raises(DimensionMismatchError):
            matsl.log_pdf(m, np.zeros((3, 2)))


class TestCharFn:
    def test_at_zero(self):
        m = matsl.model(np.eye(2), np.eye(3))
        assert matsl.char_fn(m, np.zeros((2, 3))) == 1.0

    def test_scale_family_invariance(self, rng):
        s1, s2 = random_pair(rng, 2, 2)
        t = rng.standard_normal((2, 2))
        a = 5.0
        m1 = matsl.model(s1, s2)
        m2 = matsl.model(cholesky(a * s1.matrix), cholesky(s2.matrix / a))
        assert matsl.char_fn(m1, t) == pytest.approx(matsl.char_fn(m2, t), rel=1e-13)

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(2024)
        s1 = cholesky(np.array([[2.0, 0.5], [0.5, 1.0]]))
        s2 = cholesky(np.array([[1.0, -0.3], [-0.3, 2.0]]))
        m = matsl.model(s1, s2)
        t = rng.standard_normal((2, 2)) * 0.4
        data = matsl.sample(s1, s2, 200_000, seed=99)
        phases = np.einsum("ij,nij->n", t, data.observations)
        estimate = float(np.mean(np.cos(phases)))
        assert estimate == pytest.approx(matsl.char_fn(m, t), abs=0.01)


class TestSample:
    def test_deterministic_given_seed(self):
        s1 = cholesky(np.eye(2))
        s2 = cholesky(np.eye(3))
        a = matsl.sample(s1, s2, 20, seed=5)
        b = matsl.sample(s1, s2, 20, seed=5)
        np.testing.assert_array_equal(a.observations, b.observations)

    def test_vec_covariance_is_kronecker(self):
        s1 = cholesky(np.array([[2.0, 0.4], [0.4, 1.0]]))
        s2 = cholesky(np.diag([1.0, 3.0]))
        data = matsl.sample(s1, s2, 200_000, seed=31)
        vecs = data.observations.transpose(0, 2, 1).reshape(data.n, -1)
        cov = np.cov(vecs, rowvar=False)
        truth = kronecker(s2.matrix, s1.matrix)
        np.testing.assert_allclose(cov, truth, rtol=0.05, atol=0.05 * truth.max())

    def test_distribution_matches_vectorized_mvsl(self):
        # Two-sample KS on the trace quadratic form statistic.
        s1 = cholesky(np.array([[2.0, 0.5], [0.5, 1.5]]))
        s2 = cholesky(np.diag([1.0, 0.5, 2.0]))
        m_sample = matsl.sample(s1, s2, 50_000, seed=8)
        kron = cholesky(kronecker(s2.matrix, s1.matrix))
        v_sample = mvsl.sample(kron, 50_000, seed=9)
        q_mat = np.array(
            [trace_quadratic_form(x, s1, s2) for x in m_sample.observations]
        )
        z = np.linalg.solve(kron.chol_lower, v_sample.observations.T)
        q_vec = np.einsum("ij,ij->j", z, z)
        assert ks_2samp(q_mat, q_vec).statistic < 0.02


class TestWeight:
    def test_scalar_case_reduces_to_mvsl(self):
        m = matsl.model([[2.0]], [[3.0]])
        mv = mvsl.model([[6.0]])
        assert matsl.weight(m, [[1.5]]) == pytest.approx(
            mvsl.weight(mv, [1.5]), rel=1e-13
        )

    def test_equals_vectorized_weight(self, rng):
        for _ in range(10):
            s1, s2 = random_pair(rng, 3, 2)
            m = matsl.model(s1, s2)
            mv = mvsl.model(cholesky(kronecker(s2.matrix, s1.matrix)))
            x = rng.standard_normal((3, 2))
            assert matsl.weight(m, x) == pytest.approx(
                mvsl.weight(mv, x.reshape(-1, order="F")), rel=1e-10
            )

    def test_quadrature_oracle_random_instances(self, rng):
        for _ in range(50):
            p = int(rng.integers(1, 4))
            q = int(rng.integers(1, 4))
            s1, s2 = random_pair(rng, p, q)
            m = matsl.model(s1, s2)
            x = rng.standard_normal((p, q)) * rng.uniform(0.3, 2.0)
            got = matsl.weight(m, x)
            want = weight_quadrature(trace_quadratic_form(x, s1, s2), p * q)
            assert got == pytest.approx(want, rel=1e-7)


class TestLogLikelihood:
    def test_scale_family_invariance_exact(self, rng):
        s1, s2 = random_pair(rng, 3, 2)
        data = matsl.sample(s1, s2, 30, seed=77)
        a = 7.0
        base = matsl.log_likelihood(s1, s2, data)
        scaled = matsl.log_likelihood(
            cholesky(a * s1.matrix), cholesky(s2.matrix / a), data
        )
        assert scaled == pytest.approx(base, abs=1e-9)

    def test_equals_vectorized_mvsl(self, rng):
        s1, s2 = random_pair(rng, 2, 3)
        data = matsl.sample(s1, s2, 25, seed=13)
        vecs = data.observations.transpose(0, 2, 1).reshape(data.n, -1)
        kron = cholesky(kronecker(s2.matrix, s1.matrix))
        want = mvsl.log_likelihood(kron, mvsl.MvslSample(vecs))
        got = matsl.log_likelihood(s1, s2, data)
        assert got == pytest.approx(want, rel=1e-12)

    def test_sum_of_log_pdf(self, rng):
        s1, s2 = random_pair(rng, 2, 2)
        data = matsl.sample(s1, s2, 20, seed=3)
        m = matsl.model(s1, s2)
        want = sum(matsl.log_pdf(m, x) for x in data.observations)
        assert matsl.log_likelihood(s1, s2, data) == pytest.approx(want, rel=1e-12)

    def test_truth_beats_distant_parameter(self, rng):
        s1, s2 = random_pair(rng, 3, 2)
        data = matsl.sample(s1, s2, 200, seed=55)
        good = matsl.log_likelihood(s1, s2, data)
        bad = matsl.log_likelihood(cholesky(50.0 * np.eye(3)), s2, data)
        assert good > bad


class TestNormalizeKroneckerPair:
    def test_already_canonical(self):
        s1 = cholesky(np.diag([2.0, 1.0]))
        s2 = cholesky(np.diag([2.0, 1.0]))  # trace 3 != q=2
        est = matsl.normalize_kronecker_pair(s1, s2)
        again = matsl.normalize_kronecker_pair(est.sigma1_hat, est.sigma2_hat)
        assert again.scale == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(
            again.sigma2_hat.matrix, est.sigma2_hat.matrix, rtol=1e-15
        )

    def test_scale_quotient_collapses(self, rng):
        s1, s2 = random_pair(rng, 3, 2)
        a = matsl.normalize_kronecker_pair(s1, s2)
        b = matsl.normalize_kronecker_pair(
            cholesky(3.0 * s1.matrix), cholesky(s2.matrix / 3.0)
        )
        np.testing.assert_allclose(a.sigma1_hat.matrix, b.sigma1_hat.matrix, rtol=1e-12)
        np.testing.assert_allclose(a.sigma2_hat.matrix, b.sigma2_hat.matrix, rtol=1e-12)

    def test_kron_invariant_and_trace_pinned(self, rng):
        s1, s2 = random_pair(rng, 2, 3)
        est = matsl.normalize_kronecker_pair(s1, s2)
        np.testing.assert_allclose(
            est.kron, kronecker(s2.matrix, s1.matrix), rtol=1e-12
        )
        assert float(np.trace(est.sigma2_hat.matrix)) == pytest.approx(3.0, rel=1e-14)


class TestExistence:
    @pytest.mark.parametrize(
        "p,q,required",
        [(4, 1, 4), (5, 3, 2), (3, 5, 2), (2, 2, 1)],
    )
    def test_boundary(self, p, q, required):
        matsl.require_existence(required, p, q)
        with pytest.raises(ExistenceViolationError):
            matsl.require_existence(required - 1, p, q)

    def test_fit_respects_gate(self, rng):
        s1, s2 = random_pair(rng, 5, 3)
        data = matsl.sample(s1, s2, 1, seed=44)
        with pytest.raises(ExistenceViolationError):
            matsl.em_fit(data)
        # N = 2 passes the gate.  At this degenerate size the likelihood
        # itself may be unbounded, so any outcome other than an existence
        # rejection (including a numerical failure) is in-contract.
        data2 = matsl.sample(s1, s2, 2, seed=44)
        try:
            matsl.em_fit(data2, mvsl.EmConfig(max_iterations=50))
        except ExistenceViolationError:
            pytest.fail("existence gate must admit N = 2 for (p, q) = (5, 3)")
        except Exception:
            pass

    def test_fit_converges_above_boundary(self, rng):
        s1, s2 = random_pair(rng, 5, 3)
        data = matsl.sample(s1, s2, 10, seed=45)
        report, _ = matsl.em_fit(data)
        assert report.converged


class TestEmFit:
    def test_monotone_trace(self, rng):
        for _ in range(10):
            p = int(rng.choice([2, 3, 5]))
            q = int(rng.choice([2, 3, 5]))
            s1, s2 = random_pair(rng, p, q)
            n = int(2 * max(p, q))
            data = matsl.sample(s1, s2, n, seed=int(rng.integers(2**31)))
            report, _ = matsl.em_fit(data)
            assert np.all(np.diff(report.trace) >= -1e-9)

    def test_fixed_point_residuals(self, rng):
        for _ in range(5):
            p, q = 3, 2
            s1, s2 = random_pair(rng, p, q)
            data = matsl.sample(s1, s2, 40, seed=int(rng.integers(2**31)))
            report, ke = matsl.em_fit(data)
            assert report.converged
            m = matsl.model(ke.sigma1_hat, ke.sigma2_hat)
            x = data.observations
            v = np.array([matsl.weight(m, xi) for xi in x])
            # update equation for sigma1 given sigma2
            inv2 = np.linalg.inv(ke.sigma2_hat.matrix)
            upd1 = sum(vi * xi @ inv2 @ xi.T for vi, xi in zip(v, x)) / (q * data.n)
            rel1 = frobenius_norm(upd1 - ke.sigma1_hat.matrix) / frobenius_norm(
                ke.sigma1_hat.matrix
            )
            assert rel1 <= 1e-8
            # update equation for sigma2 given the once-updated sigma1
            inv1 = np.linalg.inv(0.5 * (upd1 + upd1.T))
            upd2 = sum(vi * xi.T @ inv1 @ xi for vi, xi in zip(v, x)) / (p * data.n)
            rel2 = frobenius_norm(upd2 - ke.sigma2_hat.matrix) / frobenius_norm(
                ke.sigma2_hat.matrix
            )
            assert rel2 <= 1e-8

    def test_kronecker_identified_across_scaled_initials(self, rng):
        s1, s2 = random_pair(rng, 3, 2)
        data = matsl.sample(s1, s2, 50, seed=66)
        x = data.observations
        init1 = np.einsum("nij,nkj->ik", x, x) / (2 * data.n)
        init2 = np.einsum("nji,njk->ik", x, x) / (3 * data.n)
        _, a = matsl.em_fit(data, initial1=cholesky(init1), initial2=cholesky(init2))
        _, b = matsl.em_fit(
            data,
            initial1=cholesky(5.0 * init1),
            initial2=cholesky(init2 / 5.0),
        )
        assert frobenius_norm(a.kron - b.kron) <= 1e-6 * frobenius_norm(a.kron)

    def test_q1_reduces_to_mvsl(self, rng):
        # With q = 1 and matched initials, the Kronecker product tracks the
        # mvsl iterate exactly, so estimates and iteration counts coincide.
        for trial in range(5):
            p = int(rng.choice([2, 3, 4]))
            spd = cholesky(random_spd(rng, p))
            n = 4 * p
            seed = int(rng.integers(2**31))
            v_data = mvsl.sample(spd, n, seed=seed)
            m_data = matsl.MatslSample(v_data.observations[:, :, None])
            scatter = v_data.observations.T @ v_data.observations / n
            v_report = mvsl.em_fit(v_data, initial=cholesky(scatter))
            m_report, ke = matsl.em_fit(
                m_data,
                initial1=cholesky(scatter),
                initial2=cholesky(np.eye(1)),
            )
            assert m_report.iterations == v_report.iterations
            assert frobenius_norm(
                ke.kron - v_report.estimate.matrix
            ) <= 1e-10 * frobenius_norm(ke.kron)

    def test_default_initials_match_scatter_formulas(self, rng):
        s1, s2 = random_pair(rng, 2, 3)
        data = matsl.sample(s1, s2, 30, seed=17)
        x = data.observations
        report, _ = matsl.em_fit(data)
        init1 = np.einsum("nij,nkj->ik", x, x) / (3 * data.n)
        init2 = np.einsum("nji,njk->ik", x, x) / (2 * data.n)
        want = matsl.log_likelihood(cholesky(init1), cholesky(init2), data)
        assert report.trace[0] == pytest.approx(want, rel=1e-12)

    def test_estimate_is_normalized_pair(self, rng):
        s1, s2 = random_pair(rng, 2, 3)
        data = matsl.sample(s1, s2, 30, seed=19)
        report, ke = matsl.em_fit(data)
        est1, est2 = report.estimate
        assert float(np.trace(est2.matrix)) == pytest.approx(3.0, rel=1e-13)
        np.testing.assert_allclose(
            ke.kron, kronecker(est2.matrix, est1.matrix), rtol=1e-12
        )
