import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srivw import (
    Dataset,
    NotPsdError,
    conditional_f,
    sample_strength_matrix,
    strength_report,
    symmetric_sqrt,
)

from conftest import random_dataset


def dataset_k1(gamma_hat, se_x, gamma_y=None, se_y=None):
    p = len(gamma_hat)
    gamma_y = np.zeros(p) if gamma_y is None else np.asarray(gamma_y, float)
    se_y = np.ones(p) if se_y is None else np.asarray(se_y, float)
    return Dataset(
        [f"rs{j}" for j in range(p)],
        np.asarray(gamma_hat, float).reshape(p, 1),
        np.asarray(se_x, float).reshape(p, 1),
        gamma_y,
        se_y,
        np.eye(1),
    )


symmetric_5x5 = arrays(
    np.float64, (5, 5),
    elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False),
).map(lambda a: a + a.T)


class TestSymmetricSqrt:
    def test_identity(self):
        np.testing.assert_allclose(symmetric_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(symmetric_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_square_reproduces_input(self):
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        s = symmetric_sqrt(a)
        np.testing.assert_allclose(s @ s, a, rtol=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPsdError):
            symmetric_sqrt(np.diag([1.0, -1.0]))

    def test_clips_tiny_negative(self):
        out = symmetric_sqrt(np.diag([1.0, -1e-12]))
        assert out[1, 1] == 0.0

    @settings(max_examples=50, deadline=None)
    @given(symmetric_5x5)
    def test_psd_square_root_property(self, a):
        a = a @ a.T  # make PSD
        s = symmetric_sqrt(a)
        scale = max(1.0, np.linalg.norm(a))
        assert np.linalg.norm(s @ s - a) <= 1e-10 * scale
        np.testing.assert_allclose(s, s.T)


class TestSampleStrengthMatrix:
    def test_k1_hand_computation(self):
        data = dataset_k1([3.0, 4.0], [1.0, 1.0])
        rep = sample_strength_matrix(data)
        np.testing.assert_allclose(rep.strength_matrix, [[23.0]])
        assert rep.lambda_min == pytest.approx(23.0)
        assert rep.lambda_min_over_sqrt_p == pytest.approx(23.0 / np.sqrt(2.0))

    def test_null_signal_gives_minus_p_identity(self):
        rng = np.random.default_rng(2)
        data, _ = random_dataset(rng, p=10, k=3, z_scale=1e-12)
        data = Dataset(data.ids, np.zeros((10, 3)), data.se_x, data.gamma_y_hat,
                       data.se_y, data.shared_correlation)
        rep = sample_strength_matrix(data)
        np.testing.assert_allclose(rep.strength_matrix, -10 * np.eye(3), atol=1e-9)
        assert rep.lambda_min == pytest.approx(-10.0)

    def test_unbiasedness_monte_carlo(self):
        # mean over draws matches the noise-free strength matrix within 3 MC SEs
        rng = np.random.default_rng(42)
        k, p, reps = 3, 100, 10_000
        corr = np.array([[1.0, -0.1, -0.05], [-0.1, 1.0, 0.2], [-0.05, 0.2, 1.0]])
        se_x = 0.01 * rng.uniform(0.8, 1.3, size=(p, k))
        gammas = rng.normal(0.0, 4.0, size=(p, k)) * se_x
        w, q = np.linalg.eigh(corr)
        isq = (q / np.sqrt(w)) @ q.T
        b = (gammas / se_x) @ isq
        truth = b.T @ b
        chol = np.linalg.cholesky(corr)
        draws = np.empty((reps, k, k))
        se_y = np.full(p, 0.01)
        gy = np.zeros(p)
        for r in range(reps):
            gh = gammas + (rng.standard_normal((p, k)) @ chol.T) * se_x
            data = Dataset([str(j) for j in range(p)], gh, se_x, gy, se_y, corr,
                           validate=False)
            draws[r] = sample_strength_matrix(data).strength_matrix
        mean = draws.mean(axis=0)
        mcse = draws.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(mean - truth) <= 3.0 * mcse)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        data, _ = random_dataset(rng, p=30, k=3)
        base = sample_strength_matrix(data).strength_matrix
        for c in (0.01, 3.7, 250.0):
            gamma = data.gamma_hat.copy()
            se = data.se_x.copy()
            gamma[:, 1] *= c
            se[:, 1] *= c
            scaled = Dataset(data.ids, gamma, se, data.gamma_y_hat, data.se_y,
                             data.shared_correlation)
            out = sample_strength_matrix(scaled).strength_matrix
            np.testing.assert_allclose(out, base, rtol=1e-10)

    def test_snp_permutation_invariance(self):
        rng = np.random.default_rng(4)
        data, _ = random_dataset(rng, p=25, k=2)
        perm = rng.permutation(25)
        shuffled = data.subset(perm)
        np.testing.assert_allclose(
            sample_strength_matrix(shuffled).strength_matrix,
            sample_strength_matrix(data).strength_matrix,
            rtol=1e-10,
        )


class TestConditionalF:
    def test_k1_collapses_to_mean_chi2(self):
        data = dataset_k1([3.0, 4.0], [1.0, 2.0])
        expected = (9.0 / 1.0 + 16.0 / 4.0) / 2.0
        assert conditional_f(data, 0) == pytest.approx(expected)

    def test_perfect_collinearity_zeroes_conditional_signal(self):
        rng = np.random.default_rng(5)
        g1 = rng.normal(size=40)
        gammas = np.column_stack([g1, 2.0 * g1])
        se = np.full((40, 2), 0.5)
        data = Dataset([str(j) for j in range(40)], gammas, se, np.zeros(40),
                       np.ones(40), np.eye(2))
        assert conditional_f(data, 0, true_gammas=gammas) == pytest.approx(0.0, abs=1e-18)
        assert conditional_f(data, 1, true_gammas=gammas) == pytest.approx(0.0, abs=1e-18)

    def test_oracle_growth_rates_under_near_collinear_construction(self):
        # two exposures nearly collinear (gap ~ 1/sqrt(n)), third with its own
        # signal: conditional strength stays flat for 1 and 2, grows like n
        # for 3 as n doubles.
        rng = np.random.default_rng(6)
        p, c = 200, 1.0
        # centering removes the weakly identified intercept channel that
        # would otherwise let the projection coefficients blow up
        base = rng.normal(0.0, p ** -0.25, size=p)
        base -= base.mean()
        eps = rng.normal(0.0, p ** -0.25, size=p)
        eps -= eps.mean()
        var_y = 1.0
        f_values = {1: [], 2: [], 3: []}
        for n in (10_000, 20_000, 40_000, 80_000):
            g1 = base
            g2 = g1 + c / np.sqrt(n)
            g3 = 0.5 * g1 + 0.5 * g2 + eps
            gammas = np.column_stack([g1, g2, g3])
            se_x = np.full((p, 3), 1.0 / np.sqrt(n))
            se_y = np.full(p, np.sqrt(var_y / n))
            data = Dataset([str(j) for j in range(p)], gammas, se_x, np.zeros(p),
                           se_y, np.eye(3))
            for k in (1, 2, 3):
                f_values[k].append(conditional_f(data, k - 1, true_gammas=gammas))
        for k in (1, 2):
            vals = np.array(f_values[k])
            assert vals.max() / vals.min() < 1.5  # bounded along the ladder
        f3 = np.array(f_values[3])
        ratios = f3[1:] / f3[:-1]
        assert np.all((ratios > 1.7) & (ratios < 2.3))  # grows like n/p

    def test_report_includes_all_exposures(self):
        rng = np.random.default_rng(7)
        data, _ = random_dataset(rng, p=40, k=3)
        rep = strength_report(data)
        assert rep.conditional_f.shape == (3,)
        assert np.all(rep.conditional_f >= 0)
        assert rep.lambda_min == pytest.approx(np.linalg.eigvalsh(rep.strength_matrix)[0])
