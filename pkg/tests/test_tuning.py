import numpy as np
import pytest

import srivw
from srivw import (
    Dataset,
    DegenerateDenominatorError,
    ValidationError,
    grid_b,
    q_statistic,
    select_phi,
)

from conftest import random_dataset


class TestGridB:
    def test_matched_threshold_grid(self):
        grid = grid_b(17.0)
        assert len(grid) == 36
        assert grid[0] == 0.0
        assert grid[1] == pytest.approx(np.exp(-17.0))
        assert grid[-1] == pytest.approx(1.0)

    def test_zero_strength_upper_bound(self):
        grid = grid_b(0.0)
        assert grid[-1] == pytest.approx(np.exp(17.0), rel=1e-12)
        assert grid[-1] == pytest.approx(2.415e7, rel=1e-3)

    def test_step_equal_to_cap(self):
        lam = 3.0
        grid = grid_b(lam, c=17.0, step=17.0)
        np.testing.assert_allclose(grid, [0.0, np.exp(-lam), np.exp(17.0 - lam)])

    def test_strictly_increasing_and_length(self):
        for lam in (-5.0, 0.0, 7.6, 30.0):
            for step in (0.25, 0.5, 1.0, 3.0):
                grid = grid_b(lam, step=step)
                assert len(grid) == 2 + int(np.floor(17.0 / step))
                assert np.all(np.diff(grid) > 0)

    def test_negative_lambda_allowed(self):
        grid = grid_b(-2.0)
        assert grid[-1] == pytest.approx(np.exp(19.0))


class TestQStatistic:
    def test_perfect_fit_is_zero(self):
        rng = np.random.default_rng(0)
        data, _ = random_dataset(rng, p=20, k=2)
        beta = np.array([0.3, -0.2])
        exact = Dataset(data.ids, data.gamma_hat, data.se_x,
                        data.gamma_hat @ beta, data.se_y, data.shared_correlation)
        assert q_statistic(exact, beta) == pytest.approx(0.0, abs=1e-20)

    def test_single_snp_hand_example(self):
        # residual 3, se_y = 1, beta' Sigma_X beta = 2
        data = Dataset(["rs1"], [[1.0]], [[np.sqrt(2.0)]], [4.0], [1.0], np.eye(1))
        assert q_statistic(data, np.array([1.0])) == pytest.approx(3.0)

    def test_zero_beta_collapses_denominator(self):
        rng = np.random.default_rng(1)
        data, _ = random_dataset(rng, p=15, k=3)
        expected = np.sum(data.gamma_y_hat ** 2 / data.se_y ** 2)
        assert q_statistic(data, np.zeros(3)) == pytest.approx(expected, rel=1e-12)

    def test_overlap_mode_requires_cov(self):
        rng = np.random.default_rng(2)
        data, _ = random_dataset(rng, p=15, k=2)
        with pytest.raises(ValidationError):
            q_statistic(data, np.zeros(2), mode="overlap")

    def test_overlap_degenerate_denominator_names_snp(self):
        se_x = np.full((3, 1), 1.0)
        se_y = np.ones(3)
        # at the |cov| = se_x * se_y bound the denominator hits exactly zero
        cov = np.array([[0.0], [0.0], [1.0]])
        data = Dataset(["a", "b", "c"], np.ones((3, 1)), se_x, np.ones(3), se_y,
                       np.eye(1), cov)
        with pytest.raises(DegenerateDenominatorError, match="'c'"):
            q_statistic(data, np.array([1.0]), mode="overlap")


class TestSelectPhi:
    def test_phi_star_in_grid_and_attains_min(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            data, _ = random_dataset(rng, p=60, k=3)
            result = select_phi(data)
            phis = [phi for phi, _ in result.q_values]
            qs = np.array([q for _, q in result.q_values])
            assert result.phi_star in phis
            idx = phis.index(result.phi_star)
            assert qs[idx] == pytest.approx(qs.min())
            lam = srivw.sample_strength_matrix(data).lambda_min_over_sqrt_p
            assert result.phi_star <= np.exp(17.0 - lam) * (1 + 1e-12)
            assert result.grid_upper_exponent == pytest.approx(17.0 - lam)

    def test_strong_instruments_need_no_regularization(self):
        cfg = srivw.table1_config(reps=2, seed=5, divisor=2.5)
        data = srivw.generate_summary(cfg, 0)
        result = select_phi(data)
        assert srivw.sample_strength_matrix(data).lambda_min_over_sqrt_p > 17
        plain = srivw.srivw(data, 0.0)
        np.testing.assert_allclose(
            result.selected_estimate.beta, plain.beta, atol=1e-3
        )

    def test_replay_stable(self):
        rng = np.random.default_rng(4)
        data, _ = random_dataset(rng, p=40, k=2)
        r1 = select_phi(data)
        r2 = select_phi(data)
        assert r1.phi_star == r2.phi_star
        assert r1.q_values == r2.q_values

    def test_tie_break_prefers_smallest_phi(self, monkeypatch):
        rng = np.random.default_rng(5)
        data, _ = random_dataset(rng, p=40, k=2)
        # force identical Q at every grid point: constant beta regardless of phi
        monkeypatch.setattr(
            "srivw.tuning._srivw_beta", lambda d, phi, overlap=False: np.zeros(d.k)
        )
        result = select_phi(data)
        assert result.phi_star == 0.0

    def test_pleiotropy_mode_returns_overdispersed_estimate(self):
        rng = np.random.default_rng(6)
        data, _ = random_dataset(rng, p=50, k=2)
        result = select_phi(data, mode="pleiotropy")
        assert result.selected_estimate.method == "srivw_pleiotropy"
        assert result.selected_estimate.tau2 is not None

    def test_overlap_mode_selects_overlap_estimator(self):
        rng = np.random.default_rng(7)
        data, _ = random_dataset(rng, p=50, k=2, with_cov_xy=True)
        result = select_phi(data, mode="overlap")
        assert result.selected_estimate.method == "srivw_overlap"

    def test_unknown_mode_rejected(self):
        rng = np.random.default_rng(8)
        data, _ = random_dataset(rng, p=20, k=2)
        with pytest.raises(ValidationError):
            select_phi(data, mode="bogus")
