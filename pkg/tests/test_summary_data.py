import logging

import numpy as np
import pytest

import srivw
from srivw import (
    Dataset,
    InsufficientDataError,
    ParseError,
    SnpSummary,
    TrueModel,
    ValidationError,
    build_sigma_xj,
    estimate_shared_correlation,
    load_dataset,
    write_dataset,
)

from conftest import random_dataset


def write_tsv(path, rows, k=1, with_cov=False):
    cols = ["snp"]
    cols += [f"beta_x{i}" for i in range(1, k + 1)]
    cols += [f"se_x{i}" for i in range(1, k + 1)]
    cols += ["beta_y", "se_y"]
    if with_cov:
        cols += [f"cov_xy{i}" for i in range(1, k + 1)]
    lines = ["\t".join(cols)]
    lines += ["\t".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestSnpSummary:
    def test_rejects_zero_se(self):
        with pytest.raises(ValidationError):
            SnpSummary("rs1", [0.1], [0.0], 0.2, 1.0)

    def test_rejects_nan_effect(self):
        with pytest.raises(ValidationError):
            SnpSummary("rs1", [np.nan], [1.0], 0.2, 1.0)

    def test_rejects_cov_xy_implying_corr_above_one(self):
        with pytest.raises(ValidationError):
            SnpSummary("rs1", [0.1], [0.5], 0.2, 2.0, cov_xy=[1.1])
        # exactly at the bound is allowed
        SnpSummary("rs1", [0.1], [0.5], 0.2, 2.0, cov_xy=[1.0])


class TestLoadDataset:
    def test_minimal_two_snp_file(self, tmp_path):
        f = tmp_path / "d.tsv"
        write_tsv(f, [["rs1", 0.1, 0.01, 0.2, 0.02], ["rs2", -0.1, 0.01, 0.0, 0.02]])
        data = load_dataset(f, 1)
        assert data.p == 2 and data.k == 1
        assert data.ids == ("rs1", "rs2")
        assert np.allclose(data.shared_correlation, np.eye(1))

    def test_zero_se_names_data_row(self, tmp_path):
        f = tmp_path / "d.tsv"
        rows = [["rs1", 0.1, 0.01, 0.2, 0.02],
                ["rs2", 0.1, 0.01, 0.2, 0.02],
                ["rs3", 0.1, 0.0, 0.2, 0.02]]
        write_tsv(f, rows)
        with pytest.raises(ValidationError, match="row 3"):
            load_dataset(f, 1)

    def test_malformed_row_names_line(self, tmp_path):
        f = tmp_path / "d.tsv"
        write_tsv(f, [["rs1", 0.1, 0.01, 0.2, 0.02], ["rs2", "oops", 0.01, 0.2, 0.02]])
        with pytest.raises(ParseError, match="line 3"):
            load_dataset(f, 1)

    def test_wrong_header_is_parse_error(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("snp\tbeta\tse\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1"):
            load_dataset(f, 1)

    def test_non_pd_correlation_rejected(self, tmp_path):
        f = tmp_path / "d.tsv"
        write_tsv(f, [["rs1", 0.1, 0.01, 0.1, 0.01, 0.2, 0.02],
                      ["rs2", 0.1, 0.01, 0.1, 0.01, 0.2, 0.02]], k=2)
        c = tmp_path / "corr.txt"
        c.write_text("1 1\n1 1\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="positive definite"):
            load_dataset(f, 2, c)

    def test_missing_correlation_warns_and_defaults(self, tmp_path, caplog):
        f = tmp_path / "d.tsv"
        write_tsv(f, [["rs1", 0.1, 0.01, 0.2, 0.02], ["rs2", 0.1, 0.01, 0.2, 0.02]])
        with caplog.at_level(logging.WARNING, logger="srivw.summary_data"):
            data = load_dataset(f, 1)
        assert any("identity" in r.message for r in caplog.records)
        assert np.allclose(data.shared_correlation, np.eye(1))

    def test_roundtrip_identity_to_12_digits(self, tmp_path):
        rng = np.random.default_rng(5)
        data, _ = random_dataset(rng, p=20, k=3, with_cov_xy=True)
        f = tmp_path / "out.tsv"
        c = tmp_path / "corr.txt"
        write_dataset(data, f)
        srivw.write_correlation(data.shared_correlation, c)
        back = load_dataset(f, 3, c)
        assert back.ids == data.ids
        for name in ("gamma_hat", "se_x", "gamma_y_hat", "se_y", "cov_xy",
                     "shared_correlation"):
            np.testing.assert_allclose(
                getattr(back, name), getattr(data, name), rtol=1e-12, atol=0.0
            )


class TestDataset:
    def test_p_must_cover_k(self):
        with pytest.raises(ValidationError, match="p="):
            Dataset(["rs1"], [[0.1, 0.2]], [[0.1, 0.1]], [0.1], [0.1], np.eye(2))

    def test_snps_records_match_arrays(self):
        rng = np.random.default_rng(11)
        data, _ = random_dataset(rng, p=5, k=2)
        snps = data.snps
        assert len(snps) == 5
        np.testing.assert_array_equal(snps[3].gamma_hat, data.gamma_hat[3])
        rebuilt = Dataset.from_snps(snps, data.shared_correlation)
        np.testing.assert_array_equal(rebuilt.gamma_hat, data.gamma_hat)

    def test_arrays_read_only(self):
        rng = np.random.default_rng(12)
        data, _ = random_dataset(rng, p=5, k=2)
        with pytest.raises(ValueError):
            data.gamma_hat[0, 0] = 1.0


class TestBuildSigmaXj:
    def test_identity(self):
        np.testing.assert_allclose(build_sigma_xj([1, 1, 1], np.eye(3)), np.eye(3))

    def test_hand_product(self):
        out = build_sigma_xj([2.0, 3.0], [[1.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(out, [[4.0, 3.0], [3.0, 9.0]])

    def test_preserves_negative_offdiagonal_correlation(self):
        corr = np.array([[1.0, -0.1], [-0.1, 1.0]])
        out = build_sigma_xj([1.0, 1.0], corr)
        assert out[0, 1] == pytest.approx(-0.1)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="mismatch"):
            build_sigma_xj([1.0, 1.0], np.eye(3))

    def test_smallest_eigenvalue_bound(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            k = int(rng.integers(1, 5))
            se = rng.uniform(0.2, 3.0, k)
            a = rng.normal(size=(k, k))
            corr = a @ a.T + k * np.eye(k)
            d = np.sqrt(np.diag(corr))
            corr = corr / np.outer(d, d)
            out = build_sigma_xj(se, corr)
            np.testing.assert_allclose(out, out.T)
            lo = se.min() ** 2 * np.linalg.eigvalsh(corr)[0]
            assert np.linalg.eigvalsh(out)[0] >= lo * (1 - 1e-10)


class TestEstimateSharedCorrelation:
    def test_identical_columns_give_unit_correlation(self):
        z = np.random.default_rng(0).normal(size=(40, 1))
        out = estimate_shared_correlation(np.hstack([z, z]))
        assert out[0, 1] == pytest.approx(1.0)

    def test_independent_columns_near_zero(self):
        rng = np.random.default_rng(123)
        z = rng.standard_normal((100_000, 3))
        out = estimate_shared_correlation(z)
        off = out[~np.eye(3, dtype=bool)]
        # Monte Carlo oracle: sample correlations are within ~3/sqrt(T) of 0
        assert np.all(np.abs(off) < 0.01)

    def test_single_column(self):
        out = estimate_shared_correlation(np.random.default_rng(1).normal(size=(50, 1)))
        np.testing.assert_allclose(out, [[1.0]])

    def test_too_few_rows(self):
        with pytest.raises(InsufficientDataError):
            estimate_shared_correlation(np.array([[1.0, 2.0]]))

    def test_constant_column(self):
        z = np.ones((10, 2))
        z[:, 0] = np.arange(10)
        with pytest.raises(InsufficientDataError):
            estimate_shared_correlation(z)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(77)
        z = rng.standard_normal((200, 4))
        perm = rng.permutation(200)
        np.testing.assert_allclose(
            estimate_shared_correlation(z), estimate_shared_correlation(z[perm]),
            rtol=0.0, atol=1e-12,
        )

    def test_semidefinite_repair(self):
        # three perfectly dependent columns force a semidefinite estimate
        rng = np.random.default_rng(3)
        a = rng.standard_normal(100)
        b = rng.standard_normal(100)
        z = np.column_stack([a, b, a + b])
        out = estimate_shared_correlation(z)
        assert np.linalg.eigvalsh(out)[0] > 0
        np.testing.assert_allclose(np.diag(out), 1.0, atol=1e-12)


class TestTrueModel:
    def test_gamma_y_always_derived(self):
        rng = np.random.default_rng(8)
        tm = TrueModel(
            gammas=rng.normal(size=(6, 2)),
            se_x=np.full((6, 2), 0.1),
            se_y=np.full(6, 0.1),
            beta0=[0.5, -0.25],
        )
        np.testing.assert_allclose(tm.true_gamma_y, tm.gammas @ np.array([0.5, -0.25]))

    def test_overlap_block_must_match_shared(self):
        rng = np.random.default_rng(9)
        overlap = np.eye(3)
        with pytest.raises(ValidationError):
            TrueModel(
                gammas=rng.normal(size=(4, 2)),
                se_x=np.full((4, 2), 0.1),
                se_y=np.full(4, 0.1),
                beta0=[0.0, 0.0],
                shared_correlation=[[1.0, 0.5], [0.5, 1.0]],
                overlap_correlation=overlap,
            )
