"""Data model and file IO for GWAS summary statistics.

A dataset holds, for each of p independent SNPs, the estimated marginal
associations with K exposures (with standard errors), the estimated marginal
association with the outcome (with standard error), and optionally the
covariance row between the exposure and outcome estimates when the underlying
GWAS samples overlap.  The per-SNP exposure covariance matrix is the SE
diagonal conjugated with a single correlation matrix shared across SNPs.

File format: UTF-8 TSV with a mandatory header
``snp  beta_x1..beta_xK  se_x1..se_xK  beta_y  se_y  [cov_xy1..cov_xyK]``.
The shared correlation matrix travels in a separate whitespace-separated
K-row file; when absent it defaults to the identity (with a logged warning).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import InsufficientDataError, ParseError, ValidationError

logger = logging.getLogger(__name__)

# Slack for the |cov_xy| <= se_x * se_y bound, absorbing float rounding only.
_CORR_BOUND_SLACK = 1.0 + 1e-12


def _as_float_vector(x, name: str, length: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValidationError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def _check_correlation(matrix: np.ndarray, k: int, name: str = "shared_correlation") -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.shape != (k, k):
        raise ValidationError(f"{name} must be {k}x{k}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} contains non-finite entries")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10):
        raise ValidationError(f"{name} is not symmetric")
    if not np.allclose(np.diag(m), 1.0, rtol=0.0, atol=1e-10):
        raise ValidationError(f"{name} must have a unit diagonal")
    m = 0.5 * (m + m.T)
    if np.linalg.eigvalsh(m)[0] <= 0.0:
        raise ValidationError(f"{name} is not positive definite")
    return m


@dataclass(frozen=True)
class SnpSummary:
    """One SNP's estimated associations.

    Parameters
    ----------
    id : str
        SNP label.
    gamma_hat : (K,) array
        Marginal SNP-exposure effect estimates.
    se_x : (K,) array
        Standard errors of ``gamma_hat``, strictly positive.
    gamma_y_hat : float
        Marginal SNP-outcome effect estimate.
    se_y : float
        Standard error of ``gamma_y_hat``, strictly positive.
    cov_xy : (K,) array, optional
        Covariance between ``gamma_hat`` and ``gamma_y_hat`` under sample
        overlap; each entry is bounded by ``se_x[k] * se_y`` in magnitude.
    """

    id: str
    gamma_hat: np.ndarray
    se_x: np.ndarray
    gamma_y_hat: float
    se_y: float
    cov_xy: Optional[np.ndarray] = None

    def __post_init__(self):
        gamma = _as_float_vector(self.gamma_hat, "gamma_hat")
        k = gamma.shape[0]
        se_x = _as_float_vector(self.se_x, "se_x", k)
        if not np.all(np.isfinite(gamma)):
            raise ValidationError(f"snp '{self.id}': gamma_hat has non-finite entries")
        if not np.isfinite(self.gamma_y_hat):
            raise ValidationError(f"snp '{self.id}': gamma_y_hat is not finite")
        if not (np.all(np.isfinite(se_x)) and np.all(se_x > 0.0)):
            raise ValidationError(f"snp '{self.id}': se_x entries must be positive and finite")
        if not (np.isfinite(self.se_y) and self.se_y > 0.0):
            raise ValidationError(f"snp '{self.id}': se_y must be positive and finite")
        cov = self.cov_xy
        if cov is not None:
            cov = _as_float_vector(cov, "cov_xy", k)
            bound = se_x * float(self.se_y) * _CORR_BOUND_SLACK
            if not np.all(np.isfinite(cov)) or np.any(np.abs(cov) > bound):
                raise ValidationError(
                    f"snp '{self.id}': |cov_xy| exceeds se_x*se_y (implied correlation > 1)"
                )
            object.__setattr__(self, "cov_xy", cov)
        object.__setattr__(self, "gamma_hat", gamma)
        object.__setattr__(self, "se_x", se_x)
        object.__setattr__(self, "gamma_y_hat", float(self.gamma_y_hat))
        object.__setattr__(self, "se_y", float(self.se_y))

    @property
    def k(self) -> int:
        return self.gamma_hat.shape[0]


class Dataset:
    """Ordered collection of p SNP summaries plus the shared correlation.

    Immutable after construction.  Column-stacked arrays are the primary
    storage so estimators operate on dense matrices; per-SNP ``SnpSummary``
    records are materialized lazily through :attr:`snps`.
    """

    def __init__(
        self,
        ids: Sequence[str],
        gamma_hat: np.ndarray,
        se_x: np.ndarray,
        gamma_y_hat: np.ndarray,
        se_y: np.ndarray,
        shared_correlation: np.ndarray,
        cov_xy: Optional[np.ndarray] = None,
        *,
        validate: bool = True,
    ):
        self.ids = tuple(str(i) for i in ids)
        self.gamma_hat = np.array(gamma_hat, dtype=float)
        self.se_x = np.array(se_x, dtype=float)
        self.gamma_y_hat = np.array(gamma_y_hat, dtype=float)
        self.se_y = np.array(se_y, dtype=float)
        self.shared_correlation = np.array(shared_correlation, dtype=float)
        self.cov_xy = None if cov_xy is None else np.array(cov_xy, dtype=float)
        self._cache: dict = {}
        if validate:
            self._validate()
        for arr in (self.gamma_hat, self.se_x, self.gamma_y_hat, self.se_y,
                    self.shared_correlation):
            arr.setflags(write=False)
        if self.cov_xy is not None:
            self.cov_xy.setflags(write=False)

    def _validate(self):
        if self.gamma_hat.ndim != 2:
            raise ValidationError("gamma_hat must be a p x K matrix")
        p, k = self.gamma_hat.shape
        if len(self.ids) != p:
            raise ValidationError("ids length does not match gamma_hat rows")
        if self.se_x.shape != (p, k):
            raise ValidationError("se_x must match gamma_hat's shape")
        if self.gamma_y_hat.shape != (p,) or self.se_y.shape != (p,):
            raise ValidationError("gamma_y_hat and se_y must be length-p vectors")
        if p < k:
            raise ValidationError(f"need at least K={k} SNPs, got p={p}")
        self.shared_correlation = _check_correlation(self.shared_correlation, k)
        if not np.all(np.isfinite(self.gamma_hat)) or not np.all(np.isfinite(self.gamma_y_hat)):
            bad = self._first_bad(~np.isfinite(self.gamma_hat).all(axis=1)
                                  | ~np.isfinite(self.gamma_y_hat))
            raise ValidationError(f"snp '{bad}': non-finite effect estimate")
        se_ok = np.isfinite(self.se_x).all(axis=1) & (self.se_x > 0).all(axis=1) \
            & np.isfinite(self.se_y) & (self.se_y > 0)
        if not np.all(se_ok):
            idx = int(np.flatnonzero(~se_ok)[0])
            raise ValidationError(
                f"snp '{self.ids[idx]}' (data row {idx + 1}): standard errors must be "
                "positive and finite"
            )
        if self.cov_xy is not None:
            if self.cov_xy.shape != (p, k):
                raise ValidationError("cov_xy must match gamma_hat's shape")
            bound = self.se_x * self.se_y[:, None] * _CORR_BOUND_SLACK
            ok = np.isfinite(self.cov_xy).all(axis=1) & (np.abs(self.cov_xy) <= bound).all(axis=1)
            if not np.all(ok):
                idx = int(np.flatnonzero(~ok)[0])
                raise ValidationError(
                    f"snp '{self.ids[idx]}': |cov_xy| exceeds se_x*se_y"
                )

    def _first_bad(self, mask: np.ndarray) -> str:
        idx = int(np.flatnonzero(mask)[0])
        return self.ids[idx]

    @property
    def p(self) -> int:
        return self.gamma_hat.shape[0]

    @property
    def k(self) -> int:
        return self.gamma_hat.shape[1]

    @property
    def has_cov_xy(self) -> bool:
        return self.cov_xy is not None

    @property
    def snps(self) -> tuple:
        """Per-SNP records, in file order."""
        if "snps" not in self._cache:
            cov = self.cov_xy
            self._cache["snps"] = tuple(
                SnpSummary(
                    id=self.ids[j],
                    gamma_hat=self.gamma_hat[j],
                    se_x=self.se_x[j],
                    gamma_y_hat=self.gamma_y_hat[j],
                    se_y=self.se_y[j],
                    cov_xy=None if cov is None else cov[j],
                )
                for j in range(self.p)
            )
        return self._cache["snps"]

    @classmethod
    def from_snps(cls, snps: Sequence[SnpSummary], shared_correlation: np.ndarray) -> "Dataset":
        if not snps:
            raise ValidationError("dataset needs at least one SNP")
        k = snps[0].k
        for s in snps:
            if s.k != k:
                raise ValidationError(f"snp '{s.id}': gamma_hat length {s.k} != {k}")
        have_cov = [s.cov_xy is not None for s in snps]
        if any(have_cov) and not all(have_cov):
            raise ValidationError("cov_xy must be present for all SNPs or none")
        cov = np.vstack([s.cov_xy for s in snps]) if all(have_cov) else None
        return cls(
            ids=[s.id for s in snps],
            gamma_hat=np.vstack([s.gamma_hat for s in snps]),
            se_x=np.vstack([s.se_x for s in snps]),
            gamma_y_hat=np.array([s.gamma_y_hat for s in snps]),
            se_y=np.array([s.se_y for s in snps]),
            shared_correlation=shared_correlation,
            cov_xy=cov,
        )

    def subset(self, keep: np.ndarray) -> "Dataset":
        """New dataset restricted to ``keep`` (boolean mask or index array)."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        return Dataset(
            ids=[self.ids[int(i)] for i in keep],
            gamma_hat=self.gamma_hat[keep],
            se_x=self.se_x[keep],
            gamma_y_hat=self.gamma_y_hat[keep],
            se_y=self.se_y[keep],
            shared_correlation=self.shared_correlation,
            cov_xy=None if self.cov_xy is None else self.cov_xy[keep],
        )

    def sigma_xj(self, j: int) -> np.ndarray:
        """Per-SNP exposure covariance matrix for SNP ``j``."""
        return build_sigma_xj(self.se_x[j], self.shared_correlation)


@dataclass(frozen=True)
class TrueModel:
    """Simulation ground truth.

    The true SNP-outcome association is always derived as
    ``gammas @ beta0`` (plus a pleiotropic draw when ``tau0 > 0``); it is
    never stored independently.
    """

    gammas: np.ndarray                  # (p, K) true SNP-exposure effects
    se_x: np.ndarray                    # (p, K)
    se_y: np.ndarray                    # (p,)
    beta0: np.ndarray                   # (K,) true causal effects
    tau0: float = 0.0                   # balanced-pleiotropy SD
    shared_correlation: Optional[np.ndarray] = None   # (K, K); identity if omitted
    overlap_correlation: Optional[np.ndarray] = None  # (K+1, K+1)

    def __post_init__(self):
        gammas = np.asarray(self.gammas, dtype=float)
        if gammas.ndim != 2:
            raise ValidationError("gammas must be a p x K matrix")
        p, k = gammas.shape
        se_x = np.asarray(self.se_x, dtype=float)
        se_y = np.asarray(self.se_y, dtype=float)
        beta0 = _as_float_vector(self.beta0, "beta0", k)
        if se_x.shape != (p, k) or se_y.shape != (p,):
            raise ValidationError("se_x / se_y shapes do not match gammas")
        if np.any(se_x <= 0) or np.any(se_y <= 0):
            raise ValidationError("true-model standard errors must be positive")
        if self.tau0 < 0:
            raise ValidationError("tau0 must be nonnegative")
        shared = self.shared_correlation
        overlap = self.overlap_correlation
        if overlap is not None:
            overlap = _check_correlation(overlap, k + 1, "overlap_correlation")
            if shared is None:
                shared = overlap[:k, :k]
            elif not np.allclose(np.asarray(shared, dtype=float), overlap[:k, :k],
                                 rtol=0.0, atol=1e-12):
                raise ValidationError(
                    "overlap_correlation's exposure block must equal shared_correlation"
                )
        shared = np.eye(k) if shared is None else _check_correlation(shared, k)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "se_x", se_x)
        object.__setattr__(self, "se_y", se_y)
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "tau0", float(self.tau0))
        object.__setattr__(self, "shared_correlation", shared)
        object.__setattr__(self, "overlap_correlation", overlap)

    @property
    def p(self) -> int:
        return self.gammas.shape[0]

    @property
    def k(self) -> int:
        return self.gammas.shape[1]

    @property
    def true_gamma_y(self) -> np.ndarray:
        """Noise-free SNP-outcome associations ``gammas @ beta0``."""
        return self.gammas @ self.beta0


def build_sigma_xj(se_x: np.ndarray, shared_correlation: np.ndarray) -> np.ndarray:
    """Per-SNP exposure covariance: ``diag(se_x) @ corr @ diag(se_x)``."""
    se_x = _as_float_vector(se_x, "se_x")
    k = se_x.shape[0]
    corr = np.asarray(shared_correlation, dtype=float)
    if corr.shape != (k, k):
        raise ValidationError(
            f"dimension mismatch: se_x has length {k}, correlation is {corr.shape}"
        )
    if np.any(se_x <= 0):
        raise ValidationError("se_x entries must be strictly positive")
    out = corr * np.outer(se_x, se_x)
    return 0.5 * (out + out.T)


def estimate_shared_correlation(
    z_scores: np.ndarray, *, eig_floor: float = 1e-8
) -> np.ndarray:
    """Sample correlation matrix of null-SNP Z-score columns.

    Negative or near-zero eigenvalues are clipped at ``eig_floor`` (and the
    unit diagonal restored) when the sample estimate is numerically
    semidefinite; the repair is logged.
    """
    z = np.asarray(z_scores, dtype=float)
    if z.ndim != 2:
        raise ValidationError("z_scores must be a T x K matrix")
    t, k = z.shape
    if t < 2:
        raise InsufficientDataError(f"need at least 2 null SNPs to estimate correlation, got {t}")
    if t < 30:
        logger.warning("estimating shared correlation from only %d null SNPs", t)
    centered = z - z.mean(axis=0)
    ssq = np.einsum("tk,tk->k", centered, centered)
    if np.any(ssq <= 0.0):
        raise InsufficientDataError("a Z-score column is constant; cannot estimate correlation")
    cov = centered.T @ centered
    d = np.sqrt(ssq)
    corr = cov / np.outer(d, d)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    w, q = np.linalg.eigh(corr)
    if w[0] < eig_floor:
        logger.warning(
            "estimated correlation matrix is numerically semidefinite "
            "(min eigenvalue %.3e); clipping at %.1e", w[0], eig_floor
        )
        corr = (q * np.maximum(w, eig_floor)) @ q.T
        d = np.sqrt(np.diag(corr))
        corr = corr / np.outer(d, d)
        corr = 0.5 * (corr + corr.T)
        np.fill_diagonal(corr, 1.0)
    return corr


# --- file IO ---------------------------------------------------------------

def _header_columns(k: int, with_cov: bool) -> list:
    cols = ["snp"]
    cols += [f"beta_x{i}" for i in range(1, k + 1)]
    cols += [f"se_x{i}" for i in range(1, k + 1)]
    cols += ["beta_y", "se_y"]
    if with_cov:
        cols += [f"cov_xy{i}" for i in range(1, k + 1)]
    return cols


def load_correlation(path, k: int) -> np.ndarray:
    """Read a K x K whitespace-separated correlation matrix."""
    try:
        mat = np.loadtxt(path, dtype=float, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"correlation file {path}: {exc}") from exc
    if mat.shape != (k, k):
        raise ParseError(f"correlation file {path}: expected {k}x{k}, got {mat.shape}")
    return _check_correlation(mat, k)


def write_correlation(matrix: np.ndarray, path) -> None:
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_dataset(path, k: int, correlation_path=None) -> Dataset:
    """Load a summary-statistics TSV (and optional correlation file).

    Parse failures name the physical file line; invariant violations name the
    SNP and its data row.  A missing correlation file defaults the shared
    correlation to the identity, with a logged warning.
    """
    if k < 1:
        raise ValidationError("k must be a positive exposure count")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0].rstrip("\n").split("\t")
    plain = _header_columns(k, with_cov=False)
    with_cov = _header_columns(k, with_cov=True)
    if header == with_cov:
        has_cov = True
    elif header == plain:
        has_cov = False
    else:
        raise ParseError(
            f"{path} line 1: header does not declare the expected columns for K={k} "
            f"(expected {' '.join(plain)} [cov_xy1..cov_xy{k}])"
        )
    ncol = len(header)
    ids, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != ncol:
            raise ParseError(f"{path} line {lineno}: expected {ncol} columns, got {len(parts)}")
        try:
            values = [float(v) for v in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"{path} line {lineno}: {exc}") from exc
        ids.append(parts[0])
        rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    gamma_hat = table[:, 0:k]
    se_x = table[:, k:2 * k]
    gamma_y = table[:, 2 * k]
    se_y = table[:, 2 * k + 1]
    cov_xy = table[:, 2 * k + 2:] if has_cov else None
    if correlation_path is not None:
        corr = load_correlation(correlation_path, k)
    else:
        logger.warning(
            "no correlation file given for %s; defaulting shared correlation to identity", path
        )
        corr = np.eye(k)
    return Dataset(ids, gamma_hat, se_x, gamma_y, se_y, corr, cov_xy)


def write_dataset(dataset: Dataset, path) -> None:
    """Write a dataset back to TSV with 17 significant digits per float."""
    cols = _header_columns(dataset.k, with_cov=dataset.has_cov_xy)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for j in range(dataset.p):
            fields = [dataset.ids[j]]
            fields += [f"{v:.17g}" for v in dataset.gamma_hat[j]]
            fields += [f"{v:.17g}" for v in dataset.se_x[j]]
            fields.append(f"{dataset.gamma_y_hat[j]:.17g}")
            fields.append(f"{dataset.se_y[j]:.17g}")
            if dataset.has_cov_xy:
                fields += [f"{v:.17g}" for v in dataset.cov_xy[j]]
            fh.write("\t".join(fields) + "\n")
