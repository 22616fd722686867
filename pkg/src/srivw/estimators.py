"""Causal-effect estimators for summary-data multivariable MR.

Implements the classic multivariable IVW estimator, the measurement-error
debiased estimator with spectral regularization (SRIVW), and its extensions
to balanced horizontal pleiotropy and to overlapping exposure/outcome
samples.  All matrix inversions go through one symmetric eigendecomposition
per dataset so the regularized matrix and its inverse share a factorization;
a condition-number guard at 1e12 applies throughout.

Per-SNP building blocks, with ``g_j`` the exposure-effect row, ``G_j`` the
outcome effect and ``s_j`` its SE:

* ``Mhat_j = g_j g_j^T / s_j^2``  (estimated signal outer product)
* ``V_j = Sigma_Xj / s_j^2``      (measurement-error contribution)
* ``W_j = cov_xy_j / s_j^2``      (overlap cross-covariance contribution)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import (
    DegenerateSpectrumError,
    IllConditionedError,
    ValidationError,
)
from .summary_data import Dataset

logger = logging.getLogger(__name__)

#: Two-sided 95% normal quantile used for all reported confidence intervals.
CI95_Z = 1.959964

_COND_LIMIT = 1e12
_EIG_EPS = 1e-12

METHOD_MV_IVW = "mv_ivw"
METHOD_SRIVW = "srivw"
METHOD_SRIVW_PLEIOTROPY = "srivw_pleiotropy"
METHOD_SRIVW_OVERLAP = "srivw_overlap"


@dataclass(frozen=True)
class Estimate:
    """A fitted causal-effect vector with its covariance.

    ``tau2`` is present exactly when the method models balanced horizontal
    pleiotropy.
    """

    beta: np.ndarray          # (K,)
    covariance: np.ndarray    # (K, K) symmetric PSD
    se: np.ndarray            # (K,) sqrt of the covariance diagonal
    phi: float                # regularization used; 0 for mv_ivw
    method: str
    p_used: int
    tau2: Optional[float] = None

    def ci95(self) -> np.ndarray:
        """(K, 2) normal-approximation 95% confidence intervals."""
        half = CI95_Z * self.se
        return np.column_stack([self.beta - half, self.beta + half])


def _make_estimate(beta, covariance, phi, method, p_used, tau2=None) -> Estimate:
    covariance = 0.5 * (covariance + covariance.T)
    se = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    return Estimate(
        beta=beta,
        covariance=covariance,
        se=se,
        phi=float(phi),
        method=method,
        p_used=int(p_used),
        tau2=tau2,
    )


# --- cached per-dataset moments ---------------------------------------------

@dataclass(frozen=True)
class _Moments:
    sy2inv: np.ndarray        # (p,) 1 / se_y^2
    sum_mhat: np.ndarray      # (K, K) sum of Mhat_j
    sum_v: np.ndarray         # (K, K) sum of V_j
    b_ivw: np.ndarray         # (K,) sum of g_j * G_j / s_j^2
    w_rows: Optional[np.ndarray]   # (p, K) W_j rows, overlap only
    b_cross: Optional[np.ndarray]  # (K,) overlap-corrected numerator


def _moments(data: Dataset) -> _Moments:
    if "moments" not in data._cache:
        sy2inv = data.se_y ** -2
        g = data.gamma_hat
        sum_mhat = (g.T * sy2inv) @ g
        ratio = data.se_x / data.se_y[:, None]
        sum_v = (ratio.T @ ratio) * data.shared_correlation
        b_ivw = g.T @ (data.gamma_y_hat * sy2inv)
        if data.has_cov_xy:
            w_rows = data.cov_xy * sy2inv[:, None]
            b_cross = b_ivw - w_rows.sum(axis=0)
        else:
            w_rows = None
            b_cross = None
        data._cache["moments"] = _Moments(
            sy2inv=sy2inv,
            sum_mhat=0.5 * (sum_mhat + sum_mhat.T),
            sum_v=0.5 * (sum_v + sum_v.T),
            b_ivw=b_ivw,
            w_rows=w_rows,
            b_cross=b_cross,
        )
    return data._cache["moments"]


def _debiased_eigh(data: Dataset):
    """Eigendecomposition of sum(Mhat_j) - sum(V_j), cached."""
    if "debiased_eigh" not in data._cache:
        m = _moments(data)
        data._cache["debiased_eigh"] = np.linalg.eigh(m.sum_mhat - m.sum_v)
    return data._cache["debiased_eigh"]


def _check_shape(data: Dataset) -> None:
    if data.p < data.k:
        raise ValidationError(f"need p >= K SNPs, got p={data.p}, K={data.k}")
    if data.p == data.k:
        logger.warning("exactly identified model (p == K == %d)", data.k)


# --- variance machinery ------------------------------------------------------

def _beta_v_beta(data: Dataset, beta: np.ndarray) -> np.ndarray:
    """Per-SNP quadratic form beta^T V_j beta."""
    t = data.se_x * beta
    return np.einsum("jk,kl,jl->j", t, data.shared_correlation, t) * _moments(data).sy2inv


def _v_beta_rows(data: Dataset, beta: np.ndarray) -> np.ndarray:
    """Per-SNP vectors V_j @ beta, stacked as rows."""
    t = data.se_x * (data.shared_correlation @ (data.se_x * beta).T).T
    return t * _moments(data).sy2inv[:, None]


def _meat(data: Dataset, beta: np.ndarray, tau2: float = 0.0, overlap: bool = False) -> np.ndarray:
    """Middle matrix of the sandwich variance, with plug-in ``beta``.

    The population bracket (M_j + V_j) is estimated by Mhat_j, whose
    expectation it is.  With ``overlap`` the cross-covariance corrections are
    added; at cov_xy == 0 they contribute exact zeros, so the overlap path
    reduces bit-for-bit to the plain one.
    """
    m = _moments(data)
    c = _beta_v_beta(data, beta)
    scal = 1.0 + c
    if tau2:
        scal = scal + tau2 * m.sy2inv
    if overlap:
        d = m.w_rows @ beta
        scal = scal - 2.0 * d
    g = data.gamma_hat
    meat = (g.T * (scal * m.sy2inv)) @ g
    u = _v_beta_rows(data, beta)
    meat = meat + u.T @ u
    if overlap:
        w = m.w_rows
        cross = u.T @ w
        meat = meat - cross - cross.T
        meat = meat + (w.T * (1.0 + 4.0 * d)) @ w
    return 0.5 * (meat + meat.T)


def _sandwich(w: np.ndarray, q: np.ndarray, meat: np.ndarray) -> np.ndarray:
    """inv(A) @ meat @ inv(A) for A with eigenpairs (w, q)."""
    inner = q.T @ meat @ q
    cov = q @ (inner / np.outer(w, w)) @ q.T
    return 0.5 * (cov + cov.T)


# --- estimators --------------------------------------------------------------

def mv_ivw(data: Dataset) -> Estimate:
    """Multivariable inverse-variance weighted estimator.

    Weighted least squares of the outcome effects on the exposure effects,
    with the sandwich covariance that acknowledges exposure measurement
    error.  Biased and over-confident under many weak instruments; the
    spectral regularized estimator is the recommended alternative there.
    """
    _check_shape(data)
    m = _moments(data)
    w, q = np.linalg.eigh(m.sum_mhat)
    if w[0] <= 0.0 or w[-1] / w[0] >= _COND_LIMIT:
        raise IllConditionedError(
            "sum of weighted exposure outer products is numerically singular "
            f"(condition number >= 1e12); consider {METHOD_SRIVW}"
        )
    beta = q @ ((q.T @ m.b_ivw) / w)
    cov = _sandwich(w, q, _meat(data, beta))
    return _make_estimate(beta, cov, 0.0, METHOD_MV_IVW, data.p)


def spectral_regularize(a: np.ndarray, phi: float) -> np.ndarray:
    """Apply the eigenvalue map ``lam -> lam + phi / lam`` to a symmetric matrix.

    Shares the input's eigenvectors; for phi > 0 every output eigenvalue has
    magnitude at least 2*sqrt(phi).  phi = 0 returns the input unchanged.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > 1e-8 * scale:
        raise ValidationError("matrix is not symmetric")
    if phi < 0:
        raise ValidationError("phi must be nonnegative")
    if phi == 0.0:
        return a.copy()
    w, q = np.linalg.eigh(0.5 * (a + a.T))
    if np.min(np.abs(w)) < _EIG_EPS:
        raise DegenerateSpectrumError(
            "an eigenvalue is within 1e-12 of zero; regularization undefined"
        )
    out = (q * (w + phi / w)) @ q.T
    return 0.5 * (out + out.T)


def _regularized_spectrum(data: Dataset, phi: float):
    """Eigenpairs of the regularized debiased denominator; guards conditioning."""
    w, q = _debiased_eigh(data)
    if phi > 0.0:
        if np.min(np.abs(w)) < _EIG_EPS:
            raise DegenerateSpectrumError(
                "an eigenvalue of the debiased denominator is within 1e-12 of zero"
            )
        rw = w + phi / w
    else:
        rw = w
    amin = np.min(np.abs(rw))
    if amin == 0.0 or np.max(np.abs(rw)) / amin >= _COND_LIMIT:
        raise IllConditionedError(
            "regularized denominator is numerically singular; try a larger phi"
        )
    return rw, q


def _srivw_beta(data: Dataset, phi: float, overlap: bool = False) -> np.ndarray:
    """Point estimate only; used by the tuning grid."""
    m = _moments(data)
    rhs = m.b_cross if overlap else m.b_ivw
    rw, q = _regularized_spectrum(data, phi)
    return q @ ((q.T @ rhs) / rw)


def srivw(data: Dataset, phi: float = 0.0) -> Estimate:
    """Spectral regularized IVW estimator.

    Replaces the IVW denominator with its measurement-error debiased version
    and damps small eigenvalues through :func:`spectral_regularize`.  At
    phi = 0 and no measurement error this reduces to :func:`mv_ivw`.
    """
    _check_shape(data)
    beta = _srivw_beta(data, phi)
    rw, q = _regularized_spectrum(data, phi)
    cov = _sandwich(rw, q, _meat(data, beta))
    return _make_estimate(beta, cov, phi, METHOD_SRIVW, data.p)


def estimate_tau2(data: Dataset, beta: np.ndarray) -> float:
    """Overdispersion (pleiotropy variance) estimate, clipped at zero.

    Averages the per-SNP excess of squared residuals over their
    no-pleiotropy variance, with inverse outcome-variance weights.  The raw
    (possibly negative) value is logged before clipping.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.k,):
        raise ValidationError(f"beta must have length {data.k}")
    m = _moments(data)
    resid = data.gamma_y_hat - data.gamma_hat @ beta
    excess = resid ** 2 - data.se_y ** 2 - _beta_v_beta(data, beta) * data.se_y ** 2
    raw = float(np.sum(excess * m.sy2inv) / np.sum(m.sy2inv))
    if raw < 0:
        logger.info("raw overdispersion estimate %.3e clipped to 0", raw)
    return max(raw, 0.0)


def srivw_pleiotropy(data: Dataset, phi: float = 0.0) -> Estimate:
    """SRIVW with balanced-horizontal-pleiotropy variance inflation.

    Same point estimate as :func:`srivw`; the covariance adds the estimated
    overdispersion to every SNP's residual variance.
    """
    _check_shape(data)
    beta = _srivw_beta(data, phi)
    tau2 = estimate_tau2(data, beta)
    rw, q = _regularized_spectrum(data, phi)
    cov = _sandwich(rw, q, _meat(data, beta, tau2=tau2))
    return _make_estimate(beta, cov, phi, METHOD_SRIVW_PLEIOTROPY, data.p, tau2=tau2)


def srivw_overlap(data: Dataset, phi: float = 0.0) -> Estimate:
    """SRIVW corrected for exposure/outcome sample overlap.

    Subtracts the known cross-covariances from the numerator and augments
    the sandwich variance with the corresponding correction terms.  With
    cov_xy identically zero the output coincides with :func:`srivw`.
    """
    if not data.has_cov_xy:
        raise ValidationError("overlap estimator requires cov_xy on every SNP")
    _check_shape(data)
    beta = _srivw_beta(data, phi, overlap=True)
    rw, q = _regularized_spectrum(data, phi)
    cov = _sandwich(rw, q, _meat(data, beta, overlap=True))
    return _make_estimate(beta, cov, phi, METHOD_SRIVW_OVERLAP, data.p)
