"""Instrument-strength diagnostics.

The scalar diagnostic is the minimum eigenvalue of the sample IV strength
matrix divided by sqrt(p).  Values of at least 7 indicate the regularized
estimator's guarantees can be trusted; the raw (possibly negative) eigenvalue
is reported as-is because the threshold operates on the uncorrected value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import NotPsdError, ValidationError
from .summary_data import Dataset

logger = logging.getLogger(__name__)

#: Recommended lower bound for lambda_min / sqrt(p).
STRENGTH_THRESHOLD = 7.0

_PSD_TOL = 1e-10
_RANK_RCOND = 1e-12


@dataclass(frozen=True)
class StrengthReport:
    """Sample IV strength matrix and derived diagnostics."""

    strength_matrix: np.ndarray            # (K, K) symmetric
    lambda_min: float                      # smallest eigenvalue (may be negative)
    lambda_min_over_sqrt_p: float
    p: int
    conditional_f: Optional[np.ndarray] = None  # (K,) per-exposure statistics


def symmetric_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric PSD matrix.

    Eigenvalues in [-1e-10, 0) are clipped to zero; anything below raises
    :class:`NotPsdError`.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > 1e-8 * scale:
        raise ValidationError("matrix is not symmetric")
    w, q = np.linalg.eigh(0.5 * (a + a.T))
    if w[0] < -_PSD_TOL:
        raise NotPsdError(f"matrix has eigenvalue {w[0]:.3e} < -1e-10; not PSD")
    s = (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T
    return 0.5 * (s + s.T)


def _sigma_isqrt(data: Dataset) -> np.ndarray:
    """Inverse symmetric square root of the shared correlation (cached)."""
    if "sigma_isqrt" not in data._cache:
        w, q = np.linalg.eigh(data.shared_correlation)
        data._cache["sigma_isqrt"] = (q / np.sqrt(w)) @ q.T
    return data._cache["sigma_isqrt"]


def sample_strength_matrix(data: Dataset) -> StrengthReport:
    """Unbiased sample version of the IV strength matrix.

    Sums the per-SNP outer products of the correlation-whitened, SE-scaled
    exposure estimates and subtracts p * I.  Only the strength fields of the
    report are filled; see :func:`strength_report` for the full diagnostic.
    """
    b = (data.gamma_hat / data.se_x) @ _sigma_isqrt(data)
    s = b.T @ b - data.p * np.eye(data.k)
    s = 0.5 * (s + s.T)
    lam = float(np.linalg.eigvalsh(s)[0])
    return StrengthReport(
        strength_matrix=s,
        lambda_min=lam,
        lambda_min_over_sqrt_p=lam / np.sqrt(data.p),
        p=data.p,
    )


def conditional_f(data: Dataset, k: int, true_gammas: Optional[np.ndarray] = None) -> float:
    """Conditional F-statistic for exposure ``k`` (0-based).

    Projects exposure k's effects onto the other exposures' effects by
    weighted least squares (weights 1/se_x[:, k]^2) and sums the standardized
    squared residual signal.  With ``true_gammas`` the oracle statistic is
    computed; otherwise the estimated effects are plugged in, which is
    descriptive only when instruments are very weak.
    """
    if not 0 <= k < data.k:
        raise ValidationError(f"exposure index {k} out of range for K={data.k}")
    if data.p <= data.k - 1:
        raise ValidationError("conditional F needs p > K - 1")
    g = data.gamma_hat if true_gammas is None else np.asarray(true_gammas, dtype=float)
    if g.shape != (data.p, data.k):
        raise ValidationError(f"true_gammas must be {data.p}x{data.k}, got {g.shape}")
    delta = np.zeros(data.k)
    delta[k] = -1.0
    others = [i for i in range(data.k) if i != k]
    if others:
        wgt = data.se_x[:, k] ** -2
        x = g[:, others]
        a = (x.T * wgt) @ x
        rhs = (x.T * wgt) @ g[:, k]
        w = np.linalg.eigvalsh(a)
        if w[0] <= abs(w[-1]) * _RANK_RCOND:
            logger.warning(
                "collinear exposure effects in conditional F for exposure %d; "
                "using pseudoinverse", k,
            )
            coef = np.linalg.pinv(a, rcond=_RANK_RCOND) @ rhs
        else:
            coef = np.linalg.solve(a, rhs)
        delta[others] = coef
    num = (g @ delta) ** 2
    t = data.se_x * delta
    den = np.einsum("jk,kl,jl->j", t, data.shared_correlation, t)
    return float(np.sum(num / den) / (data.p - (data.k - 1)))


def strength_report(data: Dataset, true_gammas: Optional[np.ndarray] = None) -> StrengthReport:
    """Full diagnostic: strength matrix plus all conditional F-statistics."""
    base = sample_strength_matrix(data)
    f = np.array([conditional_f(data, k, true_gammas) for k in range(data.k)])
    if base.lambda_min_over_sqrt_p < STRENGTH_THRESHOLD:
        logger.warning(
            "weak instruments: lambda_min/sqrt(p) = %.3f is below %.0f",
            base.lambda_min_over_sqrt_p, STRENGTH_THRESHOLD,
        )
    return StrengthReport(
        strength_matrix=base.strength_matrix,
        lambda_min=base.lambda_min,
        lambda_min_over_sqrt_p=base.lambda_min_over_sqrt_p,
        p=base.p,
        conditional_f=f,
    )
