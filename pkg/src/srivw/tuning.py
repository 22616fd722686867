"""Data-driven selection of the regularization parameter.

The tuning parameter is chosen by minimizing a heterogeneity Q-statistic over
an exponential grid whose upper end shrinks with observed instrument
strength: strong instruments need (and get) essentially no regularization,
weak instruments open up a wide search range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .estimators import (
    Estimate,
    _srivw_beta,
    srivw,
    srivw_overlap,
    srivw_pleiotropy,
)
from .exceptions import (
    DegenerateDenominatorError,
    SrivwError,
    TuningError,
    ValidationError,
)
from .strength import STRENGTH_THRESHOLD, sample_strength_matrix
from .summary_data import Dataset

logger = logging.getLogger(__name__)

#: Grid exponent cap; instruments with lambda_min/sqrt(p) above this need no
#: regularization.
GRID_C = 17.0
GRID_STEP = 0.5

_TIE_TOL = 1e-12

MODES = ("plain", "pleiotropy", "overlap")


@dataclass(frozen=True)
class TuningResult:
    """Selected regularization and the Q-trace that produced it."""

    phi_star: float
    q_values: List[Tuple[float, float]]   # evaluated (phi, Q) pairs, phi ascending
    grid_upper_exponent: float            # c - lambda_min/sqrt(p)
    selected_estimate: Estimate


def grid_b(lambda_min_over_sqrt_p: float, c: float = GRID_C, step: float = GRID_STEP) -> np.ndarray:
    """Candidate grid {0} | {exp(i - lambda_min/sqrt(p)) : i = 0, step, ..., c}.

    Ascending; length 2 + floor(c/step).
    """
    if step <= 0:
        raise ValidationError("step must be positive")
    count = int(np.floor(c / step + 1e-12))
    exponents = np.arange(count + 1) * step - lambda_min_over_sqrt_p
    return np.concatenate([[0.0], np.exp(exponents)])


def _q_terms(data: Dataset, beta: np.ndarray, mode: str = "plain") -> np.ndarray:
    """Per-SNP standardized squared residuals of the linear relation."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.k,):
        raise ValidationError(f"beta must have length {data.k}")
    resid = data.gamma_y_hat - data.gamma_hat @ beta
    t = data.se_x * beta
    bsb = np.einsum("jk,kl,jl->j", t, data.shared_correlation, t)
    den = data.se_y ** 2 + bsb
    if mode == "overlap":
        if not data.has_cov_xy:
            raise ValidationError("overlap mode requires cov_xy on every SNP")
        den = den - 2.0 * (data.cov_xy @ beta)
        if np.any(den <= 0.0):
            idx = int(np.argmin(den))
            raise DegenerateDenominatorError(
                f"snp '{data.ids[idx]}': nonpositive heterogeneity denominator "
                "(extreme cov_xy)"
            )
    elif mode != "plain":
        raise ValidationError(f"unknown mode '{mode}'")
    return resid ** 2 / den


def q_statistic(data: Dataset, beta: np.ndarray, mode: str = "plain") -> float:
    """Residual-heterogeneity Q-statistic at a fixed coefficient vector."""
    return float(np.sum(_q_terms(data, beta, mode)))


def select_phi(data: Dataset, mode: str = "plain") -> TuningResult:
    """Minimize Q(phi) over the strength-adapted grid.

    Ties are broken toward the smallest phi (least regularization among
    equals).  In pleiotropy mode the plain denominator is used for tuning and
    the overdispersion is estimated afterward at the selected phi.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    overlap = mode == "overlap"
    report = sample_strength_matrix(data)
    lam = report.lambda_min_over_sqrt_p
    if lam < STRENGTH_THRESHOLD:
        # Per-call warning would flood Monte Carlo logs; the CLI and
        # strength_report surface this to users.
        logger.info(
            "weak instruments: lambda_min/sqrt(p) = %.3f is below %.0f; "
            "regularization grid extends to exp(%.2f)",
            lam, STRENGTH_THRESHOLD, GRID_C - lam,
        )
    grid = grid_b(lam)
    q_mode = "overlap" if overlap else "plain"
    q_values: List[Tuple[float, float]] = []
    for phi in grid:
        try:
            beta = _srivw_beta(data, float(phi), overlap=overlap)
            q_values.append((float(phi), q_statistic(data, beta, q_mode)))
        except SrivwError as exc:
            logger.debug("grid point phi=%.3e failed: %s", phi, exc)
    if not q_values:
        raise TuningError("every grid point was ill-conditioned")
    qs = np.array([q for _, q in q_values])
    q_min = qs.min()
    eligible = np.flatnonzero(qs <= q_min + _TIE_TOL * max(1.0, abs(q_min)))
    phi_star = q_values[int(eligible[0])][0]
    if mode == "pleiotropy":
        selected = srivw_pleiotropy(data, phi_star)
    elif overlap:
        selected = srivw_overlap(data, phi_star)
    else:
        selected = srivw(data, phi_star)
    return TuningResult(
        phi_star=phi_star,
        q_values=q_values,
        grid_upper_exponent=GRID_C - lam,
        selected_estimate=selected,
    )
