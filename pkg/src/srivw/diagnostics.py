"""Per-SNP heterogeneity contributions and outlier exclusion.

SNPs whose standardized squared residual exceeds the Bonferroni-adjusted
chi-square(1) quantile are treated as likely pleiotropic outliers and
excluded before refitting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import stats

from .exceptions import ValidationError
from .summary_data import Dataset
from .tuning import _q_terms, select_phi

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OutlierReport:
    """Contributions and exclusions from one outlier-removal run."""

    contributions: np.ndarray    # per-SNP q_j from the first fitting pass
    excluded_ids: List[str]
    threshold: float             # chi2(1) quantile applied in the last pass
    iterations: int              # fit-and-test passes performed


def snp_q_contributions(data: Dataset, beta: np.ndarray) -> np.ndarray:
    """Per-SNP contributions to the heterogeneity Q-statistic, order preserved."""
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValidationError("beta must be finite")
    return _q_terms(data, beta, "plain")


def remove_outliers(
    data: Dataset, alpha: float = 0.05, max_iter: int = 1
) -> Tuple[Dataset, OutlierReport]:
    """Exclude SNPs with outlying Q contributions and refit.

    Each pass fits the tuned regularized estimator, computes per-SNP
    contributions, and drops those above the chi-square(1) upper quantile at
    level ``alpha / p`` (Bonferroni).  A pass that would leave p <= K SNPs is
    refused: the dataset as of that pass is returned unchanged, with a logged
    warning.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError("alpha must be in (0, 1]")
    if max_iter < 1:
        raise ValidationError("max_iter must be at least 1")
    current = data
    excluded: List[str] = []
    first_contributions = None
    threshold = float("nan")
    iterations = 0
    for _ in range(max_iter):
        fit = select_phi(current).selected_estimate
        q = snp_q_contributions(current, fit.beta)
        if first_contributions is None:
            first_contributions = q
        threshold = float(stats.chi2.ppf(1.0 - alpha / current.p, df=1))
        iterations += 1
        flag = q > threshold
        if not flag.any():
            break
        if current.p - int(flag.sum()) <= current.k:
            logger.warning(
                "refusing to exclude %d of %d SNPs (would leave p <= K=%d)",
                int(flag.sum()), current.p, current.k,
            )
            break
        excluded.extend(current.ids[int(i)] for i in np.flatnonzero(flag))
        current = current.subset(~flag)
    report = OutlierReport(
        contributions=first_contributions,
        excluded_ids=excluded,
        threshold=threshold,
        iterations=iterations,
    )
    return current, report
