"""Synthetic data generators and the Monte Carlo evaluation harness.

Two generation modes:

* ``summary`` draws per-SNP effect estimates directly around an embedded
  145 x 3 ground-truth template (see below), optionally with balanced
  horizontal pleiotropy and/or exposure-outcome sample overlap.
* ``individual`` simulates genotypes and phenotypes for three independent
  cohorts (exposure, outcome, selection), computes per-SNP simple-regression
  summaries on each, and feeds instrument selection plus correlation
  estimation exactly as a real two-sample analysis would.

Randomness is counter-based: each replication derives its own Philox stream
from ``(seed, rep_index)``, so runs are reproducible bit-for-bit and
replications can execute in any order or in parallel.

Ground-truth template
---------------------
The embedded summary-data design mimics a three-trait lipid panel
instrumented by 145 independent SNPs.  Per-SNP Z-scores follow a one-factor
model ``z = w * C + f * L`` with idiosyncratic scales ``C`` and factor
loadings ``L`` (the opposite-signed loadings on traits 1 and 3 create the
partial collinearity that makes trait 1 conditionally weak), then are
re-colored so their realized second-moment matrix equals the design target
``p * (diag(C)^2 + L L^T)`` exactly.  Standard errors scale a per-SNP
precision factor shared across traits.  Dividing the first (or every) column
of the effect matrix by a divisor D produces the weak-instrument settings;
with the defaults the minimum-eigenvalue diagnostic lands near 100, 20, and
7.5 at D = 2.5, 5.5, and 9.25.
"""

from __future__ import annotations

import concurrent.futures
import logging
import os
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import estimators
from .estimators import CI95_Z, Estimate, mv_ivw
from .exceptions import SimulationError, SrivwError, ValidationError
from .strength import conditional_f, sample_strength_matrix
from .summary_data import Dataset, TrueModel, estimate_shared_correlation
from .tuning import select_phi

logger = logging.getLogger(__name__)

ENV_WORKERS = "SRIVW_WORKERS"

CAUSAL_PRESETS = {
    "beta_a": (0.8, 0.4, 0.0),
    "beta_b": (0.1, -0.5, -0.9),
}
STRENGTH_PRESETS = ("first_weak", "all_similar")
ESTIMATOR_TAGS = ("mv_ivw", "srivw", "srivw_pleiotropy", "srivw_overlap")

# Template design constants (see module docstring).
_TEMPLATE_KEY = 145_003
_TEMPLATE_P = 145
_TEMPLATE_K = 3
_TEMPLATE_C = np.array([6.1, 7.0, 5.6])
_TEMPLATE_L = np.array([5.8, -1.0, -5.8])
_TEMPLATE_SE_X = np.array([0.0052, 0.0044, 0.0058])
_TEMPLATE_SE_Y = 0.0036
_TEMPLATE_CORR = np.array(
    [[1.0, -0.1, -0.05],
     [-0.1, 1.0, 0.2],
     [-0.05, 0.2, 1.0]]
)
# Outcome column appended to the exposure correlation for overlap draws.
_OVERLAP_OUTCOME_ROW = np.array([-0.2, 0.5, 0.4])


def _config_rng(seed: int) -> np.random.Generator:
    """Stream for once-per-configuration draws."""
    return np.random.Generator(np.random.Philox(key=seed))


def _rep_rng(seed: int, rep_index: int) -> np.random.Generator:
    """Independent counter-based stream for one replication."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(rep_index + 1))


def _sym_power(a: np.ndarray, power: float) -> np.ndarray:
    w, q = np.linalg.eigh(a)
    return (q * w ** power) @ q.T


def overlap_correlation_matrix(
    outcome_row: Sequence[float] = _OVERLAP_OUTCOME_ROW,
    shared_correlation: np.ndarray = _TEMPLATE_CORR,
) -> np.ndarray:
    """(K+1) x (K+1) joint correlation for overlap draws."""
    shared = np.asarray(shared_correlation, dtype=float)
    outcome_row = np.asarray(outcome_row, dtype=float)
    k = shared.shape[0]
    if outcome_row.shape != (k,):
        raise ValidationError(
            f"outcome correlation row must have length {k}, got {outcome_row.shape}"
        )
    out = np.empty((k + 1, k + 1))
    out[:k, :k] = shared
    out[:k, k] = outcome_row
    out[k, :k] = outcome_row
    out[k, k] = 1.0
    return out


def summary_template(
    beta0: Sequence[float] = CAUSAL_PRESETS["beta_a"],
    tau0: float = 0.0,
    overlap: bool = False,
) -> TrueModel:
    """Embedded 145 x 3 summary-data ground truth."""
    p, k = _TEMPLATE_P, _TEMPLATE_K
    rng = _config_rng(_TEMPLATE_KEY)
    precision = rng.uniform(0.75, 1.6, p)          # shared per-SNP SE factor
    outcome_wiggle = rng.uniform(0.9, 1.1, p)      # outcome study's own factor
    factor = rng.standard_normal(p)
    idio = rng.standard_normal((p, k))
    z = idio * _TEMPLATE_C + np.outer(factor, _TEMPLATE_L)
    target = p * (np.diag(_TEMPLATE_C ** 2) + np.outer(_TEMPLATE_L, _TEMPLATE_L))
    z = z @ _sym_power(z.T @ z, -0.5) @ _sym_power(target, 0.5)
    se_x = _TEMPLATE_SE_X * precision[:, None]
    se_y = _TEMPLATE_SE_Y * precision * outcome_wiggle
    return TrueModel(
        gammas=z * se_x,
        se_x=se_x,
        se_y=se_y,
        beta0=np.asarray(beta0, dtype=float),
        tau0=tau0,
        shared_correlation=_TEMPLATE_CORR,
        overlap_correlation=overlap_correlation_matrix() if overlap else None,
    )


@dataclass(frozen=True)
class SimConfig:
    """Factorial simulation description.

    ``divisor`` weakens instruments by dividing the first column
    (``first_weak``) or every column (``all_similar``) of the true effect
    matrix before sampling.  Individual mode ignores the preset fields and
    uses ``n, n_snps, n_nonnull, h2, eta_x, eta_y`` instead.
    """

    truth: TrueModel
    reps: int
    seed: int
    causal_preset: str = "custom"
    strength_preset: str = "first_weak"
    divisor: float = 1.0
    mode: str = "summary"
    n: Optional[int] = None          # individual mode: cohort size
    n_snps: Optional[int] = None     # individual mode: SNP panel size
    n_nonnull: Optional[int] = None  # individual mode: SNPs with real effects
    h2: Optional[float] = None       # variance share explained by nonnull SNPs
    eta_x: float = 1.0               # confounder loading on exposures
    eta_y: float = 1.0               # confounder loading on the outcome

    def __post_init__(self):
        if self.divisor <= 0:
            raise ValidationError("divisor must be positive")
        if self.reps < 1:
            raise ValidationError("reps must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit nonnegative integer")
        if self.mode not in ("summary", "individual"):
            raise ValidationError("mode must be 'summary' or 'individual'")
        if self.strength_preset not in STRENGTH_PRESETS:
            raise ValidationError(f"strength_preset must be one of {STRENGTH_PRESETS}")
        if self.causal_preset != "custom":
            want = CAUSAL_PRESETS.get(self.causal_preset)
            if want is None:
                raise ValidationError(f"unknown causal_preset '{self.causal_preset}'")
            if not np.allclose(self.truth.beta0, want):
                raise ValidationError(
                    f"causal_preset '{self.causal_preset}' does not match truth.beta0"
                )
        if self.mode == "individual":
            for name in ("n", "n_snps", "n_nonnull", "h2"):
                if getattr(self, name) is None:
                    raise ValidationError(f"individual mode requires '{name}'")
            if self.n_nonnull > self.n_snps:
                raise ValidationError("n_nonnull must not exceed n_snps")
            if not 0.0 < self.h2 < 1.0:
                raise ValidationError("h2 must lie strictly between 0 and 1")


def table1_config(
    reps: int,
    seed: int,
    causal_preset: str = "beta_a",
    strength_preset: str = "first_weak",
    divisor: float = 2.5,
    tau0: float = 0.0,
    overlap: bool = False,
) -> SimConfig:
    """Summary-mode config over the embedded template."""
    truth = summary_template(CAUSAL_PRESETS[causal_preset], tau0=tau0, overlap=overlap)
    return SimConfig(
        truth=truth,
        reps=reps,
        seed=seed,
        causal_preset=causal_preset,
        strength_preset=strength_preset,
        divisor=divisor,
    )


def individual_config(
    reps: int,
    seed: int,
    beta0: Sequence[float] = (1.0, -0.5, 0.5),
    n: int = 10_000,
    n_snps: int = 2_000,
    n_nonnull: int = 1_000,
    h2: float = 0.1,
    eta_x: float = 1.0,
    eta_y: float = 1.0,
) -> SimConfig:
    """Individual-level pipeline config; the true effect matrix is drawn
    once from the config seed inside the generator."""
    beta0 = np.asarray(beta0, dtype=float)
    k = beta0.shape[0]
    placeholder = TrueModel(
        gammas=np.zeros((n_snps, k)),
        se_x=np.ones((n_snps, k)),
        se_y=np.ones(n_snps),
        beta0=beta0,
    )
    return SimConfig(
        truth=placeholder,
        reps=reps,
        seed=seed,
        mode="individual",
        n=n,
        n_snps=n_snps,
        n_nonnull=n_nonnull,
        h2=h2,
        eta_x=eta_x,
        eta_y=eta_y,
    )


def apply_strength_preset(gammas: np.ndarray, preset: str, divisor: float) -> np.ndarray:
    """Divide the first column (first_weak) or all columns (all_similar) by D."""
    if preset not in STRENGTH_PRESETS:
        raise ValidationError(f"strength_preset must be one of {STRENGTH_PRESETS}")
    out = np.array(gammas, dtype=float)
    if preset == "first_weak":
        out[:, 0] /= divisor
    else:
        out /= divisor
    return out


def effective_truth(config: SimConfig) -> TrueModel:
    """Ground truth with the strength preset applied."""
    if config.mode != "summary":
        raise ValidationError("effective_truth applies to summary mode only")
    gammas = apply_strength_preset(config.truth.gammas, config.strength_preset, config.divisor)
    return replace(config.truth, gammas=gammas)


def true_strength_diagnostic(config: SimConfig) -> float:
    """lambda_min/sqrt(p) of the noise-free IV strength matrix."""
    truth = effective_truth(config)
    isqrt = _sym_power(truth.shared_correlation, -0.5)
    b = (truth.gammas / truth.se_x) @ isqrt
    lam = float(np.linalg.eigvalsh(b.T @ b)[0])
    return lam / np.sqrt(truth.p)


def generate_summary(config: SimConfig, rep_index: int) -> Dataset:
    """Draw one replication of summary statistics around the true model."""
    if config.mode != "summary":
        raise ValidationError("generate_summary requires a summary-mode config")
    truth = effective_truth(config)
    rng = _rep_rng(config.seed, rep_index)
    p, k = truth.p, truth.k
    mean_y = truth.true_gamma_y
    if truth.tau0 > 0:
        mean_y = mean_y + rng.normal(0.0, truth.tau0, size=p)
    if truth.overlap_correlation is not None:
        chol = np.linalg.cholesky(truth.overlap_correlation)
        noise = rng.standard_normal((p, k + 1)) @ chol.T
        gamma_hat = truth.gammas + noise[:, :k] * truth.se_x
        gamma_y_hat = mean_y + noise[:, k] * truth.se_y
        cov_xy = truth.se_x * (truth.overlap_correlation[:k, k] * truth.se_y[:, None])
    else:
        chol = np.linalg.cholesky(truth.shared_correlation)
        noise = rng.standard_normal((p, k)) @ chol.T
        gamma_hat = truth.gammas + noise * truth.se_x
        gamma_y_hat = mean_y + rng.standard_normal(p) * truth.se_y
        cov_xy = None
    ids = [f"snp{j + 1:04d}" for j in range(p)]
    return Dataset(
        ids, gamma_hat, truth.se_x, gamma_y_hat, truth.se_y,
        truth.shared_correlation, cov_xy, validate=False,
    )


# --- individual-level pipeline ----------------------------------------------

@dataclass(frozen=True)
class RegressionSummary:
    """Per-SNP simple-regression output from one cohort."""

    beta: np.ndarray       # (p, K) or (p,) slope estimates
    se: np.ndarray         # matching standard errors
    p_values: np.ndarray   # two-sided, from the t(n-2) reference


@dataclass(frozen=True)
class IndividualSummaries:
    """Summaries from the exposure, outcome, and selection cohorts."""

    exposure: RegressionSummary
    outcome: RegressionSummary
    selection: RegressionSummary
    n: int


def _draw_genotypes(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    # Two independent bits per genotype give P(0,1,2) = (.25, .5, .25).
    v = rng.integers(0, 4, size=(n, p), dtype=np.uint8)
    return np.add(v & 1, v >> 1, dtype=np.float32)


def _marginal_regressions(z: np.ndarray, y: np.ndarray, n: int):
    """Simple-regression slopes and SEs of each column of y on each SNP."""
    zsum = z.sum(axis=0, dtype=np.float64)
    zss = np.einsum("ij,ij->j", z, z, dtype=np.float64)
    szz = zss - zsum ** 2 / n
    yc = (y - y.mean(axis=0)).astype(np.float32)
    cross = (z.T @ yc).astype(np.float64)
    slope = cross / szz[:, None]
    syy = np.einsum("ik,ik->k", yc, yc, dtype=np.float64)
    rss = np.clip(syy[None, :] - slope ** 2 * szz[:, None], 0.0, None)
    se = np.sqrt(rss / (n - 2) / szz[:, None])
    return slope, se


def _regression_summary(z, y, n) -> RegressionSummary:
    slope, se = _marginal_regressions(z, np.atleast_2d(y.T).T, n)
    tstat = np.abs(slope) / se
    pv = 2.0 * stats.t.sf(tstat, df=n - 2)
    if slope.shape[1] == 1:
        slope, se, pv = slope[:, 0], se[:, 0], pv[:, 0]
    return RegressionSummary(beta=slope, se=se, p_values=pv)


def true_gammas_individual(config: SimConfig) -> np.ndarray:
    """Per-config true effect matrix: phi * sqrt(2 h2 / s) on the nonnull block."""
    rng = _config_rng(config.seed)
    k = config.truth.k
    phi = rng.standard_normal((config.n_nonnull, k))
    gammas = np.zeros((config.n_snps, k))
    gammas[: config.n_nonnull] = phi * np.sqrt(2.0 * config.h2 / config.n_nonnull)
    return gammas


def generate_individual(config: SimConfig, rep_index: int) -> IndividualSummaries:
    """Simulate three cohorts and regress; deterministic in (seed, rep_index)."""
    if config.mode != "individual":
        raise ValidationError("generate_individual requires an individual-mode config")
    gammas = true_gammas_individual(config).astype(np.float32)
    rng = _rep_rng(config.seed, rep_index)
    n, p, k = config.n, config.n_snps, config.truth.k
    h2 = config.h2
    sd_u = np.sqrt(0.6 * (1.0 - h2))
    sd_e = np.sqrt(0.4 * (1.0 - h2))
    beta0 = config.truth.beta0.astype(np.float32)

    def cohort(with_outcome: bool):
        z = _draw_genotypes(rng, n, p)
        u = rng.normal(0.0, sd_u, size=n).astype(np.float32)
        e_x = rng.normal(0.0, sd_e, size=(n, k)).astype(np.float32)
        x = z @ gammas + config.eta_x * u[:, None] + e_x
        if not with_outcome:
            return _regression_summary(z, x, n)
        e_y = rng.normal(0.0, sd_e, size=n).astype(np.float32)
        y = 10.0 + x @ beta0 + config.eta_y * u + e_y
        return _regression_summary(z, y, n)

    exposure = cohort(with_outcome=False)
    outcome = cohort(with_outcome=True)
    selection = cohort(with_outcome=False)
    return IndividualSummaries(exposure=exposure, outcome=outcome, selection=selection, n=n)


def select_ivs(
    selection_summaries: RegressionSummary, k: int, threshold: Optional[float] = None
) -> np.ndarray:
    """Indices of SNPs associated with at least one exposure at the threshold."""
    if threshold is None:
        threshold = 0.01 / k
    pv = np.atleast_2d(selection_summaries.p_values.T).T
    keep = np.flatnonzero((pv < threshold).any(axis=1))
    if keep.size == 0:
        raise ValidationError("no SNPs pass the selection threshold")
    return keep


def dataset_from_individual(
    summaries: IndividualSummaries,
    threshold: Optional[float] = None,
    null_p_threshold: float = 0.5,
) -> Dataset:
    """Instrument selection plus shared-correlation estimation.

    SNPs null for every exposure in the selection cohort (all p-values >=
    ``null_p_threshold``) supply the exposure-cohort Z-scores from which the
    shared correlation is estimated.
    """
    k = summaries.exposure.beta.shape[1]
    keep = select_ivs(summaries.selection, k, threshold)
    null_mask = (summaries.selection.p_values >= null_p_threshold).all(axis=1)
    z_null = summaries.exposure.beta[null_mask] / summaries.exposure.se[null_mask]
    corr = estimate_shared_correlation(z_null)
    ids = [f"snp{int(j) + 1:05d}" for j in keep]
    return Dataset(
        ids,
        summaries.exposure.beta[keep],
        summaries.exposure.se[keep],
        summaries.outcome.beta[keep],
        summaries.outcome.se[keep],
        corr,
    )


def load_template(path, k: int):
    """Read a user-supplied ground-truth template.

    TSV with header ``snp  beta_x1..beta_xK  se_x1..se_xK  se_y``; the
    outcome associations are always derived from the causal effects, so the
    template carries none.  Returns ``(gammas, se_x, se_y)``.
    """
    from .exceptions import ParseError

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty template")
    expected = (
        ["snp"]
        + [f"beta_x{i}" for i in range(1, k + 1)]
        + [f"se_x{i}" for i in range(1, k + 1)]
        + ["se_y"]
    )
    if lines[0].split("\t") != expected:
        raise ParseError(f"{path} line 1: expected header {' '.join(expected)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(expected):
            raise ParseError(f"{path} line {lineno}: expected {len(expected)} columns")
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise ParseError(f"{path} line {lineno}: {exc}") from exc
    table = np.asarray(rows, dtype=float)
    return table[:, 0:k], table[:, k:2 * k], table[:, 2 * k]


# --- Monte Carlo harness -----------------------------------------------------

@dataclass
class MetricsTable:
    """Per-estimator, per-exposure Monte Carlo summary."""

    reps: int
    seed: int
    beta0: np.ndarray
    estimators: List[str]
    mean_est: Dict[str, np.ndarray]
    sd: Dict[str, np.ndarray]
    mean_se: Dict[str, np.ndarray]
    coverage: Dict[str, np.ndarray]
    mean_tau2: Dict[str, Optional[float]]
    failures: Dict[str, int]
    mean_lambda_min_over_sqrt_p: float
    mean_conditional_f: np.ndarray
    true_lambda_min_over_sqrt_p: Optional[float] = None
    mean_selected: Optional[float] = None

    def to_tsv(self) -> str:
        lines = [
            f"# reps\t{self.reps}",
            f"# seed\t{self.seed}",
            f"# mean_lambda_min_over_sqrt_p\t{self.mean_lambda_min_over_sqrt_p:.6g}",
        ]
        if self.true_lambda_min_over_sqrt_p is not None:
            lines.append(
                f"# true_lambda_min_over_sqrt_p\t{self.true_lambda_min_over_sqrt_p:.6g}"
            )
        lines.append(
            "# mean_conditional_f\t"
            + "\t".join(f"{v:.6g}" for v in self.mean_conditional_f)
        )
        if self.mean_selected is not None:
            lines.append(f"# mean_selected_snps\t{self.mean_selected:.6g}")
        for est in self.estimators:
            if self.failures.get(est):
                lines.append(f"# failures_{est}\t{self.failures[est]}")
        lines.append(
            "estimator\texposure\ttrue_beta\tmean_est\tsd\tmean_se\tcoverage\tmean_tau2"
        )
        for est in self.estimators:
            tau = self.mean_tau2.get(est)
            tau_s = "" if tau is None else f"{tau:.12g}"
            for j in range(self.beta0.shape[0]):
                lines.append(
                    f"{est}\t{j + 1}\t{self.beta0[j]:.12g}\t"
                    f"{self.mean_est[est][j]:.12g}\t{self.sd[est][j]:.12g}\t"
                    f"{self.mean_se[est][j]:.12g}\t{self.coverage[est][j]:.12g}\t{tau_s}"
                )
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_tsv())


def _fit_one(data: Dataset, tag: str) -> Estimate:
    if tag == "mv_ivw":
        return mv_ivw(data)
    if tag == "srivw":
        return select_phi(data, "plain").selected_estimate
    if tag == "srivw_pleiotropy":
        return select_phi(data, "pleiotropy").selected_estimate
    if tag == "srivw_overlap":
        return select_phi(data, "overlap").selected_estimate
    raise ValidationError(f"unknown estimator tag '{tag}'; expected one of {ESTIMATOR_TAGS}")


def _run_rep(config: SimConfig, rep_index: int, tags: Tuple[str, ...]) -> dict:
    if config.mode == "summary":
        data = generate_summary(config, rep_index)
        selected = None
    else:
        summaries = generate_individual(config, rep_index)
        data = dataset_from_individual(summaries)
        selected = data.p
    report = sample_strength_matrix(data)
    cond_f = np.array([conditional_f(data, k) for k in range(data.k)])
    out = {
        "lambda": report.lambda_min_over_sqrt_p,
        "cond_f": cond_f,
        "selected": selected,
        "fits": {},
        "errors": {},
    }
    for tag in tags:
        try:
            est = _fit_one(data, tag)
            out["fits"][tag] = (est.beta, est.se, est.tau2)
        except SrivwError as exc:
            out["errors"][tag] = str(exc)
    return out


def _resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get(ENV_WORKERS, "1"))
    return max(1, workers)


def monte_carlo(
    config: SimConfig,
    estimator_tags: Sequence[str] = ("mv_ivw", "srivw"),
    workers: Optional[int] = None,
) -> MetricsTable:
    """Run the full per-replication pipeline and aggregate.

    Per-replication estimation failures are recorded; an estimator whose
    failure count reaches 1% of the replications aborts the run.  Aggregation
    happens in replication order, so the result does not depend on worker
    scheduling.
    """
    if config.reps < 2:
        raise ValidationError("monte_carlo requires reps >= 2")
    tags = tuple(estimator_tags)
    for tag in tags:
        if tag not in ESTIMATOR_TAGS:
            raise ValidationError(f"unknown estimator tag '{tag}'")
    workers = _resolve_workers(workers)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                _run_rep,
                [config] * config.reps,
                range(config.reps),
                [tags] * config.reps,
                chunksize=max(1, config.reps // (workers * 8)),
            ))
    else:
        results = [_run_rep(config, r, tags) for r in range(config.reps)]

    beta0 = config.truth.beta0
    k = beta0.shape[0]
    failures = {tag: sum(1 for r in results if tag in r["errors"]) for tag in tags}
    for tag, count in failures.items():
        if count:
            logger.warning("%d/%d replications failed for %s", count, config.reps, tag)
        if count >= 0.01 * config.reps:
            raise SimulationError(
                f"estimator '{tag}' failed in {count}/{config.reps} replications"
            )
    mean_est, sd, mean_se, coverage, mean_tau2 = {}, {}, {}, {}, {}
    for tag in tags:
        rows = [r["fits"][tag] for r in results if tag in r["fits"]]
        betas = np.vstack([b for b, _, _ in rows])
        ses = np.vstack([s for _, s, _ in rows])
        taus = [t for _, _, t in rows if t is not None]
        half = CI95_Z * ses
        covered = (betas - half <= beta0) & (beta0 <= betas + half)
        mean_est[tag] = betas.mean(axis=0)
        sd[tag] = betas.std(axis=0, ddof=1)
        mean_se[tag] = ses.mean(axis=0)
        coverage[tag] = covered.mean(axis=0)
        mean_tau2[tag] = float(np.mean(taus)) if taus else None
    selected = [r["selected"] for r in results if r["selected"] is not None]
    return MetricsTable(
        reps=config.reps,
        seed=config.seed,
        beta0=beta0,
        estimators=list(tags),
        mean_est=mean_est,
        sd=sd,
        mean_se=mean_se,
        coverage=coverage,
        mean_tau2=mean_tau2,
        failures=failures,
        mean_lambda_min_over_sqrt_p=float(np.mean([r["lambda"] for r in results])),
        mean_conditional_f=np.mean([r["cond_f"] for r in results], axis=0),
        true_lambda_min_over_sqrt_p=(
            true_strength_diagnostic(config) if config.mode == "summary" else None
        ),
        mean_selected=float(np.mean(selected)) if selected else None,
    )
