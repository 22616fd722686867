import numpy as np
import pytest

import srivw

# Populated by the acceptance tests; printed once the run finishes.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        by_number = sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split(":")[0].split()[1]))
        for line in by_number:
            terminalreporter.write_line(line)


def random_dataset(rng, p=50, k=3, beta0=None, corr=None, with_cov_xy=False,
                   se_scale=0.005, z_scale=6.0):
    """Well-conditioned random dataset drawn around a random true model."""
    if beta0 is None:
        beta0 = rng.normal(0.0, 0.5, size=k)
    if corr is None:
        a = rng.normal(0.0, 0.3, size=(k, k))
        corr = a @ a.T + np.eye(k)
        d = np.sqrt(np.diag(corr))
        corr = corr / np.outer(d, d)
    se_x = se_scale * rng.uniform(0.7, 1.4, size=(p, k))
    se_y = se_scale * rng.uniform(0.7, 1.4, size=p)
    gammas = rng.normal(0.0, z_scale, size=(p, k)) * se_x
    chol = np.linalg.cholesky(corr)
    gamma_hat = gammas + (rng.standard_normal((p, k)) @ chol.T) * se_x
    gamma_y = gammas @ beta0 + rng.standard_normal(p) * se_y
    cov_xy = None
    if with_cov_xy:
        rho = rng.uniform(-0.4, 0.4, size=k)
        cov_xy = se_x * rho * se_y[:, None]
    ids = [f"rs{j + 1}" for j in range(p)]
    data = srivw.Dataset(ids, gamma_hat, se_x, gamma_y, se_y, corr, cov_xy)
    return data, np.asarray(beta0, dtype=float)


@pytest.fixture(scope="session")
def table1_runs():
    """Table-1-style Monte Carlo at 2000 reps for the three divisor settings.

    Shared across acceptance and property tests; this is the expensive
    fixture, so it runs once per session.
    """
    out = {}
    for divisor in (2.5, 5.5, 9.25):
        cfg = srivw.table1_config(reps=2000, seed=303, divisor=divisor)
        out[divisor] = srivw.monte_carlo(cfg, ("mv_ivw", "srivw"))
    return out
