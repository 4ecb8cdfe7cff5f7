"""Fitting the human-choice model from logged data.

Comparison logs give (tested point, truth, correct?) triples; the accuracy
curve p(d) = 1/(1+exp(-rate * d**kappa)) is fit by enumerating a grid and
maximizing the Bernoulli log-likelihood, which is how the source data for
the default grids was originally analyzed. Direct-estimate logs give
(response, truth) pairs from which the label-noise scale is estimated.
Bootstrap resampling quantifies the uncertainty of all three estimates.

Only the ratio rate = lambda_delta / gamma is identifiable from choices:
scaling the utility gap and the noise temperature together leaves every
choice probability unchanged, so that ratio is what `rate` means here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_KAPPA_GRID: tuple[float, ...] = tuple(np.round(np.arange(0.0, 1.0 + 1e-12, 0.01), 10))
DEFAULT_RATE_GRID: tuple[float, ...] = tuple(np.round(np.arange(0.0, 0.5 + 1e-12, 0.002), 10))


@dataclass(frozen=True)
class ComparisonRecord:
    """One logged comparison: where we asked, where the truth was, outcome."""

    theta: float
    theta_star: float
    correct: int

    def __post_init__(self) -> None:
        if self.correct not in (0, 1):
            raise ValueError("correct must be 0 or 1")
        if not (math.isfinite(self.theta) and math.isfinite(self.theta_star)):
            raise ValueError("theta and theta_star must be finite")

    @property
    def distance(self) -> float:
        return abs(self.theta - self.theta_star)


@dataclass(frozen=True)
class EstimateRecord:
    """One direct-estimate response against the known truth."""

    response: float
    theta_star: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.response) and math.isfinite(self.theta_star)):
            raise ValueError("response and theta_star must be finite")


@dataclass(frozen=True)
class ChoiceModelFit:
    kappa_hat: float
    rate_hat: float
    log_likelihood: float
    degenerate: bool


@dataclass(frozen=True)
class BootstrapSummary:
    means: tuple[float, ...]
    variances: tuple[float, ...]
    n_resamples: int
    n_failed: int
    flagged: bool


@dataclass(frozen=True)
class CalibrationResult:
    """Full calibration report: point estimates plus bootstrap spread."""

    kappa_hat: float
    rate_hat: float
    sigma_hat: float
    n_resamples: int
    bootstrap_means: tuple[float, float, float]
    bootstrap_variances: tuple[float, float, float]
    degenerate: bool

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.bootstrap_variances):
            raise ValueError("variances must be nonnegative")


def _log1pexp(x: np.ndarray) -> np.ndarray:
    """log(1+exp(x)), linear above +30 and exp below -30 to dodge overflow."""
    out = np.empty_like(x)
    hi = x > 30.0
    lo = x < -30.0
    mid = ~(hi | lo)
    out[hi] = x[hi]
    out[lo] = np.exp(x[lo])
    out[mid] = np.log1p(np.exp(x[mid]))
    return out


def fit_choice_model(records: Sequence[ComparisonRecord],
                     kappa_grid: Sequence[float] = DEFAULT_KAPPA_GRID,
                     rate_grid: Sequence[float] = DEFAULT_RATE_GRID) -> ChoiceModelFit:
    """Grid maximum-likelihood fit of the accuracy curve.

    Maximizes sum_i [-y_i log(1+exp(-g_i)) - (1-y_i) log(1+exp(g_i))] with
    g_i = rate * d_i**kappa over the grid product. Ties break to the
    smallest kappa, then the smallest rate, so the result is deterministic.
    A fit that lands on either end of the rate grid is flagged degenerate:
    that is where all-correct, all-wrong, and coin-flip data all end up,
    and the kappa value is meaningless there.
    """
    if len(records) == 0:
        raise ValueError("need at least one comparison record")
    kappas = np.asarray(list(kappa_grid), dtype=float)
    rates = np.asarray(list(rate_grid), dtype=float)
    if kappas.size == 0 or rates.size == 0:
        raise ValueError("grids must be non-empty")
    if not (np.isfinite(kappas).all() and np.isfinite(rates).all()):
        raise ValueError("grids must be finite")

    d = np.array([r.distance for r in records], dtype=float)
    y = np.array([r.correct for r in records], dtype=float)
    positive = d > 0.0

    best_ll = -math.inf
    best_k = float(kappas[0])
    best_r = float(rates[0])
    wrong = 1.0 - y
    for kappa in kappas:
        dk = np.where(positive, np.power(d, kappa, where=positive, out=np.ones_like(d)), 0.0)
        gaps = rates[:, None] * dk[None, :]
        # log1pexp(g) = g + log1pexp(-g), so the two Bernoulli terms
        # collapse into one log1pexp plus a dot product.
        ll = -_log1pexp(-gaps).sum(axis=1) - gaps @ wrong
        idx = int(np.argmax(ll))
        if ll[idx] > best_ll:
            best_ll = float(ll[idx])
            best_k = float(kappa)
            best_r = float(rates[idx])
    degenerate = best_r == float(rates[0]) or best_r == float(rates[-1])
    return ChoiceModelFit(kappa_hat=best_k, rate_hat=best_r,
                          log_likelihood=best_ll, degenerate=degenerate)


def choice_log_likelihood(records: Sequence[ComparisonRecord], kappa: float,
                          rate: float) -> float:
    """Log-likelihood of the records at one (kappa, rate) point."""
    d = np.array([r.distance for r in records], dtype=float)
    y = np.array([r.correct for r in records], dtype=float)
    positive = d > 0.0
    dk = np.where(positive, np.power(d, kappa, where=positive, out=np.ones_like(d)), 0.0)
    g = rate * dk
    return float(-(y * _log1pexp(-g) + (1.0 - y) * _log1pexp(g)).sum())


def estimate_sigma(records: Sequence[EstimateRecord]) -> float:
    """Noise scale of direct estimates: sqrt(sum (y - truth)^2 / (N-1))."""
    if len(records) < 2:
        raise ValueError("need at least two estimate records")
    resid = np.array([r.response - r.theta_star for r in records], dtype=float)
    return float(math.sqrt(float(resid @ resid) / (len(records) - 1)))


def bootstrap(records: Sequence, n_resamples: int,
              estimator: Callable[[list], Sequence[float]],
              seed: int = 0) -> BootstrapSummary:
    """Resample-with-replacement uncertainty for an arbitrary estimator.

    The estimator maps a record list to a parameter vector. Resamples on
    which it raises are dropped and counted. With fewer than two usable
    resamples the variance is 0 by convention and the summary is flagged.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    records = list(records)
    n = len(records)
    if n == 0:
        raise ValueError("need at least one record")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 929]))
    estimates = []
    n_failed = 0
    for _ in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        sample = [records[i] for i in idx]
        try:
            estimates.append(tuple(float(v) for v in estimator(sample)))
        except Exception:
            n_failed += 1
    if not estimates:
        raise ValueError("estimator failed on every resample")
    arr = np.asarray(estimates, dtype=float)
    means = tuple(float(v) for v in arr.mean(axis=0))
    if arr.shape[0] >= 2:
        variances = tuple(float(v) for v in arr.var(axis=0, ddof=1))
        flagged = False
    else:
        variances = tuple(0.0 for _ in means)
        flagged = True
    return BootstrapSummary(means=means, variances=variances,
                            n_resamples=n_resamples, n_failed=n_failed,
                            flagged=flagged)


def calibrate_from_logs(comparisons: Sequence[ComparisonRecord],
                        estimates: Sequence[EstimateRecord],
                        kappa_grid: Sequence[float] = DEFAULT_KAPPA_GRID,
                        rate_grid: Sequence[float] = DEFAULT_RATE_GRID,
                        n_resamples: int = 500,
                        seed: int = 0) -> CalibrationResult:
    """Point estimates plus bootstrap for (kappa, rate, sigma) in one shot."""
    fit = fit_choice_model(comparisons, kappa_grid, rate_grid)
    sigma_hat = estimate_sigma(estimates)

    def _fit_pair(sample: list) -> tuple[float, float]:
        f = fit_choice_model(sample, kappa_grid, rate_grid)
        return f.kappa_hat, f.rate_hat

    choice_boot = bootstrap(comparisons, n_resamples, _fit_pair, seed=seed)
    sigma_boot = bootstrap(estimates, n_resamples,
                           lambda sample: (estimate_sigma(sample),),
                           seed=seed + 1)
    return CalibrationResult(
        kappa_hat=fit.kappa_hat,
        rate_hat=fit.rate_hat,
        sigma_hat=sigma_hat,
        n_resamples=n_resamples,
        bootstrap_means=(choice_boot.means[0], choice_boot.means[1],
                         sigma_boot.means[0]),
        bootstrap_variances=(choice_boot.variances[0], choice_boot.variances[1],
                             sigma_boot.variances[0]),
        degenerate=fit.degenerate,
    )


# ---------------------------------------------------------------------------
# CSV interchange with the session service
# ---------------------------------------------------------------------------

COMPARISON_FIELDS = ("theta", "theta_star", "correct")
ESTIMATE_FIELDS = ("response", "theta_star")


def load_comparison_log(path: str | Path) -> list[ComparisonRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COMPARISON_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"comparison log missing columns: {sorted(missing)}")
        for row in reader:
            records.append(ComparisonRecord(theta=float(row["theta"]),
                                            theta_star=float(row["theta_star"]),
                                            correct=int(row["correct"])))
    return records


def load_estimate_log(path: str | Path) -> list[EstimateRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(ESTIMATE_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"estimate log missing columns: {sorted(missing)}")
        for row in reader:
            records.append(EstimateRecord(response=float(row["response"]),
                                          theta_star=float(row["theta_star"])))
    return records


def synthetic_comparisons(kappa: float, rate: float,
                          distances: Sequence[float], seed: int,
                          theta_star: float = 0.0) -> list[ComparisonRecord]:
    """Simulated comparison log with the given accuracy parameters.

    Each record is placed at theta_star + d and answered correctly with
    probability 1/(1+exp(-rate*d**kappa)). Used by tests and the demo CLI;
    real logs come from the session service.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 331]))
    records = []
    for d in distances:
        d = float(d)
        g = rate * d**kappa if d > 0 else 0.0
        p = 1.0 / (1.0 + math.exp(-g))
        records.append(ComparisonRecord(theta=theta_star + d, theta_star=theta_star,
                                        correct=int(rng.random() < p)))
    return records


def synthetic_estimates(sigma: float, n: int, seed: int,
                        theta_star: float = 64.0) -> list[EstimateRecord]:
    """Simulated direct-estimate log with Gaussian noise of scale sigma."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 337]))
    return [EstimateRecord(response=theta_star + sigma * float(rng.standard_normal()),
                           theta_star=theta_star)
            for _ in range(n)]
