"""Stage-1 supervised learning: Lasso support recovery from noisy labels.

The solver is cyclic coordinate descent with soft-thresholding on

    (1/2n) * ||y - X w||^2 + lam * ||w||_1,

run on the covariance statistics X'X/n and X'y/n so the cost per sweep is
independent of n. That also lets callers with more rows than memory stream
their data through `GramSketch` accumulators and fit or cross-validate
without materializing the design matrix.

Alongside the solver live the sample-size and regularization formulas that
make support recovery provable on well-conditioned designs, exposed with
their constants as explicit configuration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ._kernels import lasso_cd


@dataclass
class Dataset:
    """A design matrix, responses, and where they came from."""

    X: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-d")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must match X rows")
        if self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("need at least one row and one column")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite entries in data")


@dataclass
class SparseModel:
    """A fitted coefficient vector and its optimality diagnostics."""

    coefficients: np.ndarray
    support: np.ndarray
    lambda_used: float
    iterations: int
    kkt_residual: float
    converged: bool


@dataclass(frozen=True)
class RecoveryParams:
    """Problem constants the recovery guarantees are stated in.

    `theta_min` is the smallest nonzero coefficient magnitude the truth is
    promised to have. c_min/alpha1/alpha2 describe the design conditioning
    (lower eigenvalue, mutual incoherence, curvature); c_tail is the noise
    sub-Gaussian constant. The defaults are the calibration used by the
    test suite for i.i.d. Gaussian designs, not universal truths.
    """

    sigma: float
    theta_min: float
    s: int
    d: int
    c_min: float = 1.0
    alpha1: float = 0.5
    alpha2: float = 1.0
    c_tail: float = 1.0

    def __post_init__(self) -> None:
        if min(self.sigma, self.theta_min, self.c_min, self.alpha2, self.c_tail) <= 0:
            raise ValueError("all constants must be positive")
        if not 0 < self.alpha1 < 1:
            raise ValueError("alpha1 must be in (0, 1)")
        if not 0 < self.s < self.d:
            raise ValueError("need 0 < s < d")

    @property
    def zeta(self) -> float:
        """Slack constant entering both the penalty and the sample size."""
        return 0.25 * min(
            math.sqrt(self.c_min) / (self.sigma * self.theta_min),
            self.alpha2 * (1.0 - self.alpha1) / (2.0 * self.c_tail * self.sigma * self.theta_min),
        )


def theoretical_lambda(params: RecoveryParams, n: int) -> float:
    """Penalty level under which no false coordinate enters the support."""
    if n < 1:
        raise ValueError("n must be >= 1")
    scale = 2.0 * params.c_tail * params.sigma / (1.0 - params.alpha1)
    return scale * (math.sqrt(2.0 * math.log(params.d - params.s) / n) + params.zeta)


def ell_inf_bound(params: RecoveryParams, n: int) -> float:
    """High-probability sup-norm error bound on the true support."""
    lam = theoretical_lambda(params, n)
    first = (params.sigma / math.sqrt(params.c_min)) * (
        math.sqrt(2.0 * math.log(params.s) / n) + params.zeta
    )
    return first + lam / params.alpha2


def stage1_sample_size(params: RecoveryParams, delta: float) -> int:
    """Labels needed for support recovery with probability 1 - delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    p = params
    t1 = 32.0 * p.sigma**2 * math.log(p.s) / (p.theta_min**2 * p.c_min)
    t2 = 128.0 * p.c_tail**2 * p.sigma**2 * math.log(p.d - p.s) / (
        (p.theta_min * p.alpha2 * (1.0 - p.alpha1)) ** 2
    )
    t3 = 2.0 * math.log(4.0 / delta) / p.zeta**2
    return math.ceil(max(t1, t2, t3))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass
class GramSketch:
    """Streaming accumulator for X'X, X'y, y'y over row chunks."""

    d: int
    xx: np.ndarray = None  # type: ignore[assignment]
    xy: np.ndarray = None  # type: ignore[assignment]
    yy: float = 0.0
    n: int = 0

    def __post_init__(self) -> None:
        if self.xx is None:
            self.xx = np.zeros((self.d, self.d))
        if self.xy is None:
            self.xy = np.zeros(self.d)

    def add(self, X: np.ndarray, y: np.ndarray) -> None:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.xx += X.T @ X
        self.xy += X.T @ y
        self.yy += float(y @ y)
        self.n += X.shape[0]

    def merged(self, others: Iterable["GramSketch"]) -> "GramSketch":
        out = GramSketch(self.d, self.xx.copy(), self.xy.copy(), self.yy, self.n)
        for o in others:
            out.xx += o.xx
            out.xy += o.xy
            out.yy += o.yy
            out.n += o.n
        return out

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n == 0:
            raise ValueError("empty sketch")
        return self.xx / self.n, self.xy / self.n


def _kkt_residual(gram: np.ndarray, cov: np.ndarray, w: np.ndarray,
                  lam: float) -> float:
    grad = cov - gram @ w
    zero = w == 0.0
    viol_zero = np.maximum(np.abs(grad[zero]) - lam, 0.0)
    viol_active = np.abs(grad[~zero] - lam * np.sign(w[~zero]))
    worst = 0.0
    if viol_zero.size:
        worst = max(worst, float(viol_zero.max()))
    if viol_active.size:
        worst = max(worst, float(viol_active.max()))
    return worst


def fit_from_gram(gram: np.ndarray, cov: np.ndarray, lam: float,
                  tol: float = 1e-8, max_iter: int = 10_000,
                  warm_start: Optional[np.ndarray] = None) -> SparseModel:
    """Solve the covariance-form Lasso; gram = X'X/n, cov = X'y/n."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    w = np.zeros(cov.shape[0]) if warm_start is None else warm_start.astype(float).copy()
    iterations, _ = lasso_cd(np.ascontiguousarray(gram, dtype=float),
                             np.ascontiguousarray(cov, dtype=float),
                             lam, w, max_iter, tol)
    converged = iterations < max_iter
    return SparseModel(
        coefficients=w,
        support=np.flatnonzero(w),
        lambda_used=float(lam),
        iterations=iterations,
        kkt_residual=_kkt_residual(gram, cov, w, lam),
        converged=converged,
    )


def lasso_fit(data: Dataset, lam: float, tol: float = 1e-8,
              max_iter: int = 10_000, standardize: bool = False) -> SparseModel:
    """Fit the Lasso on a materialized dataset.

    Standardization (off by default; the recovery theory is stated for the
    raw design) rescales columns to unit standard deviation for the solve
    and returns coefficients on the original scale.
    """
    n = data.X.shape[0]
    X = data.X
    scales = None
    if standardize:
        scales = X.std(axis=0)
        scales[scales == 0.0] = 1.0
        X = X / scales
    gram = X.T @ X / n
    cov = X.T @ data.y / n
    model = fit_from_gram(gram, cov, lam, tol=tol, max_iter=max_iter)
    if scales is not None:
        model.coefficients = model.coefficients / scales
        model.support = np.flatnonzero(model.coefficients)
    return model


def cv_select_lambda(data: Dataset, folds: int,
                     lambda_grid: Sequence[float], seed: int = 0) -> float:
    """Pick the penalty with the best mean held-out squared error.

    Folds are a seeded shuffle, so the selection is deterministic. Ties
    (exact, which happens whenever the grid saturates into the null model)
    go to the largest penalty, i.e. the sparsest model. A degenerate fold
    with constant responses short-circuits to the grid maximum.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(lambda_grid) == 0:
        raise ValueError("empty lambda grid")
    grid = sorted(float(l) for l in lambda_grid)
    if len(grid) == 1:
        return grid[0]
    n, d = data.X.shape
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    sketches = []
    for f in range(folds):
        idx = order[f::folds]
        if float(np.var(data.y[idx])) < 1e-24:
            return grid[-1]
        sk = GramSketch(d)
        sk.add(data.X[idx], data.y[idx])
        sketches.append(sk)
    return cv_select_lambda_from_sketches(sketches, grid)


def cv_select_lambda_from_sketches(fold_sketches: Sequence[GramSketch],
                                   lambda_grid: Sequence[float]) -> float:
    """Cross-validate from per-fold covariance sketches (streaming data).

    Held-out error for a fold is computed exactly from its sketch:
    ||y - Xw||^2 = y'y - 2 w'X'y + w'X'Xw. Same tie-breaking as
    `cv_select_lambda`.
    """
    grid = sorted(float(l) for l in lambda_grid)
    folds = len(fold_sketches)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    errors = np.zeros(len(grid))
    for f in range(folds):
        held = fold_sketches[f]
        train = fold_sketches[(f + 1) % folds].merged(
            fold_sketches[g] for g in range(folds) if g not in (f, (f + 1) % folds)
        )
        gram, cov = train.normalized()
        w = None
        for gi in range(len(grid) - 1, -1, -1):
            model = fit_from_gram(gram, cov, grid[gi], warm_start=w)
            w = model.coefficients
            sse = held.yy - 2.0 * w @ held.xy + w @ held.xx @ w
            errors[gi] += sse / held.n
    errors /= folds
    best = len(grid) - 1
    for gi in range(len(grid) - 2, -1, -1):
        if errors[gi] < errors[best]:
            best = gi
    return grid[best]


# ---------------------------------------------------------------------------
# CSV interchange and model export
# ---------------------------------------------------------------------------

def save_dataset_csv(data: Dataset, path: str | Path) -> None:
    """Write the design and responses with a header row; response column "y"."""
    d = data.X.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(d)] + ["y"])
        for row, resp in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(resp))])


def load_dataset_csv(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = list(reader.fieldnames or ())
        if "y" not in names:
            raise ValueError('dataset CSV needs a response column named "y"')
        features = [c for c in names if c != "y"]
        rows, ys = [], []
        for row in reader:
            rows.append([float(row[c]) for c in features])
            ys.append(float(row["y"]))
    return Dataset(X=np.array(rows, dtype=float), y=np.array(ys, dtype=float),
                   provenance={"source": str(path)})


def model_export(model: SparseModel) -> dict:
    """Flat nonzero records plus a metadata block, ready for JSON."""
    return {
        "nonzeros": [
            {"j": int(j), "coefficient": float(model.coefficients[j])}
            for j in model.support
        ],
        "metadata": {
            "lambda_used": model.lambda_used,
            "iterations": model.iterations,
            "kkt_residual": model.kkt_residual,
            "converged": model.converged,
        },
    }
