"""Two-stage orchestration: sparse recovery, then per-coordinate bisection.

`sl_lhf_run` is the full procedure: spend a batch of noisy labels on Lasso
support recovery, then refine each recovered coordinate with comparison
queries inside a box centered at its stage-1 estimate. Precision and
confidence are split across coordinates so the per-coordinate guarantees
compose into the requested overall norm bound.

`ass_align` queries at the sample level instead: it orthogonalizes a set of
embedded samples and bisects on predicted values, back-solving coefficients
through the Gram factors, so a human only ever compares two predictions for
a concrete sample.

The complexity diagnostics (`phi_bound`, `optimal_refinement_width`,
`lnca_check`) quantify when comparisons are worth their cost.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._kernels import derive_stream
from .bisect import (
    RULE_CREDIBLE,
    MapbConfig,
    MapbTrace,
    PiecewiseDensity,
    StoppingConstants,
    mapb_align,
    tau_horizontal,
    tau_vertical,
)
from .core import (
    PARAMETRIC_KAPPA,
    DistanceSpec,
    OracleParams,
    Responder,
    SimulatedResponder,
    _sigmoid,
)
from .sparse import (
    Dataset,
    RecoveryParams,
    cv_select_lambda,
    lasso_fit,
    stage1_sample_size,
    theoretical_lambda,
)

ResponderFactory = Callable[[int, float, float], Responder]


# ---------------------------------------------------------------------------
# Configuration and plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlLhfConfig:
    """Knobs for a two-stage run.

    epsilon/delta are the overall targets; they are divided across the
    refined coordinates as (epsilon / s**(1/norm_order), delta / s).
    refine_half_width defaults to the coefficient floor, local_radius to
    the geometric mean of the per-coordinate precision and the box width.
    `must_refine` coordinates are refined even if stage 1 drops them
    (domain knowledge about suspect coordinates).
    """

    epsilon: float
    delta: float
    recovery: RecoveryParams
    refine_half_width: Optional[float] = None
    norm_order: float = 2.0
    eta: float = 0.1
    update_weight: float = 0.9
    granularity: Optional[float] = None
    kappa: float = 0.3
    lambda_delta: float = 1.0
    gamma: float = 1.0
    horizontal_rule: str = RULE_CREDIBLE
    constants: StoppingConstants = field(default_factory=StoppingConstants)
    local_radius: Optional[float] = None
    stage1_n: Optional[int] = None
    stage1_lambda: Optional[float] = None
    cv_grid: Optional[tuple[float, ...]] = None
    cv_folds: int = 5
    must_refine: tuple[int, ...] = ()
    vertical_hard_cap: int = 1_000_000
    kappa_zero_cap: int = 100_000

    def box_half_width(self) -> float:
        return self.refine_half_width if self.refine_half_width is not None \
            else self.recovery.theta_min


@dataclass
class AlignmentPlan:
    """What stage 2 will do, fixed once stage 1 has reported."""

    support: tuple[int, ...]
    refine: tuple[int, ...]
    per_dim_epsilon: float
    per_dim_delta: float
    norm_order: float
    refine_half_width: float


@dataclass
class SlLhfReport:
    plan: AlignmentPlan
    n_labels: int
    n_comparisons: int
    stage1_lambda: float
    stage1_coefficients: np.ndarray
    traces: dict[int, MapbTrace]
    support_match: Optional[bool]
    lnca: "LncaResult"


def _per_dim_mapb_config(config: SlLhfConfig, eps_dim: float, delta_dim: float,
                         center: float, half_width: float) -> MapbConfig:
    if config.local_radius is not None:
        a = config.local_radius
    else:
        a = math.sqrt(eps_dim * half_width)
    bound = abs(center) + half_width
    constants = dataclasses.replace(config.constants, theta_star_bound=bound)
    return MapbConfig(
        epsilon=eps_dim,
        delta=delta_dim,
        granularity=config.granularity if config.granularity is not None else eps_dim,
        local_radius=a,
        eta=config.eta,
        update_weight=config.update_weight,
        prior_half_width=half_width,
        kappa=config.kappa,
        lambda_delta=config.lambda_delta,
        gamma=config.gamma,
        constants=constants,
        horizontal_rule=config.horizontal_rule,
        vertical_hard_cap=config.vertical_hard_cap,
        kappa_zero_cap=config.kappa_zero_cap,
    )


def default_responder_factory(theta_star: np.ndarray, config: SlLhfConfig,
                              seed: int) -> ResponderFactory:
    """Simulated per-coordinate responders with decorrelated streams.

    Accuracy follows the power law: the utility gap at distance d from the
    coordinate's truth is lambda_delta * d**kappa.
    """
    spec = DistanceSpec(kind=PARAMETRIC_KAPPA, lambda_delta=config.lambda_delta,
                        kappa=config.kappa)

    def factory(j: int, center: float, half_width: float) -> Responder:
        params = OracleParams(theta_star=float(theta_star[j]),
                              gamma=config.gamma, distance=spec)
        return SimulatedResponder(params, seed=derive_stream(seed, 7001, j))

    return factory


def sl_lhf_run(problem_theta_star: np.ndarray, config: SlLhfConfig,
               seed: int,
               responder_factory: Optional[ResponderFactory] = None,
               data: Optional[Dataset] = None,
               noise_sd: Optional[float] = None) -> tuple[np.ndarray, SlLhfReport]:
    """Run the two-stage procedure.

    Stage 1 fits the Lasso on `data` (generated as an i.i.d. standard
    Gaussian design with `noise_sd` label noise when not supplied) and
    keeps the recovered support. Stage 2 refines each kept coordinate by
    probabilistic bisection over [estimate - w, estimate + w] with the
    scaled per-coordinate targets. Coordinates never refined stay at zero.
    """
    theta_star = np.asarray(problem_theta_star, dtype=float)
    d = config.recovery.d
    if theta_star.shape != (d,):
        raise ValueError("theta_star length must match recovery.d")
    sd = noise_sd if noise_sd is not None else config.recovery.sigma

    n1 = config.stage1_n if config.stage1_n is not None \
        else stage1_sample_size(config.recovery, config.delta)
    if data is None:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
        X = rng.standard_normal((n1, d))
        y = X @ theta_star + sd * rng.standard_normal(n1)
        data = Dataset(X, y, provenance={"seed": seed, "generator": "gaussian-iid"})
    else:
        n1 = data.X.shape[0]

    if config.stage1_lambda is not None:
        lam = config.stage1_lambda
    elif config.cv_grid is not None:
        lam = cv_select_lambda(data, config.cv_folds, config.cv_grid, seed=seed)
    else:
        lam = theoretical_lambda(config.recovery, n1)
    model = lasso_fit(data, lam)

    support_hat = tuple(int(j) for j in model.support)
    refine = tuple(sorted(set(support_hat) | set(config.must_refine)))
    true_support = tuple(int(j) for j in np.flatnonzero(theta_star))
    support_match = support_hat == true_support

    theta_hat = np.zeros(d)
    traces: dict[int, MapbTrace] = {}
    half_width = config.box_half_width()
    s_eff = max(len(refine), 1)
    eps_dim = config.epsilon / s_eff ** (1.0 / config.norm_order)
    delta_dim = config.delta / s_eff

    if responder_factory is None:
        responder_factory = default_responder_factory(theta_star, config, seed)

    for j in refine:
        center = float(model.coefficients[j])
        cfg_j = _per_dim_mapb_config(config, eps_dim, delta_dim, center, half_width)
        prior = PiecewiseDensity.uniform(center - half_width, center + half_width)
        responder = responder_factory(j, center, half_width)
        theta_hat[j], traces[j] = mapb_align(cfg_j, prior, responder)

    plan = AlignmentPlan(
        support=support_hat,
        refine=refine,
        per_dim_epsilon=eps_dim,
        per_dim_delta=delta_dim,
        norm_order=config.norm_order,
        refine_half_width=half_width,
    )
    report = SlLhfReport(
        plan=plan,
        n_labels=n1,
        n_comparisons=sum(t.total_comparisons for t in traces.values()),
        stage1_lambda=float(lam),
        stage1_coefficients=model.coefficients,
        traces=traces,
        support_match=support_match,
        lnca=lnca_check(sd, config.recovery.s, config.kappa, config.epsilon),
    )
    return theta_hat, report


# ---------------------------------------------------------------------------
# Active sample selection
# ---------------------------------------------------------------------------

@dataclass
class OrthoBasis:
    """Embedded samples with their orthogonalized directions.

    cross[k, j] caches z_k . alpha_j for j < k; norms_sq[k] caches
    alpha_k . alpha_k. Both feed the back-solve recursion directly.
    """

    z: np.ndarray
    alphas: np.ndarray
    cross: np.ndarray
    norms_sq: np.ndarray
    condition: float

    def orthogonality_defect(self) -> float:
        s = self.alphas.shape[0]
        worst = 0.0
        for i in range(s):
            for j in range(i + 1, s):
                denom = float(np.linalg.norm(self.alphas[i])
                              * np.linalg.norm(self.alphas[j]))
                worst = max(worst, abs(float(self.alphas[i] @ self.alphas[j])) / denom)
        return worst


def gram_schmidt(z: np.ndarray, dependence_tol: float = 1e-10) -> OrthoBasis:
    """Orthogonalize rows of z by modified Gram-Schmidt, twice.

    The second projection pass keeps the basis orthogonal to near machine
    precision even for condition numbers around 1e6. A row whose residual
    shrinks below `dependence_tol` relative to its norm is reported as
    dependent by index.
    """
    z = np.asarray(z, dtype=float)
    s, d = z.shape
    if s > d:
        raise ValueError("more samples than dimensions cannot be independent")
    alphas = np.zeros_like(z)
    for k in range(s):
        v = z[k].copy()
        for _ in range(2):
            for j in range(k):
                v -= (v @ alphas[j]) / (alphas[j] @ alphas[j]) * alphas[j]
        if np.linalg.norm(v) <= dependence_tol * max(np.linalg.norm(z[k]), 1e-300):
            raise ValueError(f"sample {k} is nearly dependent on its predecessors")
        alphas[k] = v
    cross = np.zeros((s, s))
    for k in range(s):
        for j in range(k):
            cross[k, j] = z[k] @ alphas[j]
    norms_sq = np.einsum("ij,ij->i", alphas, alphas)
    return OrthoBasis(z=z, alphas=alphas, cross=cross, norms_sq=norms_sq,
                      condition=float(np.linalg.cond(z)))


@dataclass(frozen=True)
class AssConfig:
    """Value-space bisection settings for sample-level alignment."""

    epsilon: float
    delta: float
    refine_half_width: float
    eta: float = 0.1
    update_weight: float = 0.9
    granularity: Optional[float] = None
    kappa: float = 0.3
    lambda_delta: float = 1.0
    gamma: float = 1.0
    horizontal_rule: str = RULE_CREDIBLE
    constants: StoppingConstants = field(default_factory=StoppingConstants)
    condition_limit: float = 1e6


@dataclass
class AssResult:
    omega_hat: np.ndarray
    theta_hat: np.ndarray
    basis: OrthoBasis
    amplification: float
    values: np.ndarray
    n_comparisons: int
    traces: dict[int, MapbTrace]


def ass_align(samples: Sequence[np.ndarray], phi: Callable[[np.ndarray], np.ndarray],
              config: AssConfig,
              responder_factory: Optional[ResponderFactory] = None,
              value_oracle: Optional[Callable[[int], float]] = None,
              center_predictions: Optional[Sequence[float]] = None) -> AssResult:
    """Align coefficients by bisecting on per-sample predicted values.

    For each sample in turn, the true value z_k . theta* is located either
    by `value_oracle` (exact, for verification) or by a value-space
    bisection over [center_k - w*||z_k||_1, center_k + w*||z_k||_1], then
    the coefficient weights are back-solved through the Gram factors:

        omega_k = (y_k - sum_{j<k} omega_j * (z_k . alpha_j)) / ||alpha_k||^2

    The reported amplification factor is the operator norm of the linear
    map from value errors to coefficient errors; per-value precision does
    not compose additively and callers should budget with this factor.
    """
    z = np.asarray([phi(x) for x in samples], dtype=float)
    basis = gram_schmidt(z)
    if basis.condition > config.condition_limit:
        raise ValueError(
            f"sample set condition number {basis.condition:.3g} exceeds "
            f"{config.condition_limit:.3g}")
    s = z.shape[0]
    centers = np.zeros(s) if center_predictions is None \
        else np.asarray(center_predictions, dtype=float)

    values = np.zeros(s)
    omega = np.zeros(s)
    traces: dict[int, MapbTrace] = {}
    n_comparisons = 0
    for k in range(s):
        if value_oracle is not None:
            values[k] = float(value_oracle(k))
        else:
            if responder_factory is None:
                raise ValueError("need a responder_factory without a value oracle")
            half = config.refine_half_width * float(np.abs(z[k]).sum())
            a = math.sqrt(config.epsilon * half) if config.epsilon < half \
                else 0.5 * half
            constants = dataclasses.replace(
                config.constants, theta_star_bound=abs(centers[k]) + half)
            cfg = MapbConfig(
                epsilon=min(config.epsilon, 0.25 * half),
                delta=config.delta / s,
                granularity=config.granularity or min(config.epsilon, 0.25 * half),
                local_radius=a,
                eta=config.eta,
                update_weight=config.update_weight,
                prior_half_width=half,
                kappa=config.kappa,
                lambda_delta=config.lambda_delta,
                gamma=config.gamma,
                constants=constants,
                horizontal_rule=config.horizontal_rule,
            )
            prior = PiecewiseDensity.uniform(centers[k] - half, centers[k] + half)
            responder = responder_factory(k, float(centers[k]), half)
            values[k], traces[k] = mapb_align(cfg, prior, responder)
            n_comparisons += traces[k].total_comparisons
        acc = values[k]
        for j in range(k):
            acc -= omega[j] * basis.cross[k, j]
        omega[k] = acc / basis.norms_sq[k]

    theta_hat = basis.alphas.T @ omega
    lower = np.diag(basis.norms_sq) + np.tril(basis.cross, k=-1)
    amplification = float(np.linalg.norm(basis.alphas.T @ np.linalg.inv(lower), 2))
    return AssResult(omega_hat=omega, theta_hat=theta_hat, basis=basis,
                     amplification=amplification, values=values,
                     n_comparisons=n_comparisons, traces=traces)


# ---------------------------------------------------------------------------
# Complexity diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsConfig:
    """Constants for the comparison-cost bound and the width enumeration."""

    c1: float = 1.0
    c2: float = 1.0
    constants: StoppingConstants = field(default_factory=StoppingConstants)
    width_grid: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")


def phi_bound(p_tilde: float, c1: float, c2: float) -> float:
    """Cost bound for one power-one test at accuracy p_tilde.

    c1 * |2p-1|^-2 * ln(1/|2p-1|) + c2; diverges as p_tilde falls to 1/2
    and equals c2 exactly at p_tilde = 1 (the log term wins the limit).
    """
    if not 0.5 < p_tilde <= 1.0:
        raise ValueError("p_tilde must be in (1/2, 1]")
    if p_tilde == 1.0:
        return c2
    g = abs(2.0 * p_tilde - 1.0)
    return c1 * g**-2 * math.log(1.0 / g) + c2


def _h0_float(params: RecoveryParams, delta: float) -> float:
    t1 = 32.0 * params.sigma**2 * math.log(params.s) / (params.theta_min**2 * params.c_min)
    t2 = 128.0 * params.c_tail**2 * params.sigma**2 * math.log(params.d - params.s) / (
        (params.theta_min * params.alpha2 * (1.0 - params.alpha1)) ** 2
    )
    t3 = 2.0 * math.log(4.0 / delta) / params.zeta**2
    return max(t1, t2, t3)


def stage2_comparison_bound(config: SlLhfConfig, width: float,
                            diag: DiagnosticsConfig,
                            eps_dim: float, delta_dim: float) -> float:
    """Expected-comparison bound for one refined coordinate in a given box."""
    a = math.sqrt(eps_dim * width)
    c = diag.constants
    vs = c.varsigma
    factor = (4.0 * width / (c.r2 * c.alpha * a**vs)
              + 4.0 * c.beta1 / c.r1 + 2.0 * c.beta2 / c.r_r)
    dists = np.geomspace(a, width, 200)
    worst = max(
        phi_bound(_sigmoid(config.lambda_delta * dd**config.kappa / config.gamma),
                  diag.c1, diag.c2)
        for dd in dists
    )
    constants = dataclasses.replace(c, theta_star_bound=width)
    cfg = MapbConfig(
        epsilon=eps_dim, delta=delta_dim, granularity=eps_dim,
        local_radius=a, eta=config.eta, update_weight=config.update_weight,
        prior_half_width=width, kappa=config.kappa,
        lambda_delta=config.lambda_delta, gamma=config.gamma,
        constants=constants, kappa_zero_cap=config.kappa_zero_cap,
    )
    horiz = tau_horizontal(delta_dim / 2.0, eps_dim, constants)
    vert = tau_vertical(delta_dim / 2.0, eps_dim, cfg)
    return factor * worst + float(horiz) * float(vert)


def optimal_refinement_width(config: SlLhfConfig, diag: DiagnosticsConfig,
                             grid: Optional[Sequence[float]] = None) -> float:
    """Box half-width minimizing labels plus comparisons.

    Evaluates H0(width) + s * H(width) over the candidate grid: narrower
    boxes demand more stage-1 labels (the slack constant shrinks like
    1/width) but cheaper comparisons. Ties go to the smallest width.
    Grid points at or below the per-coordinate precision are infeasible
    and skipped.
    """
    floor = config.recovery.theta_min
    if grid is None:
        grid = diag.width_grid or tuple(np.linspace(floor / 20.0, floor, 20))
    s = config.recovery.s
    eps_dim = config.epsilon / s ** (1.0 / config.norm_order)
    delta_dim = config.delta / s
    best_width = None
    best_obj = math.inf
    for width in sorted(set(float(w) for w in grid)):
        if not 0.0 < width <= floor or width <= eps_dim * (1.0 + 1e-9):
            continue
        recovery_w = dataclasses.replace(config.recovery, theta_min=width)
        h0 = _h0_float(recovery_w, config.delta)
        h2 = stage2_comparison_bound(config, width, diag, eps_dim, delta_dim)
        obj = h0 + s * h2
        if obj < best_obj:
            best_obj = obj
            best_width = width
    if best_width is None:
        raise ValueError("no feasible width in the grid")
    return best_width


@dataclass(frozen=True)
class LncaResult:
    """Label-noise-to-comparison-accuracy verdict."""

    ratio: float
    favors_two_stage: bool


def lnca_check(sigma: float, s: int, kappa: float, epsilon: float) -> LncaResult:
    """Compare label noise against comparison accuracy at the target scale.

    ratio = sigma^2 / s^kappa; the two-stage route is favored when it is at
    least epsilon^(2 - 2*kappa).
    """
    if sigma <= 0 or s <= 0 or epsilon <= 0:
        raise ValueError("sigma, s, epsilon must be positive")
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must be in [0, 1]")
    ratio = sigma**2 / s**kappa
    return LncaResult(ratio=ratio, favors_two_stage=bool(ratio >= epsilon ** (2.0 - 2.0 * kappa)))
