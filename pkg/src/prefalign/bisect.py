"""One-dimensional alignment engines.

Two search procedures live here. `db_align` is plain interval bisection for
a responder that never errs. `mapb_align` is the probabilistic version: at
each query point it runs a power-one random-walk test on repeated answers
(the "vertical" move) until the walk crosses a growing boundary, then tilts
a piecewise-constant posterior toward the indicated side and re-queries at
the new median (the "horizontal" move). Termination is either a horizontal
budget / posterior-width rule or an early stop when a late test refuses to
decide (which itself signals the query point is already close).

The engine is a resumable state machine so a session service can suspend a
run between an issued query and a human answer.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import walk_test
from .core import (
    ComparisonAnswer,
    ComparisonQuery,
    Responder,
    make_query,
    respond,
)

RULE_THEORETICAL = "theoretical-tau"
RULE_CREDIBLE = "posterior-credible"

REASON_HORIZONTAL = "horizontal-budget"
REASON_EARLY_STOP = "vertical-early-stop"
REASON_HARD_CAP = "vertical-hard-cap"


# ---------------------------------------------------------------------------
# Piecewise-constant posterior density
# ---------------------------------------------------------------------------

@dataclass
class PiecewiseDensity:
    """A strictly positive piecewise-constant density on an interval.

    `breakpoints` has one more entry than `densities`; segment i covers
    [breakpoints[i], breakpoints[i+1]) with constant density densities[i].
    `renorm_factor` records the normalization applied by the most recent
    update (exactly 1.0 when the update happened at the median).
    """

    breakpoints: np.ndarray
    densities: np.ndarray
    renorm_factor: float = 1.0

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PiecewiseDensity":
        if not hi > lo:
            raise ValueError("need hi > lo")
        return cls(
            breakpoints=np.array([lo, hi], dtype=float),
            densities=np.array([1.0 / (hi - lo)], dtype=float),
        )

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def integral(self) -> float:
        widths = np.diff(self.breakpoints)
        return float(np.dot(widths, self.densities))

    def mass_below(self, x: float) -> float:
        """Posterior mass on (-inf, x]."""
        lo, hi = self.support
        if x <= lo:
            return 0.0
        if x >= hi:
            return self.integral()
        widths = np.minimum(self.breakpoints[1:], x) - self.breakpoints[:-1]
        widths = np.clip(widths, 0.0, None)
        return float(np.dot(widths, self.densities))

    def quantile(self, q: float) -> float:
        """The point with mass `q` below it (q in [0, 1])."""
        if not 0.0 <= q <= 1.0:
            raise ValueError("quantile level must be in [0, 1]")
        masses = np.diff(self.breakpoints) * self.densities
        cum = np.cumsum(masses)
        total = cum[-1]
        target = q * total
        idx = int(np.searchsorted(cum, target, side="left"))
        if idx >= len(masses):
            return float(self.breakpoints[-1])
        before = cum[idx - 1] if idx > 0 else 0.0
        return float(self.breakpoints[idx] + (target - before) / self.densities[idx])

    def validate(self) -> None:
        if len(self.breakpoints) != len(self.densities) + 1:
            raise ValueError("breakpoint/density length mismatch")
        if not np.all(np.diff(self.breakpoints) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(self.densities > 0):
            raise ValueError("densities must be strictly positive")
        if abs(self.integral() - 1.0) > 1e-9:
            raise ValueError(f"density integral drifted: {self.integral()}")


def median(rho: PiecewiseDensity) -> float:
    """The unique point with exactly half the mass on each side."""
    return rho.quantile(0.5)


def density_update(rho: PiecewiseDensity, theta_k: float, z: int,
                   p: float) -> PiecewiseDensity:
    """Tilt the posterior after a decided test at `theta_k`.

    The side that `z` points to (+1 means above theta_k) is multiplied by
    2p, the other side by 2(1-p). theta_k becomes a breakpoint. When
    theta_k is the median the result already integrates to 1; otherwise the
    defensive renormalization is recorded in `renorm_factor`.
    """
    lo, hi = rho.support
    if not lo < theta_k < hi:
        raise ValueError("update point must lie strictly inside the support")
    if not 0.5 <= p < 1.0:
        raise ValueError("update weight must lie in [1/2, 1)")
    if z not in (-1, 1):
        raise ValueError("z must be +1 or -1")

    bps = rho.breakpoints
    dens = rho.densities
    idx = int(np.searchsorted(bps, theta_k))
    if bps[idx] == theta_k:
        new_bps = bps.copy()
        new_dens = dens.copy()
        split = idx
    else:
        new_bps = np.insert(bps, idx, theta_k)
        new_dens = np.insert(dens, idx - 1, dens[idx - 1])
        split = idx

    up, down = (2.0 * p, 2.0 * (1.0 - p)) if z > 0 else (2.0 * (1.0 - p), 2.0 * p)
    new_dens = new_dens.copy()
    new_dens[split:] *= up
    new_dens[:split] *= down

    updated = PiecewiseDensity(new_bps, new_dens)
    total = updated.integral()
    updated.densities /= total
    updated.renorm_factor = 1.0 / total
    return updated


def smallest_credible_interval(rho: PiecewiseDensity,
                               mass: float) -> tuple[float, float]:
    """Shortest interval carrying at least `mass` posterior probability.

    For a piecewise-constant density the optimal left endpoint is either a
    breakpoint or a point whose right partner lands on a breakpoint, so
    scanning those candidates is exact.
    """
    if not 0.0 < mass <= 1.0:
        raise ValueError("mass must be in (0, 1]")
    total = rho.integral()
    target = min(mass, 1.0) * total
    cdf_at_bp = np.concatenate(
        [[0.0], np.cumsum(np.diff(rho.breakpoints) * rho.densities)]
    )
    candidates: list[float] = [float(b) for b in rho.breakpoints if cdf_at_bp[-1] - rho.mass_below(float(b)) >= target - 1e-15]
    for j, b in enumerate(rho.breakpoints):
        left_mass = cdf_at_bp[j] - target
        if left_mass >= -1e-15:
            candidates.append(rho.quantile(max(left_mass, 0.0) / total))
    best = (float("inf"), rho.support[0], rho.support[1])
    for left in candidates:
        q = (rho.mass_below(left) + target) / total
        if q > 1.0 + 1e-12:
            continue
        right = rho.quantile(min(q, 1.0))
        width = right - left
        if width < best[0]:
            best = (width, left, right)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# Power-one vertical test
# ---------------------------------------------------------------------------

def hbar(m: int, eta: float) -> float:
    """Boundary the random walk must cross before a test may decide.

    Equal to sqrt(2m(ln(m+1) - ln eta)); strictly increasing in m while
    hbar(m)/m shrinks to zero, which is what makes the test power-one.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    return math.sqrt(2.0 * m * (math.log(m + 1.0) - math.log(eta)))


@dataclass(frozen=True)
class VerticalTestState:
    """Running state of one power-one test at a fixed query point."""

    eta: float
    m: int = 0
    S: int = 0
    outcome: Optional[int] = None

    @property
    def stopped(self) -> bool:
        return self.outcome is not None


def vertical_step(state: VerticalTestState,
                  answer: ComparisonAnswer) -> VerticalTestState:
    """Advance the walk by one answer; decide if the boundary is crossed."""
    if state.stopped:
        raise ValueError("cannot step a stopped test")
    step = 1 if answer.choice == "plus" else -1
    m = state.m + 1
    S = state.S + step
    outcome: Optional[int] = None
    if abs(S) >= hbar(m, state.eta):
        assert S != 0, "a crossing at S=0 is impossible since hbar > 0"
        outcome = 1 if S > 0 else -1
    return VerticalTestState(eta=state.eta, m=m, S=S, outcome=outcome)


# ---------------------------------------------------------------------------
# Configuration and stopping budgets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StoppingConstants:
    """Constants inside the horizontal-budget formula.

    The analysis behind the budget does not pin these numerically, so they
    are configuration with neutral defaults. `theta_star_bound` caps the
    unknown truth's magnitude; None means "use the prior half-width".
    """

    r1: float = 1.0
    r2: float = 1.0
    alpha: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    r_r: float = 1.0
    varsigma: float = 1.0
    theta_star_bound: Optional[float] = None


@dataclass(frozen=True)
class MapbConfig:
    """Everything a probabilistic-bisection run needs besides the prior.

    epsilon/delta are the target precision and confidence; granularity is
    the candidate spacing; local_radius is the neighborhood radius used to
    arm the early-stop rule; eta is the per-test confidence parameter and
    update_weight the posterior tilt, constrained to
    1/2 < update_weight < 1 - eta/2. kappa/lambda_delta/gamma describe the
    responder's accuracy law and feed the vertical budget.
    """

    epsilon: float
    delta: float
    granularity: float
    local_radius: float
    eta: float = 0.1
    update_weight: float = 0.9
    prior_half_width: float = 1.0
    kappa: float = 0.3
    lambda_delta: float = 1.0
    gamma: float = 1.0
    constants: StoppingConstants = field(default_factory=StoppingConstants)
    horizontal_rule: str = RULE_CREDIBLE
    vertical_hard_cap: int = 1_000_000
    kappa_zero_cap: int = 100_000

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not self.granularity > 0:
            raise ValueError("granularity must be positive")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must be in (0, 1)")
        if not 0.5 < self.update_weight < 1.0 - self.eta / 2.0:
            raise ValueError(
                "update_weight must lie in (1/2, 1 - eta/2) "
                f"= (0.5, {1.0 - self.eta / 2.0})"
            )
        if not self.epsilon < self.local_radius < self.prior_half_width:
            raise ValueError("need epsilon < local_radius < prior_half_width")
        if self.horizontal_rule not in (RULE_THEORETICAL, RULE_CREDIBLE):
            raise ValueError(f"unknown horizontal rule {self.horizontal_rule!r}")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must be in [0, 1]")
        if self.lambda_delta <= 0 or self.gamma <= 0:
            raise ValueError("lambda_delta and gamma must be positive")
        if self.vertical_hard_cap < 1 or self.kappa_zero_cap < 1:
            raise ValueError("caps must be positive")


def tau_horizontal(delta: float, epsilon: float,
                   constants: StoppingConstants) -> int:
    """Horizontal-move budget guaranteeing the posterior has concentrated.

    Max of three terms; grows like log(1/(delta * epsilon)). The truth's
    magnitude is replaced by `constants.theta_star_bound` (the prior
    half-width in engine runs) since the truth is unknown at run time.
    """
    if not (delta > 0 and epsilon > 0):
        raise ValueError("delta and epsilon must be positive")
    c = constants
    bound = c.theta_star_bound if c.theta_star_bound is not None else 1.0
    vs = c.varsigma
    t1 = 4.0 * vs * (1.0 + vs) * math.log(8.0 * bound / (delta * epsilon**vs)) / (c.r2 * c.alpha)
    t2 = 2.0 * math.log(8.0 * c.beta2 / delta) / c.r1
    t3 = math.log(8.0 * c.beta2 / delta) / c.r_r
    return max(1, math.ceil(max(t1, t2, t3)))


def _comparison_efficiency(config: MapbConfig) -> float:
    """The constant linking distance-to-truth and testable drift."""
    branch_noise = config.lambda_delta / (8.0 * config.gamma * math.log(2.0))
    branch_local = 1.0 / (6.0 * config.local_radius**config.kappa)
    return min(branch_noise, branch_local)


def tau_vertical(delta: float, epsilon: float, config: MapbConfig) -> int:
    """Steps after which an undecided test certifies the point is close.

    max(tau0, 8 ln(1/delta) / (c^2 eps^(2 kappa))) where tau0 is the last
    step count at which the boundary-to-steps ratio still exceeds
    c * eps^kappa / 2. That ratio, sqrt(2(ln(s+1) - ln eta)/s), is strictly
    decreasing for s >= 1 and eta <= 1, so a doubling search plus bisection
    finds tau0 exactly; the result is double-checked at the crossing.

    A zero kappa makes drift non-vanishing near the truth, where this
    budget is meaningless; the configured finite cap is returned instead.
    """
    if not (delta > 0 and epsilon > 0):
        raise ValueError("delta and epsilon must be positive")
    if config.kappa == 0.0:
        return config.kappa_zero_cap
    c = _comparison_efficiency(config)
    target = c * epsilon**config.kappa / 2.0

    def ratio(s: int) -> float:
        return hbar(s, config.eta) / s

    if ratio(1) < target:
        tau0 = 1
    else:
        hi = 1
        while ratio(hi) >= target:
            hi *= 2
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ratio(mid) >= target:
                lo = mid
            else:
                hi = mid
        tau0 = lo
        assert ratio(tau0) >= target > ratio(tau0 + 1)
    tail = 8.0 * math.log(1.0 / delta) / (c**2 * epsilon ** (2.0 * config.kappa))
    return max(1, tau0, math.ceil(tail))


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------

@dataclass
class MoveRecord:
    """One horizontal move: the query point, its test, and what it decided."""

    k: int
    theta: float
    steps: int
    walk_value: int
    outcome: int
    event: str  # "decided" or a termination reason


@dataclass
class MapbTrace:
    moves: list[MoveRecord] = field(default_factory=list)
    total_comparisons: int = 0
    reason: Optional[str] = None

    def to_jsonl(self) -> str:
        """One line per horizontal move: {k, theta_k, m, S, Z, reason}."""
        lines = []
        for mv in self.moves:
            lines.append(json.dumps({
                "k": mv.k,
                "theta_k": mv.theta,
                "m": mv.steps,
                "S": mv.walk_value,
                "Z": mv.outcome,
                "reason": mv.event,
            }))
        return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class MapbEngine:
    """Suspendable probabilistic-bisection state machine.

    Drive it either answer-by-answer (`current_query` / `observe`) for
    human-backed sessions, or move-by-move (`run_move`) when the responder
    exposes a stationary choice probability and a replayable stream, in
    which case the whole vertical test runs inside a compiled kernel with
    bit-identical results.

    `integer_lattice=True` rounds query points to integers and shrinks the
    candidate spacing near the support edges so candidates stay in range
    (count tasks cannot show negative counts).
    """

    def __init__(self, config: MapbConfig,
                 prior: Optional[PiecewiseDensity] = None,
                 integer_lattice: bool = False):
        if prior is None:
            prior = PiecewiseDensity.uniform(-config.prior_half_width,
                                             config.prior_half_width)
        prior.validate()
        if integer_lattice and config.epsilon < 1.0:
            raise ValueError("integer-lattice runs need epsilon >= 1")
        self.config = config
        self.rho = prior
        self.integer_lattice = integer_lattice
        self.k = 0
        self.test = VerticalTestState(eta=config.eta)
        self.total_comparisons = 0
        self.moves: list[MoveRecord] = []
        self.status = "running"
        self.reason: Optional[str] = None
        self.theta_hat: Optional[float] = None

        lo, hi = prior.support
        constants = config.constants
        if constants.theta_star_bound is None:
            constants = dataclasses.replace(
                constants, theta_star_bound=max(abs(lo), abs(hi)))
        self._constants = constants
        self._budget_full = tau_horizontal(config.delta, config.epsilon, constants)
        self._arm_after = tau_horizontal(config.delta / 2.0,
                                         config.local_radius, constants)
        self._early_steps = tau_vertical(config.delta / 2.0,
                                         config.epsilon, config)
        self.theta_k = self._place_query(median(self.rho))

    # -- query placement ----------------------------------------------------

    def _place_query(self, point: float) -> float:
        if not self.integer_lattice:
            return point
        lo, hi = self.rho.support
        return float(min(max(round(point), math.floor(lo) + 1),
                         math.ceil(hi) - 1))

    def _granularity_at(self, point: float) -> float:
        base = self.config.granularity
        if not self.integer_lattice:
            return base
        lo, hi = self.rho.support
        room = 2.0 * min(point - lo, hi - point)
        g = min(base, room)
        g = max(2, int(g) // 2 * 2)
        return float(g)

    def current_query(self) -> ComparisonQuery:
        """The outstanding query; its id encodes (move, step) for idempotency."""
        if self.status != "running":
            raise ValueError("engine already terminated")
        return make_query(
            self.theta_k,
            self._granularity_at(self.theta_k),
            query_id=f"q-{self.k}-{self.test.m}",
        )

    # -- state transitions --------------------------------------------------

    @property
    def _armed(self) -> bool:
        return self.k >= self._arm_after

    def observe(self, answer: ComparisonAnswer) -> None:
        """Consume one answer for the outstanding query."""
        if self.status != "running":
            raise ValueError("engine already terminated")
        expected = f"q-{self.k}-{self.test.m}"
        if answer.query_id != expected:
            raise ValueError(f"answer for {answer.query_id!r}, expected {expected!r}")
        self.test = vertical_step(self.test, answer)
        self.total_comparisons += 1
        if self.test.stopped:
            self._complete_move(self.test.outcome)
        elif self._armed and self.test.m >= self._early_steps:
            self._record_move(self.test.m, self.test.S, 0, REASON_EARLY_STOP)
            self._terminate(REASON_EARLY_STOP, self.theta_k)
        elif self.test.m >= self.config.vertical_hard_cap:
            self._record_move(self.test.m, self.test.S, 0, REASON_HARD_CAP)
            self._terminate(REASON_HARD_CAP, median(self.rho))

    def run_move(self, responder) -> None:
        """Run one whole vertical test through the compiled kernel."""
        if self.status != "running":
            raise ValueError("engine already terminated")
        if self.test.m != 0:
            raise ValueError("cannot batch a test that is already underway")
        p = responder.plus_probability(self.theta_k,
                                       self._granularity_at(self.theta_k))
        cap = self.config.vertical_hard_cap
        if self._armed:
            cap = min(cap, self._early_steps)
        seed, counter = responder.stream_state()
        sign, steps, walk, crossed = walk_test(p, self.config.eta, cap,
                                               seed, counter)
        responder.advance(steps)
        self.total_comparisons += steps
        if crossed:
            self.test = VerticalTestState(eta=self.config.eta, m=steps,
                                          S=walk, outcome=sign)
            self._complete_move(sign)
        elif self._armed and steps >= self._early_steps:
            self._record_move(steps, walk, 0, REASON_EARLY_STOP)
            self._terminate(REASON_EARLY_STOP, self.theta_k)
        else:
            self._record_move(steps, walk, 0, REASON_HARD_CAP)
            self._terminate(REASON_HARD_CAP, median(self.rho))

    def _complete_move(self, z: int) -> None:
        self._record_move(self.test.m, self.test.S, z, "decided")
        at_median = not self.integer_lattice
        self.rho = density_update(self.rho, self.theta_k, z,
                                  self.config.update_weight)
        if at_median:
            assert abs(self.rho.renorm_factor - 1.0) <= 1e-9, (
                "median update should preserve mass exactly")
        self.rho.validate()
        self.k += 1
        if self._horizontal_rule_fires():
            self._terminate(REASON_HORIZONTAL, self._place_query(median(self.rho))
                            if self.integer_lattice else median(self.rho))
            return
        self.test = VerticalTestState(eta=self.config.eta)
        self.theta_k = self._place_query(median(self.rho))

    def _horizontal_rule_fires(self) -> bool:
        if self.k >= self._budget_full:
            return True
        if self.config.horizontal_rule == RULE_CREDIBLE:
            lo, hi = smallest_credible_interval(self.rho, 1.0 - self.config.delta)
            return (hi - lo) <= 2.0 * self.config.epsilon
        return False

    def _record_move(self, steps: int, walk: int, z: int, event: str) -> None:
        self.moves.append(MoveRecord(k=self.k, theta=self.theta_k, steps=steps,
                                     walk_value=walk, outcome=z, event=event))

    def _terminate(self, reason: str, theta_hat: float) -> None:
        self.status = "done"
        self.reason = reason
        self.theta_hat = float(theta_hat)

    # -- persistence ----------------------------------------------------------

    def state_dict(self) -> dict:
        """Serializable snapshot sufficient to resume or hash the run."""
        return {
            "breakpoints": [float(b) for b in self.rho.breakpoints],
            "densities": [float(d) for d in self.rho.densities],
            "k": self.k,
            "theta_k": self.theta_k,
            "test": {"m": self.test.m, "S": self.test.S,
                     "eta": self.test.eta, "outcome": self.test.outcome},
            "total_comparisons": self.total_comparisons,
            "status": self.status,
            "reason": self.reason,
            "theta_hat": self.theta_hat,
            "integer_lattice": self.integer_lattice,
        }

    @classmethod
    def from_state(cls, config: MapbConfig, state: dict) -> "MapbEngine":
        engine = cls.__new__(cls)
        engine.config = config
        engine.rho = PiecewiseDensity(
            np.array(state["breakpoints"], dtype=float),
            np.array(state["densities"], dtype=float),
        )
        engine.integer_lattice = bool(state["integer_lattice"])
        engine.k = int(state["k"])
        engine.theta_k = float(state["theta_k"])
        t = state["test"]
        engine.test = VerticalTestState(eta=t["eta"], m=t["m"], S=t["S"],
                                        outcome=t["outcome"])
        engine.total_comparisons = int(state["total_comparisons"])
        engine.moves = []
        engine.status = state["status"]
        engine.reason = state["reason"]
        engine.theta_hat = state["theta_hat"]
        lo, hi = engine.rho.support
        constants = config.constants
        if constants.theta_star_bound is None:
            constants = dataclasses.replace(
                constants, theta_star_bound=max(abs(lo), abs(hi)))
        engine._constants = constants
        engine._budget_full = tau_horizontal(config.delta, config.epsilon,
                                             constants)
        engine._arm_after = tau_horizontal(config.delta / 2.0,
                                           config.local_radius, constants)
        engine._early_steps = tau_vertical(config.delta / 2.0,
                                           config.epsilon, config)
        return engine

    def trace(self) -> MapbTrace:
        return MapbTrace(moves=list(self.moves),
                         total_comparisons=self.total_comparisons,
                         reason=self.reason)


# ---------------------------------------------------------------------------
# Top-level aligners
# ---------------------------------------------------------------------------

def _supports_batching(responder) -> bool:
    return (hasattr(responder, "plus_probability")
            and hasattr(responder, "stream_state")
            and hasattr(responder, "advance")
            and not getattr(responder, "use_gumbel_sampling", False))


def mapb_align(config: MapbConfig, prior: Optional[PiecewiseDensity],
               responder: Responder,
               integer_lattice: bool = False) -> tuple[float, MapbTrace]:
    """Run probabilistic bisection to completion against a live responder.

    Responders that expose a stationary choice probability and a replayable
    stream are batched through the compiled kernel; anything else is asked
    one query at a time. A pending (None) answer aborts with an error here;
    asynchronous runs should hold a MapbEngine directly.
    """
    engine = MapbEngine(config, prior)
    if _supports_batching(responder):
        while engine.status == "running":
            engine.run_move(responder)
    else:
        while engine.status == "running":
            answer = respond(engine.current_query(), responder)
            if answer is None:
                raise RuntimeError(
                    "responder is pending; drive a MapbEngine for async runs")
            engine.observe(answer)
    assert engine.theta_hat is not None
    return engine.theta_hat, engine.trace()


@dataclass(frozen=True)
class DbResult:
    theta_hat: float
    rounds: int


def db_align(epsilon: float, granularity: float, prior_half_width: float,
             responder: Responder) -> DbResult:
    """Deterministic interval bisection for an error-free responder.

    Halves [-prior_half_width, prior_half_width] until the half-width drops
    to `epsilon`; the round count never exceeds
    ceil(log2(prior_half_width / epsilon)) + 1. Refuses responders that are
    not declared deterministic, because a single wrong answer here is
    unrecoverable.
    """
    if not getattr(responder, "is_deterministic", False):
        raise ValueError("db_align requires a deterministic responder")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lo, hi = -prior_half_width, prior_half_width
    rounds = 0
    while (hi - lo) / 2.0 > epsilon:
        mid = 0.5 * (lo + hi)
        answer = respond(make_query(mid, granularity), responder)
        assert answer is not None
        if answer.choice == "plus":
            lo = mid
        else:
            hi = mid
        rounds += 1
    return DbResult(theta_hat=0.5 * (lo + hi), rounds=rounds)
