"""Domain types, distance/utility functions, and the pairwise-choice model.

A query offers two candidates placed symmetrically around a query point;
a responder (simulated or human-backed) picks one. Simulated responders
follow a random-utility model: each candidate's utility is perturbed by
Gumbel noise with scale ``gamma``, which makes the probability of choosing
the upper candidate a logistic function of the utility gap.
"""

from __future__ import annotations

import math
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Protocol

import numpy as np

from ._kernels import derive_stream, uniform_at

Choice = Literal["minus", "plus"]

EUCLIDEAN = "euclidean-1d"
BOUNDED_CDF = "bounded-cdf"
PARAMETRIC_KAPPA = "parametric-kappa"

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class DistanceSpec:
    """How far apart two parameter values are, and how discriminable they are.

    kind selects the behavior:

    - ``euclidean-1d``: d(a, b) = |a - b|.
    - ``bounded-cdf``: d(a, b) = |integral of `density` from a to b|, which
      lands in [0, 1] when `density` integrates to 1 over `support`.
    - ``parametric-kappa``: the metric is Euclidean, but a simulated
      responder's utility gap for a query at theta follows the power law
      lambda_delta * |theta - theta*|**kappa. The exponent shapes answer
      accuracy near the truth; it does not change reported distances.
    """

    kind: str
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support: Optional[tuple[float, float]] = None
    lambda_delta: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (EUCLIDEAN, BOUNDED_CDF, PARAMETRIC_KAPPA):
            raise ValueError(f"unknown distance kind: {self.kind!r}")
        if self.kind == BOUNDED_CDF and self.density is None:
            raise ValueError("bounded-cdf distance needs a density callable")
        if self.kind == PARAMETRIC_KAPPA:
            if self.lambda_delta is None or self.lambda_delta <= 0:
                raise ValueError("parametric-kappa needs lambda_delta > 0")
            if self.kappa is None or not 0.0 <= self.kappa <= 1.0:
                raise ValueError("parametric-kappa needs kappa in [0, 1]")


@dataclass(frozen=True)
class ComparisonQuery:
    """One pairwise question: which of two candidates is closer to the truth?

    Candidates sit at query_point -/+ granularity/2, so the query point is
    always their midpoint.
    """

    query_point: float
    granularity: float
    c_minus: float
    c_plus: float
    stimulus: Optional[dict] = None
    query_id: str = ""

    def __post_init__(self) -> None:
        if not self.granularity > 0:
            raise ValueError("granularity must be positive")
        if not self.c_minus < self.c_plus:
            raise ValueError("c_minus must be strictly below c_plus")


def make_query(theta: float, granularity: float,
               stimulus: Optional[dict] = None,
               query_id: Optional[str] = None) -> ComparisonQuery:
    """Build the symmetric two-candidate query around `theta`."""
    half = granularity / 2.0
    return ComparisonQuery(
        query_point=float(theta),
        granularity=float(granularity),
        c_minus=float(theta) - half,
        c_plus=float(theta) + half,
        stimulus=stimulus,
        query_id=query_id if query_id is not None else uuid.uuid4().hex,
    )


@dataclass(frozen=True)
class ComparisonAnswer:
    """The recorded choice for one query.

    `bias` is reserved for a per-responder shift term; nothing sets it yet.
    """

    query_id: str
    choice: Choice
    responder_tag: str = ""
    timestamp: float = field(default_factory=time.time)
    bias: Optional[float] = None


@dataclass(frozen=True)
class OracleParams:
    """Hidden truth plus the responder's noise model (simulation only)."""

    theta_star: float
    gamma: float
    distance: DistanceSpec

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def distance(a: float, b: float, spec: DistanceSpec) -> float:
    """Distance between two parameter values under `spec`."""
    if spec.kind == BOUNDED_CDF:
        lo, hi = (a, b) if a <= b else (b, a)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        vals = spec.density(mid + half * _GL_NODES)
        return abs(half * float(np.dot(_GL_WEIGHTS, vals)))
    return abs(a - b)


def utility(theta: float, params: OracleParams) -> float:
    """Negative distance to the truth; 0 exactly at the truth."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    return -distance(theta, params.theta_star, params.distance)


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def utility_gap_plus(query: ComparisonQuery, params: OracleParams) -> float:
    """u(c_plus) - u(c_minus) as the simulated responder experiences it."""
    spec = params.distance
    if spec.kind == PARAMETRIC_KAPPA:
        d = abs(query.query_point - params.theta_star)
        if d == 0.0:
            return 0.0
        gap = spec.lambda_delta * d**spec.kappa
        return gap if params.theta_star > query.query_point else -gap
    u_plus = utility(query.c_plus, params)
    u_minus = utility(query.c_minus, params)
    if not (math.isfinite(u_plus) and math.isfinite(u_minus)):
        raise ValueError("non-finite candidate utilities")
    return u_plus - u_minus


def choice_probability_plus(query: ComparisonQuery, params: OracleParams) -> float:
    """Probability that the responder picks the upper candidate.

    Equals 1/(1 + exp(-(u(c_plus) - u(c_minus)) / gamma)); the candidate
    with the larger utility always has probability above one half.
    """
    if not params.gamma > 0:
        raise ValueError("gamma must be positive")
    return _sigmoid(utility_gap_plus(query, params) / params.gamma)


def gumbel_choice_frequency(query: ComparisonQuery, params: OracleParams,
                            n_draws: int, rng: np.random.Generator) -> float:
    """Empirical P(plus) from explicit Gumbel perturbations.

    Draws `n_draws` pairs of Gumbel(gamma) noises and compares the perturbed
    utilities directly. Exists to cross-check the logistic closed form; the
    production path never samples Gumbels.
    """
    spec = params.distance
    if spec.kind == PARAMETRIC_KAPPA:
        gap = utility_gap_plus(query, params)
        u_minus, u_plus = 0.0, gap
    else:
        u_minus = utility(query.c_minus, params)
        u_plus = utility(query.c_plus, params)
    noise = rng.gumbel(0.0, params.gamma, size=(2, n_draws))
    wins = (u_plus + noise[1]) > (u_minus + noise[0])
    return float(np.mean(wins))


class Responder(Protocol):
    """Anything that can answer comparison queries.

    `answer` returns None when the reply is not available yet (a human has
    not clicked); engines must treat that as a suspension point.
    """

    responder_tag: str

    def answer(self, query: ComparisonQuery) -> Optional[ComparisonAnswer]: ...


class DeterministicResponder:
    """Always picks the candidate nearer the truth (the zero-noise limit).

    A query placed exactly at the truth is answered "plus" by convention.
    """

    is_deterministic = True
    responder_tag = "deterministic"

    def __init__(self, theta_star: float):
        self.theta_star = float(theta_star)

    def plus_probability(self, theta: float, granularity: float) -> float:
        return 1.0 if self.theta_star >= theta else 0.0

    def answer(self, query: ComparisonQuery) -> ComparisonAnswer:
        choice: Choice = "plus" if self.theta_star >= query.query_point else "minus"
        return ComparisonAnswer(query_id=query.query_id, choice=choice,
                                responder_tag=self.responder_tag)


class SimulatedResponder:
    """Random-utility responder driven by a replayable counter-based stream.

    One uniform variate is consumed per answer (two when
    `use_gumbel_sampling` is set, which exists only for equivalence tests).
    The (seed, counter) pair fully determines every future answer, so an
    engine may batch-consume the stream through a kernel and then advance
    the counter by the number of steps used.
    """

    is_deterministic = False

    def __init__(self, params: OracleParams, seed: int,
                 use_gumbel_sampling: bool = False,
                 responder_tag: str = "simulated-rum"):
        self.params = params
        self.stream_seed = derive_stream(seed) if seed >= 0 else int(seed)
        self.counter = 0
        self.use_gumbel_sampling = use_gumbel_sampling
        self.responder_tag = responder_tag

    def plus_probability(self, theta: float, granularity: float) -> float:
        """P(plus) for a query at `theta`; constant while `theta` is fixed."""
        return choice_probability_plus(make_query(theta, granularity, query_id="probe"),
                                       self.params)

    def stream_state(self) -> tuple[int, int]:
        return self.stream_seed, self.counter

    def advance(self, n_steps: int) -> None:
        self.counter += int(n_steps)

    def answer(self, query: ComparisonQuery) -> ComparisonAnswer:
        if self.use_gumbel_sampling:
            u1 = uniform_at(self.stream_seed, self.counter)
            u2 = uniform_at(self.stream_seed, self.counter + 1)
            self.counter += 2
            g = self.params.gamma
            noise_minus = -g * math.log(-math.log(max(u1, 1e-300)))
            noise_plus = -g * math.log(-math.log(max(u2, 1e-300)))
            gap = utility_gap_plus(query, self.params)
            plus_wins = gap + noise_plus > noise_minus
        else:
            p = choice_probability_plus(query, self.params)
            u = uniform_at(self.stream_seed, self.counter)
            self.counter += 1
            plus_wins = u < p
        choice: Choice = "plus" if plus_wins else "minus"
        return ComparisonAnswer(query_id=query.query_id, choice=choice,
                                responder_tag=self.responder_tag)


def respond(query: ComparisonQuery, responder: Responder) -> Optional[ComparisonAnswer]:
    """Ask `responder` for an answer; None means "pending, try again later"."""
    return responder.answer(query)
