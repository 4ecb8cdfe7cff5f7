"""Session lifecycle: one bisection engine per session, event-sourced.

Every state change is an appended event; live state is a pure function of
the log. `replay_session` rebuilds a session by pushing the logged answers
through the same transition code the live path uses, and `state_hash`
canonicalizes the result so replay equality is a one-line check.

Dot-count sessions hold the ground truth (the stimulus count) server-side.
It never appears in query or state payloads; it reaches clients only via
`export_logs` after the session has terminated.
"""

from __future__ import annotations

import hashlib
import io
import json
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from ..bisect import (
    RULE_CREDIBLE,
    RULE_THEORETICAL,
    MapbConfig,
    MapbEngine,
    PiecewiseDensity,
)
from ..core import ComparisonAnswer
from .._kernels import derive_stream
from .stimulus import MAX_COUNT, DotStimulus, generate_stimulus
from .store import EventStore, SessionEvent

KIND_SCALAR = "scalar-alignment"
KIND_DOT = "dot-count"
KIND_ASS = "ass-sample"
KINDS = (KIND_SCALAR, KIND_DOT, KIND_ASS)

STATUS_AWAITING = "awaiting-answer"
STATUS_ADVANCING = "advancing"
STATUS_DONE = "done"
STATUS_ABORTED = "aborted"


class ConflictError(Exception):
    """Answer does not match the outstanding query; state was not changed."""


@dataclass
class LiveSession:
    session_id: str
    kind: str
    engine: MapbEngine
    true_theta: Optional[float]
    stimulus: Optional[DotStimulus]
    context: dict
    status: str = STATUS_AWAITING
    answered: dict[str, tuple[str, dict]] = field(default_factory=dict)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)


def _scalar_config(params: dict) -> tuple[MapbConfig, PiecewiseDensity]:
    lo = float(params.get("prior_lo", -1.0))
    hi = float(params.get("prior_hi", 1.0))
    if not lo < hi:
        raise ValueError("prior_lo must be < prior_hi")
    half = 0.5 * (hi - lo)
    epsilon = float(params.get("epsilon", 0.1))
    config = MapbConfig(
        epsilon=epsilon,
        delta=float(params.get("delta", 0.1)),
        granularity=float(params.get("granularity", epsilon)),
        local_radius=float(params.get("local_radius", min(0.3 * half, max(2 * epsilon, 0.1 * half)))),
        eta=float(params.get("eta", 0.1)),
        update_weight=float(params.get("update_weight", 0.9)),
        prior_half_width=half,
        kappa=float(params.get("kappa", 0.3)),
        lambda_delta=float(params.get("lambda_delta", 1.0)),
        gamma=float(params.get("gamma", 1.0)),
        horizontal_rule=str(params.get("horizontal_rule", RULE_CREDIBLE)),
        vertical_hard_cap=int(params.get("vertical_hard_cap", 1000)),
    )
    return config, PiecewiseDensity.uniform(lo, hi)


def _dot_config(params: dict) -> tuple[MapbConfig, PiecewiseDensity]:
    lo = int(params.get("count_lo", 0))
    hi = int(params.get("count_hi", 128))
    if not 0 <= lo < hi:
        raise ValueError("need 0 <= count_lo < count_hi")
    if hi > MAX_COUNT:
        raise ValueError(f"count_hi exceeds stimulus cap {MAX_COUNT}")
    granularity = int(params.get("granularity", 20))
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    if granularity % 2 != 0:
        raise ValueError("granularity must be even so candidates are integers")
    epsilon = float(params.get("epsilon", 1.0))
    if epsilon < 1.0:
        raise ValueError("dot-count sessions need epsilon >= 1")
    half = 0.5 * (hi - lo)
    config = MapbConfig(
        epsilon=epsilon,
        delta=float(params.get("delta", 0.1)),
        granularity=float(granularity),
        local_radius=float(params.get("local_radius", max(2.0 * epsilon, granularity / 2.0))),
        eta=float(params.get("eta", 0.1)),
        update_weight=float(params.get("update_weight", 0.9)),
        prior_half_width=half,
        kappa=float(params.get("kappa", 0.3)),
        lambda_delta=float(params.get("lambda_delta", 1.0)),
        gamma=float(params.get("gamma", 1.0)),
        horizontal_rule=str(params.get("horizontal_rule", RULE_CREDIBLE)),
        # A human answers at most a few hundred times per sitting; a test
        # stuck at p ~ 1/2 (query right on the truth) must end the session
        # with the posterior median rather than run to the library default.
        vertical_hard_cap=int(params.get("vertical_hard_cap", 300)),
    )
    return config, PiecewiseDensity.uniform(float(lo), float(hi))


def _build_engine(kind: str, params: dict) -> tuple[MapbConfig, MapbEngine]:
    if kind == KIND_DOT:
        config, prior = _dot_config(params)
        engine = MapbEngine(config, prior, integer_lattice=True)
    else:
        config, prior = _scalar_config(params)
        engine = MapbEngine(config, prior, integer_lattice=False)
    return config, engine


def _config_payload(config: MapbConfig) -> dict:
    c = config.constants
    return {
        "epsilon": config.epsilon,
        "delta": config.delta,
        "granularity": config.granularity,
        "local_radius": config.local_radius,
        "eta": config.eta,
        "update_weight": config.update_weight,
        "prior_half_width": config.prior_half_width,
        "kappa": config.kappa,
        "lambda_delta": config.lambda_delta,
        "gamma": config.gamma,
        "horizontal_rule": config.horizontal_rule,
        "vertical_hard_cap": config.vertical_hard_cap,
        "kappa_zero_cap": config.kappa_zero_cap,
        "constants": {
            "r1": c.r1, "r2": c.r2, "alpha": c.alpha, "beta1": c.beta1,
            "beta2": c.beta2, "r_r": c.r_r, "varsigma": c.varsigma,
            "theta_star_bound": c.theta_star_bound,
        },
    }


def _config_from_payload(payload: dict) -> MapbConfig:
    from ..bisect import StoppingConstants

    raw = dict(payload)
    c = raw.pop("constants")
    return MapbConfig(constants=StoppingConstants(**c), **raw)


def state_hash(snapshot: dict) -> str:
    """SHA-256 over a canonical JSON encoding of a state snapshot."""
    encoded = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(encoded.encode()).hexdigest()


def _snapshot(session: LiveSession) -> dict:
    outstanding = None
    if session.status == STATUS_AWAITING:
        outstanding = session.engine.current_query().query_id
    return {
        "kind": session.kind,
        "status": session.status,
        "true_theta": session.true_theta,
        "outstanding": outstanding,
        "engine": session.engine.state_dict(),
    }


class SessionManager:
    """Single-writer session registry over an event store."""

    def __init__(self, store: EventStore):
        self.store = store
        self._live: dict[str, LiveSession] = {}

    # -- creation -------------------------------------------------------------

    def create_session(self, kind: str, params: Optional[dict] = None,
                       session_id: Optional[str] = None) -> dict:
        params = dict(params or {})
        if kind not in KINDS:
            raise ValueError(f"unknown task kind: {kind!r}; expected one of {KINDS}")
        session_id = session_id or uuid.uuid4().hex[:12]
        if self.store.exists(session_id):
            raise ValueError(f"session {session_id} already exists")

        true_theta: Optional[float] = None
        stimulus: Optional[DotStimulus] = None
        stimulus_seed: Optional[int] = None
        if kind == KIND_DOT:
            seed = int(params.get("seed", uuid.uuid4().int & 0x7FFFFFFF))
            lo = int(params.get("count_lo", 0))
            hi = int(params.get("count_hi", 128))
            if "true_count" in params and params["true_count"] is not None:
                count = int(params["true_count"])
            else:
                count = lo + 1 + int(derive_stream(seed, 23) % max(hi - lo - 1, 1))
            if not lo <= count <= hi:
                raise ValueError(f"true_count {count} outside [{lo}, {hi}]")
            stimulus_seed = int(derive_stream(seed, 29) & 0x7FFFFFFFFFFF)
            stimulus = generate_stimulus(count, stimulus_seed)
            true_theta = float(count)
            params = {k: v for k, v in params.items()
                      if k not in ("seed", "true_count")}

        config, engine = _build_engine(kind, params)
        context = dict(params.get("context") or {})
        session = LiveSession(session_id=session_id, kind=kind, engine=engine,
                              true_theta=true_theta, stimulus=stimulus,
                              context=context)
        self._live[session_id] = session

        lo, hi = engine.rho.support
        self.store.append(session_id, "created", {
            "session_id": session_id,
            "kind": kind,
            "config": _config_payload(config),
            "prior_lo": lo,
            "prior_hi": hi,
            "integer_lattice": engine.integer_lattice,
            "true_theta": true_theta,
            "stimulus_seed": stimulus_seed,
            "stimulus_count": stimulus.count if stimulus else None,
            "context": context,
        })
        self._append_query_issued(session)
        return self.describe_query(session_id)

    def _append_query_issued(self, session: LiveSession) -> None:
        q = session.engine.current_query()
        self.store.append(session.session_id, "query-issued", {
            "query_id": q.query_id,
            "theta": q.query_point,
            "granularity": q.granularity,
            "c_minus": q.c_minus,
            "c_plus": q.c_plus,
            "k": session.engine.k,
            "m": session.engine.test.m,
        })

    # -- loading / replay -------------------------------------------------------

    def _get(self, session_id: str) -> LiveSession:
        if session_id not in self._live:
            self._live[session_id] = self._rebuild(session_id)
        return self._live[session_id]

    def _rebuild(self, session_id: str) -> LiveSession:
        """Reconstruct a session from its log (used after process restart)."""
        events = self.store.read_all(session_id)
        if not events or events[0].kind != "created":
            raise KeyError(f"no usable log for session {session_id}")
        created = events[0].payload
        config = _config_from_payload(created["config"])
        prior = PiecewiseDensity.uniform(created["prior_lo"], created["prior_hi"])
        engine = MapbEngine(config, prior,
                            integer_lattice=created["integer_lattice"])
        stimulus = None
        if created["kind"] == KIND_DOT and created["stimulus_seed"] is not None:
            stimulus = generate_stimulus(created["stimulus_count"],
                                         created["stimulus_seed"])
        session = LiveSession(
            session_id=session_id,
            kind=created["kind"],
            engine=engine,
            true_theta=created["true_theta"],
            stimulus=stimulus,
            context=created.get("context") or {},
            created_at=events[0].timestamp,
            updated_at=events[-1].timestamp,
        )
        for event in events:
            if event.kind != "answer-received":
                continue
            answer = ComparisonAnswer(query_id=event.payload["query_id"],
                                      choice=event.payload["choice"],
                                      responder_tag=event.payload.get("responder_tag", ""))
            self._advance(session, answer, record=False)
            session.answered[answer.query_id] = (
                answer.choice, self._response_after_answer(session))
        return session

    # -- answering ---------------------------------------------------------------

    def submit_answer(self, session_id: str, query_id: str, choice: str,
                      responder_tag: str = "",
                      position: Optional[dict] = None) -> dict:
        """Apply one answer; duplicate deliveries of the same answer are no-ops.

        A repeat of an already-consumed (query_id, choice) returns the
        stored response without appending anything. A known query_id with a
        different choice, or an unknown/stale id, is a conflict and leaves
        state untouched.
        """
        session = self._get(session_id)
        if choice not in ("minus", "plus"):
            raise ValueError(f"choice must be 'minus' or 'plus', got {choice!r}")
        if query_id in session.answered:
            stored_choice, stored_response = session.answered[query_id]
            if stored_choice == choice:
                return stored_response
            raise ConflictError(
                f"query {query_id} was already answered with {stored_choice!r}")
        if session.status != STATUS_AWAITING:
            raise ConflictError(f"session is {session.status}; no query outstanding")
        outstanding = session.engine.current_query().query_id
        if query_id != outstanding:
            raise ConflictError(
                f"query {query_id!r} is not outstanding (expected {outstanding!r})")

        query = session.engine.current_query()
        answer = ComparisonAnswer(query_id=query_id, choice=choice,
                                  responder_tag=responder_tag)
        session.status = STATUS_ADVANCING
        self.store.append(session_id, "answer-received", {
            "query_id": query_id,
            "choice": choice,
            "responder_tag": responder_tag,
            "position": position,
            "theta": query.query_point,
            "c_minus": query.c_minus,
            "c_plus": query.c_plus,
        })
        self._advance(session, answer, record=True)
        response = self._response_after_answer(session)
        session.answered[query_id] = (choice, response)
        session.updated_at = time.time()
        return response

    def _advance(self, session: LiveSession, answer: ComparisonAnswer,
                 record: bool) -> None:
        """Shared transition path for live answers and log replay."""
        engine = session.engine
        k_before = engine.k
        engine.observe(answer)
        decided = engine.k > k_before
        if decided and record:
            move = engine.moves[-1]
            self.store.append(session.session_id, "vertical-stopped", {
                "k": move.k, "m": move.steps, "S": move.walk_value,
                "z": move.outcome,
            })
        if engine.status == "done":
            session.status = STATUS_DONE
            if record:
                self.store.append(session.session_id, "terminated", {
                    "reason": engine.reason,
                    "theta_hat": engine.theta_hat,
                    "total_comparisons": engine.total_comparisons,
                    "moves": engine.k,
                })
            return
        session.status = STATUS_AWAITING
        if decided and record:
            self.store.append(session.session_id, "horizontal-moved", {
                "k": engine.k, "theta": engine.theta_k,
            })
            self._append_query_issued(session)

    def _response_after_answer(self, session: LiveSession) -> dict:
        if session.status == STATUS_DONE:
            return {"status": STATUS_DONE, "result": self._result_payload(session),
                    "query": None}
        return {"status": STATUS_AWAITING, "result": None,
                "query": self._query_payload(session)}

    # -- read side ------------------------------------------------------------

    def _query_payload(self, session: LiveSession) -> dict:
        q = session.engine.current_query()
        payload = {
            "session_id": session.session_id,
            "query_id": q.query_id,
            "c_minus": q.c_minus,
            "c_plus": q.c_plus,
            "granularity": q.granularity,
            "progress": {"k": session.engine.k, "m": session.engine.test.m,
                         "total_comparisons": session.engine.total_comparisons},
            "context": session.context,
        }
        if session.stimulus is not None:
            payload["stimulus"] = session.stimulus.as_payload()
        return payload

    def _result_payload(self, session: LiveSession) -> dict:
        engine = session.engine
        return {
            "theta_hat": engine.theta_hat,
            "reason": engine.reason,
            "moves": engine.k,
            "total_comparisons": engine.total_comparisons,
        }

    def describe_query(self, session_id: str) -> dict:
        session = self._get(session_id)
        if session.status == STATUS_DONE:
            return {"status": STATUS_DONE, "result": self._result_payload(session),
                    "query": None}
        return {"status": session.status, "result": None,
                "query": self._query_payload(session)}

    def get_state(self, session_id: str) -> dict:
        session = self._get(session_id)
        engine = session.engine
        state = {
            "session_id": session_id,
            "kind": session.kind,
            "status": session.status,
            "k": engine.k,
            "m": engine.test.m,
            "total_comparisons": engine.total_comparisons,
            "epsilon": engine.config.epsilon,
            "breakpoints": [float(b) for b in engine.rho.breakpoints],
            "densities": [float(d) for d in engine.rho.densities],
            "result": self._result_payload(session) if session.status == STATUS_DONE else None,
        }
        if session.status == STATUS_AWAITING:
            state["outstanding_query_id"] = engine.current_query().query_id
        return state

    def snapshot_hash(self, session_id: str) -> str:
        return state_hash(_snapshot(self._get(session_id)))

    def list_sessions(self) -> list[dict]:
        out = []
        for session_id in self.store.list_sessions():
            session = self._get(session_id)
            out.append({
                "session_id": session_id,
                "kind": session.kind,
                "status": session.status,
                "answers": len(session.answered),
                "created_at": session.created_at,
                "updated_at": session.updated_at,
            })
        return out

    # -- export -----------------------------------------------------------------

    def export_logs(self, session_id: str) -> dict:
        """Event JSONL for any session; comparison CSV for dot-count tasks.

        The CSV gains rows only once the session is done (the truth stays
        server-side until then); before that it is header-only.
        """
        session = self._get(session_id)
        events = self.store.read_all(session_id)
        jsonl = "\n".join(json.dumps(
            {"seq": e.seq, "kind": e.kind, "payload": e.payload, "ts": e.timestamp},
            sort_keys=True) for e in events)
        if events:
            jsonl += "\n"
        bundle = {"session_id": session_id, "events_jsonl": jsonl,
                  "comparisons_csv": None}
        if session.kind == KIND_DOT:
            bundle["comparisons_csv"] = self._comparison_csv(session, events)
        return bundle

    def _comparison_csv(self, session: LiveSession,
                        events: list[SessionEvent]) -> str:
        buf = io.StringIO()
        buf.write("theta,theta_star,correct\n")
        if session.status != STATUS_DONE or session.true_theta is None:
            return buf.getvalue()
        star = session.true_theta
        for event in events:
            if event.kind != "answer-received":
                continue
            theta = float(event.payload["theta"])
            choice = event.payload["choice"]
            # "correct" means siding with the truth: the plus candidate when
            # the truth sits above the query point, minus when below. At an
            # exact tie the plus side is scored correct so the expected
            # correct-rate stays 1/2, matching the choice model there.
            if star > theta:
                correct = int(choice == "plus")
            elif star < theta:
                correct = int(choice == "minus")
            else:
                correct = int(choice == "plus")
            buf.write(f"{theta!r},{star!r},{correct}\n")
        return buf.getvalue()


def replay_session(store: EventStore, session_id: str) -> dict:
    """Rebuild state purely from the log and return its snapshot."""
    manager = SessionManager(store)
    session = manager._rebuild(session_id)
    return _snapshot(session)


def replay_hash(store: EventStore, session_id: str) -> str:
    return state_hash(replay_session(store, session_id))
