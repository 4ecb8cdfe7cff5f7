"""Session service: adaptive comparison queries over HTTP with an
append-only event log per session, plus dot-cloud stimulus generation."""

from .app import create_app
from .sessions import (ConflictError, SessionManager, replay_hash,
                       replay_session, state_hash)
from .stimulus import DotStimulus, generate_stimulus
from .store import EventStore, SessionEvent

__all__ = [
    "ConflictError",
    "DotStimulus",
    "EventStore",
    "SessionEvent",
    "SessionManager",
    "create_app",
    "generate_stimulus",
    "replay_hash",
    "replay_session",
    "state_hash",
]
