"""Dot-cloud stimuli for count-estimation sessions.

Points are drawn uniformly on the unit square with a minimum pairwise
separation so overlapping dots cannot hide the true count from the
evaluator. The client renders the raw coordinates; the service never
rasterizes anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_SEPARATION = 0.008
MAX_COUNT = 5000
_MAX_ATTEMPTS_PER_POINT = 20_000


@dataclass(frozen=True)
class DotStimulus:
    """A renderable dot cloud; `count` is the ground truth for the session."""

    points: tuple[tuple[float, float], ...]
    count: int
    seed: int

    def __post_init__(self) -> None:
        if len(self.points) != self.count:
            raise ValueError("point list length must equal count")

    def as_payload(self) -> dict:
        """Client-facing payload: coordinates only, never the count."""
        return {"points": [[x, y] for x, y in self.points]}


def generate_stimulus(count: int, seed: int) -> DotStimulus:
    """Draw `count` separated points, deterministically for a given seed.

    Candidate points violating the separation against already-accepted
    points are redrawn. Counts above MAX_COUNT are rejected: past that the
    rejection loop approaches the packing limit for this separation.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count > MAX_COUNT:
        raise ValueError(f"count {count} exceeds the supported cap {MAX_COUNT}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    accepted = np.empty((count, 2))
    n = 0
    min_sq = MIN_SEPARATION * MIN_SEPARATION
    while n < count:
        for _ in range(_MAX_ATTEMPTS_PER_POINT):
            candidate = rng.random(2)
            diff = accepted[:n] - candidate
            if n == 0 or float(np.min(np.einsum("ij,ij->i", diff, diff))) >= min_sq:
                accepted[n] = candidate
                n += 1
                break
        else:
            raise RuntimeError(
                f"could not place point {n} of {count} at separation {MIN_SEPARATION}")
    points = tuple((float(x), float(y)) for x, y in accepted)
    return DotStimulus(points=points, count=count, seed=seed)
