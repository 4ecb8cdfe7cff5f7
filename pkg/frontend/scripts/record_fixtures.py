"""Record service fixtures for the frontend contract tests.

Drives the real HTTP app in-process and freezes selected responses as JSON
under tests/fixtures/. Re-running regenerates identical files: every session
is seeded and the driving policies are deterministic.
"""
import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from prefalign.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def save(name: str, payload) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    path = FIXTURES / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(FIXTURES.parent.parent)}")


def answer_body(query: dict, choice: str) -> dict:
    return {
        "query_id": query["query_id"],
        "choice": choice,
        "position": {"left": "plus", "right": "minus"},
    }


def main() -> None:
    with tempfile.TemporaryDirectory() as root:
        client = TestClient(create_app(root))

        # Dot-count query with a 64-point stimulus and candidates 35/55.
        created = client.post("/sessions", json={
            "kind": "dot-count",
            "params": {"count_lo": 0, "count_hi": 90, "true_count": 64,
                       "seed": 31},
            "session_id": "fx-dots",
        })
        created.raise_for_status()
        save("query_dots", created.json())

        # Same task shape with an empty stimulus: buttons stay active.
        created = client.post("/sessions", json={
            "kind": "dot-count",
            "params": {"true_count": 0, "seed": 7},
            "session_id": "fx-dots-empty",
        })
        created.raise_for_status()
        save("query_dots_empty", created.json())

        # Sample-value session: prediction pair rendered as text, uniform
        # prior on [0, 1], update weight 0.6 so the first completed vertical
        # test steps the density to exactly 0.8/1.2 around the median.
        created = client.post("/sessions", json={
            "kind": "ass-sample",
            "params": {
                "prior_lo": 0.0, "prior_hi": 1.0, "update_weight": 0.6,
                "epsilon": 0.05, "granularity": 0.1,
                "context": {"description": "held-out sample #12",
                            "unit": "score"},
            },
            "session_id": "fx-pair",
        })
        created.raise_for_status()
        save("query_pair", created.json())
        save("state_uniform",
             client.get("/sessions/fx-pair/state").json())

        response = created.json()
        first = True
        while True:
            state = client.get("/sessions/fx-pair/state").json()
            if state["k"] >= 1:
                break
            submitted = client.post(
                "/sessions/fx-pair/answers",
                json=answer_body(response["query"], "plus"))
            submitted.raise_for_status()
            response = submitted.json()
            if first:
                save("answer_accepted", response)
                first = False
        save("state_two_level",
             client.get("/sessions/fx-pair/state").json())

        # A session driven to termination: deterministic choices toward
        # theta* = 0.37 at epsilon = granularity = 0.1.
        created = client.post("/sessions", json={
            "kind": "scalar-alignment",
            "params": {"prior_lo": 0.0, "prior_hi": 1.0, "epsilon": 0.1,
                       "granularity": 0.1},
            "session_id": "fx-done",
        })
        created.raise_for_status()
        response = created.json()
        while response["status"] != "done":
            query = response["query"]
            theta = 0.5 * (query["c_minus"] + query["c_plus"])
            choice = "plus" if 0.37 >= theta else "minus"
            submitted = client.post("/sessions/fx-done/answers",
                                    json=answer_body(query, choice))
            submitted.raise_for_status()
            response = submitted.json()
        save("response_done", response)
        save("state_done", client.get("/sessions/fx-done/state").json())


if __name__ == "__main__":
    main()
