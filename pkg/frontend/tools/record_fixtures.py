"""Record real service exchanges into JSON fixtures for the UI tests.

Runs the experiment service in-process, drives it exactly the way the
browser client does, and captures every request/response pair.  Rerun after
any service change:

    python3 tools/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from hanoilab.service import ExperimentService, create_app
from hanoilab.toh import build_state_graph, path_between

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


class Recorder:
    def __init__(self, client):
        self.client = client
        self.exchanges = []

    def request(self, method, path, body=None):
        if method == "GET":
            response = self.client.get(path)
        else:
            response = self.client.post(path, json=body) if body is not None else self.client.post(path)
        exchange = {
            "method": method,
            "path": path,
            "status": response.status_code,
            "response": response.json(),
        }
        if body is not None:
            exchange["body"] = body
        self.exchanges.append(exchange)
        return exchange["response"]


def fresh_recorder():
    service = ExperimentService(data_dir=tempfile.mkdtemp(), seed=73)
    return Recorder(TestClient(create_app(service)))


def optimal_moves(view, graphs={}):
    g = graphs.setdefault(view["n"], build_state_graph(view["n"]))
    path = path_between(g, view["board"], view["target"])
    moves = []
    for a, b in zip(path, path[1:]):
        e = g.edge_index(a, b)
        moves.append((int(g.move_from[e]), int(g.move_to[e])))
    return moves


def record_condition(condition, seed):
    rec = fresh_recorder()
    view = rec.request("POST", "/sessions", {"condition": condition, "seed": seed})
    sid = view["session_id"]
    moves = optimal_moves(view["trial"])
    first = moves[0]
    rec.request("POST", f"/sessions/{sid}/moves", {"from": first[0], "to": first[1]})
    if condition == "optional":
        rec.request("POST", f"/sessions/{sid}/feedback")
    if condition == "numeric":
        # an illegal attempt: the target peg of the smallest disk is empty now
        rec.request("POST", f"/sessions/{sid}/moves", {"from": first[0], "to": first[1]})
    return rec.exchanges


def record_playthrough(seed=101):
    rec = fresh_recorder()
    view = rec.request("POST", "/sessions", {"condition": "numeric", "seed": seed})
    sid = view["session_id"]
    for trial in range(15):
        trial_view = view["trial"]
        if trial == 0:
            # one rejected move up front: counters must not change
            rec.request("POST", f"/sessions/{sid}/moves", {"from": 1, "to": 2})
        for f, t in optimal_moves(trial_view):
            outcome = rec.request("POST", f"/sessions/{sid}/moves", {"from": f, "to": t})
        assert outcome["trial_complete"] and outcome["solved"], outcome
        if trial < 14:
            view = rec.request("POST", f"/sessions/{sid}/advance")
    final = rec.request("GET", f"/sessions/{sid}")
    assert final["status"] == "finished"
    return rec.exchanges


def main():
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    conditions = {
        name: record_condition(name, seed)
        for seed, name in enumerate(
            ["no_feedback", "numeric", "optional", "subgoal", "subgoal_numeric"], start=301
        )
    }
    (FIXTURE_DIR / "conditions.json").write_text(
        json.dumps(conditions, indent=2, sort_keys=True) + "\n"
    )
    playthrough = record_playthrough()
    (FIXTURE_DIR / "playthrough.json").write_text(
        json.dumps({"exchanges": playthrough}, indent=2) + "\n"
    )
    print(f"wrote fixtures to {FIXTURE_DIR}")
    print(f"playthrough exchanges: {len(playthrough)}")


if __name__ == "__main__":
    main()
