import json

import pytest

from hanoilab.agents import AgentSpec, CohortProtocol, simulate_cohort
from hanoilab.feedback import Condition
from hanoilab.trajectories import (
    MoveStep,
    TrajectoryRecord,
    ValueTableCache,
    filter_successful,
    filter_trials,
    read_jsonl,
    rescore,
    split_by_triangle,
    write_jsonl,
)


@pytest.fixture(scope="module")
def records():
    specs = [
        AgentSpec(model="M2", k=1.0, rng_seed=40 + i, target_weight=3.0) for i in range(4)
    ]
    return simulate_cohort(specs, CohortProtocol(condition=Condition.SUBGOAL_NUMERIC))


def test_round_trip_is_lossless(tmp_path, records):
    path = tmp_path / "records.jsonl"
    write_jsonl(records, path)
    back = read_jsonl(path)
    assert back == records


def test_schema_field_names(records):
    d = records[0].to_dict()
    assert list(d) == [
        "session_id", "condition", "trial_index", "phase", "n", "start", "target",
        "subgoal", "moves", "m_min", "m_allowed", "m_used", "solved", "score", "pct",
    ]
    assert list(d["score"]) == [
        "base", "feedback_bonus", "optional_penalty", "subgoal_bonus", "total",
    ]
    move = d["moves"][0]
    assert set(move) >= {"pre", "from", "to", "post", "t"}


def test_transfer_moves_omit_feedback_keys(records):
    for rec in records:
        raw = json.loads(rec.to_json())
        if rec.phase == "transfer":
            for move in raw["moves"]:
                assert "label" not in move and "requested" not in move


def test_filters(records):
    late = filter_trials(records, 6, 10)
    assert {r.trial_index for r in late} == set(range(6, 11))
    ok = filter_successful(records)
    assert all(r.solved for r in ok)
    by_tri = split_by_triangle([r for r in records if r.phase == "training"])
    assert set(by_tri) <= {"T2", "T3"}
    assert sum(len(v) for v in by_tri.values()) == sum(
        1 for r in records if r.phase == "training"
    )


def test_rescore_matches_stored_scores(records):
    cache = ValueTableCache()
    for rec in records:
        breakdown, pct = rescore(rec, cache)
        assert breakdown == rec.score
        assert pct == rec.pct


def test_validate_chain_catches_breaks(records):
    rec = records[0]
    bad = TrajectoryRecord(
        **{
            **{f: getattr(rec, f) for f in rec.__dataclass_fields__},
            "moves": (
                MoveStep(pre="2222", from_peg=0, to_peg=1, post="1222", t=0),
            )
            + rec.moves[1:],
        }
    )
    with pytest.raises(Exception):
        bad.validate_chain()
