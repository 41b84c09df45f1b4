"""Trial records and the shared JSONL trajectory schema.

One record per trial, one JSON object per line.  The same schema is written
by the live service and the synthetic cohort generator and read back by the
IRL and model-selection tooling.  Per-move feedback keys (``label``,
``requested``) appear only when feedback was shown or could have been
requested, so transfer-phase records carry no feedback fields at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import HanoiLabError
from .feedback import (
    Condition,
    ScoreBreakdown,
    evaluate_move,
    percentage_score,
    score_trial,
)
from .mdp import ValueTable, target_reward_mdp, value_iteration
from .toh import Move, StateGraph, T1, build_state_graph, triangle_of

PHASE_TRAINING = "training"
PHASE_TRANSFER = "transfer"


@dataclass(frozen=True)
class MoveStep:
    pre: str
    from_peg: int
    to_peg: int
    post: str
    t: int
    label: str | None = None
    requested: bool | None = None

    @property
    def move(self) -> Move:
        return Move(self.from_peg, self.to_peg)

    def to_dict(self) -> dict:
        d = {
            "pre": self.pre,
            "from": self.from_peg,
            "to": self.to_peg,
            "post": self.post,
            "t": self.t,
        }
        if self.label is not None:
            d["label"] = self.label
        if self.requested is not None:
            d["requested"] = self.requested
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MoveStep":
        return cls(
            pre=d["pre"],
            from_peg=d["from"],
            to_peg=d["to"],
            post=d["post"],
            t=d["t"],
            label=d.get("label"),
            requested=d.get("requested"),
        )


@dataclass(frozen=True)
class TrajectoryRecord:
    session_id: str
    condition: str
    trial_index: int
    phase: str
    n: int
    start: str
    target: str
    subgoal: str | None
    moves: tuple[MoveStep, ...]
    m_min: int
    m_allowed: int
    m_used: int
    solved: bool
    score: ScoreBreakdown
    pct: float

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "condition": self.condition,
            "trial_index": self.trial_index,
            "phase": self.phase,
            "n": self.n,
            "start": self.start,
            "target": self.target,
            "subgoal": self.subgoal,
            "moves": [m.to_dict() for m in self.moves],
            "m_min": self.m_min,
            "m_allowed": self.m_allowed,
            "m_used": self.m_used,
            "solved": self.solved,
            "score": self.score.as_dict(),
            "pct": self.pct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryRecord":
        return cls(
            session_id=d["session_id"],
            condition=d["condition"],
            trial_index=d["trial_index"],
            phase=d["phase"],
            n=d["n"],
            start=d["start"],
            target=d["target"],
            subgoal=d.get("subgoal"),
            moves=tuple(MoveStep.from_dict(m) for m in d["moves"]),
            m_min=d["m_min"],
            m_allowed=d["m_allowed"],
            m_used=d["m_used"],
            solved=d["solved"],
            score=ScoreBreakdown.from_dict(d["score"]),
            pct=d["pct"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def states(self) -> list[str]:
        """Visited states in order, start first."""
        return [self.start] + [m.post for m in self.moves]

    def validate_chain(self) -> None:
        """Check that moves chain and the counters match the move list."""
        cur = self.start
        for i, step in enumerate(self.moves):
            if step.pre != cur:
                raise HanoiLabError(f"broken chain at step {i}: {step.pre} != {cur}")
            cur = step.post
        if self.m_used != len(self.moves):
            raise HanoiLabError("m_used does not match the move list")
        reached = bool(self.moves) and self.moves[-1].post == self.target
        if self.solved != (reached and self.m_used <= self.m_allowed):
            raise HanoiLabError("solved flag inconsistent with the move list")


def write_jsonl(records: Iterable[TrajectoryRecord], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
            count += 1
    return count


def append_jsonl(record: TrajectoryRecord, path: str | Path) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(record.to_json())
        fh.write("\n")


def iter_jsonl(path: str | Path) -> Iterator[TrajectoryRecord]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield TrajectoryRecord.from_dict(json.loads(line))


def read_jsonl(path: str | Path) -> list[TrajectoryRecord]:
    return list(iter_jsonl(path))


# -- dataset filters ------------------------------------------------------


def filter_trials(records: Iterable[TrajectoryRecord], lo: int, hi: int) -> list[TrajectoryRecord]:
    """Keep trials with lo <= trial_index <= hi (e.g. 6..10 for late training)."""
    return [r for r in records if lo <= r.trial_index <= hi]


def filter_successful(records: Iterable[TrajectoryRecord]) -> list[TrajectoryRecord]:
    return [r for r in records if r.solved]


def filter_phase(records: Iterable[TrajectoryRecord], phase: str) -> list[TrajectoryRecord]:
    return [r for r in records if r.phase == phase]


def filter_condition(records: Iterable[TrajectoryRecord], condition: str) -> list[TrajectoryRecord]:
    return [r for r in records if r.condition == condition]


def split_by_triangle(records: Iterable[TrajectoryRecord]) -> dict[str, list[TrajectoryRecord]]:
    """Partition records by the triangle holding their target (T2 vs T3)."""
    out: dict[str, list[TrajectoryRecord]] = {}
    for r in records:
        tri = triangle_of(r.target)
        if tri == T1:
            raise HanoiLabError(f"record {r.session_id}/{r.trial_index} targets the start triangle")
        out.setdefault(tri, []).append(r)
    return out


# -- score recomputation ---------------------------------------------------


class ValueTableCache:
    """Hard value tables keyed by (n, target); graphs built once per n."""

    def __init__(self, gamma: float = 0.95):
        self.gamma = gamma
        self._graphs: dict[int, StateGraph] = {}
        self._tables: dict[tuple[int, str], ValueTable] = {}

    def graph(self, n: int) -> StateGraph:
        if n not in self._graphs:
            self._graphs[n] = build_state_graph(n)
        return self._graphs[n]

    def table(self, n: int, target: str) -> ValueTable:
        key = (n, target)
        if key not in self._tables:
            self._tables[key] = value_iteration(
                target_reward_mdp(self.graph(n), target, self.gamma)
            )
        return self._tables[key]


def rescore(record: TrajectoryRecord, cache: ValueTableCache | None = None) -> tuple[ScoreBreakdown, float]:
    """Recompute the score breakdown and percentage from the raw move list."""
    cache = cache or ValueTableCache()
    condition = Condition(record.condition)
    values = cache.table(record.n, record.target)

    m_used = len(record.moves)
    reached = bool(record.moves) and record.moves[-1].post == record.target
    solved = reached and m_used <= record.m_allowed

    m_good = m_bad = 0
    if condition.shows_feedback and record.phase == PHASE_TRAINING:
        for step in record.moves:
            ev = evaluate_move(values, step.pre, step.post)
            if ev.is_good:
                m_good += 1
            else:
                m_bad += 1
    f_optional = sum(1 for step in record.moves if step.requested)
    subgoal_reached = record.subgoal is not None and record.subgoal in record.states()

    effective = condition if record.phase == PHASE_TRAINING else Condition.NO_FEEDBACK
    breakdown = score_trial(
        effective,
        m_allowed=record.m_allowed,
        m_used=m_used,
        solved=solved,
        m_good=m_good,
        m_bad=m_bad,
        f_optional=f_optional,
        subgoal_reached=subgoal_reached,
    )
    pct = percentage_score(record.m_allowed, m_used, record.m_min, solved)
    return breakdown, pct
