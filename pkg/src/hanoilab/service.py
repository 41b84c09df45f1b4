"""Session lifecycle for live participants.

A session walks one participant through ten 4-disk training trials under its
condition and five 5-disk transfer trials with feedback suppressed.  The
service adjudicates every move, emits feedback per the condition, scores
trials, and appends one JSONL record per finished trial.  Sessions expire
lazily once their 90-minute budget is spent.

All state lives behind :class:`ExperimentService`; the FastAPI app in
:func:`create_app` is a thin JSON layer over it.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from pydantic import BaseModel as _BaseModel, Field as _Field

from .errors import (
    HanoiLabError,
    IllegalMove,
    NoMoveYet,
    SessionExpired,
    TrialNotActive,
    UnknownSession,
    WrongCondition,
)
from .feedback import (
    Condition,
    allowed_moves,
    evaluate_move,
    max_possible_score,
    parse_condition,
    percentage_score,
    score_trial,
    subgoal_for,
)
from .mdp import ValueTable
from .toh import Move, apply_move, start_state
from .trajectories import (
    MoveStep,
    PHASE_TRAINING,
    PHASE_TRANSFER,
    TrajectoryRecord,
    ValueTableCache,
    append_jsonl,
    read_jsonl,
)
from . import stats as stats_mod

SESSION_BUDGET_SECONDS = 90 * 60
TRAINING_TRIALS = 10
TRANSFER_TRIALS = 5
TOTAL_TRIALS = TRAINING_TRIALS + TRANSFER_TRIALS
TRAINING_DISKS = 4
TRANSFER_DISKS = 5

STATUS_ACTIVE = "active"
STATUS_FINISHED = "finished"
STATUS_EXPIRED = "expired"


@dataclass(frozen=True)
class TrialPlan:
    n: int
    start: str
    target: str
    subgoal: str | None
    m_min: int
    m_allowed: int
    max_score: int

    def view(self) -> dict:
        return {
            "n": self.n,
            "start": self.start,
            "target": self.target,
            "subgoal": self.subgoal,
            "m_allowed": self.m_allowed,
            "max_score": self.max_score,
        }


@dataclass
class _ActiveTrial:
    plan: TrialPlan
    trial_index: int
    phase: str
    effective: Condition
    values: ValueTable
    board: str
    steps: list[MoveStep] = field(default_factory=list)
    m_good: int = 0
    m_bad: int = 0
    f_optional: int = 0
    subgoal_reached: bool = False
    illegal_attempts: int = 0

    @property
    def m_used(self) -> int:
        return len(self.steps)

    def running_score(self) -> int:
        # The live score display: what the trial would pay if solved now.
        return score_trial(
            self.effective,
            m_allowed=self.plan.m_allowed,
            m_used=self.m_used,
            solved=True,
            m_good=self.m_good,
            m_bad=self.m_bad,
            f_optional=self.f_optional,
            subgoal_reached=self.subgoal_reached,
        ).total


@dataclass
class Session:
    session_id: str
    condition: Condition
    seed: int
    created_at: float
    rng: np.random.Generator
    status: str = STATUS_ACTIVE
    current: _ActiveTrial | None = None
    records: list[TrajectoryRecord] = field(default_factory=list)

    @property
    def next_trial_index(self) -> int:
        return len(self.records) + 1


class ExperimentService:
    """All session logic; one instance per data directory."""

    def __init__(
        self,
        data_dir: str | Path,
        seed: int | None = None,
        clock: Callable[[], float] = time.monotonic,
        session_budget: float = SESSION_BUDGET_SECONDS,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.records_path = self.data_dir / "records.jsonl"
        self.sessions_path = self.data_dir / "sessions.jsonl"
        self.clock = clock
        self.session_budget = session_budget
        self._seed_rng = np.random.default_rng(seed if seed is not None else secrets.randbits(63))
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._cache = ValueTableCache()

    # -- internals --------------------------------------------------------

    def _index_event(self, session: Session) -> None:
        event = {
            "session_id": session.session_id,
            "condition": session.condition.value,
            "seed": session.seed,
            "status": session.status,
            "completed_trials": len(session.records),
        }
        with self.sessions_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        if session.status == STATUS_ACTIVE and (
            self.clock() - session.created_at > self.session_budget
        ):
            session.status = STATUS_EXPIRED
            session.current = None
            self._index_event(session)
        return session

    def _plan_trial(self, session: Session) -> _ActiveTrial:
        trial_index = session.next_trial_index
        training = trial_index <= TRAINING_TRIALS
        phase = PHASE_TRAINING if training else PHASE_TRANSFER
        effective = session.condition if training else Condition.NO_FEEDBACK
        n = TRAINING_DISKS if training else TRANSFER_DISKS
        graph = self._cache.graph(n)
        pool = graph.non_start_states()
        target = pool[int(session.rng.integers(len(pool)))]
        start = start_state(n)
        m_min = graph.distance(start, target)
        m_allowed = allowed_moves(m_min)
        subgoal = subgoal_for(target, n) if effective.has_subgoal else None
        plan = TrialPlan(
            n=n,
            start=start,
            target=target,
            subgoal=subgoal,
            m_min=m_min,
            m_allowed=m_allowed,
            max_score=max_possible_score(effective, m_allowed, m_min),
        )
        trial = _ActiveTrial(
            plan=plan,
            trial_index=trial_index,
            phase=phase,
            effective=effective,
            values=self._cache.table(n, target),
            board=start,
        )
        session.current = trial
        return trial

    def _finish_trial(self, session: Session, solved: bool) -> TrajectoryRecord:
        trial = session.current
        assert trial is not None
        plan = trial.plan
        breakdown = score_trial(
            trial.effective,
            m_allowed=plan.m_allowed,
            m_used=trial.m_used,
            solved=solved,
            m_good=trial.m_good,
            m_bad=trial.m_bad,
            f_optional=trial.f_optional,
            subgoal_reached=trial.subgoal_reached,
        )
        record = TrajectoryRecord(
            session_id=session.session_id,
            condition=session.condition.value,
            trial_index=trial.trial_index,
            phase=trial.phase,
            n=plan.n,
            start=plan.start,
            target=plan.target,
            subgoal=plan.subgoal,
            moves=tuple(trial.steps),
            m_min=plan.m_min,
            m_allowed=plan.m_allowed,
            m_used=trial.m_used,
            solved=solved,
            score=breakdown,
            pct=percentage_score(plan.m_allowed, trial.m_used, plan.m_min, solved),
        )
        append_jsonl(record, self.records_path)
        session.records.append(record)
        session.current = None
        if len(session.records) >= TOTAL_TRIALS:
            session.status = STATUS_FINISHED
        self._index_event(session)
        return record

    # -- views -------------------------------------------------------------

    def _session_view(self, session: Session) -> dict:
        view = {
            "session_id": session.session_id,
            "condition": session.condition.value,
            "status": session.status,
            "completed_trials": len(session.records),
            "total_trials": TOTAL_TRIALS,
            "trial": None,
            "completed": [
                {
                    "trial_index": r.trial_index,
                    "phase": r.phase,
                    "solved": r.solved,
                    "score": r.score.total,
                    "pct": r.pct,
                }
                for r in session.records
            ],
        }
        trial = session.current
        if trial is not None:
            view["trial"] = {
                "trial_index": trial.trial_index,
                "phase": trial.phase,
                "board": trial.board,
                "m_used": trial.m_used,
                "running_score": trial.running_score(),
                "feedback_available": trial.effective.shows_feedback,
                "feedback_on_request": trial.effective.allows_requests,
                **trial.plan.view(),
            }
        return view

    # -- operations ---------------------------------------------------------

    def create_session(self, condition: str, seed: int | None = None) -> dict:
        cond = parse_condition(condition)
        if seed is None:
            seed = int(self._seed_rng.integers(2**62))
        session_id = secrets.token_hex(8)
        with self._lock:
            session = Session(
                session_id=session_id,
                condition=cond,
                seed=seed,
                created_at=self.clock(),
                rng=np.random.default_rng(seed),
            )
            self._sessions[session_id] = session
            self._plan_trial(session)
            self._index_event(session)
            return self._session_view(session)

    def get_session(self, session_id: str) -> dict:
        with self._lock:
            return self._session_view(self._get(session_id))

    def submit_move(self, session_id: str, from_peg: int, to_peg: int) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.status == STATUS_EXPIRED:
                raise SessionExpired("the 90-minute session budget is spent")
            trial = session.current
            if trial is None or session.status != STATUS_ACTIVE:
                raise TrialNotActive("no trial in progress; advance to the next trial")

            try:
                post = apply_move(trial.board, Move(from_peg, to_peg))
            except IllegalMove:
                trial.illegal_attempts += 1  # rejected moves cost nothing
                raise

            pre = trial.board
            evaluation = evaluate_move(trial.values, pre, post)
            show = trial.effective.shows_feedback
            if show:
                if evaluation.is_good:
                    trial.m_good += 1
                else:
                    trial.m_bad += 1
            step = MoveStep(
                pre=pre,
                from_peg=from_peg,
                to_peg=to_peg,
                post=post,
                t=trial.m_used,
                label=evaluation.label if show else None,
                requested=False if trial.effective.allows_requests else None,
            )
            trial.steps.append(step)
            trial.board = post
            if trial.plan.subgoal is not None and post == trial.plan.subgoal:
                trial.subgoal_reached = True

            solved = post == trial.plan.target
            failed = not solved and trial.m_used >= trial.plan.m_allowed
            outcome = {
                "state": post,
                "m_used": trial.m_used,
                "m_allowed": trial.plan.m_allowed,
                "running_score": trial.running_score(),
                "label": evaluation.label if show else None,
                "solved": solved,
                "failed": failed,
                "trial_complete": solved or failed,
                "trial_index": trial.trial_index,
            }
            if solved or failed:
                record = self._finish_trial(session, solved)
                outcome["record"] = {
                    "trial_index": record.trial_index,
                    "phase": record.phase,
                    "solved": record.solved,
                    "score": record.score.as_dict(),
                    "pct": record.pct,
                }
                outcome["session_status"] = session.status
            return outcome

    def request_feedback(self, session_id: str) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.status == STATUS_EXPIRED:
                raise SessionExpired("the 90-minute session budget is spent")
            trial = session.current
            if trial is None:
                raise TrialNotActive("no trial in progress")
            if not trial.effective.allows_requests:
                raise WrongCondition(
                    "feedback requests are available only in the optional-feedback condition"
                )
            if not trial.steps:
                raise NoMoveYet("make a move before requesting feedback")
            last = trial.steps[-1]
            evaluation = evaluate_move(trial.values, last.pre, last.post)
            trial.f_optional += 1
            trial.steps[-1] = MoveStep(
                pre=last.pre,
                from_peg=last.from_peg,
                to_peg=last.to_peg,
                post=last.post,
                t=last.t,
                label=evaluation.label,
                requested=True,
            )
            return {
                "label": evaluation.label,
                "f_optional": trial.f_optional,
                "running_score": trial.running_score(),
            }

    def advance(self, session_id: str) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.status == STATUS_EXPIRED:
                raise SessionExpired("the 90-minute session budget is spent")
            if session.status == STATUS_FINISHED:
                return self._session_view(session)
            if session.current is not None:
                raise TrialNotActive("current trial still in progress")
            self._plan_trial(session)
            return self._session_view(session)

    def stats(self, condition: str | None = None, phase: str | None = None) -> dict:
        records = read_jsonl(self.records_path) if self.records_path.exists() else []
        return stats_mod.summarize(records, condition=condition, phase=phase)


_ERROR_STATUS = {
    "UnknownSession": 404,
    "InvalidCondition": 400,
    "IllegalMove": 409,
    "TrialNotActive": 409,
    "WrongCondition": 409,
    "NoMoveYet": 409,
    "SessionExpired": 410,
    "EmptyDataset": 404,
}


class CreateSessionBody(_BaseModel):
    condition: str
    seed: int | None = None


class MoveBody(_BaseModel):
    from_peg: int = _Field(alias="from")
    to_peg: int = _Field(alias="to")
    model_config = {"populate_by_name": True}


def create_app(service: ExperimentService):
    """HTTP+JSON layer over the service."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="hanoilab experiment service", version="0.1.0")

    @app.exception_handler(HanoiLabError)
    async def _domain_error(request: Request, exc: HanoiLabError):
        name = type(exc).__name__
        return JSONResponse(
            status_code=_ERROR_STATUS.get(name, 400),
            content={"error": name, "detail": str(exc)},
        )

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        return service.create_session(body.condition, body.seed)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id)

    @app.post("/sessions/{session_id}/moves")
    def submit_move(session_id: str, body: MoveBody):
        return service.submit_move(session_id, body.from_peg, body.to_peg)

    @app.post("/sessions/{session_id}/feedback")
    def request_feedback(session_id: str):
        return service.request_feedback(session_id)

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str):
        return service.advance(session_id)

    @app.get("/stats")
    def get_stats(condition: str | None = None, phase: str | None = None):
        return service.stats(condition=condition, phase=phase)

    return app
