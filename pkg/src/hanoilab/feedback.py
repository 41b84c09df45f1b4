"""Experiment conditions, move evaluation, and scoring.

A move is judged by the change in the optimal value function for the trial's
target: value up is "good move +2", anything else is "bad move -2".  Moves
that leave the value unchanged (the graph has 3-cycles, so they exist) also
display the bad label; the three-way classification is kept in logs so the
convention can be re-analyzed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InconsistentCounters, TargetInStartTriangle
from .mdp import ValueTable
from .toh import T1, T2, triangle_of

GOOD_LABEL = "good move +2"
BAD_LABEL = "bad move -2"
GOOD_VALUE = 2.0
BAD_VALUE = -2.0


class Condition(str, Enum):
    """The five training-task protocols; transfer trials always behave as
    NO_FEEDBACK."""

    NO_FEEDBACK = "no_feedback"
    NUMERIC = "numeric"
    OPTIONAL = "optional"
    SUBGOAL = "subgoal"
    SUBGOAL_NUMERIC = "subgoal_numeric"

    @property
    def shows_feedback(self) -> bool:
        """Automatic per-move labels."""
        return self in (Condition.NUMERIC, Condition.SUBGOAL_NUMERIC)

    @property
    def allows_requests(self) -> bool:
        return self is Condition.OPTIONAL

    @property
    def has_subgoal(self) -> bool:
        return self in (Condition.SUBGOAL, Condition.SUBGOAL_NUMERIC)


def parse_condition(name: str) -> Condition:
    try:
        return Condition(name)
    except ValueError:
        from .errors import InvalidCondition

        raise InvalidCondition(
            f"unknown condition {name!r}; expected one of "
            + ", ".join(c.value for c in Condition)
        ) from None


@dataclass(frozen=True)
class MoveEvaluation:
    delta_class: str  # "improving" | "neutral" | "worsening"
    label: str
    h_value: float

    @property
    def is_good(self) -> bool:
        return self.h_value > 0


_IMPROVING = MoveEvaluation("improving", GOOD_LABEL, GOOD_VALUE)
_NEUTRAL = MoveEvaluation("neutral", BAD_LABEL, BAD_VALUE)
_WORSENING = MoveEvaluation("worsening", BAD_LABEL, BAD_VALUE)


def allowed_moves(m_min: int) -> int:
    """Move budget: ceil(1.5 * m_min)."""
    if m_min < 1:
        raise ValueError("m_min must be at least 1")
    return (3 * m_min + 1) // 2


def evaluate_move(values: ValueTable, state: str, successor: str) -> MoveEvaluation:
    """Classify the move state -> successor against the tutor's values.

    Equal-distance states carry bit-identical values (each is an exact power
    of gamma), so the three-way split is a plain comparison.
    """
    values.graph.edge_index(state, successor)  # raises NotAdjacent when invalid
    before = values.value(state)
    after = values.value(successor)
    if after > before:
        return _IMPROVING
    if after == before:
        return _NEUTRAL
    return _WORSENING


def feedback_signal_table(values: ValueTable) -> np.ndarray:
    """Evaluative signal on every edge: +2 where value rises, else -2."""
    g = values.graph
    return np.where(values.v[g.edge_dst] > values.v[g.edge_src], GOOD_VALUE, BAD_VALUE)


def subgoal_for(target: str, n: int) -> str:
    """Intermediate sub-goal preceding the bridge into the target's triangle."""
    tri = triangle_of(target)
    if tri == T1:
        raise TargetInStartTriangle(f"target {target} lies in the start triangle")
    return ("1" if tri == T2 else "2") * (n - 1) + "0"


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-condition score components; an unsolved trial totals 0."""

    base: int
    feedback_bonus: int
    optional_penalty: int
    subgoal_bonus: int
    total: int

    def as_dict(self) -> dict:
        return {
            "base": self.base,
            "feedback_bonus": self.feedback_bonus,
            "optional_penalty": self.optional_penalty,
            "subgoal_bonus": self.subgoal_bonus,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreBreakdown":
        return cls(
            base=d["base"],
            feedback_bonus=d["feedback_bonus"],
            optional_penalty=d["optional_penalty"],
            subgoal_bonus=d["subgoal_bonus"],
            total=d["total"],
        )


def score_trial(
    condition: Condition,
    *,
    m_allowed: int,
    m_used: int,
    solved: bool,
    m_good: int = 0,
    m_bad: int = 0,
    f_optional: int = 0,
    subgoal_reached: bool = False,
) -> ScoreBreakdown:
    """Score one trial from its counters.

    base = 10 (m_allowed - m_used + 1), plus per condition:
    numeric +2 (m_good - m_bad), optional -f_optional, subgoal +5 when the
    sub-goal was reached; the combined condition takes both bonuses.
    """
    if min(m_allowed, m_used, m_good, m_bad, f_optional) < 0:
        raise InconsistentCounters("negative counters")
    if solved and m_used > m_allowed:
        raise InconsistentCounters(f"solved with m_used={m_used} > m_allowed={m_allowed}")
    if m_good + m_bad > m_used:
        raise InconsistentCounters("more evaluated moves than moves made")

    base = 10 * (m_allowed - m_used + 1)
    feedback_bonus = (
        2 * (m_good - m_bad)
        if condition in (Condition.NUMERIC, Condition.SUBGOAL_NUMERIC)
        else 0
    )
    optional_penalty = f_optional if condition is Condition.OPTIONAL else 0
    subgoal_bonus = 5 * int(subgoal_reached) if condition.has_subgoal else 0
    total = base + feedback_bonus - optional_penalty + subgoal_bonus
    if not solved:
        total = 0
    return ScoreBreakdown(
        base=base,
        feedback_bonus=feedback_bonus,
        optional_penalty=optional_penalty,
        subgoal_bonus=subgoal_bonus,
        total=total,
    )


def max_possible_score(condition: Condition, m_allowed: int, m_min: int) -> int:
    """Score of an optimal solve with every bonus earned."""
    best = 10 * (m_allowed - m_min + 1)
    if condition in (Condition.NUMERIC, Condition.SUBGOAL_NUMERIC):
        best += 2 * m_min
    if condition.has_subgoal:
        best += 5
    return best


def percentage_score(m_allowed: int, m_used: int, m_min: int, solved: bool) -> float:
    """100 (m_allowed - m_used + 1) / (m_allowed - m_min + 1); 0 when unsolved."""
    if not solved:
        return 0.0
    return 100.0 * (m_allowed - m_used + 1) / (m_allowed - m_min + 1)
