"""Exception types shared across the package."""


class HanoiLabError(Exception):
    """Base class for domain errors."""


class IllegalMove(HanoiLabError):
    """A move that violates the puzzle rules (empty source or size order)."""


class LimitExceeded(HanoiLabError):
    """Disk count above the exhaustive-enumeration bound."""


class UnknownState(HanoiLabError):
    """A state string that does not belong to the graph."""


class NotAdjacent(HanoiLabError):
    """Two states that are not connected by a single legal move."""


class NoEntry(HanoiLabError):
    """The start triangle has no critical entry state."""


class NonConvergence(HanoiLabError):
    """A solver hit its iteration cap before meeting tolerance."""


class TargetInStartTriangle(HanoiLabError):
    """An operation that requires a target outside the start triangle."""


# Grouping rejects start-triangle targets with the same meaning; alias kept
# so call sites read naturally.
TargetInT1 = TargetInStartTriangle


class InconsistentCounters(HanoiLabError):
    """Trial counters that cannot have come from a real trial."""


class TooFewTrajectories(HanoiLabError):
    """Not enough trajectories to form the requested folds."""


class EmptyDataset(HanoiLabError):
    """A selector matched no records."""


class DegenerateSample(HanoiLabError):
    """A statistical test got a sample it cannot handle."""


class InvalidCondition(HanoiLabError):
    """Unknown experiment condition name."""


class UnknownSession(HanoiLabError):
    """Session id not found."""


class SessionExpired(HanoiLabError):
    """Session exceeded its wall-clock budget."""


class TrialNotActive(HanoiLabError):
    """A move or feedback request arrived outside an active trial."""


class WrongCondition(HanoiLabError):
    """An endpoint used under a condition that does not support it."""


class NoMoveYet(HanoiLabError):
    """Feedback requested before any move was made."""
