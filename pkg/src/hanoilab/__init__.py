"""Tower of Hanoi evaluative-feedback experiments.

Puzzle combinatorics, tabular MDP solvers, feedback protocols and scoring,
synthetic agents, maximum-entropy IRL, feedback-integration model selection,
and a session service for live participants.
"""

__version__ = "0.1.0"
