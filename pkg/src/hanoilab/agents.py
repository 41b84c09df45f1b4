"""Synthetic participants: softmax agents built from the four
feedback-integration hypotheses.

M1 plans on its own reward alone; M2 tilts its planned action values by the
evaluative signal; M3 folds the signal into the reward before planning; M4
drops planning entirely and follows the signal.  Agents are stationary within
a trial and fully determined by their seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .feedback import (
    Condition,
    allowed_moves,
    evaluate_move,
    feedback_signal_table,
    percentage_score,
    score_trial,
    subgoal_for,
)
from .mdp import (
    SoftPolicy,
    TabularMdp,
    ValueTable,
    softmax_from_q,
    softmax_policy,
    soft_value_iteration,
    target_reward_mdp,
    value_iteration,
)
from .toh import StateGraph, build_state_graph, start_state
from .trajectories import (
    MoveStep,
    PHASE_TRAINING,
    PHASE_TRANSFER,
    TrajectoryRecord,
)

MODELS = ("M1", "M2", "M3", "M4")
_VI_TOL = 1e-12


@dataclass(frozen=True)
class AgentSpec:
    """One synthetic participant.

    The agent's own reward is ``target_weight`` on the current trial's target
    plus any fixed per-state ``reward_weights`` (entries whose length does not
    match the current puzzle are ignored, so indicator-only agents transfer
    across disk counts).  M1 ignores ``k``; M4 ignores the reward.
    """

    model: str
    k: float = 1.0
    gamma: float = 0.95
    rng_seed: int = 0
    reward_weights: Mapping[str, float] | None = None
    target_weight: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.k < 0:
            raise ValueError("feedback gain k must be nonnegative")


def state_reward_vector(graph: StateGraph, spec: AgentSpec, target: str) -> np.ndarray:
    """Per-state reward the agent plans on."""
    r = np.zeros(graph.n_states)
    r[graph.index_of(target)] = spec.target_weight
    if spec.reward_weights:
        for state, w in spec.reward_weights.items():
            if len(state) == graph.n:
                r[graph.index_of(state)] += w
    return r


def agent_policy(
    spec: AgentSpec,
    graph: StateGraph,
    target: str,
    hard_values: ValueTable | None = None,
) -> SoftPolicy:
    """Stationary softmax policy of the agent for one trial target."""
    if hard_values is None:
        hard_values = value_iteration(target_reward_mdp(graph, target, spec.gamma))
    h = feedback_signal_table(hard_values)

    if spec.model == "M4":
        policy, _ = softmax_from_q(graph, spec.k * h)
        return policy

    state_r = state_reward_vector(graph, spec, target)
    edge_r = state_r[graph.edge_dst]  # reward collected on arrival
    if spec.model == "M3":
        edge_r = edge_r + spec.k * h
    mdp = TabularMdp(graph=graph, gamma=spec.gamma, reward=edge_r)
    values = soft_value_iteration(mdp, tol=_VI_TOL)
    if spec.model == "M2":
        policy, _ = softmax_from_q(graph, values.q + spec.k * h)
        return policy
    return softmax_policy(values)


def simulate_trial(
    spec: AgentSpec,
    condition: Condition,
    n: int,
    start: str,
    target: str,
    budget: int,
    rng: np.random.Generator,
    *,
    graph: StateGraph | None = None,
    policy: SoftPolicy | None = None,
    hard_values: ValueTable | None = None,
    session_id: str = "sim",
    trial_index: int = 1,
    phase: str = PHASE_TRAINING,
    m_min: int | None = None,
) -> TrajectoryRecord:
    """Sample one trial; the record carries feedback per the condition."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    graph = graph or build_state_graph(n)
    if hard_values is None:
        hard_values = value_iteration(target_reward_mdp(graph, target, spec.gamma))
    if policy is None:
        policy = agent_policy(spec, graph, target, hard_values)
    if m_min is None:
        m_min = graph.distance(start, target)

    effective = condition if phase == PHASE_TRAINING else Condition.NO_FEEDBACK
    subgoal = subgoal_for(target, n) if (effective.has_subgoal) else None

    steps: list[MoveStep] = []
    m_good = m_bad = 0
    subgoal_reached = False
    state = start
    solved = False
    for t in range(budget):
        edge = policy.sample_edge(graph.index_of(state), rng)
        post = graph.states[graph.edge_dst[edge]]
        move = graph.edge_move(edge)
        label = None
        requested = False if effective.allows_requests else None
        if effective.shows_feedback:
            ev = evaluate_move(hard_values, state, post)
            label = ev.label
            if ev.is_good:
                m_good += 1
            else:
                m_bad += 1
        steps.append(
            MoveStep(
                pre=state, from_peg=move.from_peg, to_peg=move.to_peg,
                post=post, t=t, label=label, requested=requested,
            )
        )
        state = post
        if subgoal is not None and state == subgoal:
            subgoal_reached = True
        if state == target:
            solved = True
            break

    m_used = len(steps)
    breakdown = score_trial(
        effective,
        m_allowed=budget,
        m_used=m_used,
        solved=solved,
        m_good=m_good,
        m_bad=m_bad,
        f_optional=0,  # synthetic agents never press the feedback button
        subgoal_reached=subgoal_reached,
    )
    pct = percentage_score(budget, m_used, m_min, solved)
    return TrajectoryRecord(
        session_id=session_id,
        condition=condition.value,
        trial_index=trial_index,
        phase=phase,
        n=n,
        start=start,
        target=target,
        subgoal=subgoal,
        moves=tuple(steps),
        m_min=m_min,
        m_allowed=budget,
        m_used=m_used,
        solved=solved,
        score=breakdown,
        pct=pct,
    )


@dataclass(frozen=True)
class CohortProtocol:
    """Trial schedule every agent follows: feedback-specific training on the
    small puzzle, then feedback-free transfer on the larger one."""

    condition: Condition = Condition.NUMERIC
    training_trials: int = 10
    transfer_trials: int = 5
    training_disks: int = 4
    transfer_disks: int = 5
    fixed_target: str | None = None  # set to pin every training trial's target


class _PolicyCache:
    """Policies and hard tables keyed by (n, target, agent parameters)."""

    def __init__(self):
        self._hard: dict[tuple[int, str, float], ValueTable] = {}
        self._policies: dict[tuple, SoftPolicy] = {}

    def hard(self, graph: StateGraph, target: str, gamma: float) -> ValueTable:
        key = (graph.n, target, gamma)
        if key not in self._hard:
            self._hard[key] = value_iteration(target_reward_mdp(graph, target, gamma))
        return self._hard[key]

    def policy(self, spec: AgentSpec, graph: StateGraph, target: str) -> SoftPolicy:
        weights_sig = (
            None
            if spec.reward_weights is None
            else tuple(sorted(spec.reward_weights.items()))
        )
        key = (graph.n, target, spec.model, spec.k, spec.gamma, spec.target_weight, weights_sig)
        if key not in self._policies:
            hard = self.hard(graph, target, spec.gamma)
            self._policies[key] = agent_policy(spec, graph, target, hard)
        return self._policies[key]


def simulate_cohort(
    specs: list[AgentSpec],
    protocol: CohortProtocol = CohortProtocol(),
) -> list[TrajectoryRecord]:
    """Run every agent through the full protocol.

    Each agent owns an independent random stream derived from its seed; the
    target of every trial is drawn uniformly from the two triangles that do
    not contain the start state.
    """
    if not specs:
        raise ValueError("need at least one agent")
    graphs = {
        protocol.training_disks: build_state_graph(protocol.training_disks),
        protocol.transfer_disks: build_state_graph(protocol.transfer_disks),
    }
    pools = {n: g.non_start_states() for n, g in graphs.items()}
    cache = _PolicyCache()
    records: list[TrajectoryRecord] = []
    total = protocol.training_trials + protocol.transfer_trials
    for agent_idx, spec in enumerate(specs):
        streams = np.random.SeedSequence(spec.rng_seed).spawn(total)
        session_id = f"agent-{agent_idx:03d}"
        for trial in range(1, total + 1):
            rng = np.random.default_rng(streams[trial - 1])
            training = trial <= protocol.training_trials
            n = protocol.training_disks if training else protocol.transfer_disks
            graph = graphs[n]
            if training and protocol.fixed_target is not None:
                target = protocol.fixed_target
            else:
                target = pools[n][int(rng.integers(len(pools[n])))]
            start = start_state(n)
            m_min = graph.distance(start, target)
            records.append(
                simulate_trial(
                    spec,
                    protocol.condition,
                    n,
                    start,
                    target,
                    allowed_moves(m_min),
                    rng,
                    graph=graph,
                    policy=cache.policy(spec, graph, target),
                    hard_values=cache.hard(graph, target, spec.gamma),
                    session_id=session_id,
                    trial_index=trial,
                    phase=PHASE_TRAINING if training else PHASE_TRANSFER,
                    m_min=m_min,
                )
            )
    return records
