"""Tabular MDPs on the puzzle graph and their exact solvers.

Two solvers live here.  ``value_iteration`` computes the tutor's optimal
value function for a single target: the target is absorbing and worth 1 on
arrival, which makes the fixed point V(s) = gamma**d(s) with d the hop count
to the target.  ``soft_value_iteration`` computes the log-sum-exp fixed point
Q = r + gamma * V(succ), V = log sum_a exp(Q), whose softmax
P(a|s) = exp(Q - V) is the stochastic behavior model used by the agents and
the IRL machinery.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import NonConvergence
from .toh import Move, StateGraph

DEFAULT_GAMMA = 0.95
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000

# Dense Newton polish is worthwhile only on small graphs.
_NEWTON_MAX_STATES = 4096


def _segment_max(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    return np.maximum.reduceat(values, indptr[:-1])


def _segment_logsumexp(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    m = np.maximum.reduceat(values, indptr[:-1])
    spread = values - np.repeat(m, np.diff(indptr))
    sums = np.add.reduceat(np.exp(spread), indptr[:-1])
    return m + np.log(sums)


@dataclass(frozen=True)
class TabularMdp:
    """Deterministic-transition MDP over a state graph.

    ``reward`` is per edge (one entry per (state, action) pair, aligned with
    the graph's edge arrays).  ``terminal`` states are absorbing: they
    contribute no future value and take no actions.
    """

    graph: StateGraph
    gamma: float
    reward: np.ndarray
    terminal: frozenset[str] = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if len(self.reward) != self.graph.n_edges:
            raise ValueError("reward table must have one entry per edge")

    @property
    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.graph.n_states, dtype=bool)
        for s in self.terminal:
            mask[self.graph.index_of(s)] = True
        return mask


def target_reward_mdp(graph: StateGraph, target: str, gamma: float = DEFAULT_GAMMA) -> TabularMdp:
    """Unit reward on every transition arriving at ``target``; target absorbing."""
    t = graph.index_of(target)
    reward = (graph.edge_dst == t).astype(float)
    return TabularMdp(graph=graph, gamma=gamma, reward=reward, terminal=frozenset([target]))


@dataclass
class ValueTable:
    """Per-state values and per-edge action values from a solve."""

    graph: StateGraph
    kind: str  # "hard" or "soft"
    gamma: float
    v: np.ndarray
    q: np.ndarray
    target: str | None = None
    iterations: int = 0
    residual: float = 0.0

    def value(self, state: str) -> float:
        return float(self.v[self.graph.index_of(state)])

    def q_value(self, state: str, successor: str) -> float:
        return float(self.q[self.graph.edge_index(state, successor)])

    def values_csv(self) -> str:
        buf = io.StringIO()
        buf.write("state,value\n")
        for s, v in zip(self.graph.states, self.v):
            buf.write(f"{s},{v!r}\n")
        return buf.getvalue()

    def q_csv(self) -> str:
        g = self.graph
        buf = io.StringIO()
        buf.write("state,from,to,q\n")
        for e in range(g.n_edges):
            buf.write(
                f"{g.states[g.edge_src[e]]},{g.move_from[e]},{g.move_to[e]},{self.q[e]!r}\n"
            )
        return buf.getvalue()


def value_iteration(
    mdp: TabularMdp, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> ValueTable:
    """Optimal values for a target-reward MDP.

    The target's unit reward is collected at the target itself (V pinned to 1,
    no future value), so the fixed point is V(s) = gamma**d(s) and the greedy
    policy from any state reaches the target in exactly d(s) moves.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not mdp.terminal:
        raise ValueError("hard value iteration needs an absorbing target")
    g = mdp.graph
    term = mdp.terminal_mask
    v = np.where(term, 1.0, 0.0)
    iterations = 0
    residual = np.inf
    for iterations in range(1, max_iter + 1):
        best = _segment_max(v[g.edge_dst], g.indptr)
        v_new = np.where(term, 1.0, mdp.gamma * best)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual < tol:
            break
    else:
        raise NonConvergence(f"hard VI residual {residual} after {max_iter} iterations")
    target = next(iter(mdp.terminal)) if len(mdp.terminal) == 1 else None
    q = mdp.gamma * v[g.edge_dst]
    return ValueTable(
        graph=g, kind="hard", gamma=mdp.gamma, v=v, q=q,
        target=target, iterations=iterations, residual=residual,
    )


def soft_value_iteration(
    mdp: TabularMdp,
    reward: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    v0: np.ndarray | None = None,
) -> ValueTable:
    """Log-sum-exp fixed point of Q = r + gamma * V(succ).

    Terminal states are excluded from the recursion (their V stays 0).  Plain
    sweeps contract at rate gamma; once the residual is small a dense Newton
    step polishes the fixed point to near machine precision, which downstream
    finite-difference checks rely on.  A ``v0`` warm start makes repeated
    solves during fitting cheap.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = mdp.graph
    gamma = mdp.gamma
    r = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    if len(r) != g.n_edges:
        raise ValueError("reward must have one entry per edge")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    term = mdp.terminal_mask
    any_term = bool(term.any())

    if v0 is not None and len(v0) == g.n_states:
        v = np.array(v0, dtype=float)
        if any_term:
            v[term] = 0.0
    else:
        v = np.zeros(g.n_states)

    use_newton = g.n_states <= _NEWTON_MAX_STATES
    eye = np.eye(g.n_states) if use_newton else None
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        q = r + gamma * v[g.edge_dst]
        lse = _segment_logsumexp(q, g.indptr)
        if any_term:
            lse = np.where(term, 0.0, lse)
        f = lse - v
        residual = float(np.max(np.abs(f)))
        # convergence is relative to the value scale: double precision cannot
        # push the residual of a 1e3-magnitude fixed point below ~1e-13
        if residual < tol * max(1.0, float(np.max(np.abs(v)))):
            break
        if use_newton and residual < 1.0:
            # normalize with the raw per-state logsumexp: the masked V is 0 at
            # terminal states and would overflow the exponential there
            norm = _segment_logsumexp(q, g.indptr) if any_term else lse
            probs = np.exp(q - norm[g.edge_src])
            if any_term:
                probs = np.where(term[g.edge_src], 0.0, probs)
            jac = np.zeros((g.n_states, g.n_states))
            np.add.at(jac, (g.edge_src, g.edge_dst), gamma * probs)
            if any_term:
                jac[term, :] = 0.0
            try:
                step = np.linalg.solve(eye - jac, f)
            except np.linalg.LinAlgError:
                step = f
            v_new = v + step
            if np.all(np.isfinite(v_new)):
                v = v_new
                if any_term:
                    v[term] = 0.0
                continue
        v = v + f
    else:
        raise NonConvergence(f"soft VI residual {residual} after {max_iter} iterations")

    q = r + gamma * v[g.edge_dst]
    return ValueTable(
        graph=g, kind="soft", gamma=gamma, v=v, q=q,
        iterations=iterations, residual=residual,
    )


@dataclass
class SoftPolicy:
    """Per-edge action probabilities P(a|s) = exp(Q - V)."""

    graph: StateGraph
    probs: np.ndarray

    def action_probabilities(self, state: str) -> list[tuple[Move, float]]:
        g = self.graph
        i = g.index_of(state)
        lo, hi = g.indptr[i], g.indptr[i + 1]
        return [(g.edge_move(e), float(self.probs[e])) for e in range(lo, hi)]

    def prob(self, state: str, successor: str) -> float:
        return float(self.probs[self.graph.edge_index(state, successor)])

    def sample_edge(self, state_index: int, rng: np.random.Generator) -> int:
        g = self.graph
        lo, hi = int(g.indptr[state_index]), int(g.indptr[state_index + 1])
        p = self.probs[lo:hi]
        return lo + int(rng.choice(hi - lo, p=p / p.sum()))


def softmax_policy(values: ValueTable, terminal: Iterable[str] = ()) -> SoftPolicy:
    """Softmax policy of a soft value table; terminal states take no actions."""
    if values.kind != "soft":
        raise ValueError("softmax_policy expects a soft value table")
    g = values.graph
    probs = np.exp(values.q - values.v[g.edge_src])
    for s in terminal:
        i = g.index_of(s)
        probs[g.indptr[i] : g.indptr[i + 1]] = 0.0
    return SoftPolicy(graph=g, probs=probs)


def softmax_from_q(graph: StateGraph, q: np.ndarray) -> tuple[SoftPolicy, np.ndarray]:
    """Normalize arbitrary per-edge scores into a policy; returns (policy, V).

    V here is the per-state log-normalizer log sum_a exp(q), the adjusted
    value function that pairs with a post-hoc Q adjustment.
    """
    v = _segment_logsumexp(q, graph.indptr)
    probs = np.exp(q - v[graph.edge_src])
    return SoftPolicy(graph=graph, probs=probs), v
