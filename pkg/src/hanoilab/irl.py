"""Maximum-entropy IRL on the puzzle graph.

Rewards are linear in indicator features of states and are collected on
arrival, so the per-edge reward is the weight of the successor's feature.
The demonstration likelihood is the sum of log P(a|s) under the softmax of
the soft value table, maximized with an L1 penalty by proximal gradient
ascent; the penalty coefficient is picked by k-fold cross-validation at
trajectory granularity.

Demonstrations whose episodes genuinely end at a shared target are modeled
with that target absorbing.  Pooled data, and paths censored at an analysis
boundary rather than finished, use the plain discounted fixed point, under
which the policy is exactly invariant to constant reward shifts.

The gradient is exact: differentiating the soft fixed point gives a linear
system in dV/dw whose solution is the discounted expected feature visitation
under the softmax policy, and the dense solve is cheap at these graph sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import TooFewTrajectories
from .mdp import TabularMdp, ValueTable, soft_value_iteration
from .toh import Move, StateGraph, sub_triangle_corners
from .trajectories import TrajectoryRecord

MODE_ALL_STATES = "all_states"
MODE_SUBSET8 = "subset8"

DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 10) for i in range(21))  # 0, 0.1, ..., 2


@dataclass(frozen=True)
class FeatureMap:
    """Indicator features on a fixed list of states."""

    mode: str
    states: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.states)

    @classmethod
    def all_states(cls, graph: StateGraph) -> "FeatureMap":
        return cls(mode=MODE_ALL_STATES, states=graph.states)

    @classmethod
    def subset8(cls, graph: StateGraph) -> "FeatureMap":
        return cls(mode=MODE_SUBSET8, states=tuple(sub_triangle_corners(graph.n)))

    @classmethod
    def for_mode(cls, mode: str, graph: StateGraph) -> "FeatureMap":
        if mode == MODE_ALL_STATES:
            return cls.all_states(graph)
        if mode == MODE_SUBSET8:
            return cls.subset8(graph)
        raise ValueError(f"unknown feature mode {mode!r}")

    def state_feature(self, graph: StateGraph) -> np.ndarray:
        """Feature id per state, -1 where no feature lives."""
        out = np.full(graph.n_states, -1, dtype=np.int64)
        for j, s in enumerate(self.states):
            out[graph.index_of(s)] = j
        return out

    def arrival_feature(self, graph: StateGraph) -> np.ndarray:
        """Feature id collected by each edge (feature of the successor)."""
        return self.state_feature(graph)[graph.edge_dst]

    def state_rewards(self, graph: StateGraph, weights: np.ndarray) -> np.ndarray:
        r = np.zeros(graph.n_states)
        for j, s in enumerate(self.states):
            r[graph.index_of(s)] = weights[j]
        return r


@dataclass(frozen=True)
class IrlConfig:
    gamma: float = 0.95
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    folds: int = 5
    step_size: float = 0.1
    max_iter: int = 5000
    tol: float = 1e-6
    kkt_tol: float = 1e-4  # subgradient-gap stop; handles separable rays
    seed: int = 0
    vi_tol: float = 1e-12
    vi_max_iter: int = 100_000


@dataclass(frozen=True)
class Demonstrations:
    """Observed (state, action) paths over one graph.

    Steps are stored as edge ids, and the sufficient statistics for the
    likelihood are the per-edge traversal counts and per-state visit counts,
    so evaluation cost does not grow with the number of trajectories.

    ``target`` names the designated goal when one exists.  ``absorbing``
    says the paths end because episodes genuinely finish there, in which
    case the behavior model makes the target absorbing.  Paths cut short by
    analysis (truncation at a region boundary) are censored, not finished,
    and keep the plain infinite-horizon model.
    """

    graph: StateGraph
    paths_edges: tuple[np.ndarray, ...]
    target: str | None = None
    absorbing: bool = False

    @property
    def n_paths(self) -> int:
        return len(self.paths_edges)

    @property
    def n_steps(self) -> int:
        return int(sum(len(p) for p in self.paths_edges))

    def edge_counts(self) -> np.ndarray:
        if self.n_steps == 0:
            return np.zeros(self.graph.n_edges)
        flat = np.concatenate(self.paths_edges)
        return np.bincount(flat, minlength=self.graph.n_edges).astype(float)

    def state_counts(self) -> np.ndarray:
        ec = self.edge_counts()
        return np.bincount(self.graph.edge_src, weights=ec, minlength=self.graph.n_states)

    def initial_states(self) -> list[str]:
        g = self.graph
        return [g.states[g.edge_src[p[0]]] for p in self.paths_edges if len(p)]

    def select(self, indices: Iterable[int]) -> "Demonstrations":
        return Demonstrations(
            graph=self.graph,
            paths_edges=tuple(self.paths_edges[int(i)] for i in indices),
            target=self.target,
            absorbing=self.absorbing,
        )

    @classmethod
    def from_steps(
        cls,
        graph: StateGraph,
        paths: Sequence[Sequence[tuple[str, Move]]],
        target: str | None = None,
        absorbing: bool = False,
    ) -> "Demonstrations":
        edge_paths = []
        for path in paths:
            ids = np.empty(len(path), dtype=np.int64)
            for i, (state, move) in enumerate(path):
                ids[i] = _edge_for_move(graph, state, move)
            edge_paths.append(ids)
        return cls(graph=graph, paths_edges=tuple(edge_paths), target=target,
                   absorbing=absorbing)

    @classmethod
    def from_records(
        cls,
        records: Sequence[TrajectoryRecord],
        graph: StateGraph,
        target: str | None = None,
        absorbing: bool = False,
    ) -> "Demonstrations":
        edge_paths = []
        for rec in records:
            ids = np.empty(len(rec.moves), dtype=np.int64)
            for i, step in enumerate(rec.moves):
                ids[i] = graph.edge_index(step.pre, step.post)
            edge_paths.append(ids)
        return cls(graph=graph, paths_edges=tuple(edge_paths), target=target,
                   absorbing=absorbing)


def _edge_for_move(graph: StateGraph, state: str, move: Move) -> int:
    i = graph.index_of(state)
    for e in range(graph.indptr[i], graph.indptr[i + 1]):
        if graph.move_from[e] == move.from_peg and graph.move_to[e] == move.to_peg:
            return e
    from .errors import NotAdjacent

    raise NotAdjacent(f"move {move} is not legal from {state}")


class SoftSolver:
    """Repeated soft solves over one graph with value warm starts.

    ``terminal`` marks a state absorbing, used when demonstrated episodes
    genuinely end there; censored or pooled data solves the plain
    infinite-horizon fixed point.
    """

    def __init__(
        self,
        graph: StateGraph,
        gamma: float,
        tol: float = 1e-12,
        max_iter: int = 100_000,
        terminal: str | None = None,
    ):
        self.graph = graph
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.terminal = frozenset([terminal]) if terminal else frozenset()
        self.terminal_mask = np.zeros(graph.n_states, dtype=bool)
        if terminal:
            self.terminal_mask[graph.index_of(terminal)] = True
        self._v: np.ndarray | None = None
        self._zero_reward = np.zeros(graph.n_edges)

    def solve(self, edge_reward: np.ndarray) -> ValueTable:
        mdp = TabularMdp(
            graph=self.graph, gamma=self.gamma, reward=self._zero_reward,
            terminal=self.terminal,
        )
        vt = soft_value_iteration(
            mdp, reward=edge_reward, tol=self.tol, max_iter=self.max_iter, v0=self._v
        )
        self._v = vt.v
        return vt


def _policy_and_matrix(
    graph: StateGraph,
    vt: ValueTable,
    gamma: float,
    terminal_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    if terminal_mask is not None and terminal_mask.any():
        from .mdp import _segment_logsumexp

        # the masked V is 0 at absorbing states; normalize those rows with
        # the raw logsumexp and zero them afterwards
        norm = np.where(terminal_mask, _segment_logsumexp(vt.q, graph.indptr), vt.v)
        probs = np.exp(vt.q - norm[graph.edge_src])
        probs = np.where(terminal_mask[graph.edge_src], 0.0, probs)
    else:
        probs = np.exp(vt.q - vt.v[graph.edge_src])
    w = np.zeros((graph.n_states, graph.n_states))
    np.add.at(w, (graph.edge_src, graph.edge_dst), gamma * probs)
    return probs, w


def _visitation_derivative(
    graph: StateGraph,
    probs: np.ndarray,
    w: np.ndarray,
    fidx: np.ndarray,
    n_features: int,
    extra_cols: Sequence[np.ndarray] = (),
) -> np.ndarray:
    """dV/dtheta: solve (I - gamma P) dV = E_P[phi(edge)] per state."""
    n = graph.n_states
    total = n_features + len(extra_cols)
    b = np.zeros((n, total))
    mask = fidx >= 0
    if n_features:
        np.add.at(b, (graph.edge_src[mask], fidx[mask]), probs[mask])
    for j, col in enumerate(extra_cols):
        b[:, n_features + j] = np.bincount(
            graph.edge_src, weights=probs * col, minlength=n
        )
    return np.linalg.solve(np.eye(n) - w, b)


def _loglik_value(vt: ValueTable, edge_counts: np.ndarray, state_counts: np.ndarray) -> float:
    return float(edge_counts @ vt.q - state_counts @ vt.v)


def edge_rewards(graph: StateGraph, featmap: FeatureMap, weights: np.ndarray) -> np.ndarray:
    fidx = featmap.arrival_feature(graph)
    r = np.zeros(graph.n_edges)
    mask = fidx >= 0
    r[mask] = np.asarray(weights, dtype=float)[fidx[mask]]
    return r


def demo_solver(demos: Demonstrations, gamma: float, tol: float = 1e-12,
                max_iter: int = 100_000) -> SoftSolver:
    """Solver matching the demonstrations' episode structure."""
    terminal = demos.target if demos.absorbing else None
    if terminal is not None and demos.state_counts()[demos.graph.index_of(terminal)] > 0:
        from .errors import HanoiLabError

        raise HanoiLabError(
            f"demonstrations take actions from the absorbing target {terminal}; "
            "absorbing-episode likelihoods are undefined there"
        )
    return SoftSolver(demos.graph, gamma, tol=tol, max_iter=max_iter, terminal=terminal)


def log_likelihood(
    demos: Demonstrations,
    weights: np.ndarray,
    featmap: FeatureMap,
    gamma: float = 0.95,
    solver: SoftSolver | None = None,
) -> float:
    """Total log P of the demonstrated steps under the softmax policy."""
    graph = demos.graph
    solver = solver or demo_solver(demos, gamma)
    vt = solver.solve(edge_rewards(graph, featmap, np.asarray(weights, dtype=float)))
    return _loglik_value(vt, demos.edge_counts(), demos.state_counts())


def likelihood_gradient(
    demos: Demonstrations,
    weights: np.ndarray,
    featmap: FeatureMap,
    gamma: float = 0.95,
    solver: SoftSolver | None = None,
) -> np.ndarray:
    """Exact gradient of the log-likelihood in the feature weights."""
    graph = demos.graph
    solver = solver or demo_solver(demos, gamma)
    vt = solver.solve(edge_rewards(graph, featmap, np.asarray(weights, dtype=float)))
    _, grad = _loglik_and_gradient(demos, featmap, gamma, vt, solver.terminal_mask)
    return grad


def _loglik_and_gradient(
    demos: Demonstrations,
    featmap: FeatureMap,
    gamma: float,
    vt: ValueTable,
    terminal_mask: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    graph = demos.graph
    ec = demos.edge_counts()
    sc = demos.state_counts()
    loglik = _loglik_value(vt, ec, sc)
    probs, wmat = _policy_and_matrix(graph, vt, gamma, terminal_mask)
    fidx = featmap.arrival_feature(graph)
    dv = _visitation_derivative(graph, probs, wmat, fidx, featmap.size)
    mask = fidx >= 0
    grad = np.bincount(fidx[mask], weights=ec[mask], minlength=featmap.size).astype(float)
    grad += gamma * (ec @ dv[graph.edge_dst])
    grad -= sc @ dv
    return loglik, grad


def soft_threshold(x: np.ndarray, radius: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - radius, 0.0)


@dataclass
class FitOutcome:
    weights: np.ndarray
    train_loglik: float
    penalized: float
    converged: bool
    iterations: int
    trace: list[tuple[int, float]]


def _kkt_gap(grad: np.ndarray, w: np.ndarray, lam: float) -> float:
    """Distance of the gradient from the L1 subdifferential optimality set."""
    if len(w) == 0:
        return 0.0
    active = w != 0.0
    gap = np.where(active, np.abs(grad - lam * np.sign(w)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(np.max(gap))


def _prox_ascend(evaluate, w0: np.ndarray, lam: float, step_size: float,
                 tol: float, max_iter: int,
                 kkt_tol: float = 1e-4) -> tuple[np.ndarray, float, float, bool, int, list]:
    """Accelerated proximal ascent on loglik - lam |w|_1 with restarts.

    Nesterov extrapolation; a proposal that would decrease the objective
    restarts the momentum at the incumbent (a plain proximal step under the
    majorization test cannot lose).  Stops on small weight changes or on a
    small subgradient gap; the latter also ends the unbounded creep along
    separable directions, where the remaining likelihood gain is of the
    order of the gap itself.  ``evaluate`` returns (loglik, gradient).
    """
    x = np.array(w0, dtype=float)
    lik_x, grad_x = evaluate(x)
    obj_x = lik_x - lam * float(np.abs(x).sum())
    y, lik_y, grad_y = x, lik_x, grad_x
    t = 1.0
    step = step_size
    max_step = 100.0 * step_size
    trace = [(0, obj_x)]
    converged = False
    iterations = 0
    if _kkt_gap(grad_x, x, lam) < kkt_tol:
        return x, lik_x, obj_x, True, 0, trace
    for iterations in range(1, max_iter + 1):
        accepted = False
        backtracked = False
        lik_z = grad_z = z = None
        while step >= 1e-12:
            z = soft_threshold(y + step * grad_y, step * lam)
            lik_z, grad_z = evaluate(z)
            dz = z - y
            bound = lik_y + float(grad_y @ dz) - float(dz @ dz) / (2.0 * step)
            if lik_z >= bound - 1e-10:
                accepted = True
                break
            backtracked = True
            step *= 0.5
        if not accepted:
            converged = True
            break
        obj_z = lik_z - lam * float(np.abs(z).sum())
        if obj_z < obj_x - 1e-12:
            # momentum overshot: restart from the best iterate (a plain
            # proximal step from x under the majorization test cannot lose)
            t = 1.0
            y, lik_y, grad_y = x, lik_x, grad_x
            continue
        delta = float(np.max(np.abs(z - x))) if len(x) else 0.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_next) * (z - x)
        x, lik_x, grad_x, obj_x = z, lik_z, grad_z, obj_z
        t = t_next
        trace.append((iterations, obj_x))
        if delta < tol or _kkt_gap(grad_x, x, lam) < kkt_tol:
            converged = True
            break
        if not backtracked:
            step = min(step * 1.5, max_step)
        lik_y, grad_y = evaluate(y)
    return x, lik_x, obj_x, converged, iterations, trace


def fit(
    demos: Demonstrations,
    featmap: FeatureMap,
    lam: float,
    config: IrlConfig = IrlConfig(),
    w0: np.ndarray | None = None,
) -> FitOutcome:
    """Maximize log-likelihood - lam * |w|_1 by proximal gradient ascent.

    The step size starts at ``config.step_size`` and halves whenever a step
    fails to improve the penalized objective.  Hitting the iteration cap
    returns the best iterate with ``converged`` unset rather than raising.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    graph = demos.graph
    solver = demo_solver(demos, config.gamma, tol=config.vi_tol, max_iter=config.vi_max_iter)
    w = np.zeros(featmap.size) if w0 is None else np.array(w0, dtype=float)

    def evaluate(weights: np.ndarray) -> tuple[float, np.ndarray]:
        vt = solver.solve(edge_rewards(graph, featmap, weights))
        return _loglik_and_gradient(demos, featmap, config.gamma, vt, solver.terminal_mask)

    w, loglik, obj, converged, iterations, trace = _prox_ascend(
        evaluate, w, lam, config.step_size, config.tol, config.max_iter, config.kkt_tol
    )
    return FitOutcome(
        weights=w,
        train_loglik=loglik,
        penalized=obj,
        converged=converged,
        iterations=iterations,
        trace=trace,
    )


@dataclass
class IrlResult:
    """Cross-validated fit: weights plus the penalty-selection trace."""

    featmap_mode: str
    feature_states: tuple[str, ...]
    weights: np.ndarray
    selected_lambda: float
    lambda_grid: tuple[float, ...]
    mean_val_loglik: tuple[float, ...]
    train_loglik: float
    converged: bool
    iterations: int
    trace: list[tuple[int, float]]

    def to_dict(self) -> dict:
        return {
            "featmap_mode": self.featmap_mode,
            "feature_states": list(self.feature_states),
            "weights": [float(x) for x in self.weights],
            "selected_lambda": self.selected_lambda,
            "lambda_grid": list(self.lambda_grid),
            "mean_val_loglik": [float(x) for x in self.mean_val_loglik],
            "train_loglik": self.train_loglik,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def cross_validate(
    demos: Demonstrations,
    featmap: FeatureMap,
    config: IrlConfig = IrlConfig(),
) -> IrlResult:
    """Pick lambda by trajectory-level k-fold validation, then refit on all data.

    The winner maximizes the mean held-out log-likelihood; ties go to the
    first grid entry.  Fold assignment is a seeded shuffle, so identical
    seeds give identical folds and selections.
    """
    if demos.n_paths < config.folds:
        raise TooFewTrajectories(
            f"{demos.n_paths} trajectories cannot fill {config.folds} folds"
        )
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(demos.n_paths)
    folds = np.array_split(perm, config.folds)
    warm: list[np.ndarray | None] = [None] * config.folds

    # Sweep the grid from the most penalized end: heavily shrunk fits converge
    # fast and warm-start the flatter low-lambda problems.
    order = sorted(range(len(config.lambda_grid)), key=lambda i: -config.lambda_grid[i])
    mean_val = [0.0] * len(config.lambda_grid)
    for gi in order:
        lam = config.lambda_grid[gi]
        vals = []
        for f, fold in enumerate(folds):
            train_idx = np.concatenate([folds[j] for j in range(config.folds) if j != f])
            out = fit(demos.select(train_idx), featmap, lam, config, w0=warm[f])
            warm[f] = out.weights
            vals.append(
                log_likelihood(demos.select(fold), out.weights, featmap, config.gamma)
            )
        mean_val[gi] = float(np.mean(vals))

    best = int(np.argmax(mean_val))
    final = fit(demos, featmap, config.lambda_grid[best], config)
    return IrlResult(
        featmap_mode=featmap.mode,
        feature_states=featmap.states,
        weights=final.weights,
        selected_lambda=config.lambda_grid[best],
        lambda_grid=config.lambda_grid,
        mean_val_loglik=tuple(mean_val),
        train_loglik=final.train_loglik,
        converged=final.converged,
        iterations=final.iterations,
        trace=final.trace,
    )


def reward_map_export(
    result: IrlResult, featmap: FeatureMap, graph: StateGraph
) -> list[tuple[str, float]]:
    """Per-state rewards scaled by the largest magnitude for display.

    States outside the feature set export 0; an all-zero fit exports all
    zeros.  Nonnegative weights land in [0, 1].
    """
    raw = featmap.state_rewards(graph, result.weights)
    peak = float(np.max(np.abs(raw)))
    if peak > 0:
        raw = raw / peak
    return [(s, float(r)) for s, r in zip(graph.states, raw)]


def reward_map_csv(reward_map: list[tuple[str, float]]) -> str:
    lines = ["state,reward"]
    lines.extend(f"{s},{r!r}" for s, r in reward_map)
    return "\n".join(lines) + "\n"
