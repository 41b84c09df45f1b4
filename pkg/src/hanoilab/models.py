"""Feedback-integration model comparison.

Targets are randomized inside the two non-start triangles, and the evaluative
signal is tied to the target, so trajectories are grouped by the sub-triangle
holding their target (six groups), each group gets a designated stand-in
target (the sub-triangle corner nearest the triangle's entry state), and
paths are truncated where they first enter that sub-triangle.  Four
hypotheses about how the signal enters decision-making are then fit per group
by maximum likelihood (L1 on the reward weights, gain k unpenalized) and
ranked by AIC and BIC.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import EmptyDataset, TargetInT1, TooFewTrajectories
from .feedback import feedback_signal_table
from .irl import (
    Demonstrations,
    FeatureMap,
    IrlConfig,
    SoftSolver,
    _policy_and_matrix,
    _prox_ascend,
    _visitation_derivative,
    cross_validate,
    edge_rewards,
)
from .mdp import _segment_logsumexp, target_reward_mdp, value_iteration
from .toh import Move, StateGraph, T2, T3, critical_entry_state
from .trajectories import TrajectoryRecord

MODELS = ("M1", "M2", "M3", "M4")
GROUP_KEYS = [(T2, 0), (T2, 1), (T2, 2), (T3, 0), (T3, 1), (T3, 2)]

# Model-fitting runs historically use a shorter penalty grid than the plain
# reward-recovery runs.
MODEL_LAMBDA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class TrajectoryGroup:
    triangle: str
    sub_index: int
    designated_target: str
    paths: tuple[tuple[tuple[str, Move], ...], ...]
    demos: Demonstrations

    @property
    def size(self) -> int:
        return len(self.paths)

    @property
    def label(self) -> str:
        return f"{self.triangle}-{self.sub_index}"


@dataclass(frozen=True)
class GroupPartition:
    n: int
    graph: StateGraph
    groups: dict[tuple[str, int], TrajectoryGroup]

    def sizes(self) -> dict[str, int]:
        return {g.label: g.size for g in self.groups.values()}


def designated_target(graph: StateGraph, triangle: str, sub_index: int) -> str:
    """Corner of the (triangle, sub_index) sub-triangle nearest the triangle's
    entry state; ties break on the state string."""
    entry = critical_entry_state(triangle, graph.n)
    tri_digit = "2" if triangle == T2 else "1"
    corners = [p * (graph.n - 2) + str(sub_index) + tri_digit for p in "012"]
    dist = graph.distance_array(entry)
    return min(corners, key=lambda s: (int(dist[graph.index_of(s)]), s))


def truncate_path(record: TrajectoryRecord, key: tuple[str, int], n: int) -> list[tuple[str, Move]]:
    """Steps up to and including the first entry into the key sub-triangle.

    Paths that never enter are kept whole; dropping them would bias the data
    toward successful solves.
    """
    tri, sub = key
    digit_last = "2" if tri == T2 else "1"
    digit_second = str(sub)
    steps: list[tuple[str, Move]] = []
    for mv in record.moves:
        steps.append((mv.pre, Move(mv.from_peg, mv.to_peg)))
        post = mv.post
        if post[n - 1] == digit_last and post[n - 2] == digit_second:
            break
    return steps


def partition_groups(
    records: Sequence[TrajectoryRecord],
    n: int = 4,
    graph: StateGraph | None = None,
) -> GroupPartition:
    """Assign each trajectory to the sub-triangle of its target and truncate."""
    if graph is None:
        from .toh import build_state_graph

        graph = build_state_graph(n)
    start = "0" * n
    by_key: dict[tuple[str, int], list[list[tuple[str, Move]]]] = {k: [] for k in GROUP_KEYS}
    for rec in records:
        if rec.n != n or rec.start != start:
            raise ValueError(
                f"record {rec.session_id}/{rec.trial_index} does not match n={n}, start={start}"
            )
        last, second = rec.target[n - 1], rec.target[n - 2]
        if last == "0":
            raise TargetInT1(f"target {rec.target} lies in the start triangle")
        tri = T2 if last == "2" else T3
        key = (tri, int(second))
        by_key[key].append(truncate_path(rec, key, n))

    groups: dict[tuple[str, int], TrajectoryGroup] = {}
    for key in GROUP_KEYS:
        tri, sub = key
        target = designated_target(graph, tri, sub)
        paths = tuple(tuple(p) for p in by_key[key])
        demos = Demonstrations.from_steps(graph, paths, target=target)
        groups[key] = TrajectoryGroup(
            triangle=tri,
            sub_index=sub,
            designated_target=target,
            paths=paths,
            demos=demos,
        )
    return GroupPartition(n=n, graph=graph, groups=groups)


def feedback_table(graph: StateGraph, designated: str, gamma: float = 0.95) -> np.ndarray:
    """Evaluative signal on every edge against the designated target."""
    values = value_iteration(target_reward_mdp(graph, designated, gamma))
    return feedback_signal_table(values)


# -- per-model likelihoods -------------------------------------------------


def _m4_loglik_and_grad(demos: Demonstrations, h: np.ndarray, k: float) -> tuple[float, float]:
    g = demos.graph
    q = k * h
    v = _segment_logsumexp(q, g.indptr)
    ec = demos.edge_counts()
    sc = demos.state_counts()
    loglik = float(ec @ q - sc @ v)
    probs = np.exp(q - v[g.edge_src])
    expected = np.bincount(g.edge_src, weights=probs * h, minlength=g.n_states)
    grad = float(ec @ h - sc @ expected)
    return loglik, grad


def _maximize_scalar(fun, x0: float) -> tuple[float, float]:
    """Maximize a 1-d function; returns (argmax, max)."""
    res = minimize_scalar(lambda x: -fun(x), bracket=(x0 - 1.0, x0 + 1.0), method="brent",
                          options={"xtol": 1e-9, "maxiter": 100})
    return float(res.x), float(-res.fun)


def _fit_m4(demos: Demonstrations, h: np.ndarray) -> tuple[float, float]:
    k, loglik = _maximize_scalar(lambda k: _m4_loglik_and_grad(demos, h, k)[0], 0.0)
    return k, loglik


class _GainModel:
    """Shared machinery for the two (weights, gain) models.

    mode "q_tilt": the planned action values are shifted by k * h after the
    soft solve and renormalized.  mode "r_shift": k * h joins the reward
    before the solve.
    """

    def __init__(self, demos: Demonstrations, featmap: FeatureMap, h: np.ndarray,
                 config: IrlConfig, mode: str):
        self.demos = demos
        self.featmap = featmap
        self.h = h
        self.config = config
        self.mode = mode
        self.graph = demos.graph
        self.solver = SoftSolver(
            self.graph, config.gamma, tol=config.vi_tol, max_iter=config.vi_max_iter,
            terminal=demos.target if demos.absorbing else None,
        )
        self.fidx = featmap.arrival_feature(self.graph)
        self.ec = demos.edge_counts()
        self.sc = demos.state_counts()
        self._base_key: bytes | None = None  # q_tilt base solve depends on w only
        self._base_q: np.ndarray | None = None
        self._base_dv: np.ndarray | None = None

    def _base_solve(self, w: np.ndarray, with_dv: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
        key = np.asarray(w, dtype=float).tobytes()
        if key != self._base_key or (with_dv and self._base_dv is None):
            vt = self.solver.solve(edge_rewards(self.graph, self.featmap, w))
            self._base_key = key
            self._base_q = vt.q
            self._base_dv = None
            if with_dv:
                probs, wmat = _policy_and_matrix(
                    self.graph, vt, self.config.gamma, self.solver.terminal_mask
                )
                self._base_dv = _visitation_derivative(
                    self.graph, probs, wmat, self.fidx, self.featmap.size
                )
        return self._base_q, self._base_dv

    def loglik(self, w: np.ndarray, k: float) -> float:
        g = self.graph
        if self.mode == "q_tilt":
            q = self._base_solve(w)[0] + k * self.h
            v = _segment_logsumexp(q, g.indptr)
        else:
            vt = self.solver.solve(edge_rewards(g, self.featmap, w) + k * self.h)
            q, v = vt.q, vt.v
        return float(self.ec @ q - self.sc @ v)

    def loglik_and_grad_k(self, w: np.ndarray, k: float) -> tuple[float, float]:
        """Cheap evaluation for the 1-d gain search at fixed weights."""
        g = self.graph
        gamma = self.config.gamma
        if self.mode == "q_tilt":
            q = self._base_solve(w)[0] + k * self.h
            v = _segment_logsumexp(q, g.indptr)
            probs = np.exp(q - v[g.edge_src])
            loglik = float(self.ec @ q - self.sc @ v)
            expected = np.bincount(g.edge_src, weights=probs * self.h, minlength=g.n_states)
            return loglik, float(self.ec @ self.h - self.sc @ expected)
        vt = self.solver.solve(edge_rewards(g, self.featmap, w) + k * self.h)
        probs, wmat = _policy_and_matrix(g, vt, gamma, self.solver.terminal_mask)
        dv_h = _visitation_derivative(g, probs, wmat, self.fidx, 0, extra_cols=(self.h,))
        loglik = float(self.ec @ vt.q - self.sc @ vt.v)
        grad = float(self.ec @ self.h)
        grad += gamma * float(self.ec @ dv_h[g.edge_dst, 0])
        grad -= float(self.sc @ dv_h[:, 0])
        return loglik, grad

    def loglik_and_grad(self, w: np.ndarray, k: float) -> tuple[float, np.ndarray, float]:
        """Returns (loglik, grad_w, grad_k)."""
        g = self.graph
        gamma = self.config.gamma
        mask = self.fidx >= 0
        if self.mode == "q_tilt":
            base_q, dv = self._base_solve(w, with_dv=True)
            q = base_q + k * self.h
            v = _segment_logsumexp(q, g.indptr)
            probs = np.exp(q - v[g.edge_src])
            loglik = float(self.ec @ q - self.sc @ v)
            # dQ'/dw = phi(edge) + gamma dV_base(succ); dQ'/dk = h
            edge_mat = gamma * dv[g.edge_dst]
            edge_mat[mask, self.fidx[mask]] += 1.0
            grad_w = self.ec @ edge_mat
            expect = np.zeros((g.n_states, self.featmap.size))
            np.add.at(expect, g.edge_src, probs[:, None] * edge_mat)
            grad_w -= self.sc @ expect
            grad_k = float(self.ec @ self.h
                           - self.sc @ np.bincount(g.edge_src, weights=probs * self.h,
                                                   minlength=g.n_states))
            return loglik, grad_w, grad_k
        vt = self.solver.solve(edge_rewards(g, self.featmap, w) + k * self.h)
        probs, wmat = _policy_and_matrix(g, vt, gamma, self.solver.terminal_mask)
        dv = _visitation_derivative(g, probs, wmat, self.fidx, self.featmap.size,
                                    extra_cols=(self.h,))
        loglik = float(self.ec @ vt.q - self.sc @ vt.v)
        grad = np.bincount(self.fidx[mask], weights=self.ec[mask],
                           minlength=self.featmap.size).astype(float)
        grad = np.append(grad, float(self.ec @ self.h))
        grad += gamma * (self.ec @ dv[g.edge_dst])
        grad -= self.sc @ dv
        return loglik, grad[:-1], float(grad[-1])


def _search_gain(model: _GainModel, w: np.ndarray, k0: float) -> float:
    """Exact 1-d maximization over the gain at fixed weights.

    Secant iteration on the analytic derivative, with a bracketing fallback
    when the surface is too flat or the data is separable (derivative stays
    positive and the maximizer runs off to large gains).
    """
    k = k0
    _, g = model.loglik_and_grad_k(w, k)
    k_prev, g_prev = k, g
    k = k + (0.25 if g > 0 else -0.25)
    for _ in range(40):
        _, g = model.loglik_and_grad_k(w, k)
        if abs(g) < 1e-9 or abs(k - k_prev) < 1e-10:
            return k
        denom = g - g_prev
        if denom == 0.0:
            break
        step = -g * (k - k_prev) / denom
        step = float(np.clip(step, -25.0, 25.0))
        k_prev, g_prev = k, g
        k = k + step
        if abs(k) > 1e4:
            return k_prev  # separable direction; gains this large are flat
    res = minimize_scalar(
        lambda x: -model.loglik(w, x), bracket=(k - 1.0, k + 1.0), method="brent",
        options={"xtol": 1e-8, "maxiter": 60},
    )
    return float(res.x)


def _fit_with_gain(
    model: _GainModel,
    lam: float,
    w0: np.ndarray | None = None,
    k0: float = 0.0,
) -> tuple[np.ndarray, float, float, bool]:
    """Alternate proximal steps on w with an exact 1-d search on k.

    Starting the alternation at k=0 makes the first w phase an ordinary
    reward-only fit, so the final penalized objective can only improve on it.
    Returns (w, k, loglik, converged).
    """
    cfg = model.config
    w = np.zeros(model.featmap.size) if w0 is None else np.array(w0, dtype=float)
    k = k0
    converged = False
    inner_cap = min(400, max(50, cfg.max_iter // 10))
    for _ in range(25):
        moved = 0.0
        # w phase: proximal ascent at fixed k
        def evaluate(weights, _k=k):
            loglik, grad_w, _ = model.loglik_and_grad(weights, _k)
            return loglik, grad_w

        w_new, _, _, _, _, _ = _prox_ascend(
            evaluate, w, lam, cfg.step_size, cfg.tol, inner_cap, cfg.kkt_tol
        )
        moved = max(moved, float(np.max(np.abs(w_new - w))) if len(w) else 0.0)
        w = w_new
        # k phase: exact 1-d search at fixed w
        k_new = _search_gain(model, w, k)
        if model.loglik(w, k_new) >= model.loglik(w, k):
            moved = max(moved, abs(k_new - k))
            k = k_new
        if moved < cfg.tol:
            converged = True
            break
    return w, k, model.loglik(w, k), converged


@dataclass
class ModelFit:
    """One model fit on one group."""

    model: str
    featmap_mode: str
    group_label: str
    p: int
    o: int
    weights: np.ndarray | None
    k: float | None
    loglik: float
    selected_lambda: float | None
    aic: float
    bic: float
    aic_norm: float
    bic_norm: float
    converged: bool


def information_criteria(p: int, o: int, loglik: float) -> tuple[float, float, float, float]:
    """AIC = 2p - 2 logL, BIC = p ln(o) - 2 logL, and both divided by o."""
    aic = 2.0 * p - 2.0 * loglik
    bic = p * math.log(o) - 2.0 * loglik
    return aic, bic, aic / o, bic / o


def _cv_gain_model(
    demos: Demonstrations,
    featmap: FeatureMap,
    h: np.ndarray,
    config: IrlConfig,
    mode: str,
) -> tuple[np.ndarray, float, float, float, bool]:
    """Lambda selection for a (w, k) model; returns (w, k, loglik, lam, converged)."""
    if demos.n_paths < config.folds:
        raise TooFewTrajectories(
            f"{demos.n_paths} trajectories cannot fill {config.folds} folds"
        )
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(demos.n_paths)
    folds = np.array_split(perm, config.folds)
    warm_w: list[np.ndarray | None] = [None] * config.folds
    warm_k = [0.0] * config.folds

    order = sorted(range(len(config.lambda_grid)), key=lambda i: -config.lambda_grid[i])
    mean_val = [0.0] * len(config.lambda_grid)
    for gi in order:
        lam = config.lambda_grid[gi]
        vals = []
        for f, fold in enumerate(folds):
            train_idx = np.concatenate([folds[j] for j in range(config.folds) if j != f])
            train_model = _GainModel(demos.select(train_idx), featmap, h, config, mode)
            w, k, _, _ = _fit_with_gain(train_model, lam, w0=warm_w[f], k0=warm_k[f])
            warm_w[f], warm_k[f] = w, k
            val_model = _GainModel(demos.select(fold), featmap, h, config, mode)
            vals.append(val_model.loglik(w, k))
        mean_val[gi] = float(np.mean(vals))
    best = int(np.argmax(mean_val))
    lam = config.lambda_grid[best]
    w, k, loglik, converged = _fit_with_gain(_GainModel(demos, featmap, h, config, mode), lam)
    return w, k, loglik, lam, converged


def fit_model(
    group: TrajectoryGroup,
    model: str,
    featmap: FeatureMap,
    config: IrlConfig = IrlConfig(lambda_grid=MODEL_LAMBDA_GRID),
    h: np.ndarray | None = None,
) -> ModelFit:
    """Maximum-likelihood fit of one feedback-integration model on one group."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if group.size == 0:
        raise EmptyDataset(f"group {group.label} holds no trajectories")
    demos = group.demos
    if h is None:
        h = feedback_table(demos.graph, group.designated_target, config.gamma)

    if model == "M1":
        res = cross_validate(demos, featmap, config)
        weights, k, loglik = res.weights, None, res.train_loglik
        lam, converged, p = res.selected_lambda, res.converged, featmap.size
    elif model == "M4":
        k, loglik = _fit_m4(demos, h)
        weights, lam, converged, p = None, None, True, 1
    else:
        mode = "q_tilt" if model == "M2" else "r_shift"
        weights, k, loglik, lam, converged = _cv_gain_model(demos, featmap, h, config, mode)
        p = featmap.size + 1

    o = group.size
    aic, bic, aic_norm, bic_norm = information_criteria(p, o, loglik)
    return ModelFit(
        model=model,
        featmap_mode=featmap.mode,
        group_label=group.label,
        p=p,
        o=o,
        weights=weights,
        k=k,
        loglik=loglik,
        selected_lambda=lam,
        aic=aic,
        bic=bic,
        aic_norm=aic_norm,
        bic_norm=bic_norm,
        converged=converged,
    )


@dataclass
class ReportRow:
    group: str
    model: str
    featmap: str
    p: int | None
    o: int
    loglik: float | None
    aic_norm: float | None
    bic_norm: float | None
    aic_winner: bool
    bic_winner: bool
    warning: str = ""


@dataclass
class ModelSelectionReport:
    rows: list[ReportRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("group,model,featmap,p,o,logL,AIC_norm,BIC_norm,aic_winner,bic_winner\n")
        for r in self.rows:
            fields = [
                r.group,
                r.model,
                r.featmap,
                "" if r.p is None else str(r.p),
                str(r.o),
                "" if r.loglik is None else repr(r.loglik),
                "" if r.aic_norm is None else repr(r.aic_norm),
                "" if r.bic_norm is None else repr(r.bic_norm),
                str(r.aic_winner).lower(),
                str(r.bic_winner).lower(),
            ]
            buf.write(",".join(fields) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        buf = io.StringIO()
        header = f"{'group':8} {'featmap':12} {'model':6} {'p':>4} {'o':>5} {'logL':>12} {'AIC/o':>9} {'BIC/o':>9}  winners"
        buf.write(header + "\n")
        buf.write("-" * len(header) + "\n")
        for r in self.rows:
            if r.warning:
                buf.write(f"{r.group:8} {r.featmap:12} {'-':6} {'-':>4} {r.o:>5} {'-':>12} {'-':>9} {'-':>9}  {r.warning}\n")
                continue
            marks = ("AIC" if r.aic_winner else "") + ("+BIC" if r.aic_winner and r.bic_winner else ("BIC" if r.bic_winner else ""))
            buf.write(
                f"{r.group:8} {r.featmap:12} {r.model:6} {r.p:>4} {r.o:>5} "
                f"{r.loglik:>12.3f} {r.aic_norm:>9.3f} {r.bic_norm:>9.3f}  {marks}\n"
            )
        return buf.getvalue()

    def winners(self, criterion: str) -> dict[tuple[str, str], str]:
        """(group, featmap) -> winning model under 'aic' or 'bic'."""
        flag = "aic_winner" if criterion == "aic" else "bic_winner"
        return {
            (r.group, r.featmap): r.model
            for r in self.rows
            if getattr(r, flag) and not r.warning
        }


def model_selection_report(
    partition: GroupPartition,
    config: IrlConfig = IrlConfig(lambda_grid=MODEL_LAMBDA_GRID),
    featmap_modes: Sequence[str] = ("subset8", "all_states"),
    models: Sequence[str] = MODELS,
) -> ModelSelectionReport:
    """Fit every (group, model, feature-mode) combination and flag winners.

    Empty groups are reported as warning rows and excluded from the winner
    computation.  Within a group, models M2 and M3 are warm-started from the
    structure of the problem itself (alternation begins at k = 0), so their
    likelihoods dominate M1's up to optimizer tolerance.
    """
    rows: list[ReportRow] = []
    graph = partition.graph
    for mode in featmap_modes:
        featmap = FeatureMap.for_mode(mode, graph)
        for key in GROUP_KEYS:
            group = partition.groups[key]
            if group.size == 0:
                rows.append(
                    ReportRow(
                        group=group.label, model="", featmap=mode, p=None,
                        o=0, loglik=None, aic_norm=None, bic_norm=None,
                        aic_winner=False, bic_winner=False,
                        warning="empty group: excluded",
                    )
                )
                continue
            h = feedback_table(graph, group.designated_target, config.gamma)
            fits = [fit_model(group, m, featmap, config, h=h) for m in models]
            best_aic = min(f.aic_norm for f in fits)
            best_bic = min(f.bic_norm for f in fits)
            for f in fits:
                rows.append(
                    ReportRow(
                        group=f.group_label, model=f.model, featmap=mode,
                        p=f.p, o=f.o, loglik=f.loglik,
                        aic_norm=f.aic_norm, bic_norm=f.bic_norm,
                        aic_winner=f.aic_norm == best_aic,
                        bic_winner=f.bic_norm == best_bic,
                    )
                )
    return ModelSelectionReport(rows=rows)
