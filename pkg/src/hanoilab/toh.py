"""Tower of Hanoi combinatorics: states, legal moves, the full transition
graph, shortest distances, and the triangle geometry of the state space.

A configuration of ``n`` disks is the digit string ``s0 s1 ... s(n-1)`` where
``s[i]`` is the peg (0, 1, or 2) holding disk ``i``; disks are numbered from
smallest to largest.  Every digit string is a valid configuration because
disks sharing a peg are implicitly stacked smallest-on-top.
"""

from __future__ import annotations

import json
from collections import deque
from itertools import product
from typing import NamedTuple

import numpy as np

from .errors import IllegalMove, LimitExceeded, NoEntry, NotAdjacent, UnknownState

PEGS = (0, 1, 2)
MAX_DISKS = 12  # 3**12 = 531441 nodes keeps exhaustive algorithms interactive

T1 = "T1"
T2 = "T2"
T3 = "T3"
TRIANGLES = (T1, T2, T3)

# Peg of the largest disk for each triangle of the state graph.  The top
# triangle holds the start configuration; the two lower triangles are entered
# through single bridge edges such as 1110 -> 1112 and 2220 -> 2221.
_TRIANGLE_PEG = {T1: 0, T2: 2, T3: 1}
_PEG_TRIANGLE = {peg: label for label, peg in _TRIANGLE_PEG.items()}


class Move(NamedTuple):
    """Relocation of the top disk of ``from_peg`` onto ``to_peg``."""

    from_peg: int
    to_peg: int

    def reversed(self) -> "Move":
        return Move(self.to_peg, self.from_peg)

    def __str__(self) -> str:
        return f"{self.from_peg}->{self.to_peg}"


def validate_state(state: str) -> str:
    """Return ``state`` unchanged if it is a well-formed digit string."""
    if not isinstance(state, str) or len(state) == 0:
        raise UnknownState(f"not a state string: {state!r}")
    if any(c not in "012" for c in state):
        raise UnknownState(f"state digits must be 0, 1, or 2: {state!r}")
    return state


def start_state(n: int) -> str:
    """All disks on peg 0."""
    return "0" * n


def _peg_tops(state: str) -> list[int | None]:
    """Smallest disk index on each peg, or None when the peg is empty."""
    tops: list[int | None] = [None, None, None]
    for disk, peg_char in enumerate(state):
        peg = ord(peg_char) - 48
        if tops[peg] is None:
            tops[peg] = disk
    return tops


def legal_moves(state: str) -> list[tuple[Move, str]]:
    """All legal moves from ``state`` with their successor configurations.

    The result is sorted by (from_peg, to_peg) and always has 2 or 3 entries:
    the smallest disk can go to either other peg, and at most one move exists
    between the remaining two pegs.
    """
    validate_state(state)
    tops = _peg_tops(state)
    out: list[tuple[Move, str]] = []
    for a in PEGS:
        ta = tops[a]
        if ta is None:
            continue
        for b in PEGS:
            if b == a:
                continue
            tb = tops[b]
            if tb is None or ta < tb:
                succ = state[:ta] + str(b) + state[ta + 1 :]
                out.append((Move(a, b), succ))
    return out


def apply_move(state: str, move: Move) -> str:
    """Successor of ``state`` under ``move``; raises IllegalMove otherwise."""
    validate_state(state)
    a, b = move
    if a not in PEGS or b not in PEGS or a == b:
        raise IllegalMove(f"bad peg pair {a}->{b}")
    tops = _peg_tops(state)
    ta = tops[a]
    if ta is None:
        raise IllegalMove(f"peg {a} is empty in {state}")
    tb = tops[b]
    if tb is not None and tb < ta:
        raise IllegalMove(f"disk {ta} cannot cover smaller disk {tb} on peg {b}")
    return state[:ta] + str(b) + state[ta + 1 :]


def triangle_of(state: str) -> str:
    """Triangle label determined by the peg of the largest disk."""
    validate_state(state)
    return _PEG_TRIANGLE[ord(state[-1]) - 48]


def sub_triangle_of(state: str) -> tuple[int, int]:
    """(largest-disk peg, second-largest-disk peg): the level-2 region key."""
    validate_state(state)
    if len(state) < 2:
        raise UnknownState("sub-triangles need at least 2 disks")
    return (ord(state[-1]) - 48, ord(state[-2]) - 48)


def critical_entry_state(triangle: str, n: int) -> str:
    """The unique state of ``triangle`` adjacent to the start triangle.

    Entering T2 crosses 1..10 -> 1..12 and entering T3 crosses 2..20 -> 2..21,
    so the entry states are 1..12 and 2..21.
    """
    if triangle == T1:
        raise NoEntry("the start triangle has no entry state")
    if triangle == T2:
        return "1" * (n - 1) + "2"
    if triangle == T3:
        return "2" * (n - 1) + "1"
    raise ValueError(f"unknown triangle {triangle!r}")


def all_sub_triangle_corners(n: int) -> list[str]:
    """All 27 corner states of level-2 sub-triangles: p^(n-2) u t."""
    if n < 3:
        raise ValueError("corner enumeration needs n >= 3")
    return [p * (n - 2) + u + t for p, u, t in product("012", repeat=3)]


def sub_triangle_corners(n: int) -> list[str]:
    """The designated 8-state feature set of sub-triangle corner states.

    For 4 disks these are 2200, 1100, 1110, 2220, 0012, 2212, 1121, 0021:
    the two non-start corners of the start sub-triangle, the two bridge
    corners of T1, and the entry sub-triangle corners of T2 and T3 other
    than the entry states themselves.  Other disk counts extend the same
    digit patterns.
    """
    if n < 3:
        raise ValueError("the corner feature set needs n >= 3")
    p = n - 2
    return [
        "2" * p + "00",
        "1" * p + "00",
        "1" * p + "10",
        "2" * p + "20",
        "0" * p + "12",
        "2" * p + "12",
        "1" * p + "21",
        "0" * p + "21",
    ]


def bridge_edges(n: int) -> list[tuple[str, str]]:
    """The three undirected bridge edges joining the triangles pairwise."""
    return [
        ("1" * (n - 1) + "0", "1" * (n - 1) + "2"),  # T1 - T2
        ("2" * (n - 1) + "0", "2" * (n - 1) + "1"),  # T1 - T3
        ("0" * (n - 1) + "2", "0" * (n - 1) + "1"),  # T2 - T3
    ]


class StateGraph:
    """All 3^n configurations with their legal transitions.

    Edges are stored CSR-style: ``edge_src``, ``edge_dst``, ``move_from`` and
    ``move_to`` are flat arrays and ``indptr[i]:indptr[i+1]`` slices out the
    outgoing edges of state ``i``.  States are ordered lexicographically, so
    the index of a state equals its digit string read as a base-3 number.
    Instances are immutable after construction and safe to share.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one disk")
        if n > MAX_DISKS:
            raise LimitExceeded(f"n={n} exceeds the enumeration bound {MAX_DISKS}")
        self.n = n
        self.states: tuple[str, ...] = tuple(
            "".join(digits) for digits in product("012", repeat=n)
        )
        self.n_states = len(self.states)
        self._index = {s: i for i, s in enumerate(self.states)}

        src: list[int] = []
        dst: list[int] = []
        mv_from: list[int] = []
        mv_to: list[int] = []
        indptr = [0]
        for i, s in enumerate(self.states):
            for move, succ in legal_moves(s):
                src.append(i)
                dst.append(self._index[succ])
                mv_from.append(move.from_peg)
                mv_to.append(move.to_peg)
            indptr.append(len(src))
        self.edge_src = np.asarray(src, dtype=np.int32)
        self.edge_dst = np.asarray(dst, dtype=np.int32)
        self.move_from = np.asarray(mv_from, dtype=np.int8)
        self.move_to = np.asarray(mv_to, dtype=np.int8)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.n_edges = len(self.edge_src)
        self._edge_id = {
            (int(a), int(b)): e
            for e, (a, b) in enumerate(zip(self.edge_src, self.edge_dst))
        }
        self.triangles: tuple[str, ...] = tuple(triangle_of(s) for s in self.states)

    # -- lookups ---------------------------------------------------------

    def index_of(self, state: str) -> int:
        validate_state(state)
        idx = self._index.get(state)
        if idx is None:
            raise UnknownState(f"{state!r} is not a {self.n}-disk state")
        return idx

    def __contains__(self, state: str) -> bool:
        return state in self._index

    def degree(self, state: str) -> int:
        i = self.index_of(state)
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, state: str) -> list[tuple[Move, str]]:
        i = self.index_of(state)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return [
            (Move(int(self.move_from[e]), int(self.move_to[e])), self.states[self.edge_dst[e]])
            for e in range(lo, hi)
        ]

    def edge_index(self, state: str, successor: str) -> int:
        """Edge id for the move taking ``state`` to ``successor``."""
        pair = (self.index_of(state), self.index_of(successor))
        e = self._edge_id.get(pair)
        if e is None:
            raise NotAdjacent(f"{state} -> {successor} is not a legal move")
        return e

    def edge_move(self, edge: int) -> Move:
        return Move(int(self.move_from[edge]), int(self.move_to[edge]))

    def triangle_states(self, label: str) -> list[str]:
        return [s for s, t in zip(self.states, self.triangles) if t == label]

    def non_start_states(self) -> list[str]:
        """States outside the start triangle (the target pool)."""
        return [s for s, t in zip(self.states, self.triangles) if t != T1]

    # -- distances -------------------------------------------------------

    def distance_array(self, target: str) -> np.ndarray:
        """Breadth-first hop counts from every state to ``target``."""
        t = self.index_of(target)
        dist = np.full(self.n_states, -1, dtype=np.int32)
        dist[t] = 0
        queue = deque([t])
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for e in range(self.indptr[u], self.indptr[u + 1]):
                v = self.edge_dst[e]
                if dist[v] < 0:
                    dist[v] = du
                    queue.append(v)
        return dist

    def distance(self, a: str, b: str) -> int:
        return int(self.distance_array(b)[self.index_of(a)])

    def to_adjacency_json(self) -> str:
        """Adjacency export keyed by state string."""
        adj = {
            s: [
                {"from": m.from_peg, "to": m.to_peg, "next": succ}
                for m, succ in self.neighbors(s)
            ]
            for s in self.states
        }
        return json.dumps({"n": self.n, "adjacency": adj}, sort_keys=True)


def build_state_graph(n: int) -> StateGraph:
    """Construct the full transition graph over all 3^n configurations."""
    return StateGraph(n)


def shortest_distances(graph: StateGraph, target: str) -> dict[str, int]:
    """Map every state to its hop count from ``target``."""
    dist = graph.distance_array(target)
    return {s: int(d) for s, d in zip(graph.states, dist)}


def path_between(graph: StateGraph, start: str, goal: str) -> list[str]:
    """One shortest state path from ``start`` to ``goal`` (inclusive)."""
    dist = graph.distance_array(goal)
    cur = graph.index_of(start)
    if dist[cur] < 0:
        raise UnknownState("goal unreachable")  # cannot happen: graph is connected
    path = [graph.states[cur]]
    while dist[cur] > 0:
        lo, hi = graph.indptr[cur], graph.indptr[cur + 1]
        nxt = min(
            (int(graph.edge_dst[e]) for e in range(lo, hi)),
            key=lambda v: (dist[v], v),
        )
        cur = nxt
        path.append(graph.states[cur])
    return path
