from collections import deque

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hanoilab import toh
from hanoilab.errors import IllegalMove, LimitExceeded, NoEntry, NotAdjacent, UnknownState
from hanoilab.toh import (
    Move,
    all_sub_triangle_corners,
    apply_move,
    bridge_edges,
    build_state_graph,
    critical_entry_state,
    legal_moves,
    path_between,
    shortest_distances,
    sub_triangle_corners,
    sub_triangle_of,
    triangle_of,
)

states = st.text(alphabet="012", min_size=1, max_size=7)


def bfs_oracle(start, goal):
    """Independent BFS using only legal_moves, for cross-checking graph BFS."""
    if start == goal:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        s, d = queue.popleft()
        for _, nxt in legal_moves(s):
            if nxt == goal:
                return d + 1
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, d + 1))
    raise AssertionError("unreachable")


class TestMoves:
    def test_corner_state_has_two_moves(self):
        assert legal_moves("0000") == [
            (Move(0, 1), "1000"),
            (Move(0, 2), "2000"),
        ]

    def test_three_moves_from_1000(self):
        # disk 0 moves off peg 1 both ways; disk 1 can only go to the empty peg
        moves = legal_moves("1000")
        assert moves == [
            (Move(0, 2), "1200"),
            (Move(1, 0), "0000"),
            (Move(1, 2), "2000"),
        ]

    def test_all_states_have_2_or_3_moves(self, graph4):
        counts = {s: len(legal_moves(s)) for s in graph4.states}
        assert set(counts.values()) == {2, 3}
        assert sorted(s for s, c in counts.items() if c == 2) == ["0000", "1111", "2222"]

    def test_apply_move_single_disk(self):
        assert apply_move("0000", Move(0, 2)) == "2000"

    def test_apply_move_reverses(self):
        assert apply_move("2000", Move(2, 0)) == "0000"

    def test_apply_move_empty_source(self):
        with pytest.raises(IllegalMove):
            apply_move("0000", Move(1, 2))

    def test_apply_move_size_violation(self):
        # disk 1 cannot land on disk 0
        with pytest.raises(IllegalMove):
            apply_move("1000", Move(0, 1))

    @given(states)
    def test_moves_match_apply(self, state):
        for move, succ in legal_moves(state):
            assert apply_move(state, move) == succ

    @given(states)
    def test_reversibility(self, state):
        for move, succ in legal_moves(state):
            assert apply_move(succ, move.reversed()) == state


class TestGraph:
    @pytest.mark.parametrize("n,count", [(1, 3), (4, 81), (5, 243)])
    def test_node_counts(self, n, count):
        assert build_state_graph(n).n_states == count

    def test_one_disk_graph_is_a_triangle(self):
        g = build_state_graph(1)
        assert g.n_states == 3
        assert all(g.degree(s) == 2 for s in g.states)

    def test_bounds(self):
        with pytest.raises(LimitExceeded):
            build_state_graph(13)
        with pytest.raises(ValueError):
            build_state_graph(0)

    def test_edges_are_symmetric(self, graph4):
        pairs = set(zip(graph4.edge_src.tolist(), graph4.edge_dst.tolist()))
        assert all((b, a) in pairs for a, b in pairs)

    def test_connected(self, graph4):
        dist = graph4.distance_array("0000")
        assert (dist >= 0).all()

    def test_exactly_two_edges_between_each_triangle_pair(self, graph4):
        crossing = {}
        for a, b in zip(graph4.edge_src, graph4.edge_dst):
            ta, tb = graph4.triangles[a], graph4.triangles[b]
            if ta != tb:
                crossing[frozenset((ta, tb))] = crossing.get(frozenset((ta, tb)), 0) + 1
        assert crossing == {
            frozenset(("T1", "T2")): 2,
            frozenset(("T1", "T3")): 2,
            frozenset(("T2", "T3")): 2,
        }

    def test_cutting_all_bridges_disconnects_into_three_uniform_parts(self, graph4):
        cut = set()
        for a, b in bridge_edges(4):
            cut.add((graph4.index_of(a), graph4.index_of(b)))
            cut.add((graph4.index_of(b), graph4.index_of(a)))
        comps = []
        seen = set()
        for s in range(graph4.n_states):
            if s in seen:
                continue
            comp = {s}
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for e in range(graph4.indptr[u], graph4.indptr[u + 1]):
                    v = int(graph4.edge_dst[e])
                    if (u, v) in cut or v in comp:
                        continue
                    comp.add(v)
                    queue.append(v)
            seen |= comp
            comps.append(comp)
        assert sorted(len(c) for c in comps) == [27, 27, 27]
        for comp in comps:
            assert len({graph4.states[i][-1] for i in comp}) == 1

    def test_adjacency_json_round_trip(self):
        import json

        g = build_state_graph(2)
        data = json.loads(g.to_adjacency_json())
        assert data["n"] == 2
        assert len(data["adjacency"]) == 9
        assert {e["next"] for e in data["adjacency"]["00"]} == {"10", "20"}

    @given(states)
    def test_state_round_trip_through_index(self, state):
        g = build_state_graph(len(state))
        assert g.states[g.index_of(state)] == state


class TestDistances:
    def test_distance_to_self(self, graph4):
        assert shortest_distances(graph4, "2222")["2222"] == 0

    def test_corner_to_corner(self, graph4):
        assert shortest_distances(graph4, "2222")["0000"] == 15

    @pytest.mark.parametrize("n", range(2, 8))
    def test_corner_distance_matches_recursive_oracle(self, n):
        oracle = 1
        for _ in range(n - 1):
            oracle = 2 * oracle + 1  # d(n) = 2 d(n-1) + 1
        g = build_state_graph(n)
        assert g.distance("0" * n, "2" * n) == oracle == 2**n - 1

    def test_adjacent_states_differ_by_at_most_one(self, graph4):
        dist = graph4.distance_array("2201")
        diffs = np.abs(dist[graph4.edge_src] - dist[graph4.edge_dst])
        assert diffs.max() <= 1

    def test_equal_distance_neighbors_exist(self, graph4):
        # 3-cycles guarantee some move leaves the distance unchanged
        dist = graph4.distance_array("2222")
        assert (dist[graph4.edge_src] == dist[graph4.edge_dst]).any()

    def test_unknown_target(self, graph4):
        with pytest.raises(UnknownState):
            shortest_distances(graph4, "333")

    def test_bfs_against_independent_oracle(self, graph4):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a, b = rng.choice(graph4.states, size=2)
            assert graph4.distance(a, b) == bfs_oracle(a, b)

    def test_path_between(self, graph4):
        path = path_between(graph4, "0000", "2222")
        assert len(path) == 16
        assert path[0] == "0000" and path[-1] == "2222"
        for a, b in zip(path, path[1:]):
            graph4.edge_index(a, b)  # every hop is a legal move


class TestTriangles:
    @pytest.mark.parametrize(
        "state,label", [("1112", "T2"), ("2221", "T3"), ("0000", "T1"), ("2201", "T3")]
    )
    def test_triangle_of(self, state, label):
        assert triangle_of(state) == label

    def test_sub_triangle_key(self):
        assert sub_triangle_of("2201") == (1, 0)

    @pytest.mark.parametrize(
        "tri,n,state", [("T2", 4, "1112"), ("T3", 4, "2221"), ("T2", 5, "11112")]
    )
    def test_critical_entry(self, tri, n, state):
        assert critical_entry_state(tri, n) == state

    def test_no_entry_for_start_triangle(self):
        with pytest.raises(NoEntry):
            critical_entry_state("T1", 4)

    def test_entry_state_is_adjacent_to_t1_via_bridge_search(self, graph5):
        # the only T1 <-> T2 edge lands on the claimed entry state
        crossing = [
            (graph5.states[a], graph5.states[b])
            for a, b in zip(graph5.edge_src, graph5.edge_dst)
            if graph5.triangles[a] == "T1" and graph5.triangles[b] == "T2"
        ]
        assert crossing == [("11110", "11112")]

    def test_triangle_sizes(self, graph4):
        from collections import Counter

        assert Counter(graph4.triangles) == {"T1": 27, "T2": 27, "T3": 27}


class TestCorners:
    def test_designated_set_for_four_disks(self):
        assert set(sub_triangle_corners(4)) == {
            "2200", "1100", "1110", "2220", "0012", "2212", "1121", "0021",
        }

    def test_corner_shape(self):
        for n in (3, 4, 5, 6):
            for s in sub_triangle_corners(n):
                assert len(s) == n
                assert len(set(s[: n - 2])) == 1

    def test_full_enumeration_has_27_candidates(self):
        full = all_sub_triangle_corners(4)
        assert len(full) == 27
        assert set(sub_triangle_corners(4)) < set(full)

    def test_subset_size_is_eight(self):
        for n in (3, 4, 5, 7):
            assert len(sub_triangle_corners(n)) == 8
