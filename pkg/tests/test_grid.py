import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairride.grid import DisconnectedGraphError, GridSpec, RoadGraph, build_grid, dump_edge_list, load_edge_list

from conftest import floyd_warshall, random_weighted_grid


def test_row_major_indexing():
    spec = GridSpec(3, 4)
    assert spec.n_cells == 12
    assert spec.cell(2, 1) == 9
    assert spec.coords(9) == (2, 1)


def test_bad_grid_rejected():
    with pytest.raises(ValueError):
        GridSpec(0, 3)


def test_eight_connectivity():
    road = build_grid(GridSpec(3, 3))
    assert len(road.neighbors(4)) == 8
    assert [v for v, _ in road.neighbors(0)] == [1, 3, 4]
    assert all(w == 1 for _, w in road.neighbors(4))


def test_single_cell_grid():
    road = build_grid(GridSpec(1, 1))
    assert road.neighbors(0) == []
    assert road.shortest_path(0, 0) == [0]


def test_disconnected_graph_rejected():
    with pytest.raises(DisconnectedGraphError):
        RoadGraph(4, ((0, 1, 1), (2, 3, 1)))


def test_invalid_edges_rejected():
    with pytest.raises(ValueError):
        RoadGraph(2, ((0, 0, 1),))
    with pytest.raises(ValueError):
        RoadGraph(2, ((0, 1, 1.5),))
    with pytest.raises(ValueError):
        RoadGraph(2, ((0, 2, 1),))


def test_shortest_path_tie_goes_to_lowest_id():
    road = build_grid(GridSpec(3, 3), diagonal_weight=2)
    # 0 -> 4 costs 2 via the diagonal or via 1 or 3; the lowest neighbour id wins
    assert road.shortest_path(0, 4) == [0, 1, 4]


def test_zero_weight_edges():
    road = RoadGraph(3, ((0, 1, 0), (1, 2, 2)))
    assert road.shortest_path_len(0, 2) == 2
    assert road.shortest_path(0, 2) == [0, 1, 2]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_shortest_paths_match_floyd_warshall(rows, cols, seed):
    road = random_weighted_grid(rows, cols, np.random.default_rng(seed))
    fw = floyd_warshall(road)
    n = road.n_cells
    for a in range(n):
        assert np.array_equal(road.distances_from(a), fw[a])
        for b in range(n):
            path = road.shortest_path(a, b)
            assert path[0] == a and path[-1] == b
            assert road.path_length(path) == fw[a, b]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_shortest_path_symmetric_and_triangle(rows, cols, seed):
    road = random_weighted_grid(rows, cols, np.random.default_rng(seed))
    n = road.n_cells
    for a in range(n):
        for b in range(n):
            assert road.shortest_path_len(a, b) == road.shortest_path_len(b, a)
            for c in range(n):
                assert road.shortest_path_len(a, c) <= road.shortest_path_len(a, b) + road.shortest_path_len(b, c)


def test_forward_neighbors_worked_example():
    road = build_grid(GridSpec(3, 7))
    g = lambda k: k - 1  # noqa: E731
    v, dest = g(9), g(7)
    # strictly closer neighbours
    assert sorted(road.forward_neighbors(v, dest)) == [g(3), g(10), g(17)]
    # counting equal-distance neighbours too gives the five-node set of the example
    assert sorted(road.forward_neighbors(v, dest, include_ties=True)) == [g(2), g(3), g(10), g(16), g(17)]


@pytest.mark.parametrize("side", range(1, 11))
def test_forward_neighbour_count_bounded(side):
    road = build_grid(GridSpec(side, side))
    for dest in range(road.n_cells):
        for v in range(road.n_cells):
            strict = road.forward_neighbors(v, dest)
            loose = road.forward_neighbors(v, dest, include_ties=True)
            assert len(strict) <= 5 and len(loose) <= 5
            assert set(strict) <= set(loose)
            d = road.distances_from(dest)
            assert all(d[u] < d[v] for u in strict)


def test_edge_list_round_trip(tmp_path):
    road = random_weighted_grid(3, 4, np.random.default_rng(3))
    p = tmp_path / "road.txt"
    p.write_text(dump_edge_list(road))
    again = load_edge_list(p)
    assert again.n_cells == road.n_cells
    for a in range(road.n_cells):
        assert np.array_equal(again.distances_from(a), road.distances_from(a))


def test_toy_fixture_distances(toy_world):
    road, _ = toy_world
    assert road.shortest_path_len(0, 5) == 4
    assert road.shortest_path_len(1, 5) == 5


def test_edge_counts_small_grids():
    assert len(build_grid(GridSpec(1, 1)).edges) == 0
    road = build_grid(GridSpec(2, 2))
    assert len({(min(u, v), max(u, v)) for u, v, _ in road.edges}) == 6


def test_distance_to_self_and_forward_at_destination():
    road = build_grid(GridSpec(4, 4))
    assert road.shortest_path_len(5, 5) == 0
    assert road.forward_neighbors(5, 5) == []
    assert road.forward_neighbors(5, 5, include_ties=True) == []


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forward_neighbors_against_floyd_warshall(seed):
    rng = np.random.default_rng(seed)
    road = random_weighted_grid(5, 5, rng)
    fw = floyd_warshall(road)
    for _ in range(20):
        v, dest = (int(x) for x in rng.integers(0, 25, 2))
        fwd = road.forward_neighbors(v, dest)
        assert all(fw[u, dest] < fw[v, dest] for u in fwd)
        assert set(fwd) == {u for u, _ in road.neighbors(v) if fw[u, dest] < fw[v, dest]}
