import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cliques, graphs
from minmaxcc.graph import (
    GraphFormatError,
    PositiveGraph,
    closed_neighborhood,
    connected_components,
    degree_split,
    dump_graph,
    iter_edge_list,
    load_graph,
    planted_instance,
    read_partition,
    symdiff_size,
    write_partition,
)
from minmaxcc.oracle import brute_force_opt


def brute_symdiff(g, u, v):
    return len(set(closed_neighborhood(g, u).tolist()) ^ set(closed_neighborhood(g, v).tolist()))


class TestLoad:
    def test_triangle(self):
        g = load_graph("3\n0 1\n1 2\n0 2")
        assert g.n == 3 and g.m == 3

    def test_path_degrees(self):
        g = load_graph("3\n0 1\n1 2")
        assert g.deg.tolist() == [1, 2, 1]

    def test_self_loop_names_line(self):
        with pytest.raises(GraphFormatError, match="line 2") as exc:
            load_graph("2\n0 0")
        assert exc.value.line == 2

    @pytest.mark.parametrize("text, line", [
        ("3\n0 1\n1 x", 3),
        ("3\n0 3", 2),
        ("3\n0 1 2", 2),
        ("", 1),
        ("a\n", 1),
    ])
    def test_malformed(self, text, line):
        with pytest.raises(GraphFormatError) as exc:
            load_graph(text)
        assert exc.value.line == line

    def test_duplicates_collapse_with_warning(self):
        with pytest.warns(UserWarning, match="2 duplicate"):
            g = load_graph("3\n0 1\n1 0\n0 1\n1 2\n")
        assert g.edges.tolist() == [[0, 1], [1, 2]]

    def test_blank_lines_and_orientation(self):
        g = load_graph("\n4\n\n3 1\n2 0\n")
        assert g.edges.tolist() == [[0, 2], [1, 3]]

    @given(graphs())
    def test_dump_roundtrip(self, g):
        h = load_graph(dump_graph(g))
        assert h.n == g.n and np.array_equal(h.edges, g.edges)

    def test_iter_edge_list_streams(self):
        it = iter_edge_list(["3", "0 1", "", "2 1"])
        assert list(it) == [3, (0, 1), (2, 1)]


class TestInvariants:
    @given(graphs())
    def test_adjacency(self, g):
        assert g.deg.sum() == 2 * g.m
        for u in range(g.n):
            nb = g.neighbors(u)
            assert np.all(np.diff(nb) > 0)
            assert len(nb) == g.deg[u]
            for v in nb.tolist():
                assert u in g.neighbors(v).tolist()
                assert u != v

    @given(graphs(min_n=1))
    def test_slot_edge_matches_edges(self, g):
        for u in range(g.n):
            lo, hi = g.indptr[u], g.indptr[u + 1]
            for v, e in zip(g.indices[lo:hi].tolist(), g.slot_edge[lo:hi].tolist()):
                assert sorted((u, v)) == g.edges[e].tolist()


class TestClosedNeighborhood:
    def test_path(self, path3):
        assert closed_neighborhood(path3, 1).tolist() == [0, 1, 2]

    def test_triangle(self, triangle):
        assert closed_neighborhood(triangle, 0).tolist() == [0, 1, 2]

    def test_isolated(self):
        g = PositiveGraph.from_pairs(4, [(0, 1)])
        assert closed_neighborhood(g, 3).tolist() == [3]

    def test_out_of_range(self, path3):
        with pytest.raises(IndexError):
            closed_neighborhood(path3, 3)


class TestSymdiff:
    def test_examples(self, path3, triangle):
        assert symdiff_size(path3, 0, 2) == 2
        assert symdiff_size(path3, 1, 1) == 0
        assert symdiff_size(triangle, 0, 1) == 0

    def test_out_of_range(self, path3):
        with pytest.raises(IndexError):
            symdiff_size(path3, 0, 5)

    @given(graphs(min_n=1), st.data())
    def test_matches_sets_and_is_symmetric(self, g, data):
        u = data.draw(st.integers(0, g.n - 1))
        v = data.draw(st.integers(0, g.n - 1))
        d = brute_symdiff(g, u, v)
        assert symdiff_size(g, u, v) == d == symdiff_size(g, v, u)
        assert (d == 0) == (closed_neighborhood(g, u).tolist() == closed_neighborhood(g, v).tolist())

    @given(graphs(min_n=1), st.data())
    def test_triangle_inequality(self, g, data):
        u, v, w = (data.draw(st.integers(0, g.n - 1)) for _ in range(3))
        assert symdiff_size(g, u, w) <= symdiff_size(g, u, v) + symdiff_size(g, v, w)

    @given(graphs(min_n=1), st.data())
    def test_cap(self, g, data):
        u = data.draw(st.integers(0, g.n - 1))
        v = data.draw(st.integers(0, g.n - 1))
        cap = data.draw(st.integers(0, 2 * g.n))
        exact = symdiff_size(g, u, v)
        capped = symdiff_size(g, u, v, cap=cap)
        if exact <= cap:
            assert capped == exact
        else:
            assert capped > cap


class TestDegreeSplit:
    def test_triangle(self, triangle):
        assert degree_split(triangle, 1, 0).v_low.tolist() == [0, 1, 2]
        assert degree_split(triangle, 0, 0).v_high.tolist() == [0, 1, 2]

    def test_two_cliques(self, two_cliques):
        assert degree_split(two_cliques, 1, 0).v_high.tolist() == list(range(10))

    def test_rational_threshold(self):
        # (3 + 0.5)·2 = 7 exactly: degree 7 is low
        g = cliques([8])
        assert degree_split(g, 2, 0.5).v_high.tolist() == []
        assert degree_split(g, 2, 0.4).v_high.tolist() == list(range(8))

    @given(graphs(), st.integers(0, 4), st.sampled_from([0, 0.1, 0.5, 0.9]))
    def test_partition(self, g, phi, eta):
        s = degree_split(g, phi, eta)
        assert sorted(s.v_low.tolist() + s.v_high.tolist()) == list(range(g.n))
        for v in range(g.n):
            assert (v in s.v_low) == (g.deg[v] <= (3 + eta) * phi + 1e-12)

    def test_bad_args(self, triangle):
        with pytest.raises(ValueError):
            degree_split(triangle, -1)
        with pytest.raises(ValueError):
            degree_split(triangle, 1, 1.0)


class TestComponents:
    def test_examples(self):
        assert connected_components(range(5), [(0, 1), (1, 2)]) == [[0, 1, 2], [3], [4]]
        assert connected_components(range(3), []) == [[0], [1], [2]]

    def test_two_cliques(self, two_cliques):
        # all clique edges pass a 2φ query at φ = 1 (identical closed neighbourhoods)
        edges = [e for e in two_cliques.edges.tolist() if symdiff_size(two_cliques, *e) <= 2]
        assert connected_components(range(10), edges) == [list(range(5)), list(range(5, 10))]

    def test_foreign_endpoint(self):
        with pytest.raises(ValueError):
            connected_components([0, 1], [(0, 2)])

    @given(graphs())
    def test_partition_property(self, g):
        comps = connected_components(range(g.n), g.edges.tolist())
        label = {v: i for i, c in enumerate(comps) for v in c}
        assert sorted(label) == list(range(g.n))
        assert all(label[u] == label[v] for u, v in g.edges.tolist())
        assert [c[0] for c in comps] == sorted(c[0] for c in comps)


class TestPlanted:
    def test_zero_noise(self):
        g, truth = planted_instance(10, 2, 0.0, seed=3)
        assert np.array_equal(g.edges, cliques([5, 5]).edges)
        assert truth.tolist() == [0] * 5 + [1] * 5
        g, _ = planted_instance(6, 1, 0.0, seed=0)
        assert g.m == 15

    def test_deterministic(self):
        a, _ = planted_instance(100, 4, 0.05, seed=7)
        b, _ = planted_instance(100, 4, 0.05, seed=7)
        assert np.array_equal(a.edges, b.edges)

    def test_noise_rate(self):
        g, truth = planted_instance(400, 4, 0.05, seed=1)
        same = truth[g.edges[:, 0]] == truth[g.edges[:, 1]]
        intra_pairs = 4 * 100 * 99 // 2
        inter_pairs = 400 * 399 // 2 - intra_pairs
        assert abs(same.sum() / intra_pairs - 0.95) < 0.01
        assert abs((~same).sum() / inter_pairs - 0.05) < 0.005

    @pytest.mark.parametrize("n", range(2, 10))
    def test_zero_noise_opt_zero(self, n):
        g, _ = planted_instance(n, max(1, n // 3), 0.0, seed=n)
        assert brute_force_opt(g).opt == 0

    @pytest.mark.parametrize("args", [(5, 0, 0.1), (5, 6, 0.1), (5, 2, 0.5), (5, 2, -0.1)])
    def test_bad_args(self, args):
        with pytest.raises(ValueError):
            planted_instance(*args, seed=0)

    def test_small_noisy_opt_small(self):
        # the n = 100 instance cannot be enumerated; sub-sampled blocks can
        for seed in range(5):
            g, _ = planted_instance(9, 3, 0.05, seed=seed)
            assert brute_force_opt(g).opt <= 2


def test_partition_roundtrip():
    labels = [0, 0, 1, 2, 1]
    assert read_partition(write_partition(labels)).tolist() == labels
    with pytest.raises(ValueError):
        read_partition("0 1\n2 1\n")


def test_from_pairs_validation():
    with pytest.raises(ValueError):
        PositiveGraph.from_pairs(2, [(0, 2)])
    with pytest.raises(ValueError):
        PositiveGraph.from_pairs(2, [(1, 1)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PositiveGraph.from_pairs(2, [(0, 1)])
