import io
import logging

import numpy as np
import pytest

from binomial_car.database.Graph import RegionGraph, check_adjacency, color_classes, neighbor_count
from binomial_car.database.parser import load_adjacency, serialize_adjacency
from binomial_car.errors import GraphError

from .conftest import adjacency_text


class TestRegionGraph:
    def test_state_lattice_shape(self, state_graph):
        assert state_graph.size == 67
        assert state_graph.n_components == 1
        assert state_graph.m.min() >= 1
        # corner, edge and interior cells
        assert neighbor_count(state_graph, 0) == 2
        assert neighbor_count(state_graph, 1) == 3
        assert neighbor_count(state_graph, 11) == 4

    def test_edges_are_unique_and_ordered(self, state_graph):
        edges = state_graph.edges()
        assert np.all(edges[:, 0] < edges[:, 1])
        assert len({tuple(e) for e in edges}) == len(edges)
        assert 2 * len(edges) == state_graph.m.sum()

    def test_weights_symmetric_binary(self, small_graph):
        w = small_graph.weights().toarray()
        np.testing.assert_array_equal(w, w.T)
        np.testing.assert_array_equal(w.sum(axis=1), small_graph.m)
        assert np.all(np.diag(w) == 0)

    def test_neighbor_count_out_of_range(self, small_graph):
        with pytest.raises(IndexError):
            neighbor_count(small_graph, small_graph.size)

    def test_index_unknown_region(self, small_graph):
        assert small_graph.index("C01") == 0
        with pytest.raises(GraphError):
            small_graph.index("nowhere")

    def test_color_classes_are_independent_sets(self, state_graph):
        classes = color_classes(state_graph)
        covered = np.sort(np.concatenate(classes))
        np.testing.assert_array_equal(covered, np.arange(state_graph.size))
        for members in classes:
            chosen = set(members.tolist())
            for i in members:
                assert not chosen.intersection(state_graph.adjacency[i])

    def test_two_components(self):
        g = RegionGraph(region_ids=("a", "b", "c", "d"), adjacency=((1,), (0,), (3,), (2,)))
        assert g.n_components == 2


class TestCheckAdjacency:
    @pytest.mark.parametrize(
        "ids, adjacency, message",
        [
            ((), (), "no regions"),
            (("a", "b"), ((1,),), "adjacency lists"),
            (("a", "a"), ((1,), (0,)), "duplicate"),
            (("a", "b"), ((), (0,)), "no neighbours"),
            (("a", "b"), ((1, 1), (0,)), "twice"),
            (("a", "b"), ((2,), (0,)), "out of range"),
            (("a", "b"), ((0, 1), (0,)), "itself"),
            (("a", "b", "c"), ((1,), (0, 2), (0,)), "asymmetric"),
        ],
    )
    def test_rejects(self, ids, adjacency, message):
        with pytest.raises(GraphError, match=message):
            check_adjacency(ids, adjacency)


class TestAdjacencyParser:
    def test_round_trip(self, state_graph):
        text = serialize_adjacency(state_graph)
        parsed = load_adjacency(io.StringIO(text))
        assert parsed == state_graph
        assert serialize_adjacency(parsed) == text

    def test_comments_and_blank_lines(self):
        text = "# two regions\n\nA: B\n  # trailing comment\nB: A\n"
        g = load_adjacency(io.StringIO(text))
        assert g.region_ids == ("A", "B")
        assert g.adjacency == ((1,), (0,))

    def test_reads_file(self, tmp_path, small_graph):
        path = tmp_path / "map.adj"
        path.write_text(adjacency_text(small_graph))
        assert load_adjacency(path) == small_graph

    def test_asymmetric_edge(self):
        with pytest.raises(GraphError, match="asymmetric"):
            load_adjacency(io.StringIO("A: B\nB: C\nC: B\n"))

    def test_unknown_neighbour_reports_line(self):
        with pytest.raises(GraphError, match="line 2") as err:
            load_adjacency(io.StringIO("A: B\nB: A,Z\n"))
        assert err.value.line == 2

    def test_empty_neighbour_list(self):
        with pytest.raises(GraphError, match="line 1"):
            load_adjacency(io.StringIO("A:\nB: A\n"))

    def test_duplicate_region(self):
        with pytest.raises(GraphError, match="duplicate region id"):
            load_adjacency(io.StringIO("A: B\nB: A\nA: B\n"))

    def test_malformed_line(self):
        with pytest.raises(GraphError, match="line 1"):
            load_adjacency(io.StringIO("A B C\n"))

    def test_empty_source(self):
        with pytest.raises(GraphError, match="no regions"):
            load_adjacency(io.StringIO("# nothing\n"))

    def test_disconnected_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            g = load_adjacency(io.StringIO("A: B\nB: A\nC: D\nD: C\n"))
        assert g.n_components == 2
        assert "2 connected components" in caplog.text
