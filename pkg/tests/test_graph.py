import io

import numpy as np
import pytest

from multiscale_embed.exceptions import EdgeListParseError, EmptyGraphError
from multiscale_embed.graph import (
    Graph,
    load_edge_list,
    power_family,
    scale_vector,
    transition_matrix,
)

from conftest import er_graph, make_graph


def brute_force_power(adj_normalized, k):
    """Independent oracle: dense repeated multiplication."""
    out = np.eye(adj_normalized.shape[0])
    for _ in range(k):
        out = out @ adj_normalized
    return out


class TestLoadEdgeList:
    def test_two_lines(self):
        g = load_edge_list(b"a b\nb c\n")
        assert g.node_count == 3
        assert g.edge_count == 2

    def test_duplicates_and_self_loops_collapse(self):
        g = load_edge_list(b"a b\nb a\na a\n")
        assert g.node_count == 2
        assert g.edge_count == 1

    def test_first_appearance_indexing(self):
        g = load_edge_list(b"x y\nz x\n")
        assert g.ids == ("x", "y", "z")
        assert g.index_of("z") == 2
        assert g.id_of(1) == "y"

    def test_comments_and_blank_lines(self):
        g = load_edge_list(b"# header\n\na b\n   \n# tail\n")
        assert g.node_count == 2

    def test_tabs_and_extra_tokens(self):
        g = load_edge_list(b"a\tb\t1.5\nb   c\n")
        assert g.node_count == 3
        assert g.edge_count == 2

    def test_malformed_line_reports_number(self):
        with pytest.raises(EdgeListParseError) as err:
            load_edge_list(b"a b\nonly_one\n")
        assert err.value.line_no == 2

    def test_empty_input(self):
        with pytest.raises(EmptyGraphError):
            load_edge_list(b"# nothing here\n")

    def test_file_like(self):
        g = load_edge_list(io.StringIO("a b\n"))
        assert g.edge_count == 1

    def test_path(self, tmp_path):
        p = tmp_path / "g.edges"
        p.write_text("a b\nb c\n")
        assert load_edge_list(p).node_count == 3


class TestGraphInvariants:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Graph(ids=("a", "b"), edges=((0, 0),))

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError):
            Graph(ids=("a", "a"), edges=())

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Graph(ids=("a", "b"), edges=((0, 2),))

    def test_id_map_round_trips(self):
        g = make_graph(5, [(0, 1), (2, 3)])
        for i in range(5):
            assert g.index_of(g.id_of(i)) == i


class TestTransitionMatrix:
    def test_single_edge(self, pair):
        a = transition_matrix(pair).toarray()
        assert np.array_equal(a, [[0.0, 1.0], [1.0, 0.0]])

    def test_path_rows(self, path3):
        a = transition_matrix(path3).toarray()
        expected = [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]]
        assert np.allclose(a, expected)

    def test_isolated_row_is_zero(self, path3_isolated):
        a = transition_matrix(path3_isolated).toarray()
        assert np.array_equal(a[3], np.zeros(4))

    def test_symmetrization_invariance(self):
        # reversing each line changes first-appearance indexing, so compare
        # entries by node id rather than by index
        fwd = load_edge_list(b"a b\nb c\nc d\n")
        rev = load_edge_list(b"b a\nc b\nd c\n")
        a_fwd = transition_matrix(fwd).toarray()
        a_rev = transition_matrix(rev).toarray()
        for x in fwd.ids:
            for y in fwd.ids:
                assert a_fwd[fwd.index_of(x), fwd.index_of(y)] == pytest.approx(
                    a_rev[rev.index_of(x), rev.index_of(y)], abs=1e-15
                )


class TestPowerFamily:
    def test_path_squared(self, path3):
        fam = power_family(transition_matrix(path3), 2)
        expected = [[0.5, 0, 0.5], [0, 1, 0], [0.5, 0, 0.5]]
        assert np.allclose(fam.matrix(2).toarray(), expected, atol=1e-12)

    def test_k_equals_one(self, path3):
        fam = power_family(transition_matrix(path3), 1)
        assert fam.max_scale == 1

    def test_pair_squared_is_identity(self, pair):
        fam = power_family(transition_matrix(pair), 2)
        assert np.allclose(fam.matrix(2).toarray(), np.eye(2), atol=1e-12)

    def test_rejects_bad_k(self, path3):
        with pytest.raises(ValueError):
            power_family(transition_matrix(path3), 0)

    def test_orders_recorded(self, path3):
        fam = power_family(transition_matrix(path3), 3)
        assert [tm.order for tm in fam.matrices] == [1, 2, 3]

    def test_matches_brute_force_on_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            g = er_graph(int(rng.integers(2, 51)), rng.uniform(0.05, 0.5), rng)
            dense = transition_matrix(g).toarray()
            fam = power_family(transition_matrix(g), 5)
            for k in range(1, 6):
                assert np.max(np.abs(fam.matrix(k).toarray() - brute_force_power(dense, k))) <= 1e-8

    def test_row_sums_stay_stochastic(self):
        rng = np.random.default_rng(3)
        g = er_graph(40, 0.15, rng)
        deg = g.degrees()
        fam = power_family(transition_matrix(g), 8)
        for k in range(1, 9):
            sums = fam.matrix(k).toarray().sum(axis=1)
            assert np.all(np.abs(sums[deg > 0] - 1.0) <= 1e-9)
            assert np.all(sums[deg == 0] == 0.0)

    def test_entries_are_probabilities(self):
        rng = np.random.default_rng(11)
        g = er_graph(30, 0.2, rng)
        fam = power_family(transition_matrix(g), 6)
        for k in range(1, 7):
            dense = fam.matrix(k).toarray()
            assert dense.min() >= 0.0 and dense.max() <= 1.0 + 1e-12

    def test_column_orientation_transposes(self, path3):
        row_fam = power_family(transition_matrix(path3), 2, orientation="row")
        col_fam = power_family(transition_matrix(path3), 2, orientation="column")
        for k in (1, 2):
            assert np.allclose(col_fam.matrix(k).toarray(), row_fam.matrix(k).toarray().T)


class TestScaleVector:
    def test_first_order_row(self, path3):
        fam = power_family(transition_matrix(path3), 2)
        assert np.allclose(scale_vector(fam, 1, 1), [0.5, 0, 0.5])

    def test_second_order_row(self, path3):
        fam = power_family(transition_matrix(path3), 2)
        assert np.allclose(scale_vector(fam, 1, 2), [0, 1, 0])

    def test_isolated_zero_vector(self, path3_isolated):
        fam = power_family(transition_matrix(path3_isolated), 3)
        for k in (1, 2, 3):
            assert np.array_equal(scale_vector(fam, 3, k), np.zeros(4))

    def test_out_of_range(self, path3):
        fam = power_family(transition_matrix(path3), 2)
        with pytest.raises(ValueError):
            scale_vector(fam, 5, 1)
        with pytest.raises(ValueError):
            scale_vector(fam, 0, 3)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        g = er_graph(12, 0.3, rng)
        perm = rng.permutation(12)
        # relabel: node i becomes perm[i]
        relabeled = make_graph(12, [tuple(sorted((perm[i], perm[j]))) for i, j in g.edges])
        fam = power_family(transition_matrix(g), 3)
        fam_p = power_family(transition_matrix(relabeled), 3)
        for k in (1, 2, 3):
            for i in range(12):
                original = scale_vector(fam, i, k)
                permuted = scale_vector(fam_p, perm[i], k)
                assert np.allclose(permuted[perm], original, atol=1e-12)
