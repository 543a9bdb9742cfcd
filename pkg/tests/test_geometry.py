import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combot.geometry import (
    DecodeError,
    DesignDomain,
    Element,
    GeometryError,
    GroundStructure,
    NodeSpec,
    build_ground_structure,
    count_crossings,
    crossing_pairs,
    decode_positions,
    filter_overlays,
    grid_index,
    node_id_at,
    total_length,
)

from oracles import brute_force_crossings, grid_pairs_chebyshev


def line_structure(points, pairs):
    nodes = [NodeSpec(i + 1, tuple(map(float, p))) for i, p in enumerate(points)]
    elements = [Element(k + 1, a, b) for k, (a, b) in enumerate(pairs)]
    return GroundStructure(DesignDomain((1, 1, 1), (2, 1, 1)), nodes, elements)


class TestGroundStructure:
    def test_canonical_element_count(self):
        gs = build_ground_structure(DesignDomain((50, 30, 20), (3, 3, 2), 1))
        assert gs.n_nodes == 18
        assert gs.n_elements == 89

    def test_two_nodes_one_element(self):
        gs = build_ground_structure(DesignDomain((10, 1, 1), (2, 1, 1)))
        assert gs.n_elements == 1

    def test_square_full_connectivity(self):
        gs = build_ground_structure(DesignDomain((1, 1, 1), (2, 2, 1)))
        assert gs.n_elements == 6
        pos = gs.base_positions()
        assert count_crossings(gs.connectivity(), pos) == 1
        (i, j), = crossing_pairs(gs.connectivity(), pos)
        diag = {frozenset((gs.elements[i].node_a, gs.elements[i].node_b)),
                frozenset((gs.elements[j].node_a, gs.elements[j].node_b))}
        assert diag == {frozenset((1, 4)), frozenset((2, 3))}

    @pytest.mark.parametrize("shape,degree", [((3, 3, 2), 1), ((3, 3, 2), 2), ((4, 3, 2), 2), ((3, 2, 3), 1)])
    def test_matches_enumeration(self, shape, degree):
        spacing = (25.0, 15.0, 20.0)
        size = tuple(s * (n - 1) for s, n in zip(spacing, shape))
        gs = build_ground_structure(DesignDomain(size, shape, degree))
        pairs, _ = grid_pairs_chebyshev(shape, spacing, degree)
        assert gs.n_elements == len(pairs)

    def test_canonical_total_length(self):
        gs = build_ground_structure(DesignDomain((50, 30, 20), (3, 3, 2), 1))
        _, lengths = grid_pairs_chebyshev((3, 3, 2), (25.0, 15.0, 20.0), 1)
        assert total_length(gs.connectivity(), gs.base_positions()) == pytest.approx(sum(lengths), rel=1e-12)

    def test_node_numbering(self):
        d = DesignDomain((50, 30, 20), (3, 3, 2))
        assert grid_index(d, 13) == (0, 1, 1)
        assert grid_index(d, 9) == (2, 2, 0)
        assert grid_index(d, 3) == (2, 0, 0)
        assert [grid_index(d, n)[0] for n in (1, 4, 7, 10, 16)] == [0] * 5
        for n in range(1, 19):
            assert node_id_at(d, *grid_index(d, n)) == n

    def test_invalid_domain(self):
        with pytest.raises(GeometryError):
            DesignDomain((1, 1, 1), (1, 1, 1))
        with pytest.raises(GeometryError):
            DesignDomain((0, 1, 1), (2, 2, 2))

    def test_invariants(self):
        with pytest.raises(GeometryError):
            Element(1, 2, 2)
        with pytest.raises(GeometryError):
            line_structure([(0, 0, 0), (1, 0, 0)], [(1, 2), (2, 1)])
        with pytest.raises(GeometryError):
            line_structure([(0, 0, 0), (1, 0, 0)], [(1, 3)])


class TestFilterOverlays:
    def test_long_element_through_node_removed(self):
        gs = line_structure([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(1, 3)])
        assert filter_overlays(gs).n_elements == 0

    def test_diagonal_kept(self):
        gs = line_structure([(0, 0, 0), (1, 1, 0), (1, 0, 0), (0, 1, 0)], [(1, 2)])
        assert filter_overlays(gs).n_elements == 1

    def test_collinear_chain(self):
        gs = line_structure([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(1, 2), (2, 3), (1, 3)])
        out = filter_overlays(gs)
        assert {(e.node_a, e.node_b) for e in out.elements} == {(1, 2), (2, 3)}

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_idempotent(self, degree):
        gs = build_ground_structure(DesignDomain((40, 30, 20), (4, 4, 3), degree))
        again = filter_overlays(gs)
        assert [(e.node_a, e.node_b) for e in again.elements] == [(e.node_a, e.node_b) for e in gs.elements]


class TestDecodePositions:
    def setup_method(self):
        gs = line_structure([(10, 10, 10), (0, 0, 0)], [(1, 2)])
        self.gs = gs.with_wandering((2, 2, 2), 1.0, fixed=[2])

    def test_zero_codes_identity(self):
        np.testing.assert_array_equal(decode_positions(self.gs, np.zeros((2, 3))), self.gs.base_positions())

    def test_offset_arithmetic(self):
        pos = decode_positions(self.gs, {1: (1, 0, -1)})
        np.testing.assert_allclose(pos[0], [11, 10, 9])

    def test_out_of_range(self):
        with pytest.raises(DecodeError):
            decode_positions(self.gs, {1: (3, 0, 0)})

    def test_fixed_anchor_rejects_offsets(self):
        with pytest.raises(DecodeError):
            decode_positions(self.gs, {2: (1, 0, 0)})


class TestCrossings:
    def test_planar_x(self):
        pos = np.array([[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0]], float)
        assert count_crossings([[0, 1], [2, 3]], pos) == 1

    def test_parallel_apart(self):
        pos = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
        assert count_crossings([[0, 1], [2, 3]], pos, cross_tol=0.5) == 0

    def test_shared_node(self):
        pos = np.array([[0, 0, 0], [1, 1, 0], [1, 0, 0]], float)
        assert count_crossings([[0, 1], [0, 2]], pos) == 0

    def test_skew_within_tolerance(self):
        pos = np.array([[0, 0, 0], [2, 0, 0], [1, -1, 0.3], [1, 1, 0.3]], float)
        assert count_crossings([[0, 1], [2, 3]], pos, cross_tol=0.5) == 1
        assert count_crossings([[0, 1], [2, 3]], pos, cross_tol=0.2) == 0

    def test_endpoint_touch_not_counted(self):
        # T-junction: one segment ends on the other's interior -> parameter 0 on the stem
        pos = np.array([[0, 0, 0], [2, 0, 0], [1, 0, 0], [1, 1, 0]], float)
        assert count_crossings([[0, 1], [2, 3]], pos) == 0

    def test_collinear_overlap(self):
        pos = np.array([[0, 0, 0], [2, 0, 0], [1, 0, 0], [3, 0, 0]], float)
        assert count_crossings([[0, 1], [2, 3]], pos) == 1

    def test_empty(self):
        assert count_crossings(np.empty((0, 2), int), np.zeros((0, 3))) == 0

    def test_random_against_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n_nodes = int(rng.integers(4, 16))
            pos = rng.uniform(0, 6, size=(n_nodes, 3))
            pos[:, 2] *= rng.uniform(0, 0.3)  # flatten some trials so crossings are common
            m = int(rng.integers(1, 21))
            el = []
            while len(el) < m:
                a, b = rng.choice(n_nodes, 2, replace=False)
                el.append((int(a), int(b)))
            assert count_crossings(np.array(el), pos) == brute_force_crossings(el, pos)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), shift=st.tuples(*[st.floats(-100, 100)] * 3))
    def test_relabel_and_translate(self, seed, shift):
        rng = np.random.default_rng(seed)
        pos = rng.uniform(0, 5, size=(10, 3))
        pos[:, 2] *= 0.1
        el = np.array([rng.choice(10, 2, replace=False) for _ in range(15)])
        base = count_crossings(el, pos)
        perm = rng.permutation(len(el))
        assert count_crossings(el[perm], pos) == base
        assert count_crossings(el[:, ::-1], pos) == base
        node_perm = rng.permutation(10)
        inv = np.argsort(node_perm)
        assert count_crossings(inv[el], pos[node_perm]) == base
        assert count_crossings(el, pos + np.array(shift)) == base


class TestTotalLength:
    def test_345(self):
        assert total_length([[0, 1]], np.array([[0, 0, 0], [3, 4, 0]], float)) == 5.0

    def test_empty(self):
        assert total_length(np.empty((0, 2), int), np.zeros((2, 3))) == 0.0
