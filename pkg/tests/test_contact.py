import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opsim import backend
from opsim.contact import (
    ContactEvent,
    contacts_at_step,
    in_contact,
    pairs_brute_force,
    pairs_grid,
    write_contact_trace,
)
from opsim.core import MobilityState, NodeClass, NodeRecord


def make_node(i, cell, rng=60.0, node_class=NodeClass.INTERMEDIARY_EMPLOYED):
    return NodeRecord(
        id=i, node_class=node_class, home_cell=cell, radio_range_cells=rng,
        current_state=MobilityState.HOME, current_cell=cell,
    )


class TestInContact:
    def test_within_shared_range(self):
        assert in_contact((100, 100), (100, 140), 60, 60)  # distance 40

    def test_limited_by_smaller_range(self):
        assert not in_contact((100, 100), (100, 140), 35, 60)  # min range 35 < 40

    def test_same_cell_always(self):
        assert in_contact((5, 5), (5, 5), 1, 1)

    def test_boundary_is_inclusive(self):
        assert in_contact((0, 0), (0, 40), 40, 50)

    @given(
        st.tuples(st.integers(0, 800), st.integers(0, 800)),
        st.tuples(st.integers(0, 800), st.integers(0, 800)),
        st.floats(1, 200),
        st.floats(1, 200),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, a, b, ra, rb):
        assert in_contact(a, b, ra, rb) == in_contact(b, a, rb, ra)

    @given(
        st.tuples(st.integers(0, 800), st.integers(0, 800)),
        st.tuples(st.integers(0, 800), st.integers(0, 800)),
        st.floats(1, 150),
        st.floats(1, 150),
        st.floats(0, 50),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_range(self, a, b, ra, rb, bump):
        if in_contact(a, b, ra, rb):
            assert in_contact(a, b, ra + bump, rb + bump)


def random_instance(rng, n):
    xs = rng.integers(0, 820, n).astype(np.int32)
    ys = rng.integers(0, 820, n).astype(np.int32)
    rs = np.maximum(1.0, rng.normal(60, 20, n))
    return xs, ys, rs


class TestPairSearch:
    @pytest.mark.parametrize("n", [0, 1, 2, 10, 200])
    def test_grid_matches_brute_force(self, n):
        rng = np.random.default_rng(n)
        xs, ys, rs = random_instance(rng, n)
        a1, b1 = pairs_brute_force(xs, ys, rs)
        a2, b2 = pairs_grid(xs, ys, rs)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(b1, b2)

    @pytest.mark.skipif(not backend.HAVE_COMPILED, reason="extension not built")
    @pytest.mark.parametrize("seed", range(10))
    def test_compiled_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 400))
        xs, ys, rs = random_instance(rng, n)
        a1, b1 = pairs_brute_force(xs, ys, rs)
        a2, b2 = backend.COMPILED_BACKEND.contact_pairs(xs, ys, rs)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(b1, b2)

    @given(st.integers(0, 2**31 - 1), st.integers(2, 60))
    @settings(max_examples=60, deadline=None)
    def test_all_searches_agree(self, seed, n):
        rng = np.random.default_rng(seed)
        xs, ys, rs = random_instance(rng, n)
        ref = pairs_brute_force(xs, ys, rs)
        for fn in filter(None, [pairs_grid, backend.HAVE_COMPILED and backend.COMPILED_BACKEND.contact_pairs]):
            got = fn(xs, ys, rs)
            np.testing.assert_array_equal(ref[0], got[0])
            np.testing.assert_array_equal(ref[1], got[1])

    def test_pairs_sorted(self):
        rng = np.random.default_rng(7)
        xs, ys, rs = random_instance(rng, 300)
        a, b = backend.active().contact_pairs(xs, ys, rs)
        assert (a < b).all()
        order = np.lexsort((b, a))
        np.testing.assert_array_equal(order, np.arange(len(a)))


class TestContactsAtStep:
    def test_triangle(self):
        nodes = [make_node(i, (i, 0), rng=5) for i in range(3)]
        events = contacts_at_step(nodes, step=4)
        assert events == [
            ContactEvent(4, 0, 1),
            ContactEvent(4, 0, 2),
            ContactEvent(4, 1, 2),
        ]

    def test_isolated(self):
        nodes = [make_node(i, (i * 500, 0), rng=5) for i in range(3)]
        assert contacts_at_step(nodes, step=0) == []

    def test_pois_excluded_by_default(self):
        nodes = [
            make_node(0, (0, 0), rng=10),
            make_node(1, (0, 1), rng=10, node_class=NodeClass.POI),
            make_node(2, (0, 2), rng=10, node_class=NodeClass.DESTINATION),
        ]
        events = contacts_at_step(nodes, step=1)
        assert events == [ContactEvent(1, 0, 2)]
        promoted = contacts_at_step(nodes, step=1, include_pois=True)
        assert len(promoted) == 3

    def test_matches_brute_force_on_large_instance(self):
        rng = np.random.default_rng(123)
        nodes = [
            make_node(i, (int(rng.integers(0, 820)), int(rng.integers(0, 820))),
                      rng=float(max(1.0, rng.normal(60, 20))))
            for i in range(400)
        ]
        events = contacts_at_step(nodes, step=2)
        xs = np.array([n.current_cell[0] for n in nodes], dtype=np.int32)
        ys = np.array([n.current_cell[1] for n in nodes], dtype=np.int32)
        rs = np.array([n.radio_range_cells for n in nodes])
        a, b = pairs_brute_force(xs, ys, rs)
        assert [(e.node_a, e.node_b) for e in events] == list(zip(a.tolist(), b.tolist()))


def test_trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    write_contact_trace(path, [ContactEvent(0, 1, 2), ContactEvent(1, 0, 3)])
    assert path.read_text() == "step,node_a,node_b\n0,1,2\n1,0,3\n"
