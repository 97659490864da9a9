import numpy as np
import pytest

from randomcluster.connectivity import (BfsBackend, UnionFindRebuildBackend,
                                        bfs_backend,
                                        brute_force_connected_without,
                                        unionfind_rebuild_backend)
from randomcluster.lattice import BoundaryCondition, build_box
from randomcluster.measure import Configuration
from randomcluster.rng import child_generator

FREE = BoundaryCondition.free()


def test_single_edge_never_connected_without():
    d = build_box(1, 0)
    be = bfs_backend(d)
    for state in (False, True):
        be.load(Configuration(d, np.array([state])))
        assert be.connected_without(0) is False


def test_plaquette_detour():
    d = build_box(1, 1)
    be = bfs_backend(d)
    bottom = d.edge_between(d.vertex_index[(0, 0)], d.vertex_index[(1, 0)])
    opens = np.ones(4, dtype=bool)
    opens[bottom] = False
    be.load(Configuration(d, opens))
    assert be.connected_without(bottom) is True


def test_wired_bc_connects_through_boundary():
    d = build_box(2, 2)
    be = bfs_backend(d, BoundaryCondition.wired())
    be.load(Configuration.all_closed(d))
    bottom = d.edge_between(d.vertex_index[(0, 0)], d.vertex_index[(1, 0)])
    # endpoints both on the wired boundary: connected through the wiring
    assert be.connected_without(bottom) is True
    center = d.vertex_index[(1, 1)]
    assert be.connected(center, d.vertex_index[(0, 0)]) is False


@pytest.mark.parametrize("make", [
    lambda d, bc: BfsBackend(d, bc),
    lambda d, bc: UnionFindRebuildBackend(d, bc, rebuild_interval=8),
    lambda d, bc: UnionFindRebuildBackend(d, bc, rebuild_interval=1),
])
@pytest.mark.parametrize("bc", [BoundaryCondition.free(), BoundaryCondition.wired()])
def test_backend_matches_oracle_random_walk(make, bc):
    """Random mutation/query stream against the fresh-search oracle."""
    d = build_box(3, 3)
    backend = make(d, bc)
    open_arr = np.zeros(d.n_edges, dtype=bool)
    backend.load(Configuration(d, open_arr))
    rng = child_generator(2024)
    for step in range(2500):
        e = int(rng.integers(0, d.n_edges))
        state = bool(rng.random() < 0.55)
        open_arr[e] = state
        backend.set_edge(e, state)
        f = int(rng.integers(0, d.n_edges))
        assert backend.connected_without(f) == \
            brute_force_connected_without(d, open_arr, f, bc)


def test_backend_oracle_28x8_run():
    """The spec-sized stress run: 10^4 mutations on an 8x8 box."""
    d = build_box(8, 8)
    bfs = BfsBackend(d)
    uf = UnionFindRebuildBackend(d, rebuild_interval=64)
    open_arr = np.zeros(d.n_edges, dtype=bool)
    rng = child_generator(99)
    mism = 0
    for step in range(10_000):
        e = int(rng.integers(0, d.n_edges))
        state = bool(rng.random() < 0.5)
        open_arr[e] = state
        bfs.set_edge(e, state)
        uf.set_edge(e, state)
        f = int(rng.integers(0, d.n_edges))
        a = bfs.connected_without(f)
        if a != uf.connected_without(f):
            mism += 1
        if step % 500 == 0:  # spot-check both against the slow oracle
            truth = brute_force_connected_without(d, open_arr, f)
            assert a == truth
    assert mism == 0


def test_connected_pairs_after_rebuild():
    d = build_box(4, 4)
    uf = unionfind_rebuild_backend(d, rebuild_interval=4)
    rng = child_generator(7)
    open_arr = rng.random(d.n_edges) < 0.5
    uf.load(Configuration(d, open_arr))
    bfs = bfs_backend(d)
    bfs.load(Configuration(d, open_arr))
    for _ in range(1000):
        x = int(rng.integers(0, d.n_vertices))
        y = int(rng.integers(0, d.n_vertices))
        assert uf.connected(x, y) == bfs.connected(x, y)


def test_opening_between_connected_preserves_components():
    d = build_box(2, 2)
    be = bfs_backend(d)
    opens = np.zeros(d.n_edges, dtype=bool)
    e1 = d.edge_between(d.vertex_index[(0, 0)], d.vertex_index[(1, 0)])
    e2 = d.edge_between(d.vertex_index[(1, 0)], d.vertex_index[(1, 1)])
    e3 = d.edge_between(d.vertex_index[(0, 0)], d.vertex_index[(0, 1)])
    e4 = d.edge_between(d.vertex_index[(0, 1)], d.vertex_index[(1, 1)])
    for e in (e1, e2, e3):
        opens[e] = True
    be.load(Configuration(d, opens))
    before = be.component_sizes()
    be.set_edge(e4, True)  # endpoints already joined around the plaquette
    assert be.component_sizes() == before


def test_bridge_semantics_enumeration():
    """connected_without(e) is false exactly when e is a bridge of the open
    subgraph extended by e; checked against explicit bridge enumeration."""
    d = build_box(2, 2)
    be = bfs_backend(d)
    rng = child_generator(5)
    for _ in range(200):
        opens = rng.random(d.n_edges) < 0.5
        be.load(Configuration(d, opens))
        for e in range(d.n_edges):
            extended = opens.copy()
            extended[e] = True
            # e is a bridge of `extended` iff removing it disconnects its ends
            bridge = not brute_force_connected_without(d, extended, e)
            assert be.connected_without(e) == (not bridge)


def test_queries_ignore_current_state_of_e():
    d = build_box(1, 1)
    be = bfs_backend(d)
    opens = np.ones(4, dtype=bool)
    be.load(Configuration(d, opens))
    e = 0
    with_open = be.connected_without(e)
    be.set_edge(e, False)
    assert be.connected_without(e) == with_open
