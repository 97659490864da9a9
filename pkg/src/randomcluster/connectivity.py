"""Connectivity backends answering "are the endpoints of e joined without e?".

The heat-bath update needs exactly one nonlocal query per step: whether the
endpoints of the resampled edge stay connected when that edge is removed
(the query conditions on the configuration off the edge, so the edge's own
current state never matters).  Backends answer it behind one interface and
must agree with a from-scratch search at all times.

Boundary wiring is part of the graph here: each wired class contributes a
virtual hub vertex joined to its members by permanently open virtual edges.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from . import _kernels
from .lattice import BoundaryCondition, LatticeDomain, TorusDomain
from .measure import Configuration


class AugmentedGraph:
    """Domain graph plus one virtual hub per wired boundary class."""

    def __init__(self, domain: LatticeDomain | TorusDomain, bc: BoundaryCondition):
        classes = bc.wiring_classes(domain)
        self.domain = domain
        self.n_real_vertices = domain.n_vertices
        self.n_real_edges = domain.n_edges
        self.n_vertices = domain.n_vertices + len(classes)
        eu = [int(u) for u, _ in domain.edges]
        ev = [int(v) for _, v in domain.edges]
        for k, cls in enumerate(classes):
            hub = domain.n_vertices + k
            for v in cls:
                eu.append(hub)
                ev.append(int(v))
        self.edge_u = np.array(eu, dtype=np.int64)
        self.edge_v = np.array(ev, dtype=np.int64)
        self.n_edges = len(eu)

        deg = np.zeros(self.n_vertices + 1, dtype=np.int64)
        for e in range(self.n_edges):
            deg[self.edge_u[e] + 1] += 1
            deg[self.edge_v[e] + 1] += 1
        self.adj_ptr = np.cumsum(deg)
        self.adj_vert = np.zeros(self.adj_ptr[-1], dtype=np.int64)
        self.adj_edge = np.zeros(self.adj_ptr[-1], dtype=np.int64)
        fill = self.adj_ptr[:-1].copy()
        for e in range(self.n_edges):
            u, v = self.edge_u[e], self.edge_v[e]
            self.adj_vert[fill[u]] = v
            self.adj_edge[fill[u]] = e
            fill[u] += 1
            self.adj_vert[fill[v]] = u
            self.adj_edge[fill[v]] = e
            fill[v] += 1

    def fresh_open(self) -> np.ndarray:
        arr = np.zeros(self.n_edges, dtype=np.bool_)
        arr[self.n_real_edges:] = True  # virtual wiring never closes
        return arr


class BfsBackend:
    """Default backend: truncated bidirectional breadth-first search.

    Correct by construction; at desk scales the clusters met near the
    self-dual point are small enough that the meet-in-the-middle search
    beats fancier structures.
    """

    def __init__(self, domain, bc: BoundaryCondition | None = None):
        self.graph = AugmentedGraph(domain, bc or BoundaryCondition.free())
        g = self.graph
        self.open = g.fresh_open()
        self._stamp = np.zeros(g.n_vertices, dtype=np.int64)
        self._qa = np.empty(g.n_vertices, dtype=np.int64)
        self._qb = np.empty(g.n_vertices, dtype=np.int64)
        self._sv = 1

    # -- mutation ---------------------------------------------------------

    def load(self, cfg: Configuration):
        if cfg.domain.n_edges != self.graph.n_real_edges:
            raise ValueError("configuration does not match backend domain")
        self.open[:self.graph.n_real_edges] = cfg.open

    def set_edge(self, e: int, is_open: bool):
        self.open[e] = is_open

    # -- queries ----------------------------------------------------------

    def connected_without(self, e: int) -> bool:
        g = self.graph
        res = _kernels.connected_without(
            g.adj_ptr, g.adj_vert, g.adj_edge, self.open,
            g.edge_u[e], g.edge_v[e], np.int64(e),
            self._stamp, self._qa, self._qb, np.int64(self._sv))
        self._sv += 2
        return bool(res)

    def connected(self, x: int, y: int) -> bool:
        g = self.graph
        res = _kernels.connected_without(
            g.adj_ptr, g.adj_vert, g.adj_edge, self.open,
            np.int64(x), np.int64(y), np.int64(-1),
            self._stamp, self._qa, self._qb, np.int64(self._sv))
        self._sv += 2
        return bool(res)

    def component_sizes(self) -> Counter:
        """Multiset of component sizes of the wired configuration, counting
        real vertices only."""
        g = self.graph
        labels = np.full(g.n_vertices, -1, dtype=np.int64)
        queue = np.empty(g.n_vertices, dtype=np.int64)
        _kernels.label_components(g.adj_ptr, g.adj_vert, g.adj_edge,
                                  self.open, np.int64(g.n_vertices), labels, queue)
        return Counter(Counter(labels[:g.n_real_vertices].tolist()).values())


class UnionFindRebuildBackend(BfsBackend):
    """Union-find accelerated variant: openings are unioned eagerly; a
    closing marks the structure stale (union-find cannot delete), and while
    stale the queries fall back to search until a scheduled rebuild.  Every
    answer is exact at all times."""

    def __init__(self, domain, bc: BoundaryCondition | None = None,
                 rebuild_interval: int = 64):
        if rebuild_interval < 1:
            raise ValueError("rebuild_interval must be >= 1")
        super().__init__(domain, bc)
        self.rebuild_interval = rebuild_interval
        self._parent = np.arange(self.graph.n_vertices, dtype=np.int64)
        self._stale = False
        self._mutations_since_rebuild = 0
        self._rebuild()

    def _find(self, i: int) -> int:
        p = self._parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return int(i)

    def _rebuild(self):
        self._parent = np.arange(self.graph.n_vertices, dtype=np.int64)
        for e in np.flatnonzero(self.open):
            ru = self._find(int(self.graph.edge_u[e]))
            rv = self._find(int(self.graph.edge_v[e]))
            if ru != rv:
                self._parent[ru] = rv
        self._stale = False
        self._mutations_since_rebuild = 0

    def load(self, cfg: Configuration):
        super().load(cfg)
        self._rebuild()

    def set_edge(self, e: int, is_open: bool):
        was = bool(self.open[e])
        super().set_edge(e, is_open)
        if is_open and not was:
            ru = self._find(int(self.graph.edge_u[e]))
            rv = self._find(int(self.graph.edge_v[e]))
            if ru != rv:
                self._parent[ru] = rv
        elif was and not is_open:
            self._stale = True
        self._mutations_since_rebuild += 1
        if self._stale and self._mutations_since_rebuild >= self.rebuild_interval:
            self._rebuild()

    def connected_without(self, e: int) -> bool:
        # The union-find describes the configuration with e's current state;
        # it can only answer when e is closed (then omega\{e} = omega) and
        # nothing has been closed since the last rebuild.
        if not self._stale and not self.open[e]:
            return self._find(int(self.graph.edge_u[e])) == \
                self._find(int(self.graph.edge_v[e]))
        return super().connected_without(e)

    def connected(self, x: int, y: int) -> bool:
        if not self._stale:
            return self._find(int(x)) == self._find(int(y))
        return super().connected(x, y)


def bfs_backend(domain, bc: BoundaryCondition | None = None) -> BfsBackend:
    return BfsBackend(domain, bc)


def unionfind_rebuild_backend(domain, bc: BoundaryCondition | None = None,
                              rebuild_interval: int = 64) -> UnionFindRebuildBackend:
    return UnionFindRebuildBackend(domain, bc, rebuild_interval)


def brute_force_connected_without(domain, open_arr: np.ndarray, e: int,
                                  bc: BoundaryCondition | None = None) -> bool:
    """Reference oracle: fresh breadth-first search on a copy (slow path)."""
    g = AugmentedGraph(domain, bc or BoundaryCondition.free())
    full = g.fresh_open()
    full[:g.n_real_edges] = open_arr
    full[e] = False
    u, v = int(g.edge_u[e]), int(g.edge_v[e])
    adj: dict[int, list[int]] = {}
    for k in np.flatnonzero(full):
        if k == e:
            continue
        a, b = int(g.edge_u[k]), int(g.edge_v[k])
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = {u}
    stack = [u]
    while stack:
        w = stack.pop()
        if w == v:
            return True
        for z in adj.get(w, ()):
            if z not in seen:
                seen.add(z)
                stack.append(z)
    return False
