"""Finite square-lattice domains, their duals, and medial graphs.

A domain is an induced subgraph of Z^2 given by a finite vertex set,
together with the cyclic walk around its outer face.  Boundary conditions
(free / wired / Dobrushin / explicit partitions) are partitions of the
boundary vertices.  The medial graph carries the loop representation used
by the fermionic observable: one four-valent vertex per lattice edge, one
diamond per primal site and per dual face, and an orientation that runs
clockwise around the dual (white) faces.

Conventions that the rest of the package relies on are spelled out in the
comments of :func:`medial_graph`; they were chosen so that the exploration
path starts with ``e_a`` and ends with ``e_b``, both pointing north-east.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

# Compass directions in counterclockwise rotation order, angle 0 = east.
_DIRS = np.array([(1, 0), (0, 1), (-1, 0), (0, -1)], dtype=np.int64)  # E N W S


class LatticeError(ValueError):
    """Raised for invalid domain geometry or boundary data."""


class TorusDomain:
    """n-by-n torus (opposite sides identified); no boundary, no dual.

    Supports cluster counting and the heat-bath dynamics only.  Used by the
    experiment layer to suppress boundary effects in edge-intensity runs.
    """

    def __init__(self, n: int):
        if n < 2:
            raise LatticeError("torus side must be >= 2")
        self.n = n
        self.n_vertices = n * n
        verts = [(x, y) for y in range(n) for x in range(n)]
        self.vertices = np.array(verts, dtype=np.int64)
        self.vertex_index = {tuple(v): i for i, v in enumerate(verts)}
        edges = []
        for y in range(n):
            for x in range(n):
                i = self.vertex_index[(x, y)]
                edges.append((i, self.vertex_index[((x + 1) % n, y)]))
                edges.append((i, self.vertex_index[(x, (y + 1) % n)]))
        edges = [(min(u, v), max(u, v)) for u, v in edges]
        edges.sort()
        self.edges = np.array(edges, dtype=np.int64)
        self.n_edges = len(edges)
        self.boundary_vertices = np.array([], dtype=np.int64)
        self.is_boundary = np.zeros(self.n_vertices, dtype=bool)

    def __repr__(self):
        return f"TorusDomain(n={self.n})"


class LatticeDomain:
    """Induced subgraph of Z^2 on a finite vertex set.

    Vertex indices are dense and deterministic: vertices sorted by (y, x).
    Edge indices are dense and deterministic: endpoint index pairs sorted
    lexicographically.  ``boundary_walk`` is the counterclockwise walk
    around the outer face (domain kept on the left); on domains with
    dangling arms a vertex may appear several times in the walk.
    """

    def __init__(self, vertex_set: Iterable[tuple[int, int]]):
        verts = sorted(set((int(x), int(y)) for x, y in vertex_set), key=lambda v: (v[1], v[0]))
        if not verts:
            raise LatticeError("empty vertex set")
        self.vertices = np.array(verts, dtype=np.int64)
        self.n_vertices = len(verts)
        self.vertex_index = {v: i for i, v in enumerate(verts)}
        vset = self.vertex_index

        edges = []
        for (x, y), i in vset.items():
            for dx, dy in ((1, 0), (0, 1)):
                j = vset.get((x + dx, y + dy))
                if j is not None:
                    edges.append((min(i, j), max(i, j)))
        edges.sort()
        if not edges:
            raise LatticeError("domain has no edges")
        self.edges = np.array(edges, dtype=np.int64)
        self.n_edges = len(edges)
        self.edge_index = {(u, v): e for e, (u, v) in enumerate(edges)}

        xs, ys = self.vertices[:, 0], self.vertices[:, 1]
        # Vertex columns/rows of the bounding box.
        self.width = int(xs.max() - xs.min() + 1)
        self.height = int(ys.max() - ys.min() + 1)

        self._check_connected()
        self._build_adjacency()
        self.boundary_walk = self._outer_face_walk()
        # Inner boundary = vertices with a bond into the complement.  On
        # domains with width-1 arms the outer-face walk also passes through
        # a few non-boundary vertices (arm bases), so the walk is kept
        # separately and the boundary list is the walk filtered to
        # complement-adjacent vertices (in walk order, deduplicated).
        by_complement = {
            i for (x, y), i in vset.items()
            if any((x + int(dx), y + int(dy)) not in vset for dx, dy in _DIRS)
        }
        seen: dict[int, None] = {}
        for v in self.boundary_walk:
            if int(v) in by_complement:
                seen.setdefault(int(v), None)
        self.boundary_vertices = np.array(list(seen), dtype=np.int64)
        if by_complement != set(self.boundary_vertices.tolist()):
            raise LatticeError("some inner-boundary vertex is missing from the outer walk")
        self.is_boundary = np.zeros(self.n_vertices, dtype=bool)
        self.is_boundary[self.boundary_vertices] = True

    # -- construction helpers -------------------------------------------------

    def _check_connected(self):
        adj: dict[int, list[int]] = {i: [] for i in range(self.n_vertices)}
        for u, v in self.edges:
            adj[int(u)].append(int(v))
            adj[int(v)].append(int(u))
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != self.n_vertices:
            raise LatticeError("domain is not connected")

    def _build_adjacency(self):
        """CSR adjacency over vertices; entries carry (neighbor, edge id)."""
        deg = np.zeros(self.n_vertices + 1, dtype=np.int64)
        for u, v in self.edges:
            deg[u + 1] += 1
            deg[v + 1] += 1
        self.adj_ptr = np.cumsum(deg)
        self.adj_vert = np.zeros(self.adj_ptr[-1], dtype=np.int64)
        self.adj_edge = np.zeros(self.adj_ptr[-1], dtype=np.int64)
        fill = self.adj_ptr[:-1].copy()
        for e, (u, v) in enumerate(self.edges):
            self.adj_vert[fill[u]] = v
            self.adj_edge[fill[u]] = e
            fill[u] += 1
            self.adj_vert[fill[v]] = u
            self.adj_edge[fill[v]] = e
            fill[v] += 1

    def _neighbor(self, i: int, d: int) -> int | None:
        x, y = self.vertices[i]
        return self.vertex_index.get((int(x) + int(_DIRS[d][0]), int(y) + int(_DIRS[d][1])))

    def _outer_face_walk(self) -> np.ndarray:
        """Counterclockwise walk around the outer face (domain on the left).

        At each step the walk leaves along the first existing direction
        strictly counterclockwise from the direction it arrived by.
        """
        ys = self.vertices[:, 1]
        xs = self.vertices[:, 0]
        v0 = int(np.lexsort((xs, ys))[0])  # lowest row, then leftmost
        # Pretend we arrived from the west so the first step hugs the outside.
        arrived_from = 2  # W
        walk = [v0]
        cur, rev = v0, arrived_from
        start = None
        while True:
            nxt = None
            for k in range(1, 5):
                d = (rev + k) % 4
                j = self._neighbor(cur, d)
                if j is not None:
                    nxt = (d, j)
                    break
            if nxt is None:
                raise LatticeError("isolated vertex in walk")
            d, j = nxt
            if start is None:
                start = (cur, d)
            elif (cur, d) == start:
                walk.pop()  # the closing vertex repeats the start
                break
            walk.append(j)
            rev = (d + 2) % 4
            cur = j
            if len(walk) > 8 * self.n_edges + 8:
                raise LatticeError("outer face walk failed to close")
        return np.array(walk, dtype=np.int64)

    # -- queries ---------------------------------------------------------------

    def edge_between(self, a: int, b: int) -> int:
        return self.edge_index[(min(a, b), max(a, b))]

    def is_horizontal(self, e: int) -> bool:
        u, v = self.edges[e]
        return self.vertices[u][1] == self.vertices[v][1]

    def walk_steps(self) -> list[tuple[int, int]]:
        w = self.boundary_walk
        return [(int(w[i]), int(w[(i + 1) % len(w)])) for i in range(len(w))]

    def __repr__(self):
        return f"LatticeDomain(V={self.n_vertices}, E={self.n_edges}, {self.width}x{self.height})"


def build_box(width: int, height: int) -> LatticeDomain:
    """Rectangle [0,width] x [0,height] with (width+1)(height+1) vertices.

    Arguments are edge spans; one of them may be zero (a path) but not both,
    and negative spans are rejected.
    """
    if width < 0 or height < 0 or width + height < 1:
        raise LatticeError(f"invalid box dimensions ({width}, {height})")
    return LatticeDomain((x, y) for x in range(width + 1) for y in range(height + 1))


def diamond_domain(radius: int) -> LatticeDomain:
    """L1 ball of the given radius, shifted to nonnegative coordinates.

    The smallest domain (radius 2, 13 vertices, 16 edges) whose center has
    all four neighbors off the boundary; used to probe bulk identities that
    a rectangle under the enumeration cap cannot reach.
    """
    if radius < 1:
        raise LatticeError("radius must be >= 1")
    r = radius
    return LatticeDomain(
        (x, y) for x in range(2 * r + 1) for y in range(2 * r + 1)
        if abs(x - r) + abs(y - r) <= r
    )


def build_torus(n: int) -> TorusDomain:
    return TorusDomain(n)


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

class BCKind(Enum):
    FREE = "free"
    WIRED = "wired"
    DOBRUSHIN = "dobrushin"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class BoundaryCondition:
    """Partition of the boundary vertices, wired class by class.

    Dobrushin conditions mark two boundary sites a, b; the counterclockwise
    arc a -> b is free, the arc b -> a is wired (both arcs own their
    endpoints).  On domains whose boundary walk revisits a vertex, pass
    ``a_pos``/``b_pos`` (positions in the walk) to disambiguate.
    """

    kind: BCKind
    a: int | None = None
    b: int | None = None
    a_pos: int | None = None
    b_pos: int | None = None
    classes: tuple[tuple[int, ...], ...] = field(default=())

    @staticmethod
    def free() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.FREE)

    @staticmethod
    def wired() -> "BoundaryCondition":
        return BoundaryCondition(BCKind.WIRED)

    @staticmethod
    def dobrushin(a: int, b: int, a_pos: int | None = None,
                  b_pos: int | None = None) -> "BoundaryCondition":
        if a == b:
            raise LatticeError("Dobrushin marks require a != b")
        return BoundaryCondition(BCKind.DOBRUSHIN, a=a, b=b, a_pos=a_pos, b_pos=b_pos)

    @staticmethod
    def explicit(classes: Sequence[Sequence[int]]) -> "BoundaryCondition":
        cl = tuple(tuple(int(v) for v in c) for c in classes)
        flat = [v for c in cl for v in c]
        if len(flat) != len(set(flat)):
            raise LatticeError("explicit partition classes must be disjoint")
        return BoundaryCondition(BCKind.EXPLICIT, classes=cl)

    # -- resolution against a domain ------------------------------------------

    def _walk_pos(self, domain: LatticeDomain, vertex: int, pos: int | None, name: str) -> int:
        walk = domain.boundary_walk
        hits = np.flatnonzero(walk == vertex)
        if pos is not None:
            if walk[pos % len(walk)] != vertex:
                raise LatticeError(f"{name}_pos does not point at vertex {vertex}")
            return pos % len(walk)
        if len(hits) == 0:
            raise LatticeError(f"{name}={vertex} is not a boundary vertex")
        if len(hits) > 1:
            raise LatticeError(
                f"{name}={vertex} occurs {len(hits)} times in the boundary walk; pass {name}_pos")
        return int(hits[0])

    def dobrushin_arcs(self, domain: LatticeDomain) -> tuple[list[int], list[int]]:
        """Walk positions of the free arc (a..b ccw) and wired arc (b..a ccw)."""
        if self.kind is not BCKind.DOBRUSHIN:
            raise LatticeError("not a Dobrushin boundary condition")
        pa = self._walk_pos(domain, self.a, self.a_pos, "a")
        pb = self._walk_pos(domain, self.b, self.b_pos, "b")
        n = len(domain.boundary_walk)
        free = [(pa + k) % n for k in range((pb - pa) % n + 1)]
        wired = [(pb + k) % n for k in range((pa - pb) % n + 1)]
        return free, wired

    def wiring_classes(self, domain: LatticeDomain | TorusDomain) -> list[list[int]]:
        """Vertex classes to be wired before counting clusters."""
        if self.kind is BCKind.FREE:
            return []
        if self.kind is BCKind.WIRED:
            if len(domain.boundary_vertices) == 0:
                return []
            return [list(domain.boundary_vertices)]
        if self.kind is BCKind.EXPLICIT:
            bset = set(domain.boundary_vertices.tolist())
            for c in self.classes:
                if not set(c) <= bset:
                    raise LatticeError("explicit partition mentions non-boundary vertices")
            return [list(c) for c in self.classes]
        _, wired = self.dobrushin_arcs(domain)
        walk = domain.boundary_walk
        seen: dict[int, None] = {}
        for p in wired:
            seen.setdefault(int(walk[p]), None)
        return [list(seen)]

    def __str__(self):
        if self.kind is BCKind.DOBRUSHIN:
            return f"dobrushin({self.a},{self.b})"
        return self.kind.value


# ---------------------------------------------------------------------------
# Planar dual (rectangles, free boundary)
# ---------------------------------------------------------------------------

@dataclass
class DualGraph:
    """Dual of a rectangle: one vertex per bounded face plus a single outer
    vertex collecting the unbounded face.  Dual edge i is dual to primal
    edge i, so the bijection is the identity on indices (hence an
    involution).  The collapsed outer vertex realizes wired boundary
    conditions on the dual.
    """

    n_vertices: int            # bounded faces + 1 (outer vertex = index 0)
    edges: np.ndarray          # (E, 2) dual endpoints, aligned with primal edges
    outer: int = 0

    def cluster_count(self, dual_open: np.ndarray) -> int:
        parent = list(range(self.n_vertices))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for e in np.flatnonzero(dual_open):
            u, v = self.edges[e]
            ru, rv = find(int(u)), find(int(v))
            if ru != rv:
                parent[ru] = rv
        return len({find(i) for i in range(self.n_vertices)})


def dual_domain(domain: LatticeDomain) -> tuple[DualGraph, np.ndarray]:
    """Dual graph of a rectangle plus the primal<->dual edge bijection.

    The bijection is returned as an index array (the identity), so applying
    it twice is trivially the identity on edges.
    """
    if domain.n_vertices != domain.width * domain.height:
        raise LatticeError("dual_domain supports full rectangles only")
    xs, ys = domain.vertices[:, 0], domain.vertices[:, 1]
    x0, y0 = int(xs.min()), int(ys.min())
    nx, ny = domain.width - 1, domain.height - 1  # bounded faces per axis
    face_index = {}
    for fy in range(ny):
        for fx in range(nx):
            face_index[(fx, fy)] = 1 + fy * nx + fx
    n_dual = 1 + nx * ny

    dual_edges = np.zeros((domain.n_edges, 2), dtype=np.int64)
    for e, (u, v) in enumerate(domain.edges):
        ux, uy = int(domain.vertices[u][0]) - x0, int(domain.vertices[u][1]) - y0
        vx, vy = int(domain.vertices[v][0]) - x0, int(domain.vertices[v][1]) - y0
        if uy == vy:  # horizontal primal edge: faces above and below
            fx = min(ux, vx)
            above = face_index.get((fx, uy), 0)
            below = face_index.get((fx, uy - 1), 0)
            dual_edges[e] = (below, above)
        else:  # vertical primal edge: faces right and left
            fy = min(uy, vy)
            right = face_index.get((ux, fy), 0)
            left = face_index.get((ux - 1, fy), 0)
            dual_edges[e] = (left, right)
    bijection = np.arange(domain.n_edges, dtype=np.int64)
    return DualGraph(n_vertices=n_dual, edges=dual_edges), bijection


# ---------------------------------------------------------------------------
# Medial graph
# ---------------------------------------------------------------------------

class MedialDirection(Enum):
    NE = (1, 1)
    NW = (-1, 1)
    SW = (-1, -1)
    SE = (1, -1)


# Quadrants of a face relative to a site, in counterclockwise rotation order.
_QUAD_CCW = [(1, 1), (-1, 1), (-1, -1), (1, -1)]  # NE NW SW SE


def _rot_ccw(q: tuple[int, int]) -> tuple[int, int]:
    return (-q[1], q[0])


@dataclass
class MedialEdge:
    index: int
    site: int                    # primal vertex index (black diamond)
    face: tuple[int, int]        # doubled odd-odd coordinates (white diamond)
    tail: tuple[int, int]        # doubled medial-vertex coordinates
    head: tuple[int, int]
    direction: MedialDirection
    is_terminal: bool = False    # e_a / e_b enter from outside the domain


# State sources for the lattice edge under a medial vertex.
V_RANDOM, V_FORCED_OPEN, V_FORCED_CLOSED = 0, 1, 2


@dataclass
class MedialVertex:
    key: tuple[int, int]
    kind: int                    # V_RANDOM / V_FORCED_OPEN / V_FORCED_CLOSED
    edge: int                    # lattice edge id when kind == V_RANDOM, else -1
    horizontal: bool             # orientation of the underlying lattice edge
    slots: dict                  # quadrant -> (medial edge id, incoming?)

    @property
    def degree(self) -> int:
        return len(self.slots)


class MedialGraph:
    """Medial lattice of a domain with free or Dobrushin boundary structure.

    Geometry conventions (fixed here once, relied on everywhere):

    * Coordinates are doubled: primal site (x, y) -> (2x, 2y), dual face
      -> odd-odd pairs, medial vertices (edge midpoints) -> mixed parity.
    * Every medial edge is the shared side of one black (primal) diamond
      and one white (dual) diamond, oriented with the white diamond on its
      right; equivalently, clockwise around white faces.
    * For Dobrushin marks (a, b): boundary edges along the wired arc are
      conditioned open (they join vertices that are wired anyway, so the
      measure on the remaining edges is unchanged); the interface corridor
      of white faces runs along the outside of the free arc.
    * ``e_a`` is the north-east pointing side of a's diamond and is always
      the first edge of the exploration path; ``e_b`` is the north-east
      pointing side of b's diamond and is always its last edge.  Both are
      half-edges in the sense that their outer endpoints dangle; degree
      counts below exclude them, which makes the medial vertex where e_a
      (resp. e_b) attaches the three-edge vertex adjacent to a (resp. b).
      Realizing the north-east convention constrains where the free arc
      may start and end; invalid placements raise LatticeError.
    """

    def __init__(self, domain: LatticeDomain, bc: BoundaryCondition):
        self.domain = domain
        self.bc = bc
        self.edges: list[MedialEdge] = []
        self.vertices: dict[tuple[int, int], MedialVertex] = {}
        self.e_a: int | None = None
        self.e_b: int | None = None
        if bc.kind is BCKind.DOBRUSHIN:
            self._build_dobrushin()
        elif bc.kind is BCKind.FREE:
            self._build_free()
        else:
            raise LatticeError("medial graph requires free or Dobrushin boundary conditions")
        self._index_vertices()

    # -- face helpers ----------------------------------------------------------

    def _site2(self, i: int) -> tuple[int, int]:
        x, y = self.domain.vertices[i]
        return (2 * int(x), 2 * int(y))

    def _interior_faces(self) -> list[tuple[int, int]]:
        vset = self.domain.vertex_index
        faces = []
        for (x, y) in sorted(vset, key=lambda v: (v[1], v[0])):
            if ((x + 1, y) in vset and (x, y + 1) in vset and (x + 1, y + 1) in vset):
                faces.append((2 * x + 1, 2 * y + 1))
        return faces

    def _right_face(self, u: int, v: int) -> tuple[int, int]:
        """Face on the right of the walk step u -> v, doubled coordinates."""
        U, V = self._site2(u), self._site2(v)
        d = ((V[0] - U[0]) // 2, (V[1] - U[1]) // 2)
        right = (d[1], -d[0])
        return ((U[0] + V[0]) // 2 + right[0], (U[1] + V[1]) // 2 + right[1])

    def _crossing_edge_exists(self, site: int, q_from: tuple[int, int]) -> bool:
        """Is the lattice edge between quadrant q_from and its ccw successor
        (around `site`) part of the domain?"""
        q_to = _rot_ccw(q_from)
        d = ((q_from[0] + q_to[0]) // 2, (q_from[1] + q_to[1]) // 2)
        x, y = self.domain.vertices[site]
        return (int(x) + d[0], int(y) + d[1]) in self.domain.vertex_index

    def _quadrant(self, face: tuple[int, int], site: int) -> tuple[int, int]:
        S = self._site2(site)
        return (face[0] - S[0], face[1] - S[1])

    # -- corridor assembly -------------------------------------------------------

    def _extend_fan(self, faces: list[tuple[int, int]], site: int,
                    q_from: tuple[int, int], q_to: tuple[int, int]):
        """Rotate counterclockwise around `site` from q_from to q_to, appending
        each face passed (q_to inclusive, q_from exclusive).  Each rotation
        step squeezes past a lattice edge that must be absent from the domain."""
        q = q_from
        for _ in range(4):
            if q == q_to:
                return
            if self._crossing_edge_exists(site, q):
                raise LatticeError(
                    "free-arc corridor blocked at site "
                    f"{tuple(self.domain.vertices[site])}: the north-east e_a/e_b "
                    "convention is not realizable for these Dobrushin marks")
            q = _rot_ccw(q)
            S = self._site2(site)
            faces.append((S[0] + q[0], S[1] + q[1]))
        raise LatticeError("corridor fan failed to close")

    def _build_dobrushin(self):
        dom = self.domain
        bc = self.bc
        free_pos, wired_pos = bc.dobrushin_arcs(dom)
        walk = dom.boundary_walk
        n = len(walk)
        free_verts = [int(walk[p]) for p in free_pos]
        if len(free_verts) < 2:
            raise LatticeError("free arc must contain at least one edge")
        free_edge_set = set()
        for k in range(len(free_verts) - 1):
            free_edge_set.add(dom.edge_between(free_verts[k], free_verts[k + 1]))
        wired_edge_set = set()
        for k in range(len(wired_pos) - 1):
            u, v = int(walk[wired_pos[k]]), int(walk[wired_pos[k + 1]])
            wired_edge_set.add(dom.edge_between(u, v))
        if free_edge_set & wired_edge_set:
            raise LatticeError("free arc shares an edge with the wired arc")
        self.wired_edges = np.array(sorted(wired_edge_set), dtype=np.int64)
        self.free_arc_vertices = free_verts
        wired_seen: dict[int, None] = {}
        for p in wired_pos:
            wired_seen.setdefault(int(walk[p]), None)
        self.wired_arc_vertices = list(wired_seen)

        a, b = free_verts[0], free_verts[-1]
        interior = self._interior_faces()
        interior_set = set(interior)

        # Corridor of white faces outside the free arc, from a's south-east
        # face to b's south-east face (so e_a and e_b both point north-east).
        corridor: list[tuple[int, int]] = []
        Sa = self._site2(a)
        corridor.append((Sa[0] + 1, Sa[1] - 1))
        for k in range(len(free_verts) - 1):
            u, v = free_verts[k], free_verts[k + 1]
            target = self._right_face(u, v)
            self._extend_fan(corridor, u, self._quadrant(corridor[-1], u),
                             self._quadrant(target, u))
            if corridor[-1] != target:
                raise LatticeError("corridor fan missed its target face")
        self._extend_fan(corridor, b, self._quadrant(corridor[-1], b), (1, -1))
        # De-duplicate reflex turns (consecutive repeats only).
        dedup: list[tuple[int, int]] = []
        for f in corridor:
            if not dedup or dedup[-1] != f:
                dedup.append(f)
        corridor = dedup
        if len(set(corridor)) != len(corridor):
            raise LatticeError("free-arc corridor self-intersects")
        for f in corridor:
            if f in interior_set:
                raise LatticeError("free-arc corridor runs through an interior face")

        free_set = set(free_verts)
        self._emit_edges(interior, corridor, corridor_sites=free_set)

        ea_key = (self._site2(a), (Sa[0] + 1, Sa[1] - 1))
        Sb = self._site2(b)
        eb_key = (self._site2(b), (Sb[0] + 1, Sb[1] - 1))
        for me in self.edges:
            if (self._site2(me.site), me.face) == ea_key:
                self.e_a = me.index
            if (self._site2(me.site), me.face) == eb_key:
                self.e_b = me.index
        if self.e_a is None or self.e_b is None:
            raise LatticeError("failed to locate e_a/e_b")
        self.edges[self.e_a].is_terminal = True
        self.edges[self.e_b].is_terminal = True

    def _build_free(self):
        dom = self.domain
        interior = self._interior_faces()
        if not interior:
            raise LatticeError("free medial graph needs at least one interior face")
        self.wired_edges = np.array([], dtype=np.int64)
        self.free_arc_vertices = []
        self.wired_arc_vertices = []

        # Closed ring of outer faces around the whole boundary walk.
        steps = dom.walk_steps()
        ring: list[tuple[int, int]] = [self._right_face(*steps[0])]
        for k in range(1, len(steps) + 1):
            u, v = steps[k % len(steps)]
            target = self._right_face(u, v)
            self._extend_fan(ring, u, self._quadrant(ring[-1], u),
                             self._quadrant(target, u))
            if ring[-1] != target:
                raise LatticeError("outer ring fan missed its target face")
        if ring[0] != ring[-1]:
            raise LatticeError("outer ring failed to close")
        ring = ring[:-1]
        dedup: list[tuple[int, int]] = []
        for f in ring:
            if not dedup or dedup[-1] != f:
                dedup.append(f)
        ring = dedup
        all_sites = set(range(dom.n_vertices))
        self._emit_edges(interior, ring, corridor_sites=all_sites)

    def _emit_edges(self, interior: list[tuple[int, int]],
                    corridor: list[tuple[int, int]], corridor_sites: set[int]):
        dom = self.domain
        seen_sides = set()

        def add_side(site: int, face: tuple[int, int]):
            key = (site, face)
            if key in seen_sides:
                return
            seen_sides.add(key)
            S = self._site2(site)
            dx, dy = face[0] - S[0], face[1] - S[1]
            d = (-dy, dx)  # medial orientation: white diamond on the right
            e1 = (face[0], S[1])
            e2 = (S[0], face[1])
            if (e2[0] - e1[0], e2[1] - e1[1]) == d:
                tail, head = e1, e2
            else:
                tail, head = e2, e1
            self.edges.append(MedialEdge(
                index=len(self.edges), site=site, face=face, tail=tail, head=head,
                direction=MedialDirection(d)))

        for f in interior:
            for q in _QUAD_CCW:
                sx, sy = (f[0] - q[0]) // 2, (f[1] - q[1]) // 2
                i = dom.vertex_index.get((sx, sy))
                if i is None:
                    raise LatticeError("interior face with missing corner")
                add_side(i, f)
        for f in corridor:
            for q in _QUAD_CCW:
                sx, sy = (f[0] - q[0]) // 2, (f[1] - q[1]) // 2
                i = dom.vertex_index.get((sx, sy))
                if i is not None and i in corridor_sites:
                    add_side(i, f)

    def _index_vertices(self):
        dom = self.domain
        wired_set = set(self.wired_edges.tolist())
        slots: dict[tuple[int, int], dict] = {}
        for me in self.edges:
            for key, other, incoming in ((me.tail, me.head, False), (me.head, me.tail, True)):
                q = (other[0] - key[0], other[1] - key[1])
                slots.setdefault(key, {})[q] = (me.index, incoming)
        self.vertices = {}
        dangling = []
        for key, sl in slots.items():
            if len(sl) == 1:
                dangling.append(key)
                continue
            horizontal = key[0] % 2 == 1
            if horizontal:
                u = dom.vertex_index.get(((key[0] - 1) // 2, key[1] // 2))
                v = dom.vertex_index.get(((key[0] + 1) // 2, key[1] // 2))
            else:
                u = dom.vertex_index.get((key[0] // 2, (key[1] - 1) // 2))
                v = dom.vertex_index.get((key[0] // 2, (key[1] + 1) // 2))
            if u is None or v is None:
                kind, edge = V_FORCED_CLOSED, -1
            else:
                e = dom.edge_between(u, v)
                if e in wired_set:
                    kind, edge = V_FORCED_OPEN, -1
                else:
                    kind, edge = V_RANDOM, e
            self.vertices[key] = MedialVertex(key=key, kind=kind, edge=edge,
                                              horizontal=horizontal, slots=sl)
        n_in = sum(1 for key, sl in slots.items() for (_, inc) in sl.values() if inc)
        if 2 * n_in != sum(len(sl) for sl in slots.values()):
            raise LatticeError("medial in/out imbalance")
        if self.bc.kind is BCKind.DOBRUSHIN:
            if len(dangling) != 2:
                raise LatticeError(f"expected 2 dangling medial endpoints, got {len(dangling)}")
        elif dangling:
            raise LatticeError("free medial graph has dangling endpoints")
        self.n_medial_edges = len(self.edges)
        self.medial_vertex_keys = sorted(self.vertices, key=lambda k: (k[1], k[0]))

    # -- public queries ----------------------------------------------------------

    def degree(self, key: tuple[int, int]) -> int:
        """Number of incident medial edges, not counting e_a/e_b half-edges."""
        mv = self.vertices[key]
        return sum(1 for (idx, _) in mv.slots.values() if not self.edges[idx].is_terminal)

    def degree_profile(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for key in self.medial_vertex_keys:
            d = self.degree(key)
            counts[d] = counts.get(d, 0) + 1
        return counts

    def site_ne_edge(self, site: int) -> int | None:
        """The north-east pointing medial edge bordering the site's diamond."""
        S = self._site2(site)
        target = (S[0] + 1, S[1] - 1)
        for me in self.edges:
            if me.site == site and me.face == target:
                return me.index
        return None

    def boundary_sides(self, site: int) -> list[int]:
        """Sides of the site's diamond that border corridor (boundary) whites."""
        interior = set(self._interior_faces())
        return [me.index for me in self.edges
                if me.site == site and me.face not in interior]
