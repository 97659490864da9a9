"""Loop representation and the fermionic observable on Dobrushin domains.

Each configuration of a Dobrushin domain decomposes the medial edge set
into edge-disjoint loops plus one exploration path gamma from e_a to e_b:
interfaces between primal clusters (grown from the wired arc) and dual
clusters (grown from the free arc).  The observable assigns to a medial
edge e the mean of exp(i W/2) over configurations whose exploration path
passes through e, where W is the winding of gamma from e to e_b.  It is
computed here by exact enumeration and comes with checkable local
identities: a relation around each interior medial vertex, massive
harmonicity in the bulk, a three-point relation on the free arc, the
boundary modulus identity |F| = P(site on free arc <-> wired arc), and a
massive-random-walk reconstruction solved as a linear system.

Everything in this module is specific to cluster weight q = 2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import (BCKind, BoundaryCondition, LatticeDomain, LatticeError,
                      MedialDirection, MedialGraph, V_FORCED_CLOSED,
                      V_FORCED_OPEN, V_RANDOM)
from .measure import Configuration, ModelParams, _UnionFind

OBSERVABLE_EDGE_CAP = 20  # random (non-conditioned) edges enumerated exactly


class ObservableError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Parameters: x(p), alpha(p), massive walk coefficients
# ---------------------------------------------------------------------------

def x_of_p(p: float) -> float:
    """Loop-representation weight x = p / ((1-p) sqrt(2)); x=1 at the
    self-dual point."""
    if not 0.0 < p < 1.0:
        raise ObservableError("x(p) needs p in (0,1)")
    return p / ((1.0 - p) * math.sqrt(2.0))


def alpha_of_p(p: float) -> float:
    """Phase alpha with e^{i alpha} = (e^{i pi/4} + x) / (e^{i pi/4} x + 1);
    vanishes exactly at the self-dual point."""
    x = x_of_p(p)
    w = cmath.exp(1j * math.pi / 4)
    return cmath.phase((w + x) / (w * x + 1.0))


@dataclass(frozen=True)
class MassiveWalkParams:
    """Step weights of the massive walk generated by the bulk and free-arc
    relations: interior steps carry mass cos(2 alpha)/4 per neighbor; on the
    free arc the west/north neighbors carry c_wn and the east neighbor c_e."""

    p: float
    alpha: float
    mass_interior: float
    c_wn: float
    c_e: float

    @staticmethod
    def from_p(p: float) -> "MassiveWalkParams":
        a = alpha_of_p(p)
        c2a = math.cos(2.0 * a)
        denom = 1.0 + math.cos(math.pi / 4.0 - a)
        return MassiveWalkParams(
            p=p, alpha=a, mass_interior=c2a,
            c_wn=c2a / (2.0 * denom),
            c_e=math.cos(math.pi / 4.0 + a) / denom,
        )


# ---------------------------------------------------------------------------
# Loop decomposition
# ---------------------------------------------------------------------------

_ANGLE = {MedialDirection.NE: 0, MedialDirection.NW: 1,
          MedialDirection.SW: 2, MedialDirection.SE: 3}


def _turn(d_in: MedialDirection, d_out: MedialDirection) -> float:
    """Signed turn (+pi/2 = left) between consecutive medial edges."""
    diff = (_ANGLE[d_out] - _ANGLE[d_in]) % 4
    if diff == 1:
        return math.pi / 2.0
    if diff == 3:
        return -math.pi / 2.0
    raise ObservableError("medial path must turn by +-pi/2 at every vertex")


@dataclass
class MedialPath:
    """Sequence of medial edge ids; turns[i] is the turn after edges[i]
    (closed paths carry the wrap-around turn as their last entry)."""

    edges: list[int]
    turns: list[float]
    closed: bool

    def position(self, edge: int) -> int:
        try:
            return self.edges.index(edge)
        except ValueError:
            raise ObservableError(f"edge {edge} not on this path") from None

    def total_turning(self) -> float:
        if not self.closed:
            raise ObservableError("total turning is defined for closed loops")
        return float(sum(self.turns))


def winding(path: MedialPath, from_edge: int, to_edge: int) -> float:
    """Total rotation of the path from the midpoint of from_edge to the
    midpoint of to_edge (counterclockwise positive); zero when they agree."""
    i, j = path.position(from_edge), path.position(to_edge)
    if i == j:
        return 0.0
    if path.closed:
        n = len(path.edges)
        return float(sum(path.turns[(i + k) % n] for k in range((j - i) % n)))
    if i > j:
        raise ObservableError("from_edge lies after to_edge on an open path")
    return float(sum(path.turns[i:j]))


@dataclass
class LoopDecomposition:
    loops: list[MedialPath]
    exploration_path: MedialPath


def _effective_open(mg: MedialGraph, mv, open_arr: np.ndarray) -> bool:
    if mv.kind == V_RANDOM:
        return bool(open_arr[mv.edge])
    return mv.kind == V_FORCED_OPEN


def _next_slot(mv, in_quad: tuple[int, int], is_open: bool) -> tuple[int, int]:
    # An open bond reflects the path back to its own side of the bond; a
    # closed bond reflects it off the dual bond instead.
    if mv.horizontal == is_open:
        return (-in_quad[0], in_quad[1])
    return (in_quad[0], -in_quad[1])


def _trace_from(mg: MedialGraph, open_arr: np.ndarray, start: int,
                visited: np.ndarray) -> MedialPath:
    edges = [start]
    turns: list[float] = []
    visited[start] = True
    cur = mg.edges[start]
    while True:
        mv = mg.vertices.get(cur.head)
        if mv is None:  # dangling endpoint: gamma ends here
            return MedialPath(edges, turns, closed=False)
        in_quad = (cur.tail[0] - cur.head[0], cur.tail[1] - cur.head[1])
        out_quad = _next_slot(mv, in_quad, _effective_open(mg, mv, open_arr))
        slot = mv.slots.get(out_quad)
        if slot is None:
            raise LatticeError("medial transition left the graph")
        nxt_idx, incoming = slot
        if incoming:
            raise LatticeError("medial transition hit an incoming edge")
        nxt = mg.edges[nxt_idx]
        turns.append(_turn(cur.direction, nxt.direction))
        if nxt_idx == start:
            return MedialPath(edges, turns, closed=True)
        if visited[nxt_idx]:
            raise LatticeError("medial trace revisited an edge")
        visited[nxt_idx] = True
        edges.append(nxt_idx)
        cur = nxt


def loop_decomposition(cfg: Configuration, mg: MedialGraph) -> LoopDecomposition:
    """Interfaces of a configuration: loops plus the exploration path.

    Boundary edges along the wired arc are treated as open regardless of
    their bits in `cfg` (they join wired vertices, so neither the measure on
    the remaining edges nor the interface picture depends on them).
    """
    if mg.bc.kind is not BCKind.DOBRUSHIN:
        raise ObservableError("loop decomposition needs Dobrushin marks")
    if cfg.domain is not mg.domain:
        raise ObservableError("configuration and medial graph domains differ")
    visited = np.zeros(mg.n_medial_edges, dtype=bool)
    gamma = _trace_from(mg, cfg.open, mg.e_a, visited)
    if gamma.closed or gamma.edges[-1] != mg.e_b:
        raise LatticeError("exploration path did not terminate at e_b")
    loops = []
    for start in range(mg.n_medial_edges):
        if not visited[start]:
            loop = _trace_from(mg, cfg.open, start, visited)
            if not loop.closed:
                raise LatticeError("found a second open medial path")
            loops.append(loop)
    if not visited.all():
        raise LatticeError("medial decomposition is not Eulerian")
    return LoopDecomposition(loops=loops, exploration_path=gamma)


# ---------------------------------------------------------------------------
# The observable by exact enumeration
# ---------------------------------------------------------------------------

@dataclass
class ObservableField:
    """Complex value per medial edge; F(e_b) = 1, and the complex argument
    of F modulo pi is fixed by each edge's direction relative to e_b."""

    mg: MedialGraph
    params: ModelParams
    values: np.ndarray
    partition_function: float
    loop_counts: dict = field(default_factory=dict)
    open_counts: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)

    def value(self, edge: int) -> complex:
        return complex(self.values[edge])

    def ray_index(self, edge: int) -> int:
        """Counterclockwise quarter turns from e_b's direction to this
        edge's direction; F lies on the ray exp(-i pi k/4) R."""
        k_b = _ANGLE[self.mg.edges[self.mg.e_b].direction]
        k_e = _ANGLE[self.mg.edges[edge].direction]
        return (k_e - k_b) % 4

    def max_ray_residual(self) -> float:
        worst = 0.0
        for me in self.mg.edges:
            rot = cmath.exp(1j * math.pi * self.ray_index(me.index) / 4.0)
            worst = max(worst, abs((self.values[me.index] * rot).imag))
        return worst

    def dump_rows(self):
        """Rows (edge id, direction, Re F, Im F, |F|) for CSV export."""
        for me in self.mg.edges:
            v = complex(self.values[me.index])
            yield (me.index, me.direction.name, v.real, v.imag, abs(v))


def _require_q2(params: ModelParams):
    if params.q != 2.0:
        raise ObservableError("the fermionic observable is defined for q = 2 only")


def random_edges(mg: MedialGraph) -> np.ndarray:
    """Edges of the domain that stay random under the Dobrushin conditioning
    (everything except the wired-arc boundary edges)."""
    wired = set(mg.wired_edges.tolist())
    return np.array([e for e in range(mg.domain.n_edges) if e not in wired],
                    dtype=np.int64)


def observable_exact(domain: LatticeDomain, bc: BoundaryCondition,
                     params: ModelParams) -> ObservableField:
    """Full enumeration of F on a small Dobrushin domain.

    Wired-arc boundary edges are conditioned open (a measure-preserving
    convention: they connect wired vertices).  The weight of a configuration
    is p^o (1-p)^c 2^k over the remaining edges, with k counted after wiring
    the wired arc.
    """
    _require_q2(params)
    mg = MedialGraph(domain, bc)
    free_e = random_edges(mg)
    if len(free_e) > OBSERVABLE_EDGE_CAP:
        raise ObservableError(
            f"{len(free_e)} random edges exceed the enumeration cap {OBSERVABLE_EDGE_CAP}")
    p = params.p
    wired_class = mg.wired_arc_vertices
    dom = domain

    F_hat = np.zeros(mg.n_medial_edges, dtype=np.complex128)
    Z = 0.0
    loop_counts: dict[int, int] = {}
    open_counts: dict[int, int] = {}
    weights: dict[int, float] = {}

    open_arr = np.zeros(dom.n_edges, dtype=bool)
    open_arr[mg.wired_edges] = True
    visited = np.empty(mg.n_medial_edges, dtype=bool)

    for mask in range(1 << len(free_e)):
        open_arr[free_e] = False
        o = 0
        for i, e in enumerate(free_e):
            if (mask >> i) & 1:
                open_arr[e] = True
                o += 1
        c = len(free_e) - o

        uf = _UnionFind(dom.n_vertices)
        k = dom.n_vertices
        for e in np.flatnonzero(open_arr):
            u, v = dom.edges[e]
            if uf.union(int(u), int(v)):
                k -= 1
        for v in wired_class[1:]:
            if uf.union(int(wired_class[0]), int(v)):
                k -= 1

        w = (p ** o) * ((1.0 - p) ** c) * (2.0 ** k)
        Z += w

        visited[:] = False
        gamma = _trace_from(mg, open_arr, mg.e_a, visited)
        if gamma.closed or gamma.edges[-1] != mg.e_b:
            raise LatticeError("exploration path did not terminate at e_b")
        n_loops = 0
        for start in range(mg.n_medial_edges):
            if not visited[start]:
                loop = _trace_from(mg, open_arr, start, visited)
                if not loop.closed:
                    raise LatticeError("found a second open medial path")
                n_loops += 1
        loop_counts[mask] = n_loops
        open_counts[mask] = o
        weights[mask] = w

        # Winding from each edge of gamma to e_b: suffix sums of the turns.
        suffix = 0.0
        F_hat[gamma.edges[-1]] += w  # e_b, winding 0
        for i in range(len(gamma.edges) - 2, -1, -1):
            suffix += gamma.turns[i]
            F_hat[gamma.edges[i]] += w * cmath.exp(0.5j * suffix)

    return ObservableField(mg=mg, params=params, values=F_hat / Z,
                           partition_function=Z, loop_counts=loop_counts,
                           open_counts=open_counts, weights=weights)


def loop_weight_ratio_spread(f: ObservableField) -> float:
    """Cross-validation of the two weight conventions: the configuration
    weight divided by x^{#open} sqrt(2)^{#loops} must be one global
    constant.  Returns the relative spread of that ratio."""
    x = x_of_p(f.params.p)
    ratios = [f.weights[m] / (x ** f.open_counts[m] * math.sqrt(2.0) ** f.loop_counts[m])
              for m in f.weights]
    lo, hi = min(ratios), max(ratios)
    return (hi - lo) / hi


# ---------------------------------------------------------------------------
# Local relation checks
# ---------------------------------------------------------------------------

def _interior_medial_vertices(mg: MedialGraph):
    """Medial vertices where the vertex relation applies: the underlying
    lattice edge is random and all four slots are present, none terminal."""
    for key in mg.medial_vertex_keys:
        mv = mg.vertices[key]
        if mv.kind != V_RANDOM or len(mv.slots) != 4:
            continue
        if any(mg.edges[idx].is_terminal for idx, _ in mv.slots.values()):
            continue
        yield mv


def check_vertex_relation(f: ObservableField) -> float:
    """Max residual of the four-edge relation around interior medial
    vertices: F(A) - F(C) = e^{-i alpha} i (F(B) - F(D)), with A, C the two
    edges pointing toward the vertex and A, B, C, D consecutive clockwise.

    Convention note: with this package's axes (y up, windings positive
    counterclockwise, white diamonds on the right of each medial edge) the
    relation carries e^{-i alpha} where the mirrored frame carries
    e^{+i alpha}; the two frames differ by a reflection, which conjugates
    the observable.  The free-arc and bulk identities are unaffected (their
    coefficients are even or real)."""
    a = alpha_of_p(f.params.p)
    eia = cmath.exp(-1j * a)
    worst = 0.0
    cw = [(1, 1), (1, -1), (-1, -1), (-1, 1)]  # clockwise quadrant order
    for mv in _interior_medial_vertices(f.mg):
        start = next(i for i, q in enumerate(cw) if q in mv.slots and mv.slots[q][1])
        ids = [mv.slots[cw[(start + k) % 4]][0] for k in range(4)]
        A, B, C, D = (f.values[i] for i in ids)
        worst = max(worst, abs((A - C) - eia * 1j * (B - D)))
    return worst


def eligible_bulk_sites(domain: LatticeDomain) -> list[int]:
    """Sites whose four lattice neighbors all exist and avoid the boundary."""
    out = []
    for i in range(domain.n_vertices):
        x, y = (int(c) for c in domain.vertices[i])
        ok = True
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            j = domain.vertex_index.get((x + dx, y + dy))
            if j is None or domain.is_boundary[j]:
                ok = False
                break
        if ok:
            out.append(i)
    return out


def check_massive_harmonicity(f: ObservableField) -> tuple[float, int]:
    """Max residual of cos(2 alpha)/4 * sum_{Y ~ X} F(e_Y) = F(e_X) over
    bulk sites X, evaluated on the north-east edge of every diamond.
    Returns (residual, number of eligible sites); no eligible sites is an
    empty check."""
    mg = f.mg
    dom = mg.domain
    m = MassiveWalkParams.from_p(f.params.p)
    worst, count = 0.0, 0
    for i in eligible_bulk_sites(dom):
        x, y = (int(c) for c in dom.vertices[i])
        e_x = mg.site_ne_edge(i)
        total = 0.0 + 0.0j
        ok = e_x is not None
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            j = dom.vertex_index[(x + dx, y + dy)]
            e_y = mg.site_ne_edge(j)
            if e_y is None:
                ok = False
                break
            total += f.values[e_y]
        if not ok:
            continue
        count += 1
        worst = max(worst, abs(m.mass_interior / 4.0 * total - f.values[e_x]))
    return worst, count


def _free_arc_stencils(mg: MedialGraph):
    """Free-arc sites with west/north/east neighbors forming the boundary
    stencil: the arc must run eastward through the site (the compass
    indexation of the relation is absolute, tied to the north-east edge
    convention)."""
    dom = mg.domain
    arc = mg.free_arc_vertices
    for k in range(1, len(arc) - 1):
        xi = arc[k]
        x, y = (int(c) for c in dom.vertices[xi])
        west = dom.vertex_index.get((x - 1, y))
        east = dom.vertex_index.get((x + 1, y))
        north = dom.vertex_index.get((x, y + 1))
        if west != arc[k - 1] or east != arc[k + 1] or north is None:
            continue
        edges = tuple(mg.site_ne_edge(s) for s in (xi, west, north, east))
        if any(e is None for e in edges):
            continue
        yield edges  # (e_X, e_W, e_N, e_E)


def check_free_arc_relation(f: ObservableField) -> tuple[float, int]:
    """Max residual of the free-arc relation
    c_wn [F(e_W) + F(e_N)] + c_e F(e_E) = F(e_X) over eastward free-arc
    sites; returns (residual, stencil count)."""
    _require_q2(f.params)
    m = MassiveWalkParams.from_p(f.params.p)
    worst, count = 0.0, 0
    for e_x, e_w, e_n, e_e in _free_arc_stencils(f.mg):
        count += 1
        lhs = m.c_wn * (f.values[e_w] + f.values[e_n]) + m.c_e * f.values[e_e]
        worst = max(worst, abs(lhs - f.values[e_x]))
    return worst, count


def check_boundary_connection(f: ObservableField, dist) -> float:
    """Max over free-arc sites u of | |F(e)| - P(u <-> wired arc) | where e
    is a side of u's diamond on the domain boundary.  All boundary sides of
    one diamond carry the same modulus; the spread is included in the
    residual."""
    from .measure import exact_event_probability, connected_in

    mg = f.mg
    wired = mg.wired_arc_vertices
    worst = 0.0
    for u in mg.free_arc_vertices:
        sides = mg.boundary_sides(u)
        if not sides:
            continue
        mods = [abs(f.values[s]) for s in sides]
        worst = max(worst, max(mods) - min(mods))
        prob = exact_event_probability(
            dist, lambda cfg, _u=u: connected_in(cfg, dist.bc, [_u], wired))
        worst = max(worst, abs(mods[0] - prob))
    return worst


# ---------------------------------------------------------------------------
# Massive-walk reconstruction (linear solve)
# ---------------------------------------------------------------------------

def massive_walk_identity(f: ObservableField) -> float:
    """Reconstruct F on the north-east edges of all non-wired sites from its
    values on the wired arc, using the bulk and free-arc relations as a
    linear system, and return the max deviation from the enumerated values.

    Precondition: every non-wired site carries a relation (bulk sites need
    all four neighbors off the boundary; free-arc sites need the eastward
    stencil).  Domains leaving a site uncovered are rejected.
    """
    mg = f.mg
    dom = mg.domain
    m = MassiveWalkParams.from_p(f.params.p)

    wired = set(mg.wired_arc_vertices)
    unknown = [i for i in range(dom.n_vertices) if i not in wired]
    col = {s: j for j, s in enumerate(unknown)}
    if not unknown:
        raise ObservableError("no unknown sites: nothing to reconstruct")

    bulk = set(eligible_bulk_sites(dom))
    stencils = {}
    for e_x, e_w, e_n, e_e in _free_arc_stencils(mg):
        stencils[mg.edges[e_x].site] = (e_w, e_n, e_e)

    n = len(unknown)
    A = np.zeros((n, n), dtype=np.complex128)
    rhs = np.zeros(n, dtype=np.complex128)

    def accumulate(row: int, site: int, coeff: complex):
        if site in col:
            A[row, col[site]] += coeff
        else:
            e = mg.site_ne_edge(site)
            if e is None:
                raise ObservableError(
                    f"boundary data missing at site {tuple(dom.vertices[site])}")
            rhs[row] -= coeff * f.values[e]

    for row, s in enumerate(unknown):
        x, y = (int(c) for c in dom.vertices[s])
        A[row, col[s]] = -1.0
        if s in bulk:
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                accumulate(row, dom.vertex_index[(x + dx, y + dy)],
                           m.mass_interior / 4.0)
        elif s in stencils:
            e_w, e_n, e_e = stencils[s]
            accumulate(row, mg.edges[e_w].site, m.c_wn)
            accumulate(row, mg.edges[e_n].site, m.c_wn)
            accumulate(row, mg.edges[e_e].site, m.c_e)
        else:
            raise ObservableError(
                f"site {tuple(dom.vertices[s])} has no covering relation; "
                "the walk reconstruction does not apply to this domain")

    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ObservableError(f"singular reconstruction system: {exc}") from exc
    worst = 0.0
    for s in unknown:
        e = mg.site_ne_edge(s)
        if e is None:
            raise ObservableError(
                f"enumerated value missing at site {tuple(dom.vertices[s])}")
        worst = max(worst, abs(sol[col[s]] - f.values[e]))
    return worst


# ---------------------------------------------------------------------------
# Canonical Dobrushin rectangles
# ---------------------------------------------------------------------------

def bottom_arc_box(width: int, height: int) -> tuple[LatticeDomain, BoundaryCondition]:
    """Rectangle with the free arc along the bottom row (a lower-left,
    b lower-right); the canonical domain for the free-arc relation and the
    walk reconstruction."""
    from .lattice import build_box
    dom = build_box(width, height)
    a = dom.vertex_index[(0, 0)]
    b = dom.vertex_index[(width, 0)]
    return dom, BoundaryCondition.dobrushin(a, b)


def corner_arc_box(width: int, height: int) -> tuple[LatticeDomain, BoundaryCondition]:
    """Rectangle with the free arc along the bottom row and up the right
    column (a lower-left, b upper-right)."""
    from .lattice import build_box
    dom = build_box(width, height)
    a = dom.vertex_index[(0, 0)]
    b = dom.vertex_index[(width, height)]
    return dom, BoundaryCondition.dobrushin(a, b)


def diamond_bulk_domain() -> tuple[LatticeDomain, BoundaryCondition]:
    """Smallest enumerable Dobrushin domain with a bulk site: the radius-2
    diamond, free arc hugging its south-east elbow."""
    from .lattice import diamond_domain
    dom = diamond_domain(2)
    a = dom.vertex_index[(2, 1)]
    b = dom.vertex_index[(3, 2)]
    walk = [tuple(int(c) for c in dom.vertices[v]) for v in dom.boundary_walk]
    return dom, BoundaryCondition.dobrushin(
        a, b, a_pos=walk.index((2, 1)), b_pos=walk.index((3, 2)))
