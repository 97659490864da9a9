"""Random-cluster weights and the exact small-lattice oracle.

The measure on configurations omega of a finite domain under boundary
condition xi is proportional to  p^{#open} (1-p)^{#closed} q^{k(omega,xi)},
where k counts connected components after wiring each boundary class.
Everything here is exact: weights, full enumerations (capped at 24 edges),
planar duality transforms and the self-dual point sqrt(q)/(1+sqrt(q)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import BoundaryCondition, DualGraph, LatticeDomain, TorusDomain

ENUMERATION_CAP = 24  # 2^24 weights is the most we let the oracle hold

LOGSPACE_EDGE_THRESHOLD = 50  # larger systems accumulate the weight in logs


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Edge probability p in [0,1] and cluster weight q >= 1.

    q >= 1 is required throughout: positive association (FKG) underlies the
    monotone coupling and the boundary-condition comparisons.
    """

    p: float
    q: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise MeasureError(f"p={self.p} outside [0,1]")
        if self.q < 1.0:
            raise MeasureError(f"q={self.q} < 1 (FKG fails below 1)")


@dataclass
class Configuration:
    """One bit per edge of a domain: True = open."""

    domain: LatticeDomain | TorusDomain
    open: np.ndarray

    def __post_init__(self):
        self.open = np.asarray(self.open, dtype=bool)
        if self.open.shape != (self.domain.n_edges,):
            raise MeasureError("configuration length != edge count")

    @staticmethod
    def from_mask(domain, mask: int) -> "Configuration":
        bits = np.array([(mask >> e) & 1 for e in range(domain.n_edges)], dtype=bool)
        return Configuration(domain, bits)

    @staticmethod
    def all_closed(domain) -> "Configuration":
        return Configuration(domain, np.zeros(domain.n_edges, dtype=bool))

    @staticmethod
    def all_open(domain) -> "Configuration":
        return Configuration(domain, np.ones(domain.n_edges, dtype=bool))

    def as_mask(self) -> int:
        m = 0
        for e in np.flatnonzero(self.open):
            m |= 1 << int(e)
        return m

    @property
    def n_open(self) -> int:
        return int(self.open.sum())


def _check_same_domain(cfg: Configuration, domain):
    if cfg.domain is not domain and cfg.domain.n_edges != domain.n_edges:
        raise MeasureError("configuration belongs to a different domain")


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]
        return True


def cluster_count(cfg: Configuration, bc: BoundaryCondition) -> int:
    """Components of the open subgraph with the boundary classes wired.

    Wiring is realized by virtual edges chaining each class, exactly the
    'identify the vertices of each class' reading of a boundary partition.
    """
    domain = cfg.domain
    uf = _UnionFind(domain.n_vertices)
    k = domain.n_vertices
    for e in np.flatnonzero(cfg.open):
        u, v = domain.edges[e]
        if uf.union(int(u), int(v)):
            k -= 1
    for cls in bc.wiring_classes(domain):
        for v in cls[1:]:
            if uf.union(int(cls[0]), int(v)):
                k -= 1
    return k


def log_weight(cfg: Configuration, params: ModelParams, bc: BoundaryCondition) -> float:
    o = cfg.n_open
    c = cfg.domain.n_edges - o
    k = cluster_count(cfg, bc)
    # 0^0 = 1 at the endpoints of [0,1].
    if params.p == 0.0 and o > 0:
        return -math.inf
    if params.p == 1.0 and c > 0:
        return -math.inf
    lw = k * math.log(params.q) if params.q != 1.0 else 0.0
    if o:
        lw += o * math.log(params.p)
    if c:
        lw += c * math.log1p(-params.p)
    return lw


def weight(cfg: Configuration, params: ModelParams, bc: BoundaryCondition) -> float:
    """Unnormalized weight p^o (1-p)^c q^k; log-accumulated on big systems."""
    if cfg.domain.n_edges > LOGSPACE_EDGE_THRESHOLD:
        return math.exp(log_weight(cfg, params, bc))
    o = cfg.n_open
    c = cfg.domain.n_edges - o
    k = cluster_count(cfg, bc)
    return (params.p ** o) * ((1.0 - params.p) ** c) * (params.q ** k)


@dataclass
class ExactDistribution:
    """All 2^|E| configuration probabilities of a small domain."""

    domain: LatticeDomain | TorusDomain
    params: ModelParams
    bc: BoundaryCondition
    probabilities: np.ndarray
    partition_function: float

    def probability(self, cfg: Configuration) -> float:
        return float(self.probabilities[cfg.as_mask()])

    def configurations(self):
        for mask in range(len(self.probabilities)):
            yield mask, Configuration.from_mask(self.domain, mask)


def exact_distribution(domain, params: ModelParams, bc: BoundaryCondition) -> ExactDistribution:
    """Brute-force enumeration of the measure; refuses more than 24 edges.

    Runs a depth-first scan over edge states with a rollback union-find, so
    each of the 2^|E| leaves costs O(alpha) instead of a fresh component
    count.
    """
    E = domain.n_edges
    if E > ENUMERATION_CAP:
        raise MeasureError(f"|E|={E} exceeds enumeration cap {ENUMERATION_CAP}")
    p, q = params.p, params.q

    n = domain.n_vertices
    parent = list(range(n))
    size = [1] * n
    merges: list[int] = []  # stack of absorbed roots

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    def union(i, j) -> bool:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        if size[ri] < size[rj]:
            ri, rj = rj, ri
        parent[rj] = ri
        size[ri] += size[rj]
        merges.append(rj)
        return True

    def undo(mark: int):
        while len(merges) > mark:
            rj = merges.pop()
            size[parent[rj]] -= size[rj]
            parent[rj] = rj

    base_k = n
    for cls in bc.wiring_classes(domain):
        for v in cls[1:]:
            if union(int(cls[0]), int(v)):
                base_k -= 1

    weights = np.zeros(1 << E, dtype=np.float64)
    edges = [(int(u), int(v)) for u, v in domain.edges]

    def rec(e: int, mask: int, w: float, k: int):
        if e == E:
            weights[mask] = w * (q ** k)
            return
        u, v = edges[e]
        # closed branch
        if p < 1.0:
            rec(e + 1, mask, w * (1.0 - p), k)
        # open branch
        if p > 0.0:
            mark = len(merges)
            dk = 1 if union(u, v) else 0
            rec(e + 1, mask | (1 << e), w * p, k - dk)
            undo(mark)

    rec(0, 0, 1.0, base_k)
    Z = float(weights.sum())
    if not Z > 0.0:
        raise MeasureError("partition function vanished")
    dist = ExactDistribution(domain, params, bc, weights / Z, Z)
    total = float(dist.probabilities.sum())
    if abs(total - 1.0) > 1e-12:
        raise MeasureError(f"normalization off by {total - 1.0:.2e}")
    return dist


def exact_event_probability(dist: ExactDistribution, event) -> float:
    """Probability of a predicate on configurations under the exact law."""
    total = 0.0
    for mask, cfg in dist.configurations():
        if dist.probabilities[mask] > 0.0 or True:
            if event(cfg):
                total += dist.probabilities[mask]
    return float(total)


def exact_mean(dist: ExactDistribution, statistic) -> float:
    return float(sum(dist.probabilities[mask] * statistic(cfg)
                     for mask, cfg in dist.configurations()))


# ---------------------------------------------------------------------------
# Duality
# ---------------------------------------------------------------------------

def self_dual_point(q: float) -> float:
    """sqrt(q) / (1 + sqrt(q)), the self-dual (= critical) edge weight."""
    if q < 1.0:
        raise MeasureError("q must be >= 1")
    s = math.sqrt(q)
    return s / (1.0 + s)


def dual_parameter(p: float, q: float) -> float:
    """The dual edge weight p*: the unique solution of p p*/((1-p)(1-p*)) = q."""
    if not 0.0 < p < 1.0:
        raise MeasureError("dual parameter needs p in (0,1)")
    return q * (1.0 - p) / (q * (1.0 - p) + p)


def dual_configuration(cfg: Configuration, bijection: np.ndarray) -> np.ndarray:
    """Dual edge states: dual edge open iff the corresponding primal edge is
    closed.  Returns the dual open array aligned with dual edge indices."""
    dual_open = np.empty_like(cfg.open)
    dual_open[bijection] = ~cfg.open
    return dual_open


def dual_weight(dual: DualGraph, dual_open: np.ndarray, params: ModelParams) -> float:
    """Weight of a dual configuration; the collapsed outer vertex realizes
    wired boundary conditions on the dual graph."""
    o = int(dual_open.sum())
    c = len(dual_open) - o
    k = dual.cluster_count(dual_open)
    return (params.p ** o) * ((1.0 - params.p) ** c) * (params.q ** k)


def connected_in(cfg: Configuration, bc: BoundaryCondition,
                 group_a: list[int], group_b: list[int]) -> bool:
    """Is some vertex of group_a joined to some vertex of group_b in
    omega union the boundary wiring?"""
    domain = cfg.domain
    uf = _UnionFind(domain.n_vertices)
    for e in np.flatnonzero(cfg.open):
        u, v = domain.edges[e]
        uf.union(int(u), int(v))
    for cls in bc.wiring_classes(domain):
        for v in cls[1:]:
            uf.union(int(cls[0]), int(v))
    roots_a = {uf.find(int(v)) for v in group_a}
    return any(uf.find(int(v)) in roots_a for v in group_b)


def vertical_crossing_event(domain: LatticeDomain):
    """Predicate: bottom row connected to top row by open edges (no wiring)."""
    ys = domain.vertices[:, 1]
    bottom = np.flatnonzero(ys == ys.min()).tolist()
    top = np.flatnonzero(ys == ys.max()).tolist()
    free = BoundaryCondition.free()

    def event(cfg: Configuration) -> bool:
        return connected_in(cfg, free, bottom, top)

    return event
