"""Desk-scale estimators for near-critical behavior.

Crossing probabilities, the crossing-based correlation length, one-arm and
four-arm probabilities, exact per-sample pivotal counts, edge intensity and
its derivative (the specific-heat proxy), conditional edge influence, cloud
statistics of the monotone coupling, and the Kesten product
L^2 alpha_4(L) |p - p_c|.

Every estimator runs independent seeded replicas and reports the spread of
the replica means as its standard error; within-chain autocorrelation never
enters an error bar.  Replicas may run on a thread pool (the kernels drop
the GIL); results are folded in replica order, so thread count never
changes a number.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .connectivity import AugmentedGraph
from .coupling import CouplingChain
from .dynamics import burn_in_sweeps, make_chain, run_steps
from .lattice import (BoundaryCondition, LatticeDomain, TorusDomain,
                      build_box, build_torus)
from .measure import ModelParams, self_dual_point
from .rng import child_generator


class ExperimentError(ValueError):
    pass


def thread_count() -> int:
    env = os.environ.get("RANDOMCLUSTER_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class SamplingBudget:
    """Replica structure of one estimate: `replicas` independent chains,
    `samples` thinned measurements each, `thin` sweeps between
    measurements, burn-in defaulting to sweeps proportional to linear
    size."""

    replicas: int = 8
    samples: int = 2000
    thin: int = 2
    burn_in: int | None = None

    def scaled(self, factor: float) -> "SamplingBudget":
        return SamplingBudget(self.replicas, max(8, int(self.samples * factor)),
                              self.thin, self.burn_in)


@dataclass
class Estimate:
    value: float
    std_error: float
    n_samples: int
    params: dict = field(default_factory=dict)

    def __str__(self):
        return f"{self.value:.6g} +- {self.std_error:.2g} (n={self.n_samples})"


def _aggregate(replica_means: list[float], n_samples: int, params: dict) -> Estimate:
    means = np.asarray(replica_means, dtype=float)
    value = float(means.mean())
    if len(means) > 1:
        se = float(means.std(ddof=1) / math.sqrt(len(means)))
    else:
        se = float("nan")
    return Estimate(value=value, std_error=se, n_samples=n_samples, params=params)


def _map_replicas(fn, n_replicas: int):
    threads = thread_count()
    if threads <= 1 or n_replicas <= 1:
        return [fn(r) for r in range(n_replicas)]
    with ThreadPoolExecutor(max_workers=min(threads, n_replicas)) as pool:
        return list(pool.map(fn, range(n_replicas)))


# ---------------------------------------------------------------------------
# Reference exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceExponents:
    """Conjectured critical exponents for cluster weight q in [1,4], all
    rational in u(q) = (2/pi) arccos(sqrt(q)/2): specific heat alpha,
    magnetization beta, correlation length nu, two-point eta, one-arm xi1
    (eta = 2 xi1), four-arm xi4."""

    q: float
    u: float
    alpha: float
    beta: float
    nu: float
    eta: float
    xi1: float
    xi4: float


def reference_exponents(q: float) -> ReferenceExponents:
    if not 1.0 <= q <= 4.0:
        raise ExperimentError("reference exponents cover q in [1,4]")
    u = (2.0 / math.pi) * math.acos(math.sqrt(q) / 2.0)
    return ReferenceExponents(
        q=q, u=u,
        alpha=2.0 * (1.0 - 2.0 * u) / (3.0 * (1.0 - u)),
        beta=(1.0 + u) / 12.0,
        nu=(2.0 - u) / (3.0 * (1.0 - u)),
        eta=(1.0 - u * u) / (2.0 * (2.0 - u)),
        xi1=(1.0 - u * u) / (4.0 * (2.0 - u)),
        xi4=2.5 - 0.75 * u - 1.0 / (2.0 - u),
    )


# ---------------------------------------------------------------------------
# Shared sampling plumbing
# ---------------------------------------------------------------------------

def _resolve_bc(bc) -> BoundaryCondition:
    if isinstance(bc, BoundaryCondition):
        return bc
    if bc == "free":
        return BoundaryCondition.free()
    if bc == "wired":
        return BoundaryCondition.wired()
    raise ExperimentError(f"unknown boundary condition {bc!r}")


def _bottom_top(domain: LatticeDomain):
    ys = domain.vertices[:, 1]
    bottom = np.flatnonzero(ys == ys.min()).astype(np.int64)
    top_mask = np.zeros(domain.n_vertices, dtype=np.bool_)
    top_mask[ys == ys.max()] = True
    return bottom, top_mask


def _central_edge(domain: LatticeDomain) -> int:
    """Horizontal edge nearest the domain center (deterministic pick)."""
    cx = float(domain.vertices[:, 0].mean())
    cy = float(domain.vertices[:, 1].mean())
    best, best_d = -1, float("inf")
    for e in range(domain.n_edges):
        u, v = domain.edges[e]
        if domain.vertices[u][1] != domain.vertices[v][1]:
            continue
        mx = (domain.vertices[u][0] + domain.vertices[v][0]) / 2.0
        my = float(domain.vertices[u][1])
        d = (mx - cx) ** 2 + (my - cy) ** 2
        if d < best_d:
            best, best_d = e, d
    return best


def _sweeny_indicator_replica(domain, params, bc, sources, target_mask,
                              tracked_edge, budget, seed, rep):
    chain = make_chain(domain, params, bc, seed=child_generator(seed, rep))
    E = domain.n_edges
    run_steps(chain, burn_in_sweeps(domain, budget.burn_in) * E)
    g = chain.backend.graph
    steps = budget.thin * E
    edges, uniforms = chain._draw(budget.samples * steps)
    events = np.zeros(budget.samples, dtype=np.uint8)
    tracked = np.zeros(budget.samples, dtype=np.uint8)
    sv = _kernels.sweeny_sample_indicator(
        g.adj_ptr, g.adj_vert, g.adj_edge, chain.backend.open, g.edge_u,
        g.edge_v, params.p, params.q, edges, uniforms, np.int64(steps),
        sources, target_mask, np.int64(tracked_edge), events, tracked,
        chain.backend._stamp, chain.backend._qa, chain.backend._qb,
        np.int64(chain.backend._sv))
    chain.backend._sv = int(sv)
    return events, tracked


def _coupling_indicator_replica(domain, params, sources, target_mask,
                                budget, seed, rep):
    chain = CouplingChain(domain, params.q, seed=child_generator(seed, rep))
    E = domain.n_edges
    chain.run_steps(burn_in_sweeps(domain, budget.burn_in) * E)
    steps = budget.thin * E
    edges, uniforms = chain._draw(budget.samples * steps)
    events = np.zeros(budget.samples, dtype=np.uint8)
    real = AugmentedGraph(domain, BoundaryCondition.free())
    scratch = real.fresh_open()
    stamp = np.zeros(real.n_vertices, dtype=np.int64)
    queue = np.empty(real.n_vertices, dtype=np.int64)
    tok = _kernels.coupling_sample_indicator(
        chain._eu, chain._ev, chain.state.values, chain.state.provenance,
        np.int64(domain.n_vertices), params.q, edges, uniforms,
        np.int64(steps), params.p, real.adj_ptr, real.adj_vert,
        real.adj_edge, sources, target_mask, events, scratch, stamp, queue,
        chain._parent, np.int64(chain.state.next_token), np.int64(1))
    chain.state.next_token = int(tok)
    return events, np.zeros_like(events)


def _indicator_estimate(domain, params, bc, sources, target_mask, budget,
                        seed, sampler="sweeny", tracked_edge=-1,
                        params_echo=None):
    bc = _resolve_bc(bc)
    if sampler == "coupling" and bc.kind.value != "free":
        raise ExperimentError("the coupling sampler runs with free boundary conditions only")

    def one(rep):
        if sampler == "sweeny":
            return _sweeny_indicator_replica(domain, params, bc, sources,
                                             target_mask, tracked_edge,
                                             budget, seed, rep)
        if sampler == "coupling":
            return _coupling_indicator_replica(domain, params, sources,
                                               target_mask, budget, seed, rep)
        raise ExperimentError(f"unknown sampler {sampler!r}")

    results = _map_replicas(one, budget.replicas)
    means = [float(ev.mean()) for ev, _ in results]
    echo = dict(params_echo or {})
    echo.update(p=params.p, q=params.q, bc=str(bc), seed=seed,
                replicas=budget.replicas, sampler=sampler)
    est = _aggregate(means, budget.replicas * budget.samples, echo)
    est.params["replica_data"] = results
    return est


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def crossing_probability(n: int, rho: float, p: float, q: float, bc="free",
                         sampler: str = "sweeny",
                         budget: SamplingBudget | None = None,
                         seed: int = 0) -> Estimate:
    """Probability of a vertical open crossing (bottom row to top row) of
    the rectangle [0,n] x [0, rho n]."""
    m = rho * n
    if abs(m - round(m)) > 1e-9:
        raise ExperimentError("rho * n must be an integer")
    m = int(round(m))
    echo = {"n": n, "rho": rho}
    if p <= 0.0:
        return Estimate(0.0, 0.0, 0, {**echo, "exact": True})
    if p >= 1.0:
        return Estimate(1.0, 0.0, 0, {**echo, "exact": True})
    budget = budget or SamplingBudget()
    domain = build_box(n, m)
    params = ModelParams(p, q)
    bottom, top_mask = _bottom_top(domain)
    est = _indicator_estimate(domain, params, bc, bottom, top_mask, budget,
                              seed, sampler=sampler, params_echo=echo)
    est.params.pop("replica_data", None)
    return est


def one_arm_probability(n: int, p: float, q: float, bc="free",
                        budget: SamplingBudget | None = None,
                        seed: int = 0) -> Estimate:
    """Probability that the center of an n x n box is joined to the inner
    boundary by open edges."""
    if p >= 1.0:
        return Estimate(1.0, 0.0, 0, {"n": n, "exact": True})
    budget = budget or SamplingBudget()
    domain = build_box(n, n)
    center = domain.vertex_index[(n // 2, n // 2)]
    target = np.zeros(domain.n_vertices, dtype=np.bool_)
    target[domain.boundary_vertices] = True
    sources = np.array([center], dtype=np.int64)
    est = _indicator_estimate(domain, ModelParams(p, q), bc, sources, target,
                              budget, seed, params_echo={"n": n})
    est.params.pop("replica_data", None)
    return est


def pivotal_count(n: int, p: float, q: float, bc="free",
                  budget: SamplingBudget | None = None,
                  seed: int = 0) -> Estimate:
    """Mean number of edges pivotal for the vertical crossing of an n x n
    box; the count per sample is exact (bridge decomposition)."""
    budget = budget or SamplingBudget()
    domain = build_box(n, n)
    params = ModelParams(p, q)
    bcr = _resolve_bc(bc)
    ys = domain.vertices[:, 1]
    in_bottom = (ys == ys.min()).astype(np.bool_)
    in_top = (ys == ys.max()).astype(np.bool_)
    real = AugmentedGraph(domain, BoundaryCondition.free())

    def one(rep):
        chain = make_chain(domain, params, bcr, seed=child_generator(seed, rep))
        E = domain.n_edges
        run_steps(chain, burn_in_sweeps(domain, budget.burn_in) * E)
        g = chain.backend.graph
        steps = budget.thin * E
        edges, uniforms = chain._draw(budget.samples * steps)
        counts = np.zeros(budget.samples, dtype=np.int64)
        sv = _kernels.sweeny_sample_pivotal(
            g.adj_ptr, g.adj_vert, g.adj_edge, chain.backend.open, g.edge_u,
            g.edge_v, params.p, params.q, edges, uniforms, np.int64(steps),
            real.adj_ptr, real.adj_vert, real.adj_edge,
            np.int64(domain.n_vertices), np.int64(domain.n_edges),
            in_bottom, in_top, counts,
            chain.backend._stamp, chain.backend._qa, chain.backend._qb,
            np.int64(chain.backend._sv))
        chain.backend._sv = int(sv)
        return float(counts.mean())

    means = _map_replicas(one, budget.replicas)
    return _aggregate(means, budget.replicas * budget.samples,
                      {"n": n, "p": p, "q": q, "bc": str(bcr), "seed": seed,
                       "replicas": budget.replicas})


def four_arm_probability(r: int, p: float, q: float, bc="free",
                         budget: SamplingBudget | None = None,
                         seed: int = 0) -> Estimate:
    """Probability of the edge-centered four-arm proxy at scale r: on a box
    of side 2r, with the central edge removed, both of its endpoints reach
    Chebyshev distance r/2 while staying disconnected from each other (on
    the square lattice this forces the two alternating dual arms).

    The finite-volume arm event has no canonical definition; this is the
    convention used by the Kesten-relation table.
    """
    budget = budget or SamplingBudget()
    side = 2 * r
    domain = build_box(side, side)
    params = ModelParams(p, q)
    bcr = _resolve_bc(bc)
    e0 = _central_edge(domain)
    u, v = domain.edges[e0]
    cx = (domain.vertices[u][0] + domain.vertices[v][0]) / 2.0
    cy = float(domain.vertices[u][1])
    dist = np.maximum(np.abs(domain.vertices[:, 0] - cx),
                      np.abs(domain.vertices[:, 1] - cy))
    ring = (dist >= max(1.0, r / 2.0)).astype(np.bool_)

    def one(rep):
        chain = make_chain(domain, params, bcr, seed=child_generator(seed, rep))
        E = domain.n_edges
        run_steps(chain, burn_in_sweeps(domain, budget.burn_in) * E)
        g = chain.backend.graph
        steps = budget.thin * E
        edges, uniforms = chain._draw(budget.samples * steps)
        events = np.zeros(budget.samples, dtype=np.uint8)
        sv = _kernels.sweeny_sample_four_arm(
            g.adj_ptr, g.adj_vert, g.adj_edge, chain.backend.open, g.edge_u,
            g.edge_v, params.p, params.q, edges, uniforms, np.int64(steps),
            np.int64(e0), ring, events,
            chain.backend._stamp, chain.backend._qa, chain.backend._qb,
            np.int64(chain.backend._sv))
        chain.backend._sv = int(sv)
        return float(events.mean())

    means = _map_replicas(one, budget.replicas)
    return _aggregate(means, budget.replicas * budget.samples,
                      {"r": r, "p": p, "q": q, "bc": str(bcr), "seed": seed,
                       "replicas": budget.replicas})


def _edge_count_samples(domain, params, bc, budget, seed, tracked_edge):
    bcr = _resolve_bc(bc)

    def one(rep):
        chain = make_chain(domain, params, bcr, seed=child_generator(seed, rep))
        E = domain.n_edges
        run_steps(chain, burn_in_sweeps(domain, budget.burn_in) * E)
        g = chain.backend.graph
        steps = budget.thin * E
        edges, uniforms = chain._draw(budget.samples * steps)
        counts = np.zeros(budget.samples, dtype=np.int64)
        tracked = np.zeros(budget.samples, dtype=np.uint8)
        sv = _kernels.sweeny_sample_edge_counts(
            g.adj_ptr, g.adj_vert, g.adj_edge, chain.backend.open, g.edge_u,
            g.edge_v, params.p, params.q, edges, uniforms, np.int64(steps),
            np.int64(domain.n_edges), np.int64(tracked_edge), counts, tracked,
            chain.backend._stamp, chain.backend._qa, chain.backend._qb,
            np.int64(chain.backend._sv))
        chain.backend._sv = int(sv)
        return counts, tracked

    return _map_replicas(one, budget.replicas)


def _ei_domain(n: int, torus: bool):
    return build_torus(n) if torus else build_box(n, n)


def edge_intensity(p: float, q: float, n: int, bc="free",
                   budget: SamplingBudget | None = None, seed: int = 0,
                   torus: bool = True) -> Estimate:
    """Probability that a fixed edge is open.  On the torus every edge is
    equivalent, so the open fraction is used (same mean, smaller variance);
    on a box the tracked central edge is reported."""
    budget = budget or SamplingBudget()
    domain = _ei_domain(n, torus)
    params = ModelParams(p, q)
    tracked = -1 if torus else _central_edge(domain)
    reps = _edge_count_samples(domain, params, bc, budget, seed, tracked)
    if torus:
        means = [float(c.mean()) / domain.n_edges for c, _ in reps]
    else:
        means = [float(t.mean()) for _, t in reps]
    return _aggregate(means, budget.replicas * budget.samples,
                      {"n": n, "p": p, "q": q, "bc": str(_resolve_bc(bc)),
                       "seed": seed, "replicas": budget.replicas,
                       "torus": torus})


def edge_count_variance(p: float, q: float, n: int, bc="free",
                        budget: SamplingBudget | None = None, seed: int = 0,
                        torus: bool = True) -> Estimate:
    """Specific-heat proxy Var(|omega|) / |E|."""
    budget = budget or SamplingBudget()
    domain = _ei_domain(n, torus)
    reps = _edge_count_samples(domain, ModelParams(p, q), bc, budget, seed, -1)
    means = [float(c.var(ddof=1)) / domain.n_edges for c, _ in reps]
    return _aggregate(means, budget.replicas * budget.samples,
                      {"n": n, "p": p, "q": q, "seed": seed,
                       "replicas": budget.replicas, "torus": torus})


def edge_intensity_derivative(p: float, q: float, n: int, bc="free",
                              dp: float = 0.01,
                              budget: SamplingBudget | None = None,
                              seed: int = 0, torus: bool = True) -> dict:
    """d(edge intensity)/dp two ways: a centered finite difference with
    common random numbers across p - dp and p + dp, and the fluctuation
    identity d EI / dp = Var(|omega|) / (|E| p (1-p)).  The two must agree
    within their combined uncertainty."""
    if not (0.0 < p - dp and p + dp < 1.0):
        raise ExperimentError("p +- dp must stay inside (0,1)")
    budget = budget or SamplingBudget()
    domain = _ei_domain(n, torus)
    E = domain.n_edges

    def mean_counts(pp):
        reps = _edge_count_samples(domain, ModelParams(pp, q), bc, budget,
                                   seed, -1)
        return np.array([float(c.mean()) for c, _ in reps])

    lo = mean_counts(p - dp)
    hi = mean_counts(p + dp)
    fd = (hi - lo) / (2.0 * dp * E)
    fd_est = _aggregate(list(fd), budget.replicas * budget.samples,
                        {"n": n, "p": p, "dp": dp})

    reps = _edge_count_samples(domain, ModelParams(p, q), bc, budget, seed, -1)
    var = np.array([float(c.var(ddof=1)) for c, _ in reps])
    fl = var / (E * p * (1.0 - p))
    fl_est = _aggregate(list(fl), budget.replicas * budget.samples,
                        {"n": n, "p": p})
    return {"finite_difference": fd_est, "fluctuation": fl_est,
            "variance_proxy": _aggregate(list(var / E),
                                         budget.replicas * budget.samples,
                                         {"n": n, "p": p})}


def influence(p: float, q: float, n: int, bc="free", edge: int | None = None,
              budget: SamplingBudget | None = None, seed: int = 0) -> Estimate:
    """Conditional influence of an edge on the vertical crossing event:
    P(crossing | edge open) - P(crossing | edge closed), estimated by
    conditioning the equilibrium samples on the edge's state."""
    budget = budget or SamplingBudget()
    domain = build_box(n, n)
    params = ModelParams(p, q)
    e = _central_edge(domain) if edge is None else edge
    bottom, top_mask = _bottom_top(domain)
    est = _indicator_estimate(domain, params, bc, bottom, top_mask, budget,
                              seed, tracked_edge=e, params_echo={"n": n, "edge": e})
    diffs = []
    for ev, tr in est.params.pop("replica_data"):
        ev = ev.astype(float)
        tr = tr.astype(bool)
        if tr.any() and (~tr).any():
            diffs.append(float(ev[tr].mean() - ev[~tr].mean()))
    if not diffs:
        raise ExperimentError("no replica saw both edge states; widen the budget")
    return _aggregate(diffs, budget.replicas * budget.samples, est.params)


@dataclass
class CorrelationLengthResult:
    length: int | None            # None = censored at the grid maximum
    censored: bool
    table: list                   # (n, estimate) pairs along the scan
    epsilon: float
    supercritical: bool


def correlation_length(epsilon: float, rho: float, p: float, q: float,
                       bc="free", n_grid=(4, 8, 16, 32),
                       budget: SamplingBudget | None = None,
                       seed: int = 0) -> CorrelationLengthResult:
    """Smallest grid scale at which the vertical crossing probability of
    [0,n] x [0, rho n] leaves the critical window: <= epsilon below the
    self-dual point, >= 1 - epsilon above it, demanding two standard errors
    of separation.  Scales are scanned in increasing order; a scan that
    never separates is censored."""
    if not 0.0 < epsilon < 0.5:
        raise ExperimentError("epsilon must lie in (0, 1/2)")
    psd = self_dual_point(q)
    if p == psd:
        raise ExperimentError("correlation length needs p != self-dual point")
    supercritical = p > psd
    budget = budget or SamplingBudget()
    table = []
    for k, n in enumerate(sorted(n_grid)):
        est = crossing_probability(n, rho, p, q, bc=bc, budget=budget,
                                   seed=seed + 7919 * k)
        table.append((n, est))
        if supercritical:
            if est.value - 2.0 * est.std_error >= 1.0 - epsilon:
                return CorrelationLengthResult(n, False, table, epsilon, True)
        else:
            if est.value + 2.0 * est.std_error <= epsilon:
                return CorrelationLengthResult(n, False, table, epsilon, False)
    return CorrelationLengthResult(None, True, table, epsilon, supercritical)


def cloud_statistics(n: int, q: float, sweeps: int | None = None,
                     budget: SamplingBudget | None = None, seed: int = 0,
                     level_bins: int = 20) -> dict:
    """Descriptive cloud statistics of the equilibrium monotone coupling on
    an n x n box: per-sample multi-cloud counts, the histogram of cloud
    sizes, and the level histogram of multi-edge clouds (exploratory; no
    pass/fail attached)."""
    budget = budget or SamplingBudget()
    domain = build_box(n, n)
    E = domain.n_edges
    mids = np.zeros((E, 2), dtype=np.int64)
    for e in range(E):
        u, v = domain.edges[e]
        mids[e, 0] = int(domain.vertices[u][0]) + int(domain.vertices[v][0])
        mids[e, 1] = int(domain.vertices[u][1]) + int(domain.vertices[v][1])

    size_hist = np.zeros(E + 1, dtype=np.int64)
    level_hist = np.zeros(level_bins, dtype=np.int64)
    multi_frac, max_sizes, max_diams = [], [], []
    burn = sweeps if sweeps is not None else burn_in_sweeps(domain, budget.burn_in)

    for rep in range(budget.replicas):
        chain = CouplingChain(domain, q, seed=child_generator(seed, rep))
        chain.run_steps(burn * E)
        steps = budget.thin * E
        edges, uniforms = chain._draw(budget.samples * steps)
        multi = np.zeros(budget.samples, dtype=np.int64)
        msize = np.zeros(budget.samples, dtype=np.int64)
        mdiam = np.zeros(budget.samples, dtype=np.int64)
        tok = _kernels.cloud_stats_run(
            chain._eu, chain._ev, chain.state.values, chain.state.provenance,
            np.int64(domain.n_vertices), q, edges, uniforms, np.int64(steps),
            np.int64(budget.samples), mids[:, 0].copy(), mids[:, 1].copy(),
            multi, msize, mdiam, size_hist, level_hist, chain._parent,
            np.int64(chain.state.next_token))
        chain.state.next_token = int(tok)
        multi_frac.append(float((multi > 0).mean()))
        max_sizes.append(int(msize.max()))
        max_diams.append(int(mdiam.max()))

    n_samples = budget.replicas * budget.samples
    sizes = {int(s): int(c) for s, c in enumerate(size_hist) if c > 0}
    return {
        "n": n, "q": q, "seed": seed, "n_samples": n_samples,
        "multi_cloud_fraction": float(np.mean(multi_frac)),
        "multi_cloud_fraction_se": float(np.std(multi_frac, ddof=1) /
                                         math.sqrt(len(multi_frac)))
        if len(multi_frac) > 1 else float("nan"),
        "size_histogram": sizes,
        "level_histogram": level_hist.tolist(),
        "level_bins": level_bins,
        "max_cloud_size": int(max(max_sizes)),
        "max_cloud_diameter_halved": float(max(max_diams)) / 2.0,
    }


def kesten_relation_check(epsilon: float, p_grid, q: float = 1.0,
                          budget: SamplingBudget | None = None,
                          seed: int = 0, n_grid=(4, 8, 16, 32, 64),
                          rho: float = 1.0) -> dict:
    """For percolation only: tabulate L^2 * alpha_4(L) * |p - p_c| over a
    grid of p, with L the crossing correlation length at epsilon and
    alpha_4 the critical four-arm proxy at scale L.  The relation predicts
    a bounded spread, not a constant."""
    if q != 1.0:
        raise ExperimentError("the Kesten product table is a percolation (q=1) check")
    pc = self_dual_point(1.0)
    budget = budget or SamplingBudget()
    rows = []
    for i, p in enumerate(p_grid):
        clr = correlation_length(epsilon, rho, p, q, n_grid=n_grid,
                                 budget=budget, seed=seed + 101 * i)
        if clr.censored:
            rows.append({"p": p, "L": None, "alpha4": None, "product": None,
                         "censored": True})
            continue
        L = clr.length
        a4 = four_arm_probability(max(2, L), pc, q, budget=budget,
                                  seed=seed + 101 * i + 50)
        rows.append({"p": p, "L": L, "alpha4": a4.value,
                     "alpha4_se": a4.std_error,
                     "product": L * L * a4.value * abs(p - pc),
                     "censored": False})
    products = [r["product"] for r in rows if r["product"]]
    spread = (max(products) / min(products)) if len(products) >= 2 else float("nan")
    return {"epsilon": epsilon, "q": q, "seed": seed, "rows": rows,
            "spread": spread}


def distribution_tv_vs_exact(domain, params: ModelParams, bc,
                             n_samples: int, thin: int = 2, seed: int = 0,
                             sampler: str = "sweeny",
                             burn_in: int | None = None) -> float:
    """Total-variation distance between the empirical configuration law of
    an equilibrated chain and the exact enumeration (domains under the
    enumeration cap; the bitmask histogram needs |E| <= 24)."""
    from .measure import exact_distribution

    bcr = _resolve_bc(bc)
    dist = exact_distribution(domain, params, bcr)
    E = domain.n_edges
    steps = thin * E
    masks = np.zeros(n_samples, dtype=np.int64)
    if sampler == "sweeny":
        chain = make_chain(domain, params, bcr, seed=child_generator(seed))
        run_steps(chain, burn_in_sweeps(domain, burn_in) * E)
        g = chain.backend.graph
        done = 0
        sv = chain.backend._sv
        while done < n_samples:
            block = min(500_000, n_samples - done)
            edges, uniforms = chain._draw(block * steps)
            sv = _kernels.sweeny_sample_masks(
                g.adj_ptr, g.adj_vert, g.adj_edge, chain.backend.open,
                g.edge_u, g.edge_v, params.p, params.q, edges, uniforms,
                np.int64(steps), np.int64(E), masks[done:done + block],
                chain.backend._stamp, chain.backend._qa, chain.backend._qb,
                np.int64(sv))
            done += block
        chain.backend._sv = int(sv)
    elif sampler == "coupling":
        if bcr.kind.value != "free":
            raise ExperimentError("coupling projections exist under free "
                                  "boundary conditions only")
        chain = CouplingChain(domain, params.q, seed=child_generator(seed))
        chain.run_steps(burn_in_sweeps(domain, burn_in) * E)
        done = 0
        tok = chain.state.next_token
        while done < n_samples:
            block = min(500_000, n_samples - done)
            edges, uniforms = chain._draw(block * steps)
            tok = _kernels.coupling_sample_masks(
                chain._eu, chain._ev, chain.state.values,
                chain.state.provenance, np.int64(domain.n_vertices),
                params.q, edges, uniforms, np.int64(steps), params.p,
                masks[done:done + block], chain._parent, np.int64(tok))
            done += block
        chain.state.next_token = int(tok)
    else:
        raise ExperimentError(f"unknown sampler {sampler!r}")
    emp = np.bincount(masks, minlength=1 << E) / n_samples
    return float(0.5 * np.abs(emp - dist.probabilities).sum())


def fit_log_log(xs, ys):
    """Least-squares slope of log y against log x, with the correlation of
    the fit; the workhorse of the exponent checks."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    corr = float(np.corrcoef(lx, ly)[0, 1])
    return float(slope), float(intercept), corr


def fit_linear(xs, ys):
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    corr = float(np.corrcoef(x, y)[0, 1])
    return float(slope), float(intercept), corr
