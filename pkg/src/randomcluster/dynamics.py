"""Sweeny heat-bath dynamics: single-edge Gibbs updates of the cluster model.

A uniformly random edge is resampled from its conditional law given the
rest of the configuration: open with probability p when its endpoints are
connected without it, and with the reduced probability p / (p + (1-p) q)
otherwise.  The chain is reversible with the cluster measure as its
stationary law; time is measured in sweeps of |E| single-edge updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .connectivity import BfsBackend, UnionFindRebuildBackend
from .lattice import BCKind, BoundaryCondition, LatticeDomain, TorusDomain
from .measure import Configuration, ModelParams
from .rng import child_generator

DEFAULT_BURNIN_SWEEPS_PER_UNIT = 100  # sweeps per unit of linear size


def conditional_open_probability(connected_without_e: bool, params: ModelParams) -> float:
    """Conditional probability that an edge is open given the configuration
    off the edge; only the connectivity of its endpoints enters."""
    if connected_without_e:
        return params.p
    return params.p / (params.p + (1.0 - params.p) * params.q)


def default_initial_configuration(domain, bc: BoundaryCondition) -> np.ndarray:
    """All-closed under free conditions, all-open otherwise: the monotone
    extremes sandwiching equilibrium for q >= 1."""
    if bc.kind is BCKind.FREE:
        return np.zeros(domain.n_edges, dtype=bool)
    return np.ones(domain.n_edges, dtype=bool)


@dataclass
class HeatBathChain:
    domain: LatticeDomain | TorusDomain
    params: ModelParams
    bc: BoundaryCondition
    backend: BfsBackend
    rng: np.random.Generator
    step_counter: int = 0

    @property
    def cfg(self) -> Configuration:
        return Configuration(self.domain,
                             self.backend.open[:self.domain.n_edges].copy())

    def _draw(self, k: int):
        edges = self.rng.integers(0, self.domain.n_edges, size=k, dtype=np.int64)
        uniforms = self.rng.random(k)
        return edges, uniforms


def make_chain(domain, params: ModelParams, bc: BoundaryCondition,
               seed=0, backend: str = "bfs", rebuild_interval: int = 64,
               initial: np.ndarray | None = None) -> HeatBathChain:
    if backend == "bfs":
        be = BfsBackend(domain, bc)
    elif backend == "unionfind":
        be = UnionFindRebuildBackend(domain, bc, rebuild_interval)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    init = default_initial_configuration(domain, bc) if initial is None else \
        np.asarray(initial, dtype=bool)
    be.load(Configuration(domain, init))
    rng = seed if isinstance(seed, np.random.Generator) else child_generator(seed)
    return HeatBathChain(domain=domain, params=params, bc=bc, backend=be, rng=rng)


def step(chain: HeatBathChain) -> None:
    """One single-edge update through the chain's backend (slow path used by
    the unit tests; bulk sampling goes through the kernels in run())."""
    edges, uniforms = chain._draw(1)
    e = int(edges[0])
    pr = conditional_open_probability(chain.backend.connected_without(e),
                                      chain.params)
    chain.backend.set_edge(e, bool(uniforms[0] < pr))
    chain.step_counter += 1


def _kernel_state(chain: HeatBathChain):
    g = chain.backend.graph
    return g, chain.backend.open


def run_steps(chain: HeatBathChain, n_steps: int) -> None:
    """Advance the chain by n_steps single-edge updates (kernel path)."""
    if n_steps <= 0:
        return
    g, open_arr = _kernel_state(chain)
    edges, uniforms = chain._draw(n_steps)
    sv = _kernels.sweeny_steps(
        g.adj_ptr, g.adj_vert, g.adj_edge, open_arr, g.edge_u, g.edge_v,
        chain.params.p, chain.params.q, edges, uniforms,
        chain.backend._stamp, chain.backend._qa, chain.backend._qb,
        np.int64(chain.backend._sv))
    chain.backend._sv = int(sv)
    chain.step_counter += n_steps
    if isinstance(chain.backend, UnionFindRebuildBackend):
        chain.backend._rebuild()


def run(chain: HeatBathChain, sweeps: int, thin: int = 1, collect=None) -> None:
    """Run `sweeps` sweeps (|E| updates each), handing a configuration
    snapshot to `collect` after every `thin` sweeps.  Deterministic for a
    fixed seed."""
    if sweeps < 0:
        raise ValueError("sweeps must be >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    E = chain.domain.n_edges
    done = 0
    while done < sweeps:
        block = min(thin, sweeps - done)
        run_steps(chain, block * E)
        done += block
        if collect is not None and block == thin:
            collect(chain.cfg)


def burn_in_sweeps(domain, override: int | None = None) -> int:
    """Default equilibration budget: sweeps proportional to linear size."""
    if override is not None:
        return override
    if isinstance(domain, TorusDomain):
        size = domain.n
    else:
        size = max(domain.width, domain.height)
    return DEFAULT_BURNIN_SWEEPS_PER_UNIT * size


def transition_matrix(domain, params: ModelParams, bc: BoundaryCondition) -> np.ndarray:
    """Exact single-step (random-scan) transition matrix on {0,1}^E for
    tiny domains: the reversibility and ergodicity tests diagonalize this."""
    from .connectivity import brute_force_connected_without

    E = domain.n_edges
    if E > 10:
        raise ValueError("transition matrix only built for tiny domains")
    n = 1 << E
    P = np.zeros((n, n))
    for mask in range(n):
        open_arr = np.array([(mask >> e) & 1 for e in range(E)], dtype=bool)
        for e in range(E):
            conn = brute_force_connected_without(domain, open_arr, e, bc)
            pr = conditional_open_probability(conn, params)
            m_open = mask | (1 << e)
            m_closed = mask & ~(1 << e)
            P[mask, m_open] += pr / E
            P[mask, m_closed] += (1.0 - pr) / E
    return P
