"""Invariant suite behind the `selftest` subcommand.

Exact identities run at full precision; stochastic checks run at smoke
tolerances (the acceptance test suite carries the calibrated versions).
"""

from __future__ import annotations

import math

import numpy as np

from .connectivity import (BfsBackend, UnionFindRebuildBackend,
                           brute_force_connected_without)
from .coupling import (CouplingChain, LabelState, atom_mass, project,
                       threshold, threshold_oracle)
from .dynamics import make_chain, run, transition_matrix
from .lattice import BoundaryCondition, build_box, dual_domain
from .measure import (Configuration, ModelParams, cluster_count,
                      dual_configuration, dual_parameter, dual_weight,
                      exact_distribution, self_dual_point, weight)
from .observable import (bottom_arc_box, check_boundary_connection,
                         check_free_arc_relation, check_massive_harmonicity,
                         check_vertex_relation, corner_arc_box,
                         diamond_bulk_domain, loop_weight_ratio_spread,
                         massive_walk_identity, observable_exact)
from .experiments import reference_exponents
from .rng import child_generator


def _check_lattice():
    d = build_box(2, 2)
    assert d.n_vertices == 9 and d.n_edges == 12
    assert build_box(1, 1).n_edges == 4 and build_box(1, 0).n_edges == 1
    # Euler on rectangles, counting the outer face.
    faces = (d.width - 1) * (d.height - 1) + 1
    assert d.n_vertices - d.n_edges + faces == 2
    dual, bij = dual_domain(d)
    assert np.array_equal(bij[bij], np.arange(d.n_edges))
    return "lattice counts, Euler, dual involution"


def _check_duality():
    assert abs(self_dual_point(2.0) - math.sqrt(2) / (1 + math.sqrt(2))) < 1e-15
    for p, q in ((0.3, 1.5), (0.6, 2.0), (0.8, 4.0)):
        assert abs(dual_parameter(dual_parameter(p, q), q) - p) < 1e-12
    for dims in ((1, 1), (2, 1)):
        d = build_box(*dims)
        dual, bij = dual_domain(d)
        q = 2.0
        p = 0.55
        params = ModelParams(p, q)
        dparams = ModelParams(dual_parameter(p, q), q)
        free = BoundaryCondition.free()
        ratios = []
        for mask in range(1 << d.n_edges):
            cfg = Configuration.from_mask(d, mask)
            w1 = weight(cfg, params, free)
            w2 = dual_weight(dual, dual_configuration(cfg, bij), dparams)
            ratios.append(w1 / w2)
        assert (max(ratios) - min(ratios)) / max(ratios) < 1e-10
    return "self-dual point, dual-parameter involution, weight-ratio constancy"


def _check_measure():
    d = build_box(1, 1)
    free = BoundaryCondition.free()
    wired = BoundaryCondition.wired()
    closed = Configuration.all_closed(d)
    assert cluster_count(closed, free) == 4
    assert cluster_count(closed, wired) == 1
    dist = exact_distribution(d, ModelParams(0.37, 1.0), free)
    for mask in range(16):
        o = bin(mask).count("1")
        expect = 0.37 ** o * 0.63 ** (4 - o)
        assert abs(dist.probabilities[mask] - expect) < 1e-12
    return "cluster counting and q=1 product reduction"


def _check_backends():
    d = build_box(4, 4)
    rng = child_generator(12345)
    for bc in (BoundaryCondition.free(), BoundaryCondition.wired()):
        bfs = BfsBackend(d, bc)
        uf = UnionFindRebuildBackend(d, bc, rebuild_interval=16)
        open_arr = np.zeros(d.n_edges, dtype=bool)
        for backend in (bfs, uf):
            backend.load(Configuration(d, open_arr))
        for _ in range(2000):
            e = int(rng.integers(0, d.n_edges))
            state = bool(rng.random() < 0.5)
            open_arr[e] = state
            bfs.set_edge(e, state)
            uf.set_edge(e, state)
            f = int(rng.integers(0, d.n_edges))
            truth = brute_force_connected_without(d, open_arr, f, bc)
            assert bfs.connected_without(f) == truth
            assert uf.connected_without(f) == truth
    return "backend answers match the fresh-search oracle (2000 mutations)"


def _check_dynamics():
    free = BoundaryCondition.free()
    for dims, p, q in (((1, 0), 0.5, 2.0), ((2, 0), 0.4, 1.5), ((1, 1), 0.6, 3.0)):
        d = build_box(*dims)
        params = ModelParams(p, q)
        P = transition_matrix(d, params, free)
        pi = exact_distribution(d, params, free).probabilities
        assert np.abs(pi @ P - pi).max() < 1e-12
        flow = pi[:, None] * P
        assert np.abs(flow - flow.T).max() < 1e-12
        # Ergodicity: strictly positive after |E|+1 steps.
        Pk = np.linalg.matrix_power(P, d.n_edges + 1)
        assert Pk.min() > 0
    d = build_box(1, 1)
    params = ModelParams(self_dual_point(2.0), 2.0)
    dist = exact_distribution(d, params, free)
    chain = make_chain(d, params, free, seed=31)
    masks = []
    run(chain, 60_000, 1, lambda c: masks.append(c.as_mask()))
    emp = np.bincount(masks, minlength=16) / len(masks)
    tv = 0.5 * np.abs(emp - dist.probabilities).sum()
    assert tv < 0.02, tv
    return "reversibility, ergodicity, and equilibrium agreement (smoke)"


def _check_coupling():
    d = build_box(3, 3)
    rng = child_generator(77)
    for _ in range(200):
        z = LabelState.fresh(d, rng)
        e = int(rng.integers(0, d.n_edges))
        a, b = threshold(z, e), threshold_oracle(z, e)
        assert a.value == b.value and a.provenance == b.provenance
        c1 = project(z, 0.3).open
        c2 = project(z, 0.7).open
        assert not (c1 & ~c2).any()
    for t in (0.3, 0.6, 0.9):
        for q in (1.5, 2.0, 4.0):
            rng2 = child_generator(5, int(t * 10), int(q * 10))
            n = 200_000
            V = rng2.random(n)
            corner = t / (t + (1 - t) * q)
            freq = ((V >= corner) & (V <= t)).mean()
            expect = atom_mass(t, q)
            se = math.sqrt(expect * (1 - expect) / n)
            assert abs(freq - expect) < 4 * se
    return "bottleneck thresholds vs oracle, monotone projections, atom mass"


def _check_observable():
    psd = self_dual_point(2.0)
    for maker in (lambda: bottom_arc_box(4, 1), lambda: corner_arc_box(2, 2),
                  diamond_bulk_domain):
        domain, bc = maker()
        for p in (0.4, psd, 0.7):
            f = observable_exact(domain, bc, ModelParams(p, 2.0))
            assert abs(f.value(f.mg.e_b) - 1.0) < 1e-12
            assert f.max_ray_residual() < 1e-10
            assert check_vertex_relation(f) < 1e-10
            res, n_sites = check_massive_harmonicity(f)
            assert res < 1e-9
            fa, _ = check_free_arc_relation(f)
            assert fa < 1e-9
            assert loop_weight_ratio_spread(f) < 1e-10
    domain, bc = bottom_arc_box(4, 1)
    f = observable_exact(domain, bc, ModelParams(psd, 2.0))
    assert massive_walk_identity(f) < 1e-8
    dist = exact_distribution(domain, ModelParams(psd, 2.0), bc)
    assert check_boundary_connection(f, dist) < 1e-10
    return "observable relation suite (exact tolerances)"


def _check_exponents():
    r1 = reference_exponents(1.0)
    assert abs(r1.u - 2 / 3) < 1e-12 and abs(r1.nu - 4 / 3) < 1e-12
    assert abs(r1.xi1 - 5 / 48) < 1e-12 and abs(r1.xi4 - 5 / 4) < 1e-12
    r2 = reference_exponents(2.0)
    assert abs(r2.nu - 1.0) < 1e-12 and abs(r2.xi1 - 1 / 8) < 1e-12
    assert abs(r2.xi4 - 35 / 24) < 1e-12
    for q in (1.0, 1.7, 2.0, 3.3, 4.0):
        r = reference_exponents(q)
        assert abs(r.eta - 2 * r.xi1) < 1e-14
    return "reference exponent table and eta = 2 xi1"


CHECKS = [_check_lattice, _check_duality, _check_measure, _check_backends,
          _check_dynamics, _check_coupling, _check_observable,
          _check_exponents]


def run_all(verbose: bool = True) -> int:
    failures = 0
    for chk in CHECKS:
        try:
            msg = chk()
            if verbose:
                print(f"PASS {msg}")
        except AssertionError as exc:
            failures += 1
            if verbose:
                print(f"FAIL {chk.__name__}: {exc}")
    if verbose:
        print("selftest:", "OK" if failures == 0 else f"{failures} failures")
    return 0 if failures == 0 else 1
