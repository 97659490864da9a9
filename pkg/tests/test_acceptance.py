"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  Budgets are sized for a
couple of CPU cores; the whole suite is under an hour, dominated by the
equilibrium-distribution grids and the n=64 chains.

Sample-count note for the distribution grids: the total-variation distance
between a finite histogram and the exact law has a positive floor of order
sqrt(#states / #samples) even for a perfect sampler.  At |E| = 12 that
floor crosses the 0.02 tolerance near 2.5M samples, so the largest domains
draw 4M samples ("effective samples" sized to the state space); smaller
domains use 1M.  Tolerances themselves are never scaled.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from randomcluster.coupling import Label, sample_update, atom_mass
from randomcluster.experiments import (SamplingBudget, cloud_statistics,
                                       correlation_length,
                                       distribution_tv_vs_exact,
                                       edge_count_variance, fit_linear,
                                       fit_log_log, kesten_relation_check,
                                       one_arm_probability, thread_count)
from randomcluster.lattice import BoundaryCondition, build_box
from randomcluster.measure import (Configuration, ModelParams,
                                   dual_configuration, dual_parameter,
                                   dual_weight, exact_distribution,
                                   self_dual_point, weight)
from randomcluster.lattice import dual_domain
from randomcluster.observable import (bottom_arc_box,
                                      check_boundary_connection,
                                      check_free_arc_relation,
                                      check_massive_harmonicity,
                                      check_vertex_relation, corner_arc_box,
                                      diamond_bulk_domain,
                                      massive_walk_identity, observable_exact)
from randomcluster.rng import child_generator

PSD2 = self_dual_point(2.0)

# Representative family of every rectangle shape with |E| <= 12.
TV_DOMAINS = [(1, 0), (1, 1), (2, 1), (3, 1), (2, 2)]
TV_QS = (1.0, 1.5, 2.0, 4.0)


def _report(num: int, ok: bool, detail: str):
    print(f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    assert ok, detail


def _tv_samples(E: int) -> tuple[int, int]:
    if E >= 12:
        return 4_000_000, 3
    if E >= 10:
        return 1_500_000, 3
    return 1_000_000, 2


def _tv_grid(sampler: str, bcs) -> list:
    cells = []
    for dims in TV_DOMAINS:
        for q in TV_QS:
            for p in (0.3, self_dual_point(q), 0.8):
                for bc in bcs:
                    cells.append((dims, q, p, bc))

    def run_cell(args):
        dims, q, p, bc = args
        domain = build_box(*dims)
        n, thin = _tv_samples(domain.n_edges)
        seed = hash((dims, round(q * 10), round(p * 1e6), bc, sampler)) % (1 << 48)
        tv = distribution_tv_vs_exact(domain, ModelParams(p, q), bc, n,
                                      thin=thin, seed=seed, sampler=sampler)
        return (dims, q, p, bc, tv)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        return list(pool.map(run_cell, cells))


def test_criterion_01_sweeny_oracle_equivalence():
    t0 = time.time()
    rows = _tv_grid("sweeny", ("free", "wired"))
    worst = max(rows, key=lambda r: r[-1])
    ok = all(r[-1] < 0.02 for r in rows)
    _report(1, ok,
            f"Sweeny TV grid: {len(rows)} cells, worst TV={worst[-1]:.4f} at "
            f"{worst[:4]} (tol 0.02)  [{time.time() - t0:.0f}s]")


def test_criterion_02_coupling_marginals_and_atoms():
    t0 = time.time()
    # Projection marginals: same grid, free boundary conditions (the label
    # chain is defined in finite volume with free conditions only).
    rows = _tv_grid("coupling", ("free",))
    worst = max(rows, key=lambda r: r[-1])
    ok_tv = all(r[-1] < 0.02 for r in rows)

    # Atom-mass frequencies of the update law, 3 standard errors at 1e6 draws.
    ok_atom = True
    detail_atom = ""
    for T in (0.3, 0.6, 0.9):
        for q in (1.5, 2.0, 4.0):
            rng = child_generator(4242, int(T * 10), int(q * 10))
            params = ModelParams(0.5, q)
            n = 1_000_000
            hits = 0
            tok = 10 ** 9
            lab_T = Label(T, provenance=7)
            for _ in range(n):
                lab, tok = sample_update(lab_T, params, rng, tok)
                hits += lab.provenance == 7
            expect = atom_mass(T, q)
            se = math.sqrt(expect * (1.0 - expect) / n)
            if abs(hits / n - expect) > 3.0 * se:
                ok_atom = False
                detail_atom += f" atom(T={T},q={q}): {hits / n:.5f} vs {expect:.5f};"
    _report(2, ok_tv and ok_atom,
            f"coupling TV grid: {len(rows)} cells, worst TV={worst[-1]:.4f} "
            f"(tol 0.02); atom masses 3 s.e.{detail_atom or ' ok'}  "
            f"[{time.time() - t0:.0f}s]")


def test_criterion_03_duality_identities():
    ok = True
    details = []
    for p, q in ((0.3, 1.0), (0.62, 2.0), (0.45, 3.5)):
        pp = dual_parameter(dual_parameter(p, q), q)
        ok &= abs(pp - p) < 1e-14
    sd = self_dual_point(2.0)
    ok &= abs(sd - math.sqrt(2.0) / (1.0 + math.sqrt(2.0))) < 1e-15
    details.append(f"p_sd(2)={sd:.15f}")
    worst_spread = 0.0
    for dims in ((1, 1), (2, 1)):
        d = build_box(*dims)
        dual, bij = dual_domain(d)
        params = ModelParams(0.55, 2.0)
        dparams = ModelParams(dual_parameter(0.55, 2.0), 2.0)
        free = BoundaryCondition.free()
        ratios = []
        for mask in range(1 << d.n_edges):
            cfg = Configuration.from_mask(d, mask)
            ratios.append(weight(cfg, params, free) /
                          dual_weight(dual, dual_configuration(cfg, bij), dparams))
        spread = (max(ratios) - min(ratios)) / max(ratios)
        worst_spread = max(worst_spread, spread)
    ok &= worst_spread < 1e-10
    _report(3, ok, f"involution exact, {details[0]}, duality weight-ratio "
                   f"spread {worst_spread:.2e} (tol 1e-10)")


def test_criterion_04_observable_relations():
    t0 = time.time()
    worst = {"vertex": 0.0, "massive": 0.0, "free_arc": 0.0,
             "boundary": 0.0, "walk": 0.0}
    n_massive = 0
    for maker in (lambda: bottom_arc_box(4, 1), lambda: bottom_arc_box(5, 1),
                  lambda: corner_arc_box(2, 2), diamond_bulk_domain):
        domain, bc = maker()
        for p in (0.4, PSD2, 0.7):
            params = ModelParams(p, 2.0)
            f = observable_exact(domain, bc, params)
            worst["vertex"] = max(worst["vertex"], check_vertex_relation(f))
            mh, cnt = check_massive_harmonicity(f)
            worst["massive"] = max(worst["massive"], mh)
            n_massive += cnt
            worst["free_arc"] = max(worst["free_arc"],
                                    check_free_arc_relation(f)[0])
            dist = exact_distribution(domain, params, bc)
            worst["boundary"] = max(worst["boundary"],
                                    check_boundary_connection(f, dist))
    for p in (PSD2, 0.45):
        f = observable_exact(*bottom_arc_box(4, 1), ModelParams(p, 2.0))
        worst["walk"] = max(worst["walk"], massive_walk_identity(f))
    ok = (worst["vertex"] < 1e-10 and worst["massive"] < 1e-9 and
          worst["free_arc"] < 1e-9 and worst["boundary"] < 1e-10 and
          worst["walk"] < 1e-8 and n_massive > 0)
    _report(4, ok,
            "observable residuals: vertex {vertex:.1e}<1e-10, massive "
            "{massive:.1e}<1e-9, free-arc {free_arc:.1e}<1e-9, boundary "
            "{boundary:.1e}<1e-10, walk {walk:.1e}<1e-8".format(**worst) +
            f"  [{time.time() - t0:.0f}s]")


def test_criterion_05_cloud_existence():
    t0 = time.time()
    out2 = cloud_statistics(8, 2.0, budget=SamplingBudget(replicas=5,
                                                          samples=2000,
                                                          thin=2), seed=808)
    out1 = cloud_statistics(8, 1.0, budget=SamplingBudget(replicas=2,
                                                          samples=2000,
                                                          thin=2), seed=809)
    frac = out2["multi_cloud_fraction"]
    ok = frac > 0.01 and out2["n_samples"] >= 10_000 and \
        out1["multi_cloud_fraction"] == 0.0 and out1["max_cloud_size"] == 1
    _report(5, ok,
            f"q=2 multi-edge clouds in {100 * frac:.1f}% of "
            f"{out2['n_samples']} samples (>1%), largest size "
            f"{out2['max_cloud_size']}; q=1 control at exactly zero  "
            f"[{time.time() - t0:.0f}s]")


def test_criterion_06_one_arm_exponent():
    t0 = time.time()
    budget = SamplingBudget(replicas=8, samples=1500, thin=2)
    ns = (8, 16, 32, 64)
    vals = []
    for n in ns:
        est = one_arm_probability(n, PSD2, 2.0, budget=budget, seed=600 + n)
        vals.append(est.value)
    slope, _, corr = fit_log_log(ns, vals)
    expo = -slope
    ok = 0.085 <= expo <= 0.165
    _report(6, ok,
            f"one-arm exponent fit {expo:.4f} in [0.085, 0.165], corr "
            f"{corr:.4f}, P(n)={[round(v, 4) for v in vals]}  "
            f"[{time.time() - t0:.0f}s]")


def test_criterion_07_correlation_length_slopes():
    t0 = time.time()
    budget = SamplingBudget(replicas=5, samples=1500, thin=2)
    grid = (4, 8, 16, 32, 64)

    def scan(q, pc, offsets, seed0):
        Ls, xs = [], []
        for k, off in enumerate(offsets):
            res = correlation_length(0.25, 1.0, pc - off, q, n_grid=grid,
                                     budget=budget, seed=seed0 + k)
            assert not res.censored, f"censored at offset {off}"
            Ls.append(res.length)
            xs.append(1.0 / off)
        slope, _, _ = fit_log_log(xs, Ls)
        return slope, Ls

    s2, L2 = scan(2.0, PSD2, (0.08, 0.04, 0.02), 700)
    s1, L1 = scan(1.0, 0.5, (0.08, 0.04, 0.02), 750)
    ok = (0.7 <= s2 <= 1.4) and (1.0 <= s1 <= 1.7)
    _report(7, ok,
            f"correlation-length slopes: q=2 {s2:.3f} in [0.7,1.4] "
            f"(L={L2}), q=1 {s1:.3f} in [1.0,1.7] (L={L1})  "
            f"[{time.time() - t0:.0f}s]")


def test_criterion_08_kesten_relation_spread():
    t0 = time.time()
    out = kesten_relation_check(0.25, (0.53, 0.55, 0.58),
                                budget=SamplingBudget(replicas=5,
                                                      samples=1200, thin=2),
                                seed=880, n_grid=(4, 8, 16, 32, 64))
    products = [r["product"] for r in out["rows"] if not r["censored"]]
    ok = len(products) == 3 and all(p > 0 for p in products) and \
        out["spread"] <= 4.0
    _report(8, ok,
            f"Kesten products {[round(p, 3) for p in products]}, spread "
            f"{out['spread']:.2f} (tol 4)  [{time.time() - t0:.0f}s]")


def test_criterion_09_specific_heat_proxy():
    t0 = time.time()
    budget = SamplingBudget(replicas=6, samples=2500, thin=2)
    ns = (8, 16, 32, 64)

    def scan(q, p, seed0):
        vals = []
        for n in ns:
            est = edge_count_variance(p, q, n, budget=budget,
                                      seed=seed0 + n, torus=True)
            vals.append((est.value, est.std_error))
        slope, _, corr = fit_linear(np.log(ns), [v for v, _ in vals])
        # slope uncertainty: propagate per-point errors through the fit
        lx = np.log(np.array(ns, dtype=float))
        w = lx - lx.mean()
        se = math.sqrt(float(np.sum((w / np.sum(w * w)) ** 2 *
                                    np.array([s for _, s in vals]) ** 2)))
        return slope, se, corr, [v for v, _ in vals]

    b2, se2, corr2, v2 = scan(2.0, PSD2, 900)
    b1, se1, corr1, v1 = scan(1.0, 0.5, 950)
    ok = (b2 > 0.0 and corr2 > 0.9) and (abs(b1) <= 3.0 * se1)
    _report(9, ok,
            f"Var(|w|)/|E| vs log n: q=2 slope {b2:.4f}+-{se2:.4f} "
            f"(corr {corr2:.3f}); q=1 slope {b1:.4f}+-{se1:.4f} "
            f"consistent with 0  [{time.time() - t0:.0f}s]")


def test_criterion_10_reproducibility(tmp_path):
    from randomcluster.cli import dispatch, parse

    argv = ["experiment", "crossing", "--n", "4", "--p", "0.55", "--q", "2",
            "--replicas", "4", "--samples", "500", "--master-seed", "31415"]
    dispatch(parse(argv + ["--out", str(tmp_path / "r1")]))
    dispatch(parse(argv + ["--out", str(tmp_path / "r2")]))
    b1 = (tmp_path / "r1" / "experiment_results.csv").read_bytes()
    b2 = (tmp_path / "r2" / "experiment_results.csv").read_bytes()
    ok = b1 == b2 and len(b1) > 0
    _report(10, ok, f"fixed-seed rerun byte-identical ({len(b1)} bytes)")
