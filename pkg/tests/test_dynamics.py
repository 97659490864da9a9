import numpy as np
import pytest

from randomcluster.dynamics import (conditional_open_probability,
                                    default_initial_configuration, make_chain,
                                    run, run_steps, step, transition_matrix)
from randomcluster.lattice import BoundaryCondition, build_box, build_torus
from randomcluster.measure import (Configuration, ModelParams,
                                   exact_distribution, self_dual_point)

FREE = BoundaryCondition.free()
WIRED = BoundaryCondition.wired()
PSD2 = self_dual_point(2.0)


def test_conditional_probability_branches():
    params = ModelParams(0.5, 2.0)
    assert conditional_open_probability(True, params) == 0.5
    assert conditional_open_probability(False, params) == pytest.approx(1.0 / 3.0)
    q1 = ModelParams(0.37, 1.0)
    assert conditional_open_probability(True, q1) == \
        conditional_open_probability(False, q1) == 0.37


def test_initial_states():
    d = build_box(2, 2)
    assert not default_initial_configuration(d, FREE).any()
    assert default_initial_configuration(d, WIRED).all()


def test_q1_marginals_are_bernoulli():
    """At q=1 the update never inspects connectivity, so each edge marginal
    is exactly Bernoulli(p) after any number of updates."""
    d = build_box(2, 2)
    params = ModelParams(0.3, 1.0)
    chain = make_chain(d, params, FREE, seed=11)
    samples = []
    run(chain, 4000, 1, lambda c: samples.append(c.open.copy()))
    freq = np.mean(samples, axis=0)
    se = np.sqrt(0.3 * 0.7 / len(samples)) * 3.5
    assert np.all(np.abs(freq - 0.3) < se + 0.02)


def test_single_edge_stationarity_one_step():
    """Start from the exact law on the single edge and apply one exact
    transition: the open probability 1/3 is preserved."""
    d = build_box(1, 0)
    params = ModelParams(0.5, 2.0)
    P = transition_matrix(d, params, FREE)
    pi = exact_distribution(d, params, FREE).probabilities
    assert pi[1] == pytest.approx(1.0 / 3.0)
    assert np.abs(pi @ P - pi).max() < 1e-12


@pytest.mark.parametrize("dims,p,q", [
    ((1, 0), 0.5, 2.0),
    ((2, 0), 0.4, 1.5),
    ((1, 1), 0.6, 3.0),   # 4 edges; the 3-edge path is covered above
    ((3, 0), 0.55, 2.0),  # 3-edge path
])
def test_detailed_balance_exact(dims, p, q):
    d = build_box(*dims)
    params = ModelParams(p, q)
    for bc in (FREE, WIRED):
        P = transition_matrix(d, params, bc)
        pi = exact_distribution(d, params, bc).probabilities
        flow = pi[:, None] * P
        assert np.abs(flow - flow.T).max() < 1e-12
        assert np.abs(pi @ P - pi).max() < 1e-12


def test_ergodicity_tiny_domains():
    for dims in ((1, 0), (2, 0), (1, 1)):
        d = build_box(*dims)
        P = transition_matrix(d, ModelParams(0.5, 2.0), FREE)
        Pk = np.linalg.matrix_power(P, d.n_edges + 1)
        assert Pk.min() > 0  # every state reachable from every state


def test_run_determinism():
    d = build_box(2, 2)
    params = ModelParams(PSD2, 2.0)

    def collect_run(seed):
        chain = make_chain(d, params, FREE, seed=seed)
        acc = []
        run(chain, 50, 5, lambda c: acc.append(c.as_mask()))
        return acc

    assert collect_run(123) == collect_run(123)
    assert collect_run(123) != collect_run(124)


def test_run_zero_sweeps_emits_nothing():
    d = build_box(1, 1)
    chain = make_chain(d, ModelParams(0.5, 2.0), FREE, seed=1)
    acc = []
    run(chain, 0, 1, lambda c: acc.append(c))
    assert acc == []


def test_step_counter_and_cfg_sync():
    d = build_box(2, 1)
    chain = make_chain(d, ModelParams(0.5, 2.0), FREE, seed=5)
    for _ in range(10):
        step(chain)
    assert chain.step_counter == 10
    run_steps(chain, 25)
    assert chain.step_counter == 35
    assert chain.cfg.open.shape == (d.n_edges,)


def test_backend_variants_agree_in_distribution():
    """Same seed, same stream: the union-find backend must produce the
    identical trajectory to the search backend."""
    d = build_box(2, 2)
    params = ModelParams(PSD2, 2.0)
    out = {}
    for backend in ("bfs", "unionfind"):
        chain = make_chain(d, params, WIRED, seed=77, backend=backend)
        acc = []
        run(chain, 200, 10, lambda c: acc.append(c.as_mask()))
        out[backend] = acc
    assert out["bfs"] == out["unionfind"]


@pytest.mark.parametrize("bc", [FREE, WIRED])
def test_equilibrium_tv_small_domain(bc):
    d = build_box(2, 2)
    params = ModelParams(PSD2, 2.0)
    dist = exact_distribution(d, params, bc)
    chain = make_chain(d, params, bc, seed=31)
    run(chain, 300)  # burn-in
    masks = []
    run(chain, 120_000, 1, lambda c: masks.append(c.as_mask()))
    emp = np.bincount(masks, minlength=1 << d.n_edges) / len(masks)
    tv = 0.5 * np.abs(emp - dist.probabilities).sum()
    assert tv < 0.08  # smoke level; the acceptance suite runs the long version


def test_tv_decreases_with_sweeps():
    d = build_box(1, 1)
    params = ModelParams(PSD2, 2.0)
    dist = exact_distribution(d, params, FREE)

    def tv_after(sweeps):
        tvs = []
        for rep in range(200):
            chain = make_chain(d, params, FREE, seed=1000 + rep)
            run(chain, sweeps)
            tvs.append(chain.cfg.as_mask())
        emp = np.bincount(tvs, minlength=16) / len(tvs)
        return 0.5 * np.abs(emp - dist.probabilities).sum()

    assert tv_after(12) < tv_after(0)


def test_torus_dynamics_runs():
    t = build_torus(4)
    params = ModelParams(PSD2, 2.0)
    chain = make_chain(t, params, FREE, seed=3)
    run(chain, 20)
    assert chain.cfg.open.shape == (t.n_edges,)
