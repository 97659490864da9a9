import math

import numpy as np
import pytest

from randomcluster.experiments import (Estimate, ExperimentError,
                                       SamplingBudget, cloud_statistics,
                                       correlation_length,
                                       crossing_probability,
                                       edge_count_variance, edge_intensity,
                                       edge_intensity_derivative, fit_log_log,
                                       four_arm_probability, influence,
                                       kesten_relation_check,
                                       one_arm_probability, pivotal_count,
                                       reference_exponents)
from randomcluster.lattice import BoundaryCondition, build_box
from randomcluster.measure import (Configuration, ModelParams,
                                   exact_distribution,
                                   exact_event_probability, self_dual_point,
                                   vertical_crossing_event)

PSD2 = self_dual_point(2.0)
FREE = BoundaryCondition.free()
SMALL = SamplingBudget(replicas=5, samples=1500, thin=2)


# ---------------------------------------------------------------------------
# Reference exponents
# ---------------------------------------------------------------------------

def test_reference_exponents_q1():
    r = reference_exponents(1.0)
    assert r.u == pytest.approx(2.0 / 3.0)
    assert r.nu == pytest.approx(4.0 / 3.0)
    assert r.xi1 == pytest.approx(5.0 / 48.0)
    assert r.xi4 == pytest.approx(5.0 / 4.0)


def test_reference_exponents_q2():
    r = reference_exponents(2.0)
    assert r.u == pytest.approx(0.5)
    assert r.nu == pytest.approx(1.0)
    assert r.xi1 == pytest.approx(1.0 / 8.0)
    assert r.xi4 == pytest.approx(35.0 / 24.0)


def test_reference_exponents_q4():
    r = reference_exponents(4.0)
    assert r.u == pytest.approx(0.0)
    assert r.nu == pytest.approx(2.0 / 3.0)


def test_reference_exponents_identity_eta():
    for q in np.linspace(1.0, 4.0, 13):
        r = reference_exponents(float(q))
        assert r.eta == pytest.approx(2.0 * r.xi1, abs=1e-14)


def test_reference_exponents_domain():
    with pytest.raises(ExperimentError):
        reference_exponents(5.0)


# ---------------------------------------------------------------------------
# Crossing probability
# ---------------------------------------------------------------------------

def test_crossing_degenerate_p():
    assert crossing_probability(4, 1.0, 0.0, 2.0).value == 0.0
    assert crossing_probability(4, 1.0, 1.0, 2.0).value == 1.0


def test_crossing_requires_integer_height():
    with pytest.raises(ExperimentError):
        crossing_probability(3, 0.4, 0.5, 1.0)


@pytest.mark.parametrize("sampler", ["sweeny", "coupling"])
def test_crossing_matches_oracle(sampler):
    d = build_box(2, 2)
    params = ModelParams(0.55, 2.0)
    exact = exact_event_probability(exact_distribution(d, params, FREE),
                                    vertical_crossing_event(d))
    est = crossing_probability(2, 1.0, 0.55, 2.0, sampler=sampler,
                               budget=SMALL, seed=8)
    assert abs(est.value - exact) < 3.5 * est.std_error + 0.01


def test_crossing_wired_beats_free():
    kw = dict(budget=SMALL, seed=9)
    free = crossing_probability(4, 1.0, PSD2, 2.0, bc="free", **kw)
    wired = crossing_probability(4, 1.0, PSD2, 2.0, bc="wired", **kw)
    assert wired.value > free.value - 2.0 * (free.std_error + wired.std_error)


def test_crossing_monotone_in_p():
    kw = dict(budget=SMALL, seed=10)
    vals = [crossing_probability(4, 1.0, p, 2.0, **kw).value
            for p in (0.3, 0.5, 0.7)]
    assert vals[0] <= vals[1] + 0.02 and vals[1] <= vals[2] + 0.02


def test_crossing_coupling_rejects_wired():
    with pytest.raises(ExperimentError):
        crossing_probability(2, 1.0, 0.5, 2.0, bc="wired", sampler="coupling",
                             budget=SMALL)


def test_replica_determinism():
    a = crossing_probability(3, 1.0, 0.5, 1.5, budget=SMALL, seed=77)
    b = crossing_probability(3, 1.0, 0.5, 1.5, budget=SMALL, seed=77)
    assert a.value == b.value and a.std_error == b.std_error


# ---------------------------------------------------------------------------
# One-arm
# ---------------------------------------------------------------------------

def test_one_arm_p1_exact():
    assert one_arm_probability(4, 1.0, 2.0).value == 1.0


def test_one_arm_matches_oracle_tiny():
    d = build_box(2, 2)
    params = ModelParams(0.6, 2.0)
    center = d.vertex_index[(1, 1)]
    boundary = set(d.boundary_vertices.tolist())

    from randomcluster.measure import connected_in
    exact = exact_event_probability(
        exact_distribution(d, params, FREE),
        lambda c: connected_in(c, FREE, [center], list(boundary)))
    est = one_arm_probability(2, 0.6, 2.0, budget=SMALL, seed=12)
    assert abs(est.value - exact) < 3.5 * est.std_error + 0.01


def test_one_arm_decreasing_in_n():
    kw = dict(budget=SMALL, seed=13)
    a = one_arm_probability(4, PSD2, 2.0, **kw)
    b = one_arm_probability(8, PSD2, 2.0, **kw)
    assert b.value < a.value + 2.0 * (a.std_error + b.std_error)


# ---------------------------------------------------------------------------
# Pivotal counts
# ---------------------------------------------------------------------------

def test_pivotal_p0_zero():
    est = pivotal_count(3, 1e-9, 1.0, budget=SamplingBudget(2, 200, 1), seed=1)
    assert est.value == 0.0  # no single edge creates a crossing from nothing


def test_pivotal_matches_enumeration_q1():
    """Mean pivotal count under the product measure by full enumeration."""
    d = build_box(2, 2)
    p = 0.5
    ev = vertical_crossing_event(d)
    dist = exact_distribution(d, ModelParams(p, 1.0), FREE)
    total = 0.0
    for mask, cfg in dist.configurations():
        cr = ev(cfg)
        cnt = 0
        for e in range(d.n_edges):
            o2 = cfg.open.copy()
            o2[e] = ~o2[e]
            if ev(Configuration(d, o2)) != cr:
                cnt += 1
        total += dist.probabilities[mask] * cnt
    est = pivotal_count(2, p, 1.0, budget=SMALL, seed=21)
    assert abs(est.value - total) < 4.0 * est.std_error + 0.02


# ---------------------------------------------------------------------------
# Edge intensity / specific heat proxy
# ---------------------------------------------------------------------------

def test_edge_intensity_q1_exact():
    est = edge_intensity(0.37, 1.0, 6, budget=SMALL, seed=31, torus=True)
    assert abs(est.value - 0.37) < 4.0 * est.std_error + 0.003


def test_edge_intensity_half_at_self_dual_box_pair():
    """At the self-dual point the free box and its wired dual average to
    exactly one half (the duality argument behind the infinite-volume
    statement); finite tori carry a homology bias that only decays with n,
    checked qualitatively below."""
    q = 2.0
    psd = self_dual_point(q)
    b = SamplingBudget(6, 3000, 2)
    ef = edge_intensity(psd, q, 7, bc="free", budget=b, seed=32, torus=False)
    ew = edge_intensity(psd, q, 6, bc="wired", budget=b, seed=33, torus=False)
    pair = 0.5 * (ef.value + ew.value)
    se = 0.5 * math.hypot(ef.std_error, ew.std_error)
    assert abs(pair - 0.5) < 4.0 * se + 0.002


def test_edge_intensity_torus_bias_decays():
    q = 2.0
    psd = self_dual_point(q)
    b = SamplingBudget(4, 2500, 2)
    e8 = edge_intensity(psd, q, 8, budget=b, seed=34, torus=True)
    e16 = edge_intensity(psd, q, 16, budget=b, seed=35, torus=True)
    assert abs(e16.value - 0.5) < abs(e8.value - 0.5)
    assert abs(e16.value - 0.5) < 0.012


def test_edge_intensity_derivative_routes_agree():
    out = edge_intensity_derivative(0.45, 1.5, 6, dp=0.02,
                                    budget=SamplingBudget(6, 3000, 2),
                                    seed=33, torus=True)
    fd, fl = out["finite_difference"], out["fluctuation"]
    gap = abs(fd.value - fl.value)
    assert gap < 3.0 * (fd.std_error + fl.std_error) + 0.05


def test_edge_intensity_derivative_q1_is_one():
    out = edge_intensity_derivative(0.5, 1.0, 6, dp=0.02,
                                    budget=SamplingBudget(6, 3000, 2),
                                    seed=34, torus=True)
    assert abs(out["finite_difference"].value - 1.0) < 0.08
    assert abs(out["fluctuation"].value - 1.0) < 0.05


def test_variance_proxy_q1_flat():
    v = edge_count_variance(0.5, 1.0, 6, budget=SMALL, seed=35, torus=True)
    assert abs(v.value - 0.25) < 0.02  # p(1-p) exactly at q=1


# ---------------------------------------------------------------------------
# Influence
# ---------------------------------------------------------------------------

def test_influence_margulis_russo_q1():
    """At q=1 the conditional influence equals the pivotal probability."""
    d = build_box(2, 2)
    p = 0.5
    ev = vertical_crossing_event(d)
    dist = exact_distribution(d, ModelParams(p, 1.0), FREE)
    from randomcluster.experiments import _central_edge
    e = _central_edge(d)

    def pivotal(c):
        o2 = c.open.copy()
        o2[e] = True
        a = ev(Configuration(d, o2))
        o2[e] = False
        return a and not ev(Configuration(d, o2))

    expect = exact_event_probability(dist, pivotal)
    est = influence(p, 1.0, 2, budget=SamplingBudget(6, 6000, 2), seed=41)
    assert abs(est.value - expect) < 4.0 * est.std_error + 0.01


def test_influence_p_near_one_vanishes():
    est = influence(0.97, 2.0, 3, budget=SMALL, seed=42)
    assert abs(est.value) < 0.08


def test_russo_sum_bounds_exact():
    """d/dp P(A) against the influence sum, exactly, by enumeration: the
    identity dP/dp = sum_e Cov(1_A, 1_e) / (p(1-p)) and the two-sided
    bounds relating it to sum_e I_A(e)."""
    d = build_box(2, 2)
    ev = vertical_crossing_event(d)
    for (p, q) in ((0.5, 1.0), (0.55, 2.0)):
        dist = exact_distribution(d, ModelParams(p, q), FREE)
        PA = exact_event_probability(dist, ev)
        cov_sum, inf_sum = 0.0, 0.0
        for e in range(d.n_edges):
            Pe = exact_event_probability(dist, lambda c, e=e: bool(c.open[e]))
            PAe = exact_event_probability(
                dist, lambda c, e=e: bool(c.open[e]) and ev(c))
            cov = PAe - PA * Pe
            cov_sum += cov
            inf_sum += cov / (Pe * (1.0 - Pe))
        h = 1e-6
        up = exact_event_probability(
            exact_distribution(d, ModelParams(p + h, q), FREE), ev)
        dn = exact_event_probability(
            exact_distribution(d, ModelParams(p - h, q), FREE), ev)
        deriv = (up - dn) / (2 * h)
        assert deriv == pytest.approx(cov_sum / (p * (1 - p)), rel=1e-4)
        # two-sided comparability with constants depending on (q, p) only
        lo = inf_sum * 0.25 / (p * (1 - p)) * 0.5
        hi = inf_sum * 0.25 / (p * (1 - p)) * 4.0
        assert lo <= deriv <= hi


# ---------------------------------------------------------------------------
# Correlation length, clouds, Kesten
# ---------------------------------------------------------------------------

def test_correlation_length_far_subcritical():
    res = correlation_length(0.25, 1.0, 0.3, 2.0, n_grid=(4, 8, 16, 32),
                             budget=SMALL, seed=51)
    assert not res.censored
    assert res.length <= 8


def test_correlation_length_rejects_self_dual():
    with pytest.raises(ExperimentError):
        correlation_length(0.25, 1.0, PSD2, 2.0)


def test_correlation_length_censoring():
    res = correlation_length(0.25, 1.0, PSD2 - 1e-4, 2.0, n_grid=(2, 4),
                             budget=SamplingBudget(3, 400, 2), seed=52)
    assert res.censored and res.length is None


def test_correlation_length_monotone_toward_criticality():
    kw = dict(budget=SMALL, seed=53)
    far = correlation_length(0.25, 1.0, 0.35, 2.0, n_grid=(4, 8, 16, 32), **kw)
    near = correlation_length(0.25, 1.0, 0.52, 2.0, n_grid=(4, 8, 16, 32), **kw)
    assert not far.censored and not near.censored
    assert near.length >= far.length


def test_cloud_statistics_schema_and_q1():
    tiny = SamplingBudget(replicas=2, samples=300, thin=2)
    out2 = cloud_statistics(4, 2.0, budget=tiny, seed=61)
    out1 = cloud_statistics(4, 1.0, budget=tiny, seed=61)
    for out in (out2, out1):
        assert set(out) >= {"multi_cloud_fraction", "size_histogram",
                            "level_histogram", "max_cloud_size",
                            "max_cloud_diameter_halved", "n_samples"}
        assert len(out["level_histogram"]) == out["level_bins"]
    assert out1["multi_cloud_fraction"] == 0.0
    assert out1["max_cloud_size"] == 1
    assert out2["multi_cloud_fraction"] > 0.0
    # schema stability across seeds
    again = cloud_statistics(4, 2.0, budget=tiny, seed=62)
    assert set(again) == set(out2)


def test_kesten_rejects_q2():
    with pytest.raises(ExperimentError):
        kesten_relation_check(0.25, (0.53,), q=2.0)


def test_four_arm_probability_basics():
    est = four_arm_probability(4, 0.5, 1.0, budget=SMALL, seed=71)
    assert 0.0 < est.value < 1.0
    # four-arm probability decreases with scale
    est2 = four_arm_probability(8, 0.5, 1.0, budget=SMALL, seed=72)
    assert est2.value < est.value + 2 * (est.std_error + est2.std_error)


def test_fit_log_log_recovers_powerlaw():
    xs = np.array([4, 8, 16, 32])
    ys = 3.0 * xs ** -1.25
    slope, intercept, corr = fit_log_log(xs, ys)
    assert slope == pytest.approx(-1.25)
    assert corr == pytest.approx(-1.0)
