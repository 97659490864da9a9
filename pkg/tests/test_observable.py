import cmath
import math

import numpy as np
import pytest

from randomcluster.lattice import (BoundaryCondition, LatticeError,
                                   MedialGraph, build_box)
from randomcluster.measure import (Configuration, ModelParams,
                                   exact_distribution, self_dual_point)
from randomcluster.observable import (MassiveWalkParams, ObservableError,
                                      alpha_of_p, bottom_arc_box,
                                      check_boundary_connection,
                                      check_free_arc_relation,
                                      check_massive_harmonicity,
                                      check_vertex_relation, corner_arc_box,
                                      diamond_bulk_domain, loop_decomposition,
                                      loop_weight_ratio_spread,
                                      massive_walk_identity, observable_exact,
                                      random_edges, winding, x_of_p)

PSD2 = self_dual_point(2.0)
P_GRID = (0.4, PSD2, 0.7)


def _field(maker, p):
    domain, bc = maker
    return observable_exact(domain, bc, ModelParams(p, 2.0))


# ---------------------------------------------------------------------------
# Loop decomposition
# ---------------------------------------------------------------------------

def test_eulerian_partition_all_configs_unit_square():
    d, bc = corner_arc_box(1, 1)
    mg = MedialGraph(d, bc)
    for mask in range(1 << d.n_edges):
        cfg = Configuration.from_mask(d, mask)
        dec = loop_decomposition(cfg, mg)
        used = list(dec.exploration_path.edges)
        for loop in dec.loops:
            used.extend(loop.edges)
        assert sorted(used) == list(range(mg.n_medial_edges))
        assert dec.exploration_path.edges[0] == mg.e_a
        assert dec.exploration_path.edges[-1] == mg.e_b


def test_exploration_path_all_open_and_all_closed():
    d, bc = corner_arc_box(1, 1)
    mg = MedialGraph(d, bc)
    # All open: gamma hugs the free arc outside the single primal cluster.
    dec = loop_decomposition(Configuration.all_open(d), mg)
    assert len(dec.loops) == 1
    # All closed: gamma hugs the wired arc; one loop around the isolated site.
    dec = loop_decomposition(Configuration.all_closed(d), mg)
    assert len(dec.loops) == 1
    assert len(dec.exploration_path.edges) == 5


def test_winding_basics():
    d, bc = corner_arc_box(1, 1)
    mg = MedialGraph(d, bc)
    dec = loop_decomposition(Configuration.all_open(d), mg)
    gamma = dec.exploration_path
    e0 = gamma.edges[0]
    assert winding(gamma, e0, e0) == 0.0
    # Two consecutive corridor edges with no turn between them do not exist
    # here, but winding from e_a to e_b is deterministic: 0 for this domain.
    assert winding(gamma, mg.e_a, mg.e_b) == pytest.approx(0.0)
    # A loop around a single primal diamond turns counterclockwise: +2 pi.
    dec = loop_decomposition(Configuration.all_closed(d), mg)
    assert dec.loops[0].total_turning() == pytest.approx(2 * math.pi)


def test_winding_straight_segment_zero():
    d, bc = bottom_arc_box(3, 1)
    mg = MedialGraph(d, bc)
    dec = loop_decomposition(Configuration.all_open(d), mg)
    gamma = dec.exploration_path
    # Find two edges separated by one straight pass-through on the corridor.
    for i in range(len(gamma.edges) - 2):
        if gamma.turns[i] + gamma.turns[i + 1] == 0.0:
            w = winding(gamma, gamma.edges[i], gamma.edges[i + 2])
            assert w == pytest.approx(0.0)
            break


def test_wired_arc_bits_are_irrelevant():
    d, bc = corner_arc_box(1, 1)
    mg = MedialGraph(d, bc)
    wired = set(mg.wired_edges.tolist())
    assert wired
    base = Configuration.all_closed(d)
    dec0 = loop_decomposition(base, mg)
    flipped = base.open.copy()
    for e in wired:
        flipped[e] = True
    dec1 = loop_decomposition(Configuration(d, flipped), mg)
    assert dec0.exploration_path.edges == dec1.exploration_path.edges


# ---------------------------------------------------------------------------
# x(p), alpha(p)
# ---------------------------------------------------------------------------

def test_x_of_p_critical():
    assert x_of_p(PSD2) == pytest.approx(1.0)
    assert alpha_of_p(PSD2) == pytest.approx(0.0, abs=1e-14)


def test_alpha_limits_and_monotonicity():
    # p -> 0 gives x -> 0 and phase pi/4.
    assert alpha_of_p(1e-12) == pytest.approx(math.pi / 4, abs=1e-6)
    ps = np.linspace(1e-3, 1 - 1e-3, 999)
    alphas = np.array([alpha_of_p(p) for p in ps])
    assert np.all(np.diff(alphas) < 0)  # strictly monotone (decreasing)
    assert np.all(np.isfinite(alphas))


def test_massive_walk_params():
    m = MassiveWalkParams.from_p(PSD2)
    assert m.mass_interior == pytest.approx(1.0)
    # At criticality the free-arc stencil is a bona fide reflected walk:
    # its coefficients sum to one.
    assert 2 * m.c_wn + m.c_e == pytest.approx(1.0)
    m2 = MassiveWalkParams.from_p(0.5)
    assert 0.0 < m2.mass_interior < 1.0
    assert 2 * m2.c_wn + m2.c_e < 1.0


# ---------------------------------------------------------------------------
# The observable and its identities
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", P_GRID)
def test_normalization_at_marked_edges(p):
    f = _field(corner_arc_box(2, 2), p)
    assert f.value(f.mg.e_b) == pytest.approx(1.0)
    # F(e_a) carries the deterministic winding of any medial path a -> b.
    dec = loop_decomposition(Configuration.all_open(f.mg.domain), f.mg)
    w = winding(dec.exploration_path, f.mg.e_a, f.mg.e_b)
    assert f.value(f.mg.e_a) == pytest.approx(cmath.exp(0.5j * w))


@pytest.mark.parametrize("p", P_GRID)
def test_argument_rays(p):
    for maker in (corner_arc_box(1, 1), bottom_arc_box(4, 1), diamond_bulk_domain()):
        f = _field(maker, p)
        assert f.max_ray_residual() < 1e-10


@pytest.mark.parametrize("p", P_GRID)
def test_vertex_relation(p):
    for maker in (bottom_arc_box(2, 1), bottom_arc_box(4, 1),
                  corner_arc_box(2, 2), diamond_bulk_domain()):
        f = _field(maker, p)
        assert check_vertex_relation(f) < 1e-10


def test_vertex_relation_empty_domain():
    # No interior medial vertex: the residual is trivially zero.
    f = _field(corner_arc_box(1, 1), PSD2)
    assert check_vertex_relation(f) == 0.0


@pytest.mark.parametrize("p", (PSD2, 0.5))
def test_massive_harmonicity_diamond(p):
    f = _field(diamond_bulk_domain(), p)
    res, count = check_massive_harmonicity(f)
    assert count == 1
    assert res < 1e-9


def test_massive_harmonicity_empty_on_small_boxes():
    f = _field(corner_arc_box(1, 1), PSD2)
    res, count = check_massive_harmonicity(f)
    assert count == 0 and res == 0.0


@pytest.mark.parametrize("p", P_GRID)
def test_free_arc_relation(p):
    f = _field(bottom_arc_box(4, 1), p)
    res, count = check_free_arc_relation(f)
    assert count == 3
    assert res < 1e-9


def test_free_arc_relation_rejects_other_q():
    domain, bc = bottom_arc_box(2, 1)
    with pytest.raises(ObservableError):
        observable_exact(domain, bc, ModelParams(0.5, 3.0))


@pytest.mark.parametrize("p", (PSD2, 0.4))
def test_boundary_connection_lemma(p):
    for maker in (corner_arc_box(1, 1), bottom_arc_box(2, 1)):
        domain, bc = maker
        f = observable_exact(domain, bc, ModelParams(p, 2.0))
        dist = exact_distribution(domain, ModelParams(p, 2.0), bc)
        assert check_boundary_connection(f, dist) < 1e-10


def test_boundary_connection_wired_endpoint():
    domain, bc = corner_arc_box(1, 1)
    f = observable_exact(domain, bc, ModelParams(PSD2, 2.0))
    # a sits on the wired arc: connection probability 1 and |F(e_a)| = 1
    assert abs(abs(f.value(f.mg.e_a)) - 1.0) < 1e-12


@pytest.mark.parametrize("p", (PSD2, 0.45))
def test_massive_walk_reconstruction(p):
    for dims in ((2, 1), (4, 1), (5, 1)):
        f = _field(bottom_arc_box(*dims), p)
        assert massive_walk_identity(f) < 1e-8


def test_massive_walk_rejects_uncovered_domains():
    # The 2x2 corner-arc box leaves free-arc sites without the eastward
    # stencil: no covering relation, so the solve must refuse.
    f = _field(corner_arc_box(2, 2), PSD2)
    with pytest.raises(ObservableError):
        massive_walk_identity(f)


@pytest.mark.parametrize("p", P_GRID)
def test_loop_weight_cross_validation(p):
    for maker in (corner_arc_box(1, 1), bottom_arc_box(2, 1), diamond_bulk_domain()):
        f = _field(maker, p)
        assert loop_weight_ratio_spread(f) < 1e-10


def test_boundary_sides_share_modulus():
    f = _field(bottom_arc_box(3, 1), 0.45)
    mg = f.mg
    for u in mg.free_arc_vertices:
        mods = [abs(f.values[s]) for s in mg.boundary_sides(u)]
        assert max(mods) - min(mods) < 1e-12


def test_enumeration_cap():
    domain, bc = bottom_arc_box(12, 1)  # 12 bottom + 11 interior verticals
    with pytest.raises(ObservableError):
        observable_exact(domain, bc, ModelParams(0.5, 2.0))


def test_wired_edges_excluded_from_randomness():
    domain, bc = bottom_arc_box(3, 1)
    mg = MedialGraph(domain, bc)
    rnd = set(random_edges(mg).tolist())
    wired = set(mg.wired_edges.tolist())
    assert rnd | wired == set(range(domain.n_edges))
    assert not rnd & wired
