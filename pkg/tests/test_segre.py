"""Flows, chains, minimality and Segre jets."""

import pytest

from conftest import (make_flat, make_heisenberg, make_z2zb2,
                      random_minimal_manifold)
from crreflect.context import VariableContext
from crreflect.linalg import generic_rank
from crreflect.manifold import ManifoldError
from crreflect.segre import (chain, chain_time_names,
                             conjugate_chain_symmetry_defect, flow,
                             minimality, origin_point, segre_jet_map)
from crreflect.series import TruncatedSeries


def test_flow_time_zero_is_identity():
    M = make_heisenberg()
    ctx = VariableContext(chain_time_names(1, 2))
    p = origin_point(M, ctx)
    zero_time = [TruncatedSeries.zero(ctx, M.order)]
    for field in ("L", "Lbar", "Ups", "UpsBar"):
        time = zero_time if field in ("L", "Lbar") else zero_time
        q = flow(M, field, p, time)
        assert q == p


def test_flow_steps_match_paper_values():
    M = make_heisenberg()
    ctx = VariableContext(chain_time_names(1, 2))
    z1 = TruncatedSeries.variable(ctx, M.order, "z1_1")
    z2 = TruncatedSeries.variable(ctx, M.order, "z2_1")
    p0 = origin_point(M, ctx)
    p1 = flow(M, "Lbar", p0, [z1])
    assert [str(c) for c in p1] == ["0", "0", "z1_1", "0"]
    p2 = flow(M, "L", p1, [z2])
    assert [str(c) for c in p2] == ["z2_1", "i*z1_1*z2_1", "z1_1", "0"]


def test_flow_rejects_offmanifold_points():
    M = make_heisenberg()
    ctx = VariableContext(chain_time_names(1, 1))
    p = origin_point(M, ctx)
    bad = list(p)
    bad[1] = TruncatedSeries.variable(ctx, M.order, "z1_1")  # w != theta
    with pytest.raises(ManifoldError):
        flow(M, "L", bad, [TruncatedSeries.zero(ctx, M.order)])


def test_chain_values():
    M = make_heisenberg()
    g2 = chain(M, 2, "barred")
    assert [str(c) for c in g2.components] == \
        ["z2_1", "i*z1_1*z2_1", "z1_1", "0"]
    g3 = chain(M, 3, "unbarred")
    assert [str(c) for c in g3.components] == \
        ["z3_1 + z1_1", "i*z2_1*z3_1", "z2_1", "-i*z1_1*z2_1"]


def test_chain_invariants():
    for M in (make_heisenberg(order=6), make_z2zb2(order=6)):
        for side in ("barred", "unbarred"):
            for k in range(1, 6):
                g = chain(M, k, side)
                assert all(not c.constant_term() for c in g.components)
                assert g.on_manifold_defect() is None
        for k in range(2, 6):
            g = chain(M, k, "barred")
            assert g.restricted_to_shorter(k - 1).components == \
                chain(M, k - 1, "barred").components


def test_chain_symmetry():
    for M in (make_heisenberg(order=6), make_z2zb2(order=6)):
        for k in (1, 2, 3, 4):
            assert conjugate_chain_symmetry_defect(M, k) is None


def test_projection_simplification():
    # pi_t(Gammabar_{2nu+1}) == pi_t(Gammabar_{2nu}) as series
    M = make_heisenberg(order=6)
    rep = minimality(M)
    nu0 = rep.nu0
    g_odd = chain(M, 2 * nu0 + 1, "barred")
    g_even = chain(M, 2 * nu0, "barred")
    long_ctx = g_odd.context
    for a, b in zip(g_odd.t_components, g_even.t_components):
        assert a == b.remapped(long_ctx)


def test_minimality_heisenberg():
    rep = minimality(make_heisenberg())
    assert rep.minimal and rep.conclusive
    assert rep.nu0 == 2 and rep.nu0 <= 1 + 1 + 0 + 1  # d+1 bound: nu0 <= 2
    assert rep.nu0 <= 2
    assert rep.mu0_witness is not None
    assert rep.ranks[3] == (3, 3)


def test_minimality_flat_negative():
    rep = minimality(make_flat())
    assert not rep.minimal and rep.conclusive
    assert all(r == (2, 2) for k, r in rep.ranks.items() if k >= 2)


def test_minimality_z2zb2():
    rep = minimality(make_z2zb2())
    assert rep.minimal and rep.nu0 <= 2


def test_minimality_random_manifolds():
    # kmax = d+2 already decides minimality (the type is at most d+1)
    for seed in range(4):
        M = random_minimal_manifold(seed)
        rep = minimality(M, kmax=M.d + 2)
        assert rep.minimal
        assert rep.nu0 <= M.d + 1
        ranks = [rep.ranks[k][0] for k in sorted(rep.ranks)]
        assert all(a <= b for a, b in zip(ranks, ranks[1:]))
        assert max(ranks) <= 2 * M.m + M.d


def test_segre_jet_map_heisenberg():
    M = make_heisenberg()
    ph1 = segre_jet_map(M, 1)
    assert [str(c) for c in ph1.components] == \
        ["zeta1", "w1 - i*zeta1*z1", "-i*z1"]


def test_segre_jet_map_flat():
    M = make_flat()
    ph2 = segre_jet_map(M, 2)
    strs = [str(c) for c in ph2.components]
    assert strs[0] == "zeta1" and strs[1] == "w1"
    assert all(s == "0" for s in strs[2:])


def test_segre_jet_projection_compatibility():
    M = random_minimal_manifold(7)
    ph2 = segre_jet_map(M, 2)
    ph1 = segre_jet_map(M, 1)
    proj = ph2.project(1)
    assert proj.components == ph1.components.truncated(proj.components.order)


def test_segre_jet_component_count():
    M = make_z2zb2()
    ph3 = segre_jet_map(M, 3)
    assert len(ph3.components) == M.m + M.d * 4  # C(1+3,3) = 4
