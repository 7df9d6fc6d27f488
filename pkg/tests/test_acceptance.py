"""Acceptance suite: eleven criteria, each printed as one pass/fail line.

Every criterion pins its tolerance explicitly.  Order-N data certifies
identities modulo degree N+1; where an operation spends precision on
derivations, the input is built with exactly that much margin so the stated
tolerance is still certified, never weakened.
"""

import random
import time
from fractions import Fraction

from conftest import (make_ex121, make_flat, make_heisenberg, make_sphere3,
                      make_z2zb2, random_minimal_manifold, random_real_system,
                      random_series)
from crreflect.context import VariableContext, multidegrees
from crreflect.gaussian import GaussianRational, I, ONE
from crreflect.linalg import generic_rank
from crreflect.manifold import complexify_and_graph, verify_reality
from crreflect.nondegen import (HOLDS, classify_manifold,
                                classify_map_cr, degenerate_selfmap_generator,
                                holomorphic_degeneracy_field)
from crreflect.reflection import (FormalCRMap, chain_pullback,
                                  formal_cramer_solve, forward_expansion,
                                  invert_expansion, q_jbeta_cramer,
                                  reflection_components,
                                  reflection_identities,
                                  resolve_finitely_nondeg,
                                  transversality_kernel, verify_formal_cr_map)
from crreflect.segre import chain, minimality
from crreflect.series import SeriesMap, TruncatedSeries

CLASSIFIED_MANIFOLDS = []
CLASSIFIED_MAPS = []


def announce(number, text):
    """Record the criterion's one-line result for the terminal summary."""
    from conftest import ACCEPTANCE_LINES
    ACCEPTANCE_LINES[number] = text


def tvar(ctx, name, order):
    return TruncatedSeries.variable(ctx, order, name)


def identity_on(M, Mp):
    ctx_t = VariableContext(M.names.t)
    return FormalCRMap(SeriesMap.identity(ctx_t, M.order), M, Mp)


def test_criterion_01_involution_invariant():
    """50 seeded random systems (n<=3, d<=2, degree<=3, N=6): the graph
    passes the reality involution exactly; total runtime under 60 s."""
    t0 = time.monotonic()
    dims = [(1, 1), (2, 1), (1, 2)]
    for seed in range(50):
        m, d = dims[seed % 3]
        system = random_real_system(seed, m, d, order=6, degree=3)
        assert system.reality_defect() is None
        M = complexify_and_graph(system)
        report = verify_reality(M)
        assert report.ok, "involution fails for seed %d" % seed
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, "took %.1fs" % elapsed
    announce(1, "involution invariant on 50 random systems (%.2fs)" % elapsed)


def test_criterion_02_heisenberg_suite():
    """Heisenberg at N=8: nd1; minimal with nu0 <= 2 (= d+1); rank of the
    third chain is 3; identity components are exactly {0: w, 1: -i z};
    all four reflection families vanish for |beta| <= 3.  Under 30 s."""
    t0 = time.monotonic()
    M = make_heisenberg(order=8)
    Mp = make_heisenberg(order=8, primed=True)

    cls = classify_manifold(Mp, kmax=3)
    CLASSIFIED_MANIFOLDS.append(cls)
    assert cls.nd1.status == HOLDS

    rep = minimality(M)
    assert rep.minimal and rep.nu0 <= M.d + 1 == 2

    assert generic_rank(chain(M, 3, "barred").components) == 3
    assert generic_rank(chain(M, 3, "unbarred").components) == 3

    h = identity_on(M, Mp)
    comps = reflection_components(h, gmax=8)
    ctx_t = VariableContext(M.names.t)
    expected = {
        (0,): [tvar(ctx_t, "w1", 8)],
        (1,): [(-I * tvar(ctx_t, "z1", 8)).truncated(7)],
    }
    assert {g: list(e) for g, e in comps.table.items()} == expected
    assert comps.reassembly_defect() is None

    idents = reflection_identities(h, beta_max=3)
    assert idents.ok
    assert {b for (_, _, b) in idents.entries} == \
        {(k,) for k in range(4)}
    for (_, _, beta), (_, prec) in idents.entries.items():
        assert prec == 8 - sum(beta)

    elapsed = time.monotonic() - t0
    assert elapsed < 30.0, "took %.1fs" % elapsed
    announce(2, "Heisenberg suite at order 8 (%.2fs)" % elapsed)


def test_criterion_03_degenerate_c3_example():
    """The degenerate C^3 hypersurface at N=8: the tangent field is
    proportional to d/dz2'; (z1, varpi, w) is CR for seeded random varpi
    and its component table is exactly {0: w, (1,0): -i z1}, byte-identical
    across two different varpi."""
    Ms = make_ex121(order=8, primed=False)
    Mp = make_ex121(order=8, primed=True)

    field = holomorphic_degeneracy_field(Mp, dmax=4)
    assert field is not None
    assert field[0].is_zero() and field[2].is_zero() and not field[1].is_zero()

    ctx_t = VariableContext(Ms.names.t)
    z1 = tvar(ctx_t, "z1", 8)
    w = tvar(ctx_t, "w1", 8)
    tables = []
    for seed in (101, 202):
        rng = random.Random(seed)
        varpi = random_series(ctx_t, 8, rng, degree=8, min_degree=1,
                              density=0.4)
        h = FormalCRMap(SeriesMap([z1, varpi, w]), Ms, Mp)
        assert verify_formal_cr_map(h).ok
        comps = reflection_components(h, gmax=8)
        assert comps.reassembly_defect() is None
        tables.append({g: [s.terms for s in e]
                       for g, e in comps.table.items()})
    assert tables[0] == tables[1]
    assert sorted(tables[0]) == [(0, 0), (1, 0)]
    assert tables[0][(0, 0)] == [w.terms]
    assert tables[0][(1, 0)] == [(-I * z1).truncated(7).terms]
    announce(3, "degenerate C^3 example: field d/dz2', "
                "components independent of the bad component")


def test_criterion_04_cramer_oracle_equivalence():
    """Iterated Cramer equals direct composed differentiation, bit-exact
    within the shared precision, for |beta| <= 3, on the identity and a
    dilation over both model hypersurfaces; the determinant is nonzero
    at 0."""
    cases = []
    M2 = make_heisenberg(order=8)
    Mp2 = make_heisenberg(order=8, primed=True)
    ctx2 = VariableContext(M2.names.t)
    cases.append(identity_on(M2, Mp2))
    cases.append(FormalCRMap(SeriesMap([2 * tvar(ctx2, "z1", 8),
                                        4 * tvar(ctx2, "w1", 8)]), M2, Mp2))
    M3 = make_sphere3(order=8)
    Mp3 = make_sphere3(order=8, primed=True)
    ctx3 = VariableContext(M3.names.t)
    cases.append(identity_on(M3, Mp3))
    cases.append(FormalCRMap(SeriesMap([2 * tvar(ctx3, "z1", 8),
                                        2 * tvar(ctx3, "z2", 8),
                                        4 * tvar(ctx3, "w1", 8)]), M3, Mp3))
    for h in cases:
        assert verify_formal_cr_map(h).ok
        table = q_jbeta_cramer(h, beta_max=3)
        assert bool(table.det_at_zero)
        assert table.defects() == []
        depth = max(sum(b) for _, b in table.entries)
        assert depth == 3
    announce(4, "Cramer route == direct differentiation, |beta| <= 3, "
                "4 maps on 2 hypersurfaces")


def test_criterion_05_inversion_roundtrip():
    """100 seeded random truncated tables (m' <= 2, |beta| <= 3): the
    forward expansion followed by the inversion recovers the table
    exactly."""
    for seed in range(100):
        rng = random.Random(1000 + seed)
        mp = 1 + seed % 2
        zeta = [GaussianRational(Fraction(rng.randint(-6, 6), rng.randint(1, 3)),
                                 Fraction(rng.randint(-6, 6), rng.randint(1, 3)))
                for _ in range(mp)]
        table = {}
        for j in range(1 + seed % 2):
            for beta in multidegrees(mp, 3):
                table[(j, beta)] = GaussianRational(
                    Fraction(rng.randint(-20, 20), rng.randint(1, 5)),
                    Fraction(rng.randint(-20, 20), rng.randint(1, 5)))
        assert invert_expansion(forward_expansion(table, zeta, mp, 3),
                                zeta, mp, 3) == table
    announce(5, "inversion roundtrip exact on 100 random tables")


def test_criterion_06_family_equivalence():
    """20 seeded maps, 10 CR and 10 perturbed non-CR: family 1 vanishes iff
    family 2 does, and first-failure valuations agree across the conjugate
    pairs (1,3) and (2,4)."""
    M2 = make_heisenberg(order=6)
    Mp2 = make_heisenberg(order=6, primed=True)
    ctx2 = VariableContext(M2.names.t)
    Ms = make_ex121(order=6, primed=False)
    Mp21 = make_ex121(order=6, primed=True)
    ctx3 = VariableContext(Ms.names.t)

    maps = []
    for seed in range(5):  # CR: dilations on the Heisenberg hypersurface
        lam = seed + 1
        maps.append(FormalCRMap(SeriesMap([lam * tvar(ctx2, "z1", 6),
                                           lam * lam * tvar(ctx2, "w1", 6)]),
                                M2, Mp2))
    for seed in range(5):  # CR: degenerate-direction maps in C^3
        rng = random.Random(50 + seed)
        varpi = random_series(ctx3, 6, rng, degree=4, min_degree=1,
                              density=0.4)
        maps.append(FormalCRMap(SeriesMap([tvar(ctx3, "z1", 6), varpi,
                                           tvar(ctx3, "w1", 6)]), Ms, Mp21))
    for seed in range(10):  # perturbed non-CR on the Heisenberg hypersurface
        rng = random.Random(90 + seed)
        pert = random_series(ctx2, 6, rng, degree=4, min_degree=2,
                             density=0.5)
        if pert.is_zero():
            pert = tvar(ctx2, "z1", 6) ** 2
        maps.append(FormalCRMap(SeriesMap([tvar(ctx2, "z1", 6),
                                           tvar(ctx2, "w1", 6) + pert]),
                                M2, Mp2))

    n_cr = 0
    for h in maps:
        rep = reflection_identities(h, beta_max=2)
        ok1, ok2 = rep.family_ok(1), rep.family_ok(2)
        ok3, ok4 = rep.family_ok(3), rep.family_ok(4)
        assert ok1 == ok2, "families 1/2 disagree"
        assert ok3 == ok4, "families 3/4 disagree"
        assert rep.first_failure(1) == rep.first_failure(3)
        assert rep.first_failure(2) == rep.first_failure(4)
        if ok1:
            n_cr += 1
    assert n_cr == 10
    announce(6, "family equivalence and conjugate valuations on 20 maps "
                "(10 CR, 10 non-CR)")


def test_criterion_07_formal_cramer_solve():
    """50 planted linear systems with determinant valuations 0, 1, 2 at
    N=8: the solver recovers the planted solution modulo degree N - mu and
    reports lost_order = mu exactly."""
    ctx = VariableContext(("x", "y"))
    N = 8
    for seed in range(50):
        rng = random.Random(3000 + seed)
        mu = seed % 3
        head = TruncatedSeries.monomial(ctx, N, (mu, 0)) if mu else \
            TruncatedSeries.constant(ctx, N, ONE)
        u01 = random_series(ctx, N, rng, degree=2, min_degree=1, density=0.4)
        u10 = random_series(ctx, N, rng, degree=2, min_degree=1, density=0.4)
        r = [[head, u01 * head], [u10, 1 + u01]]
        # det = head (1 + u01 - u01 u10): valuation mu exactly
        planted = [random_series(ctx, N, rng, degree=5),
                   random_series(ctx, N, rng, degree=5)]
        rhs = [r[i][0] * planted[0] + r[i][1] * planted[1] for i in range(2)]
        sols, lost = formal_cramer_solve(r, rhs)
        assert lost == mu, "seed %d: lost %s != %d" % (seed, lost, mu)
        for got, want in zip(sols, planted):
            assert got.order == N - mu
            assert got == want.truncated(N - mu)
    announce(7, "formal Cramer solve recovers 50 planted systems, "
                "lost_order = det valuation")


def test_criterion_08_finitely_nondeg_resolution():
    """Heisenberg identity and dilation with ell0 = 1: both lines of the
    solved identity vanish mod degree N+1 (N=8), and the jet-extended
    identities hold for ell <= 3."""
    W = 12  # margin: ell0 = 1 for the base lines, +3 for the jet tier
    M = make_heisenberg(order=W)
    Mp = make_heisenberg(order=W, primed=True)
    ctx_t = VariableContext(M.names.t)
    maps = [identity_on(M, Mp),
            FormalCRMap(SeriesMap([2 * tvar(ctx_t, "z1", W),
                                   4 * tvar(ctx_t, "w1", W)]), M, Mp)]
    for h in maps:
        res = resolve_finitely_nondeg(h, ell0=1)
        rep = res.verification_report()
        assert rep.ok
        # zero mod degree 9 requires precision at least 8
        assert all(prec >= 8 for _, prec in rep.entries.values())
        jrep = res.jet_identity_report(3)
        assert jrep.ok
        assert {sum(a) for (_, _, a) in jrep.entries} == {0, 1, 2, 3}
    announce(8, "resolution and its jet tiers (ell <= 3) on identity "
                "and dilation")


def test_criterion_09_chain_parity_collapses():
    """The parity collapses hold as exact series identities on 20 random
    minimal manifolds for k <= 4, for jets of both pure-t and pure-tau
    maps."""
    from crreflect.series import jet as jet_map
    for seed in range(20):
        M = random_minimal_manifold(seed, order=6)
        rng = random.Random(7000 + seed)
        ctx_t = VariableContext(M.names.t)
        ctx_tau = VariableContext(M.names.tau)
        u = random_series(ctx_t, 6, rng, degree=3, density=0.5)
        v = random_series(ctx_tau, 6, rng, degree=3, density=0.5)
        ju = jet_map(SeriesMap([u]), 1)
        jv = jet_map(SeriesMap([v]), 1)
        u_emb = SeriesMap([c.remapped(M.ctx_joint) for c in ju.components])
        v_emb = SeriesMap([c.remapped(M.ctx_joint) for c in jv.components])
        for k in (2, 3, 4):
            for side in ("barred", "unbarred"):
                g = chain(M, k, side)
                barred_last = (k % 2 == 1) == (side == "barred")
                F = u_emb if barred_last else v_emb
                pulled = chain_pullback(F, g)  # asserts the collapse
                shorter = chain_pullback(F, chain(M, k - 1, side))
                assert pulled == shorter.remapped(pulled.context)
    announce(9, "parity collapses exact on 20 random minimal manifolds, "
                "k <= 4")


def test_criterion_10_transversality_and_selfmaps():
    """Kernel empty up to degree 4 for the horizontal parts (z1, z2) and
    z^2; the kernel of (z1, z1) contains x - y; 20 seeded degenerate
    self-maps all verify as CR."""
    M3 = make_sphere3(order=8)
    Mp3 = make_sphere3(order=8, primed=True)
    assert transversality_kernel(identity_on(M3, Mp3), degree=4) == []

    M2 = make_heisenberg(order=8)
    Mpf = make_flat(order=8, primed=True)
    ctx2 = VariableContext(M2.names.t)
    square = FormalCRMap(SeriesMap([tvar(ctx2, "z1", 8) ** 2,
                                    TruncatedSeries.zero(ctx2, 8)]), M2, Mpf)
    assert verify_formal_cr_map(square).ok
    assert transversality_kernel(square, degree=4) == []

    Ms = make_ex121(order=8, primed=False)
    Mp21 = make_ex121(order=8, primed=True)
    ctx3 = VariableContext(Ms.names.t)
    doubled = FormalCRMap(SeriesMap([tvar(ctx3, "z1", 8),
                                     tvar(ctx3, "z1", 8),
                                     tvar(ctx3, "w1", 8)]), Ms, Mp21)
    basis = transversality_kernel(doubled, degree=4)
    assert basis
    found = False
    for rel in basis:
        cx = rel.coefficient((1, 0))
        cy = rel.coefficient((0, 1))
        if cx and cx == -cy and all(
                not rel.coefficient(e) for e in rel.terms
                if e not in ((1, 0), (0, 1))):
            found = True
    assert found, "x - y not exhibited in the kernel"

    field = holomorphic_degeneracy_field(Mp21, dmax=4)
    for seed in range(20):
        gen = degenerate_selfmap_generator(Mp21, field, None, seed=seed)
        assert verify_formal_cr_map(gen).ok
    announce(10, "transversality kernels as expected; 20 degenerate "
                 "self-maps verified CR")


def test_criterion_11_implication_chains():
    """Every classified instance respects both implication chains; any
    violation fails the build (the classifiers also self-check)."""
    manifolds = [make_heisenberg(primed=True), make_sphere3(primed=True),
                 make_z2zb2(primed=True), make_flat(primed=True),
                 make_ex121()]
    for Mp in manifolds:
        cls = classify_manifold(Mp, kmax=3)
        CLASSIFIED_MANIFOLDS.append(cls)
        assert cls.chain_consistent()

    M2 = make_heisenberg()
    Mp2 = make_heisenberg(primed=True)
    ctx2 = VariableContext(M2.names.t)
    Ms = make_ex121(primed=False)
    Mp21 = make_ex121(primed=True)
    ctx3 = VariableContext(Ms.names.t)
    Mpf = make_flat(primed=True)
    map_instances = [
        identity_on(M2, Mp2),
        FormalCRMap(SeriesMap([3 * tvar(ctx2, "z1", 8),
                               9 * tvar(ctx2, "w1", 8)]), M2, Mp2),
        FormalCRMap(SeriesMap([tvar(ctx2, "z1", 8) ** 2,
                               TruncatedSeries.zero(ctx2, 8)]), M2, Mpf),
        FormalCRMap(SeriesMap([tvar(ctx3, "z1", 8), tvar(ctx3, "z1", 8),
                               tvar(ctx3, "w1", 8)]), Ms, Mp21),
        FormalCRMap(SeriesMap([tvar(ctx3, "z1", 8),
                               2 * tvar(ctx3, "z2", 8),
                               tvar(ctx3, "w1", 8)]), Ms, Mp21),
    ]
    for h in map_instances:
        cls = classify_map_cr(h)
        CLASSIFIED_MAPS.append(cls)
        assert cls.cr_chain_consistent()
    assert len(CLASSIFIED_MANIFOLDS) >= 5 and len(CLASSIFIED_MAPS) >= 5
    announce(11, "implication chains respected on %d manifold and %d map "
                 "classifications"
             % (len(CLASSIFIED_MANIFOLDS), len(CLASSIFIED_MAPS)))
