"""Nondegeneracy classification and degenerate self-map generation.

Five conditions on the target manifold (Levi, finite, essentially finite,
Segre, holomorphic nondegeneracy), five CR-horizontal conditions on a map,
and four conditions on a map through its reflection-identity data.  Every
"generic rank" or "does not vanish identically" verdict is decided on the
working truncation and carries the bound it was decided at: verdicts are
tri-state, never silent booleans.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .context import VariableContext, multidegrees
from .gaussian import GaussianRational, ONE, ZERO
from .linalg import (generic_rank, kernel_basis, rank_at_origin,
                     symbolic_rank)
from .manifold import GraphedManifold, cr_fields
from .reflection import (FormalCRMap, ReflectionError, _WordCache,
                         _power_cache, target_component_tables,
                         transversality_kernel, verify_formal_cr_map)
from .segre import segre_jet_map
from .series import SeriesMap, TruncatedSeries, SeriesError, mul_precise


HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"


class Verdict:
    """Tri-state outcome with the bound it was decided at."""

    __slots__ = ("status", "k0", "bound", "witness")

    def __init__(self, status, k0=None, bound=None, witness=None):
        self.status = status
        self.k0 = k0
        self.bound = bound
        self.witness = witness

    @property
    def decided(self):
        return self.status in (HOLDS, FAILS)

    def __eq__(self, other):
        if isinstance(other, str):
            return self.status == other
        return NotImplemented

    def __repr__(self):
        extra = ""
        if self.k0 is not None:
            extra += ", k0=%s" % (self.k0,)
        if self.bound is not None:
            extra += ", bound=%s" % (self.bound,)
        return "Verdict(%s%s)" % (self.status, extra)


def _chain_consistent(verdicts):
    """Check an implication chain v1 => v2 => ... on decided entries."""
    for i in range(len(verdicts) - 1):
        a, b = verdicts[i], verdicts[i + 1]
        if a.status == HOLDS and b.status == FAILS:
            return False
    return True


class ManifoldClassification:
    def __init__(self, nd1, nd2, nd3, nd4, nd5, kmax, dmax, order):
        self.nd1, self.nd2, self.nd3, self.nd4, self.nd5 = nd1, nd2, nd3, nd4, nd5
        self.kmax = kmax
        self.dmax = dmax
        self.order = order

    @property
    def chain(self):
        return [self.nd1, self.nd2, self.nd3, self.nd4, self.nd5]

    def chain_consistent(self):
        return _chain_consistent(self.chain)

    def __repr__(self):
        return ("ManifoldClassification(nd1=%s, nd2=%s, nd3=%s, nd4=%s, "
                "nd5=%s)") % tuple(v.status for v in self.chain)


def ideal_contains_power_of_maximal(generators, dmax: int):
    """Smallest D <= dmax with every degree-D monomial inside the truncated
    ideal of the generators (a finite-map certificate), or None.

    Membership is graded linear algebra: x^alpha must be an exact
    combination sum c_q g_q modulo degree D+1; by Nakayama this certifies
    m^D inside the ideal, hence finiteness.
    """
    gens = [g - g.constant_term() for g in generators]
    gens = [g for g in gens if g]
    if not gens:
        return None
    arity = gens[0].context.arity
    for D in range(1, dmax + 1):
        monos = list(multidegrees(arity, D))
        index = {e: i for i, e in enumerate(monos)}
        rows = []
        for g in gens:
            v = g.valuation()
            if v is None or v > D:
                continue
            for mult in multidegrees(arity, D - v):
                vec = [ZERO] * len(monos)
                any_entry = False
                for e, c in g.terms.items():
                    shifted = tuple(a + b for a, b in zip(e, mult))
                    if sum(shifted) <= D:
                        vec[index[shifted]] = c
                        any_entry = True
                if any_entry:
                    rows.append(vec)
        if not rows:
            continue
        # Echelonize the span of the generator multiples.
        pivots = {}
        for row in rows:
            row = list(row)
            for col, prow in sorted(pivots.items()):
                if row[col]:
                    f = row[col]
                    row = [x - f * y for x, y in zip(row, prow)]
            lead = next((c for c in range(len(monos)) if row[c]), None)
            if lead is not None:
                inv = row[lead].inverse()
                pivots[lead] = [x * inv for x in row]
        ok = True
        for e in monos:
            if sum(e) != D:
                continue
            target = [ZERO] * len(monos)
            target[index[e]] = ONE
            for col, prow in sorted(pivots.items()):
                if target[col]:
                    f = target[col]
                    target = [x - f * y for x, y in zip(target, prow)]
            if any(target):
                ok = False
                break
        if ok:
            return D
    return None


def holomorphic_degeneracy_field(Mp: GraphedManifold, dmax: int = 4):
    """A nonzero holomorphic field tangent to the manifold, or None.

    Searches polynomial coefficients a'_{i'}(t') of degree <= dmax with
    sum_i a'_{i'} d theta'_j / d t'_{i'} == 0 to the working order, by
    linear algebra on the coefficients.  None means the kernel is trivial
    at these bounds (holomorphic nondegeneracy is then plausible).
    """
    ctx = Mp.ctx_theta
    N = Mp.order
    t_idx = [ctx.index(n) for n in Mp.names.t]
    partials = [[Mp.theta[j].derive(i) for i in t_idx] for j in range(Mp.d)]
    alphas = list(multidegrees(Mp.n, dmax))
    unknowns = [(i, a) for i in range(Mp.n) for a in alphas]
    rows = {}
    for j in range(Mp.d):
        for col, (i, a) in enumerate(unknowns):
            mono = TruncatedSeries.monomial(
                ctx, N - 1, (0,) * Mp.m + tuple(a))
            prod = partials[j][i] * mono
            for e, c in prod.terms.items():
                rows.setdefault((j, e), [ZERO] * len(unknowns))[col] = c
    matrix = [rows[k] for k in sorted(rows)]
    if not matrix:
        return None
    basis = kernel_basis(matrix)
    if not basis:
        return None
    ctx_tp = VariableContext(Mp.names.t)
    vec = basis[0]
    comps = []
    for i in range(Mp.n):
        terms = {}
        for col, (ci, a) in enumerate(unknowns):
            if ci == i and vec[col]:
                terms[tuple(a)] = vec[col]
        comps.append(TruncatedSeries(ctx_tp, N, terms))
    return SeriesMap(comps)


def _nd4_restricted_map(Mp: GraphedManifold, k: int) -> SeriesMap:
    """The jet map restricted to the Segre leaf through 0: substitute
    zeta' := 0 and w' := theta_bar'(z', 0), leaving a map of z' alone."""
    jets = segre_jet_map(Mp, k)
    ctx_z = VariableContext(Mp.names.z)
    order = jets.components.order
    zs = [TruncatedSeries.variable(ctx_z, order, n) for n in Mp.names.z]
    zero = TruncatedSeries.zero(ctx_z, order)
    tb0 = [t.truncated(order).compose(zs + [zero] * (Mp.m + Mp.d))
           for t in Mp.theta_bar.components]
    args = [zero] * Mp.m + zs + tb0
    return SeriesMap([c.compose(args) for c in jets.components.components])


def classify_manifold(Mp: GraphedManifold, kmax: int = None,
                      dmax: int = 4, seed: int = 0) -> ManifoldClassification:
    """The five-step nondegeneracy ladder of the (target) manifold."""
    if kmax is None:
        kmax = min(Mp.order, 4)
    if kmax > Mp.order:
        raise SeriesError("kmax exceeds the truncation order")
    full = Mp.m + Mp.n

    jet_maps = {k: segre_jet_map(Mp, k) for k in range(1, kmax + 1)}

    r1 = rank_at_origin(jet_maps[1].components)
    nd1 = Verdict(HOLDS if r1 == full else FAILS, k0=1 if r1 == full else None,
                  bound=1)

    nd2 = Verdict(FAILS, bound=kmax)
    for k in range(1, kmax + 1):
        if rank_at_origin(jet_maps[k].components) == full:
            nd2 = Verdict(HOLDS, k0=k, bound=kmax)
            break

    nd3 = Verdict(INCONCLUSIVE, bound=(kmax, dmax))
    for k in range(1, kmax + 1):
        D = ideal_contains_power_of_maximal(
            jet_maps[k].components.components, dmax)
        if D is not None:
            nd3 = Verdict(HOLDS, k0=k, bound=(kmax, D))
            break

    nd4 = Verdict(FAILS, bound=kmax)
    for k in range(1, kmax + 1):
        if generic_rank(_nd4_restricted_map(Mp, k), seed=seed) == Mp.m:
            nd4 = Verdict(HOLDS, k0=k, bound=kmax)
            break

    nd5 = Verdict(INCONCLUSIVE, bound=kmax)
    for k in range(1, kmax + 1):
        if generic_rank(jet_maps[k].components, seed=seed) == full:
            nd5 = Verdict(HOLDS, k0=k, bound=kmax)
            break
    if nd5.status != HOLDS:
        field = holomorphic_degeneracy_field(Mp, dmax)
        if field is not None:
            nd5 = Verdict(FAILS, bound=(kmax, dmax), witness=field)
    cls = ManifoldClassification(nd1, nd2, nd3, nd4, nd5, kmax, dmax, Mp.order)
    if not cls.chain_consistent():
        raise AssertionError("nondegeneracy chain violated: %r" % cls)
    return cls


class MapClassification:
    def __init__(self, cr1, cr2, cr3, cr4, cr5, h1=None, h2=None, h3=None,
                 h4=None, ell0=None, psi_table=None, mp=None, m=None):
        self.cr1, self.cr2, self.cr3, self.cr4, self.cr5 = cr1, cr2, cr3, cr4, cr5
        self.h1, self.h2, self.h3, self.h4 = h1, h2, h3, h4
        self.ell0 = ell0
        self.psi_table = psi_table
        self.mp = mp
        self.m = m

    @property
    def cr_chain(self):
        return [self.cr1, self.cr2, self.cr3, self.cr4, self.cr5]

    def cr_chain_consistent(self):
        """Eq-style chain on the decided cr flags; the 2nd and 3rd steps
        only bind when the CR dimensions agree."""
        chain = self.cr_chain
        for i in range(4):
            a, b = chain[i], chain[i + 1]
            if i in (0, 1) and self.mp != self.m:
                continue
            if a.status == HOLDS and b.status == FAILS:
                return False
        return True

    def __repr__(self):
        parts = ["cr%d=%s" % (i + 1, v.status)
                 for i, v in enumerate(self.cr_chain) if v is not None]
        if self.h1 is not None:
            parts += ["h%d=%s" % (i + 1, v.status) for i, v in
                      enumerate([self.h1, self.h2, self.h3, self.h4])]
        return "MapClassification(%s)" % ", ".join(parts)


def classify_map_cr(h: FormalCRMap, M=None, Mp=None, dmax: int = 4,
                    seed: int = 0) -> MapClassification:
    """The CR-horizontal ladder cr1..cr5 of a verified formal CR map."""
    M = M or h.M
    Mp = Mp or h.Mp
    if not verify_formal_cr_map(h, M, Mp).ok:
        raise ReflectionError("map is not CR to the working order")
    horiz = h.horizontal_part()
    m, mp = M.m, h.mp
    r0 = rank_at_origin(horiz)

    cr1 = Verdict(HOLDS if (mp == m and r0 == m) else FAILS, bound=1)
    cr2 = Verdict(HOLDS if (mp <= m and r0 == mp) else FAILS, bound=1)
    if mp == m:
        D = ideal_contains_power_of_maximal(horiz.components, dmax)
        cr3 = Verdict(HOLDS if D is not None else INCONCLUSIVE,
                      k0=D, bound=dmax)
    else:
        cr3 = Verdict(FAILS, bound=dmax)
    rg = generic_rank(horiz, seed=seed)
    cr4 = Verdict(HOLDS if (mp <= m and rg == mp) else FAILS, bound=h.order)
    relations = transversality_kernel(h, M, degree=dmax)
    if relations:
        cr5 = Verdict(FAILS, bound=dmax, witness=relations)
    else:
        cr5 = Verdict(HOLDS, bound=dmax)
    cls = MapClassification(cr1, cr2, cr3, cr4, cr5, mp=mp, m=m)
    if not cls.cr_chain_consistent():
        raise AssertionError("cr chain violated: %r" % cls)
    return cls


def psi_table(h: FormalCRMap, M=None, Mp=None, beta_max: int = 1) -> dict:
    """(j', beta) -> Psi'_{j',beta}(t, tau, t'), the reflection-identity
    kernel series: Lbar^beta gbar_{j'} minus the gamma'-sum of
    Lbar^beta[fbar^gamma'] times Theta'_{j',gamma'}(t')."""
    M = M or h.M
    Mp = Mp or h.Mp
    ctxj = M.ctx_joint
    ctx_psi = VariableContext(ctxj.names + Mp.names.t)
    _, Lbar = cr_fields(M)
    fbar_emb = [c.remapped(ctxj) for c in h.fbar.components]
    gbar_emb = [c.remapped(ctxj) for c in h.gbar.components]
    fpow = _power_cache(fbar_emb, h.order)
    table, _ = target_component_tables(Mp)
    gammas = sorted({g for tab in table for g in tab},
                    key=lambda g: (sum(g), g))
    caches_f = {g: _WordCache(Lbar, fpow(g)) for g in gammas}
    caches_g = [_WordCache(Lbar, s) for s in gbar_emb]
    out = {}
    for beta in multidegrees(M.m, beta_max):
        room = h.order - sum(beta)
        for jp in range(h.dp):
            psi = caches_g[jp].get(beta).remapped(ctx_psi).truncated(room)
            for g, s in table[jp].items():
                term = mul_precise(caches_f[g].get(beta).remapped(ctx_psi),
                                   s.remapped(ctx_psi))
                psi = psi - term.truncated(room)
            out[(jp, tuple(beta))] = psi
    return out


def psi_and_h_conditions(h: FormalCRMap, M=None, Mp=None, kmax: int = 2,
                         seed: int = 0) -> MapClassification:
    """Classification of the map through its reflection-identity data."""
    M = M or h.M
    Mp = Mp or h.Mp
    if kmax > h.order:
        raise SeriesError("kmax exceeds the truncation order")
    table = psi_table(h, M, Mp, beta_max=kmax)
    ctxj = M.ctx_joint
    ctx_psi = VariableContext(ctxj.names + Mp.names.t)
    ctx_tp = VariableContext(Mp.names.t)
    zero = TruncatedSeries.zero(ctx_tp, h.order)
    base_zero = {n: zero for n in ctxj.names}

    psi0 = {key: s.substitute(base_zero, ctx_tp) for key, s in table.items()}

    def psi_k_rank(k):
        comps = [s for (jp, beta), s in sorted(psi0.items())
                 if sum(beta) <= k]
        order = min(c.order for c in comps)
        return rank_at_origin(SeriesMap([c.truncated(order) for c in comps]))

    np_ = h.np
    r1 = psi_k_rank(1) if kmax >= 1 else None
    h1 = Verdict(HOLDS if r1 == np_ else FAILS, bound=1)
    h2 = Verdict(FAILS, bound=kmax)
    ell0 = None
    for k in range(1, kmax + 1):
        if psi_k_rank(k) == np_:
            ell0 = k
            h2 = Verdict(HOLDS, k0=k, bound=kmax)
            break

    h3 = Verdict(INCONCLUSIVE, bound=kmax)
    for k in range(1, kmax + 1):
        gens = [s for (jp, beta), s in sorted(psi0.items()) if sum(beta) <= k]
        D = ideal_contains_power_of_maximal(gens, dmax=min(h.order, 4))
        if D is not None:
            h3 = Verdict(HOLDS, k0=k, bound=(kmax, D))
            break

    # h4: rank of the t'-gradients of Psi along the Segre leaf through 0,
    # evaluated at t' = h(z, theta_bar(z, 0)).
    ctx_z = VariableContext(M.names.z)
    zs = [TruncatedSeries.variable(ctx_z, h.order, n) for n in M.names.z]
    zero_z = TruncatedSeries.zero(ctx_z, h.order)
    tb0 = [t.compose(zs + [zero_z] * (M.m + M.d))
           for t in M.theta_bar.components]
    h_on = [c.compose(zs + tb0) for c in h.h.components]
    args = []
    for name in ctx_psi.names:
        if name in M.names.z:
            args.append(zs[M.names.z.index(name)])
        elif name in M.names.w:
            args.append(tb0[M.names.w.index(name)])
        elif name in Mp.names.t:
            args.append(h_on[Mp.names.t.index(name)])
        else:
            args.append(zero_z)
    tp_idx = [ctx_psi.index(n) for n in Mp.names.t]
    rows = []
    for key in sorted(table):
        s = table[key]
        row = [s.derive(i).compose([a.truncated(s.order - 1) for a in args])
               for i in tp_idx]
        rows.append(row)
    r4 = symbolic_rank(rows, seed=seed)
    h4 = Verdict(HOLDS if r4 == np_ else FAILS, bound=kmax)

    return MapClassification(None, None, None, None, None,
                             h1, h2, h3, h4, ell0=ell0, psi_table=table,
                             mp=h.mp, m=M.m)


def degenerate_selfmap_generator(Mp: GraphedManifold, field: SeriesMap,
                                 varpi=None, seed: int = 0) -> FormalCRMap:
    """Flow a tangent holomorphic field for a formal time varpi'(t').

    The flow is integrated degree by degree; substituting the formal time
    gives a self-map of the manifold which is returned verified.  With a
    nonconvergent varpi' this is the classical counterexample showing that
    holomorphically degenerate targets admit divergent CR self-maps; at
    finite order every choice of varpi' works.
    """
    ctx_tp = VariableContext(Mp.names.t)
    N = Mp.order
    if field.context != ctx_tp:
        field = field.remapped(ctx_tp)
    _check_tangent(Mp, field)
    if varpi is None:
        rng = random.Random(seed)
        terms = {}
        for alpha in multidegrees(Mp.n, N):
            if sum(alpha) == 0:
                continue
            num = rng.randint(-6, 6)
            if num:
                terms[alpha] = GaussianRational(
                    Fraction(num, rng.randint(1, 4)),
                    Fraction(rng.randint(-3, 3), 2))
        varpi = TruncatedSeries(ctx_tp, N, terms)
    if varpi.context != ctx_tp:
        varpi = varpi.remapped(ctx_tp)
    if varpi.constant_term():
        raise ReflectionError("formal time must vanish at the origin")

    ctx_flow = VariableContext(("s_flow",) + Mp.names.t)
    s_idx = 0
    svar = TruncatedSeries.variable(ctx_flow, N, "s_flow")
    tvars = [TruncatedSeries.variable(ctx_flow, N, n) for n in Mp.names.t]
    a_emb = [c.remapped(ctx_flow) for c in field.components]
    phi = list(tvars)
    for _ in range(N + 1):
        nxt = [tvars[i]
               + a_emb[i].compose([svar] + phi).integrate(s_idx).truncated(N)
               for i in range(Mp.n)]
        if nxt == phi:
            break
        phi = nxt

    subs = {"s_flow": varpi}
    hmap = SeriesMap([c.substitute(subs, ctx_tp) for c in phi])
    out = FormalCRMap(hmap, Mp, Mp)
    rep = verify_formal_cr_map(out)
    if not rep.ok:
        raise AssertionError(
            "flow of a tangent field failed the CR check: %r" % rep)
    return out


def _check_tangent(Mp: GraphedManifold, field: SeriesMap):
    ctx = Mp.ctx_theta
    t_idx = [ctx.index(n) for n in Mp.names.t]
    emb = [c.remapped(ctx) for c in field.components]
    for j in range(Mp.d):
        total = None
        for i in range(Mp.n):
            piece = Mp.theta[j].derive(t_idx[i]) * emb[i].truncated(Mp.order - 1)
            total = piece if total is None else total + piece
        if total:
            raise ReflectionError("field is not tangent to the manifold "
                                  "(defect valuation %s)" % total.valuation())
