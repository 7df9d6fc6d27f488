"""The CR reflection map and its identity families.

Everything here revolves around the two conjugate fundamental identities a
formal CR map satisfies on the complexified source, and what becomes of them
under the CR derivations: the reflection components Theta'_{j',gamma'}(h(t)),
the four residual families, the Cramer jet identities, the inversion and
transport formulas, and the finitely-nondegenerate resolution of h through
jets of its conjugate.

Precision discipline: a residual produced after applying |beta| derivations
is exact to degree order - |beta|; reports always carry that bound next to
the observed valuation, never a bare boolean.
"""

from __future__ import annotations

from math import comb

from .context import VariableContext, multidegrees, zero_exponent
from .gaussian import ONE, ZERO, MINUS_ONE
from .linalg import kernel_basis, numeric_rank
from .manifold import (GraphedManifold, JetSymbols, cr_fields,
                       extend_derivation_to_jets, transversal_fields)
from .segre import SegreChain
from .series import (SeriesMap, TruncatedSeries, SeriesError,
                     divide_with_valuation, factorial_multi, formal_ift,
                     mul_precise)


class ReflectionError(ValueError):
    pass


class FormalCRMap:
    """A formal map h between source and target manifolds, with its
    coefficient-conjugate.

    h lives in the source t-variables and splits as (f, g) along the target
    (z', w') split; hbar is the coefficient conjugate, expressed in the
    source tau-variables.
    """

    def __init__(self, h: SeriesMap, M: GraphedManifold, Mp: GraphedManifold):
        if len(h.components) != Mp.n:
            raise ReflectionError("map must have %d components" % Mp.n)
        ctx_t = VariableContext(M.names.t)
        if h.context != ctx_t:
            h = h.remapped(ctx_t)
        if any(h.constant_terms()):
            raise ReflectionError("map components must vanish at 0")
        self.M = M
        self.Mp = Mp
        self.h = h
        self.n = M.n
        self.np = Mp.n
        self.mp = Mp.m
        self.dp = Mp.d
        tau_map = dict(zip(M.names.t, M.names.tau))
        ctx_tau = VariableContext(M.names.tau)
        self.hbar = SeriesMap([c.conjugate_swapped(tau_map, ctx_tau)
                               for c in h.components])

    @property
    def f(self):
        return SeriesMap(self.h.components[:self.mp])

    @property
    def g(self):
        return SeriesMap(self.h.components[self.mp:])

    @property
    def fbar(self):
        return SeriesMap(self.hbar.components[:self.mp])

    @property
    def gbar(self):
        return SeriesMap(self.hbar.components[self.mp:])

    @property
    def order(self):
        return self.h.order

    def linear_part(self):
        return [[c.derive(i).constant_term() for i in range(self.n)]
                for c in self.h.components]

    def is_invertible(self) -> bool:
        return self.np == self.n and numeric_rank(self.linear_part()) == self.n

    def horizontal_part(self) -> SeriesMap:
        """The CR-horizontal restriction z -> f(z, theta_bar(z, 0))."""
        M = self.M
        ctx_z = VariableContext(M.names.z)
        zs = [TruncatedSeries.variable(ctx_z, self.order, n) for n in M.names.z]
        zero = TruncatedSeries.zero(ctx_z, self.order)
        tb0 = [t.compose(zs + [zero] * (M.m + M.d))
               for t in M.theta_bar.components]
        return SeriesMap([c.compose(zs + tb0) for c in self.f.components])

    def horizontal_part_bar(self) -> SeriesMap:
        """zeta -> fbar(zeta, theta(zeta, 0)), the conjugate horizontal part."""
        M = self.M
        ctx_zeta = VariableContext(M.names.zeta)
        zero = TruncatedSeries.zero(ctx_zeta, self.order)
        th0 = [t.compose(
            [TruncatedSeries.variable(ctx_zeta, self.order, n)
             for n in M.names.zeta] + [zero] * M.m + [zero] * M.d)
            for t in M.theta.components]
        args = [TruncatedSeries.variable(ctx_zeta, self.order, n)
                for n in M.names.zeta] + th0
        return SeriesMap([c.compose(args) for c in self.fbar.components])

    def __repr__(self):
        return "FormalCRMap(%d -> %d, order %d)" % (self.n, self.np, self.order)


def identity_map(M: GraphedManifold) -> FormalCRMap:
    ctx_t = VariableContext(M.names.t)
    return FormalCRMap(SeriesMap.identity(ctx_t, M.order), M, M)


# -- residual reports ---------------------------------------------------------


class ResidualReport:
    """Valuation bookkeeping for a grid of residual series.

    Each entry is keyed (family, j', beta) and stores the residual's
    valuation (None when it vanishes within precision) and the degree to
    which the residual is exact.
    """

    def __init__(self):
        self.entries = {}

    def add(self, family, jp, beta, residual: TruncatedSeries):
        val = residual.valuation() if residual else None
        self.entries[(family, jp, tuple(beta))] = (val, residual.order)

    @property
    def ok(self) -> bool:
        return all(v is None for v, _ in self.entries.values())

    def family_ok(self, family) -> bool:
        return all(v is None for (fam, _, _), (v, _) in self.entries.items()
                   if fam == family)

    def first_failure(self, family=None):
        """Smallest failing valuation (None when everything vanishes)."""
        vals = [v for (fam, _, _), (v, _) in self.entries.items()
                if v is not None and (family is None or fam == family)]
        return min(vals) if vals else None

    def __repr__(self):
        bad = sum(1 for v, _ in self.entries.values() if v is not None)
        return "ResidualReport(%d entries, %d failing)" % (
            len(self.entries), bad)


def verify_formal_cr_map(h: FormalCRMap, M=None, Mp=None) -> ResidualReport:
    """The beta = 0 reflection identities, in substituted form.

    Residuals g(z, theta_bar(z,tau)) - theta_bar'(f(...), hbar(tau)) and the
    coefficient-conjugate family; both must vanish mod degree order+1 for h
    to be a formal CR map.
    """
    M = M or h.M
    Mp = Mp or h.Mp
    N = h.order
    report = ResidualReport()

    # family 3 (beta = 0): context (z, zeta, xi)
    ctx_w = M.ctx_restrict_w
    tb = [t.remapped(ctx_w) for t in M.theta_bar.components]
    args_t = [TruncatedSeries.variable(ctx_w, N, n) for n in M.names.z] + tb
    h_on = [c.compose(args_t) for c in h.h.components]
    hbar_emb = [c.remapped(ctx_w) for c in h.hbar.components]
    for jp in range(h.dp):
        rhs = Mp.theta_bar[jp].compose(h_on[:h.mp] + hbar_emb)
        report.add(3, jp, (), h_on[h.mp + jp] - rhs)

    # family 1 (beta = 0): context (z, w, zeta)
    ctx_x = M.ctx_restrict_xi
    th = [t.remapped(ctx_x) for t in M.theta.components]
    args_tau = [TruncatedSeries.variable(ctx_x, N, n) for n in M.names.zeta] + th
    hbar_on = [c.compose(args_tau) for c in h.hbar.components]
    h_emb = [c.remapped(ctx_x) for c in h.h.components]
    for jp in range(h.dp):
        rhs = Mp.theta[jp].compose(hbar_on[:h.mp] + h_emb)
        report.add(1, jp, (), hbar_on[h.mp + jp] - rhs)
    return report


# -- reflection components ----------------------------------------------------


class ReflectionComponents:
    """The table gamma' -> Theta'_{gamma'}(h(t)), doubly truncated.

    Entry gamma' holds d' series in the source t variables, exact to degree
    order - |gamma'|; reassembling sum zeta'^gamma' table[gamma'] recovers
    Theta'(zeta', h(t)) inside the box |gamma'| <= gmax, t-degree <= order.
    """

    def __init__(self, h: FormalCRMap, gmax: int, table: dict):
        self.h = h
        self.gmax = gmax
        self.table = table

    def entry(self, gamma):
        gamma = tuple(gamma)
        got = self.table.get(gamma)
        if got is not None:
            return got
        ctx_t = VariableContext(self.h.M.names.t)
        return [TruncatedSeries.zero(ctx_t, self.h.order - sum(gamma))] * self.h.dp

    def nonzero_gammas(self):
        return sorted((g for g, entry in self.table.items()
                       if any(entry)), key=lambda g: (sum(g), g))

    def reassembly_defect(self):
        """Valuation of the worst reassembly residual, or None if exact."""
        h, Mp = self.h, self.h.Mp
        N = h.order
        joint = VariableContext(Mp.names.zeta + h.M.names.t)
        zp = [TruncatedSeries.variable(joint, N, n) for n in Mp.names.zeta]
        h_emb = [c.remapped(joint) for c in h.h.components]
        worst = None
        for jp in range(h.dp):
            direct = Mp.theta[jp].compose(zp + h_emb)
            direct = _box_filter(direct, range(Mp.m), self.gmax)
            assembled = TruncatedSeries.zero(joint, N)
            for gamma, entry in self.table.items():
                mono = TruncatedSeries.monomial(
                    joint, N, tuple(gamma) + zero_exponent(h.n))
                assembled = assembled + mul_precise(
                    mono, entry[jp].remapped(joint)).truncated(N)
            res = direct - assembled
            if res:
                v = res.valuation()
                worst = v if worst is None else min(worst, v)
        return worst

    def __repr__(self):
        return "ReflectionComponents(gmax=%d, %d nonzero entries)" % (
            self.gmax, len(self.nonzero_gammas()))


def _box_filter(f: TruncatedSeries, var_indices, bound: int) -> TruncatedSeries:
    sel = list(var_indices)
    terms = {e: c for e, c in f.terms.items()
             if sum(e[i] for i in sel) <= bound}
    return TruncatedSeries._make(f.context, f.order, terms)


def target_component_tables(Mp: GraphedManifold):
    """Expansions of theta' and theta_bar' in powers of zeta' resp. z'.

    Returns (table, table_bar): table[j'][gamma'] is a series in t', exact
    to degree order - |gamma'|; table_bar[j'][gamma'] lives in tau'.
    """
    table = [t.coefficient_table(Mp.names.zeta) for t in Mp.theta.components]
    table_bar = [t.coefficient_table(Mp.names.z)
                 for t in Mp.theta_bar.components]
    return table, table_bar


def reflection_components(h: FormalCRMap, Mp=None, gmax=None) -> ReflectionComponents:
    """Each Theta'_{j',gamma'}(h(t)) as an exact truncated series."""
    Mp = Mp or h.Mp
    gmax = h.order if gmax is None else gmax
    if gmax > h.order:
        raise ReflectionError("gmax exceeds the truncation order")
    table, _ = target_component_tables(Mp)
    out = {}
    h_args = list(h.h.components)
    for jp in range(h.dp):
        for gamma, coeff_series in table[jp].items():
            if sum(gamma) > gmax:
                continue
            composed = coeff_series.compose(h_args)
            entry = out.setdefault(
                gamma, [None] * h.dp)
            entry[jp] = composed
    ctx_t = VariableContext(h.M.names.t)
    final = {}
    for gamma, entry in out.items():
        filled = [e if e is not None
                  else TruncatedSeries.zero(ctx_t, h.order - sum(gamma))
                  for e in entry]
        if any(filled):
            final[gamma] = filled
    return ReflectionComponents(h, gmax, final)


# -- derivation caches --------------------------------------------------------


class _WordCache:
    """Iterated applications of a commuting family of derivations.

    Stores X^beta(seed) for multidegrees beta, reusing the predecessor with
    the first nonzero slot decremented (valid because the family commutes).
    """

    def __init__(self, fields, seed: TruncatedSeries):
        self.fields = fields
        self.values = {zero_exponent(len(fields)): seed}

    def get(self, beta):
        beta = tuple(beta)
        got = self.values.get(beta)
        if got is not None:
            return got
        k = next(i for i, x in enumerate(beta) if x)
        prev = self.get(beta[:k] + (beta[k] - 1,) + beta[k + 1:])
        got = self.fields[k].apply(prev)
        self.values[beta] = got
        return got


def reflection_identities(h: FormalCRMap, M=None, Mp=None, beta_max=1,
                          families=(1, 2, 3, 4)) -> ResidualReport:
    """Residuals of the four reflection-identity families up to |beta| <=
    beta_max, including the undifferentiated beta = 0 lines.

    Families 1/2 are written in the (zeta, t) chart (xi is substituted away);
    families 3/4 in the conjugate (z, tau) chart.  For a formal CR map all
    residuals vanish within precision.
    """
    M = M or h.M
    Mp = Mp or h.Mp
    N = h.order
    ctxj = M.ctx_joint
    L, Lbar = cr_fields(M)
    table, table_bar = target_component_tables(Mp)
    gammas = sorted({g for tab in table for g in tab}
                    | {g for tab in table_bar for g in tab},
                    key=lambda g: (sum(g), g))

    f_emb = [c.remapped(ctxj) for c in h.f.components]
    g_emb = [c.remapped(ctxj) for c in h.g.components]
    fbar_emb = [c.remapped(ctxj) for c in h.fbar.components]
    gbar_emb = [c.remapped(ctxj) for c in h.gbar.components]
    h_args = list(h.h.components)
    hbar_args = list(h.hbar.components)

    def compose_on_t(series_tp):
        return series_tp.compose(h_args).remapped(ctxj)

    def compose_on_tau(series_taup):
        return series_taup.compose(hbar_args).remapped(ctxj)

    comp = {jp: {g: compose_on_t(s) for g, s in table[jp].items()}
            for jp in range(h.dp)}
    comp_bar = {jp: {g: compose_on_tau(s) for g, s in table_bar[jp].items()}
                for jp in range(h.dp)}

    fbar_pow = _power_cache(fbar_emb, N)
    f_pow = _power_cache(f_emb, N)

    betas = list(multidegrees(M.m, beta_max))
    report = ResidualReport()

    # gamma'-sum terms are multiplied valuation-aware: a component of order
    # N - |gamma'| times a factor of valuation >= |gamma'| - |beta| is still
    # exact to N - |beta|, so the residual keeps the full surviving precision.
    if 1 in families or 2 in families:
        lbar_fbar = {g: _WordCache(Lbar, fbar_pow(g)) for g in gammas}
        lbar_gbar = [_WordCache(Lbar, s) for s in gbar_emb]
        lbar_compbar = {jp: {g: _WordCache(Lbar, s)
                             for g, s in comp_bar[jp].items()}
                        for jp in range(h.dp)} if 2 in families else None
        for beta in betas:
            room = N - sum(beta)
            for jp in range(h.dp):
                if 1 in families:
                    res = lbar_gbar[jp].get(beta)
                    for g in gammas:
                        piece = comp[jp].get(g)
                        if piece is None:
                            continue
                        res = res - mul_precise(
                            lbar_fbar[g].get(beta), piece).truncated(room)
                    report.add(1, jp, beta, M.restrict(res.truncated(room), "xi"))
                if 2 in families:
                    if sum(beta) == 0:
                        res = g_emb[jp].truncated(room)
                    else:
                        res = TruncatedSeries.zero(ctxj, room)
                    for g, cache in lbar_compbar[jp].items():
                        res = res - mul_precise(
                            f_pow(g), cache.get(beta)).truncated(room)
                    report.add(2, jp, beta, M.restrict(res.truncated(room), "xi"))

    if 3 in families or 4 in families:
        l_f = {g: _WordCache(L, f_pow(g)) for g in gammas}
        l_g = [_WordCache(L, s) for s in g_emb]
        l_comp = {jp: {g: _WordCache(L, s) for g, s in comp[jp].items()}
                  for jp in range(h.dp)} if 4 in families else None
        for beta in betas:
            room = N - sum(beta)
            for jp in range(h.dp):
                if 3 in families:
                    res = l_g[jp].get(beta)
                    for g in gammas:
                        piece = comp_bar[jp].get(g)
                        if piece is None:
                            continue
                        res = res - mul_precise(
                            l_f[g].get(beta), piece).truncated(room)
                    report.add(3, jp, beta, M.restrict(res.truncated(room), "w"))
                if 4 in families:
                    if sum(beta) == 0:
                        res = gbar_emb[jp].truncated(room)
                    else:
                        res = TruncatedSeries.zero(ctxj, room)
                    for g, cache in l_comp[jp].items():
                        res = res - mul_precise(
                            fbar_pow(g), cache.get(beta)).truncated(room)
                    report.add(4, jp, beta, M.restrict(res.truncated(room), "w"))
    return report


def _power_cache(components, order):
    """Memoized monomial powers of a component family."""
    memo = {}

    def power(gamma):
        gamma = tuple(gamma)
        got = memo.get(gamma)
        if got is not None:
            return got
        if not any(gamma):
            got = TruncatedSeries.constant(components[0].context, order, ONE)
        else:
            i = next(j for j, x in enumerate(gamma) if x)
            prev = power(gamma[:i] + (gamma[i] - 1,) + gamma[i + 1:])
            got = prev * components[i]
        memo[gamma] = got
        return got

    return power


# -- Cramer jet identities ----------------------------------------------------


def _det(matrix):
    n = len(matrix)
    if n == 1:
        return matrix[0][0]
    total = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in matrix[1:]]
        piece = matrix[0][j] * _det(minor)
        if j % 2:
            piece = -piece
        total = piece if total is None else total + piece
    return total


def _adjugate(matrix):
    n = len(matrix)
    if n == 1:
        one = TruncatedSeries.constant(matrix[0][0].context,
                                       matrix[0][0].order, ONE)
        return [[one]]
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[matrix[r][c] for c in range(n) if c != j]
                     for r in range(n) if r != i]
            cof = _det(minor)
            if (i + j) % 2:
                cof = -cof
            out[j][i] = cof
    return out


class CramerTable:
    """For each (j, beta): the iterated-Cramer value of the composed jet
    (1/beta!) d^beta theta'_j (fbar o, h o) and the directly differentiated
    series, both over the (z, w, zeta) chart."""

    def __init__(self, det0, entries):
        self.det_at_zero = det0
        self.entries = entries

    def defects(self):
        """(j, beta) pairs where the two routes disagree within precision."""
        bad = []
        for key, (cramer, direct) in self.entries.items():
            prec = min(cramer.order, direct.order)
            if cramer.truncated(prec) != direct.truncated(prec):
                bad.append(key)
        return bad


def q_jbeta_cramer(h: FormalCRMap, M=None, Mp=None, beta_max=1) -> CramerTable:
    """Iterated Cramer solving of the differentiated fundamental identity.

    Requires h invertible; the m x m determinant of the first derivatives of
    the composed fbar must be a unit (its vanishing at 0 would contradict
    invertibility and is reported as an inconsistency).
    """
    M = M or h.M
    Mp = Mp or h.Mp
    if not h.is_invertible():
        raise ReflectionError("Cramer identities need an invertible map")
    N = h.order
    m = M.m
    ctx = M.ctx_restrict_xi

    th = [t.remapped(ctx) for t in M.theta.components]
    args_tau = [TruncatedSeries.variable(ctx, N, n) for n in M.names.zeta] + th
    fbar_on = [c.compose(args_tau) for c in h.fbar.components]
    gbar_on = [c.compose(args_tau) for c in h.gbar.components]
    h_emb = [c.remapped(ctx) for c in h.h.components]
    zeta_idx = [ctx.index(n) for n in M.names.zeta]

    A = [[fbar_on[l].derive(zeta_idx[k]) for l in range(m)] for k in range(m)]
    det = _det(A)
    det0 = det.constant_term()
    if not det0:
        raise ReflectionError(
            "inconsistency: the Cramer determinant vanishes at 0 "
            "for an invertible map")
    det_inv = det.invert_unit()
    adj = _adjugate(A)

    values = {}
    for j in range(M.d):
        values[(j, zero_exponent(m))] = gbar_on[j]
    level = {zero_exponent(m)}
    for _ in range(beta_max):
        nxt = set()
        for beta in sorted(level):
            for j in range(M.d):
                v = values[(j, beta)]
                rhs = [v.derive(zeta_idx[k]) for k in range(m)]
                for l in range(m):
                    target = beta[:l] + (beta[l] + 1,) + beta[l + 1:]
                    if (j, target) in values:
                        continue
                    sol = None
                    for k in range(m):
                        piece = adj[l][k] * rhs[k]
                        sol = piece if sol is None else sol + piece
                    values[(j, target)] = sol * det_inv.truncated(sol.order)
                    nxt.add(target)
        level = nxt

    entries = {}
    for (j, beta), v in values.items():
        scale = ONE / factorial_multi(beta)
        cramer = v * scale
        d_theta = Mp.theta[j].derive_multi(
            tuple(beta) + zero_exponent(Mp.n))
        direct = d_theta.compose(fbar_on + h_emb) * scale
        entries[(j, beta)] = (cramer, direct)
    return CramerTable(det0, entries)


# -- inversion of the component expansion -------------------------------------


def _binom_multi(beta, gamma):
    out = 1
    for b, g in zip(beta, gamma):
        out *= comb(b + g, g)
    return out


def forward_expansion(theta_table: dict, zeta, mp: int, bmax: int) -> dict:
    """q_{j,beta} = sum_gamma ((beta+gamma)!/(beta! gamma!)) zeta^gamma
    theta_{j,beta+gamma}, over table depth bmax."""
    return _expansion(theta_table, zeta, mp, bmax, invert=False)


def invert_expansion(q_table: dict, zeta, mp: int, bmax: int) -> dict:
    """theta_{j,beta} = sum_gamma (-1)^|gamma| ((beta+gamma)!/(beta! gamma!))
    zeta^gamma q_{j,beta+gamma}: the exact inverse of `forward_expansion`."""
    return _expansion(q_table, zeta, mp, bmax, invert=True)


def _expansion(table: dict, zeta, mp: int, bmax: int, invert: bool,
               out_depth=None) -> dict:
    zeta = list(zeta)
    if len(zeta) != mp:
        raise ReflectionError("zeta must have %d components" % mp)
    out_depth = bmax if out_depth is None else out_depth
    js = sorted({j for j, _ in table})
    pow_cache = {}

    def zpow(gamma):
        got = pow_cache.get(gamma)
        if got is None:
            got = ONE
            for i, k in enumerate(gamma):
                for _ in range(k):
                    got = zeta[i] * got
            pow_cache[gamma] = got
        return got

    out = {}
    for j in js:
        for beta in multidegrees(mp, out_depth):
            total = None
            for gamma in multidegrees(mp, bmax - sum(beta)):
                src = table.get((j, tuple(a + b for a, b in zip(beta, gamma))))
                if src is None:
                    continue
                zp = zpow(gamma)
                if isinstance(zp, TruncatedSeries) and \
                        isinstance(src, TruncatedSeries):
                    piece = mul_precise(zp, src) * _binom_multi(beta, gamma)
                else:
                    piece = zp * src * _binom_multi(beta, gamma)
                if invert and sum(gamma) % 2:
                    piece = piece * MINUS_ONE
                total = piece if total is None else total + piece
            if total is not None:
                out[(j, beta)] = total
    return out


# -- formal Cramer solve ------------------------------------------------------


def formal_cramer_solve(coeffs, rhs):
    """Solve sum_k r[i][k] a_k = b_i for series a_k.

    The determinant must not vanish identically to the working order; the
    solution is obtained by adjugate multiplication and exact division and
    is determined modulo degree order - valuation(det).  Returns
    (solutions, lost_order).
    """
    n = len(coeffs)
    if any(len(row) != n for row in coeffs) or len(rhs) != n:
        raise ReflectionError("system must be square with matching rhs")
    det = _det(coeffs)
    if det.is_zero():
        raise ReflectionError("determinant vanishes to the working order")
    adj = _adjugate(coeffs)
    sols = []
    lost = None
    for i in range(n):
        num = None
        for k in range(n):
            piece = adj[i][k] * rhs[k]
            num = piece if num is None else num + piece
        q, mu = divide_with_valuation(num, det)
        sols.append(q)
        lost = mu if lost is None else max(lost, mu)
    return sols, lost


# -- transversality -----------------------------------------------------------


def transversality_kernel(h: FormalCRMap, M=None, degree: int = 4,
                          nwork=None):
    """Candidate polynomial relations on the conjugate horizontal part.

    Returns a basis (possibly empty) of polynomials Fbar' of degree <=
    `degree` in m' variables with Fbar'(fbar(zeta, theta(zeta, 0))) == 0 mod
    degree nwork+1.  An empty basis means CR-transversality holds as far as
    these bounds can see.
    """
    M = M or h.M
    nwork = h.order if nwork is None else nwork
    if nwork > h.order:
        raise ReflectionError("nwork exceeds the truncation order")
    horiz = [c.truncated(nwork) for c in h.horizontal_part_bar().components]
    mp = h.mp
    gammas = list(multidegrees(mp, degree))
    power = _power_cache(horiz, nwork)
    mono_index = {}
    columns = []
    for gamma in gammas:
        vec = {}
        for e, c in power(gamma).terms.items():
            vec[e] = c
            mono_index.setdefault(e, len(mono_index))
        columns.append(vec)
    matrix = [[col.get(e, ZERO) for col in columns]
              for e, _ in sorted(mono_index.items(), key=lambda kv: kv[1])]
    if not matrix:
        matrix = [[ZERO] * len(columns)]
    basis = kernel_basis(matrix)
    ctx_rel = VariableContext(h.Mp.names.zeta)
    out = []
    for vec in basis:
        terms = {gamma: coeff for gamma, coeff in zip(gammas, vec) if coeff}
        out.append(TruncatedSeries(ctx_rel, degree, terms))
    return out


def transversality_uniqueness_defect(h: FormalCRMap, M=None, degree: int = 2,
                                     nwork=None, beta_max=None,
                                     gamma_max=None):
    """The generalized graded uniqueness principle behind CR-transversality.

    Looks for series families {Fbar_gamma'(z)} of degree <= `degree`,
    |gamma'| <= gamma_max, solving
    sum_gamma' [Lbar^beta fbar^gamma'](z, theta_bar(z,0), 0, 0) *
    Fbar_gamma'(z) == 0  for all |beta| <= beta_max, to order nwork.
    Returns the kernel dimension: 0 means the only family is zero, which is
    what transversality forces.
    """
    M = M or h.M
    nwork = h.order if nwork is None else nwork
    beta_max = nwork if beta_max is None else beta_max
    gamma_max = degree if gamma_max is None else gamma_max
    ctxj = M.ctx_joint
    _, Lbar = cr_fields(M)
    fbar_emb = [c.remapped(ctxj) for c in h.fbar.components]
    power = _power_cache(fbar_emb, h.order)
    gammas = list(multidegrees(h.mp, gamma_max))
    caches = {g: _WordCache(Lbar, power(g)) for g in gammas}

    ctx_z = VariableContext(M.names.z)
    zs = [TruncatedSeries.variable(ctx_z, h.order, n) for n in M.names.z]
    zero = TruncatedSeries.zero(ctx_z, h.order)
    tb0 = [t.compose(zs + [zero] * (M.m + M.d)) for t in M.theta_bar.components]

    def on_segre(series):
        args = []
        for name in ctxj.names:
            if name in M.names.z:
                args.append(zs[M.names.z.index(name)])
            elif name in M.names.w:
                args.append(tb0[M.names.w.index(name)])
            else:
                args.append(zero)
        return series.compose(args)

    rel_monos = list(multidegrees(M.m, degree))
    unknowns = [(g, mono) for g in gammas for mono in rel_monos]
    rows = {}
    for beta in multidegrees(M.m, beta_max):
        room = nwork - sum(beta)
        if room < 0:
            continue
        for (g, mono) in unknowns:
            w = on_segre(caches[g].get(beta)).truncated(room)
            shifted = w * TruncatedSeries.monomial(ctx_z, room, mono)
            col = unknowns.index((g, mono))
            for e, c in shifted.terms.items():
                rows.setdefault((beta, e), [ZERO] * len(unknowns))[col] = c
    matrix = [rows[k] for k in sorted(rows)]
    if not matrix:
        return 0
    return len(kernel_basis(matrix))


# -- chain pullbacks ----------------------------------------------------------


def _jet_constants(F: SeriesMap, level: int) -> dict:
    """(component, alpha) -> (d^alpha F)(0) for |alpha| <= level."""
    out = {}
    for idx, comp in enumerate(F.components):
        for alpha in multidegrees(F.arity, level):
            out[(idx, alpha)] = comp.coefficient(alpha) \
                * factorial_multi(alpha)
    return out


class Resolution:
    """h resolved through the jets of its conjugate (the basic reflection
    identity in solved form).

    `phi` is a series map over (t, tau, jet symbols) with
    h(t) == phi(t, zeta, theta(zeta, t), strict-jet values of hbar composed
    with (zeta, theta)), modulo the surviving precision; the conjugate line
    holds as well.
    """

    def __init__(self, h, ell0, jets, phi, rows_used):
        self.h = h
        self.ell0 = ell0
        self.jets = jets
        self.phi = phi
        self.rows_used = rows_used

    def _jet_args_unbarred(self, level, jets):
        """u_{i,alpha} -> (d^alpha hbar_i)(zeta, theta(zeta,t)) - constant,
        as series over the (z, w, zeta) chart."""
        h, M = self.h, self.h.M
        ctx_v = M.ctx_restrict_xi
        th = [t.remapped(ctx_v) for t in M.theta.components]
        zetas = [TruncatedSeries.variable(ctx_v, h.order, n)
                 for n in M.names.zeta]
        out = {}
        for i, comp in enumerate(h.hbar.components):
            for alpha in multidegrees(M.n, level):
                composed = comp.derive_multi(alpha).compose(zetas + th)
                out[jets.name(i, alpha)] = composed - jets.constant(i, alpha)
        return out

    def _jet_args_barred(self, level, jets):
        """Conjugate side: jets of h composed with (z, theta_bar(z, tau)),
        minus the conjugated constants, over the (z, zeta, xi) chart."""
        h, M = self.h, self.h.M
        ctx_v = M.ctx_restrict_w
        tb = [t.remapped(ctx_v) for t in M.theta_bar.components]
        zs = [TruncatedSeries.variable(ctx_v, h.order, n) for n in M.names.z]
        out = {}
        for i, comp in enumerate(h.h.components):
            for alpha in multidegrees(M.n, level):
                composed = comp.derive_multi(alpha).compose(zs + tb)
                out[jets.name(i, alpha)] = \
                    composed - jets.constant(i, alpha).conjugate()
        return out

    def _compose_phi(self, phi_comp, uargs, ctx_v, barred):
        M = self.h.M
        args = []
        for name in phi_comp.context.names:
            if name in uargs:
                args.append(uargs[name])
            elif not barred and name in M.names.xi:
                args.append(M.theta.components[M.names.xi.index(name)]
                            .remapped(ctx_v))
            elif barred and name in M.names.w:
                args.append(M.theta_bar.components[M.names.w.index(name)]
                            .remapped(ctx_v))
            else:
                args.append(TruncatedSeries.variable(ctx_v, self.h.order, name))
        return phi_comp.compose(args)

    def verification_report(self) -> ResidualReport:
        """Both lines of the solved identity; families 1 and 2 label the
        unbarred and the conjugate line."""
        h, M = self.h, self.h.M
        report = ResidualReport()

        ctx_v = M.ctx_restrict_xi
        uargs = self._jet_args_unbarred(self.ell0, self.jets)
        for i, comp in enumerate(self.phi.components):
            value = self._compose_phi(comp, uargs, ctx_v, barred=False)
            res = h.h[i].remapped(ctx_v).truncated(value.order) - value
            report.add(1, i, (), res)

        swap = M.names.swap_map()
        ctx_cv = M.ctx_restrict_w
        uargs_bar = self._jet_args_barred(self.ell0, self.jets)
        for i, comp in enumerate(self.phi.components):
            phibar = comp.conjugate_swapped(swap, comp.context)
            value = self._compose_phi(phibar, uargs_bar, ctx_cv, barred=True)
            res = h.hbar[i].remapped(ctx_cv).truncated(value.order) - value
            report.add(2, i, (), res)
        return report

    def jet_identity_report(self, ell: int) -> ResidualReport:
        """The order-ell jet extension of the solved identity.

        Tangential words L^beta Ups^delta applied to both sides, then the
        unit-triangular inversion that isolates each plain partial of h;
        every entry must vanish within its precision.
        """
        h, M = self.h, self.h.M
        N = h.order
        level = self.ell0 + ell
        jets2 = JetSymbols(self.jets.prefix, h.np, M.names.tau, level,
                           _jet_constants(h.hbar, level))
        ctx2 = VariableContext(M.ctx_joint.names + jets2.names)
        phi2 = [c.remapped(ctx2) for c in self.phi.components]
        L, _ = cr_fields(M)
        U, _ = transversal_fields(M)
        liftL = [extend_derivation_to_jets(D, [jets2], ctx2, N) for D in L]
        liftU = [extend_derivation_to_jets(D, [jets2], ctx2, N) for D in U]

        def nested_values(seed, liftL, liftU):
            by_delta = _WordCache(liftU, seed)
            caches = {}

            def get(beta, delta):
                cache = caches.get(delta)
                if cache is None:
                    cache = _WordCache(liftL, by_delta.get(delta))
                    caches[delta] = cache
                return cache.get(beta)

            return get

        G = [nested_values(phi2[i], liftL, liftU) for i in range(h.np)]

        vjets = JetSymbols("vres", 1, M.names.t, ell, {})
        ctx_c = VariableContext(M.ctx_joint.names + vjets.names)
        liftLc = [extend_derivation_to_jets(D, [vjets], ctx_c, N) for D in L]
        liftUc = [extend_derivation_to_jets(D, [vjets], ctx_c, N) for D in U]
        seed = vjets.jet_series(0, zero_exponent(M.n), ctx_c, N)
        W = nested_values(seed, liftLc, liftUc)

        words = [(beta, delta)
                 for beta in multidegrees(M.m, ell)
                 for delta in multidegrees(M.d, ell - sum(beta))]
        words.sort(key=lambda bd: (sum(bd[0]) + sum(bd[1]), -sum(bd[1])))

        exprs = {}
        coeff_cache = {}
        for beta, delta in words:
            w_expr = W(beta, delta)
            coeffs = {}
            for alpha in multidegrees(M.n, ell):
                c = w_expr.derive(ctx_c.index(vjets.name(0, alpha)))
                if c:
                    if c.support_variables() & {
                            ctx_c.index(n) for n in vjets.names}:
                        raise AssertionError("jet expansion is not linear")
                    coeffs[alpha] = c.remapped(ctx2)
            coeff_cache[(beta, delta)] = coeffs
            diag = tuple(beta) + tuple(delta)
            dcoeff = coeffs.get(diag)
            if dcoeff is None or dcoeff.constant_term() != ONE \
                    or len(dcoeff.terms) != 1:
                raise AssertionError("jet inversion lost its unit diagonal")
            for i in range(h.np):
                expr = G[i](beta, delta)
                for alpha, c in coeffs.items():
                    if alpha == diag:
                        continue
                    prev = exprs[(i, alpha)]
                    expr = expr - c.truncated(prev.order) * prev
                exprs[(i, diag)] = expr

        report = ResidualReport()
        ctx_v = M.ctx_restrict_xi
        uargs = self._jet_args_unbarred(level, jets2)
        for (i, alpha), expr in sorted(exprs.items()):
            value = self._compose_phi(expr, uargs, ctx_v, barred=False)
            lhs = h.h[i].derive_multi(alpha).remapped(ctx_v)
            res = lhs.truncated(value.order) - value.truncated(lhs.order)
            report.add("jet", i, alpha, res)
        return report


def resolve_finitely_nondeg(h: FormalCRMap, M=None, Mp=None,
                            ell0: int = 1) -> Resolution:
    """Solve h(t) from the reflection identities of order <= ell0.

    Requires the rank-n' hypothesis on the differentiated system at 0 (the
    finitely-nondegenerate condition on h with order ell0); the solution map
    phi is produced by the formal implicit function theorem on n' selected
    rows and verified against h before being returned.
    """
    M = M or h.M
    Mp = Mp or h.Mp
    N = h.order
    if not verify_formal_cr_map(h, M, Mp).ok:
        raise ReflectionError("the map is not CR to the working order")
    jets = JetSymbols("ujb", h.np, M.names.tau, ell0,
                      _jet_constants(h.hbar, ell0))
    ctx_ext = VariableContext(M.ctx_joint.names + jets.names + Mp.names.t)
    _, Lbar = cr_fields(M)
    lifted = [extend_derivation_to_jets(D, [jets], ctx_ext, N) for D in Lbar]

    base_u = [jets.jet_series(i, zero_exponent(M.n), ctx_ext, N)
              for i in range(h.np)]
    fpow = _power_cache(base_u[:h.mp], N)
    table, _ = target_component_tables(Mp)
    gammas = sorted({g for tab in table for g in tab},
                    key=lambda g: (sum(g), g))
    caches_f = {g: _WordCache(lifted, fpow(g)) for g in gammas}
    caches_g = [_WordCache(lifted, base_u[h.mp + j]) for j in range(h.dp)]
    theta_emb = [{g: s.remapped(ctx_ext) for g, s in table[j].items()}
                 for j in range(h.dp)]

    rows = []
    keys = []
    for beta in multidegrees(M.m, ell0):
        room = N - sum(beta)
        for j in range(h.dp):
            R = caches_g[j].get(beta).truncated(room)
            for g, s in theta_emb[j].items():
                R = R - mul_precise(caches_f[g].get(beta), s).truncated(room)
            rows.append(R)
            keys.append((j, beta))
    for R in rows:
        if R.constant_term():
            raise ReflectionError("resolution system does not vanish at 0")

    tp_idx = [ctx_ext.index(n) for n in Mp.names.t]
    grads = [[R.derive(i).constant_term() for i in tp_idx] for R in rows]
    chosen = _independent_rows(grads, h.np)
    if chosen is None:
        raise ReflectionError(
            "rank hypothesis fails: the order-%d system has rank < %d"
            % (ell0, h.np))
    system = SeriesMap([rows[i].truncated(min(rows[i].order for i in chosen))
                        for i in chosen])
    phi = formal_ift(system, list(Mp.names.t))
    res = Resolution(h, ell0, jets, phi, [keys[i] for i in chosen])
    rep = res.verification_report()
    if not rep.ok:
        raise AssertionError("resolution failed verification: %r" % rep)
    return res


def _independent_rows(matrix, need):
    """Indices of `need` rows spanning rank `need`, or None."""
    if not matrix:
        return None
    ncols = len(matrix[0])
    work = []
    chosen = []
    for idx, row in enumerate(matrix):
        cand = [list(r) for r in work] + [list(row)]
        if numeric_rank(cand) > len(work):
            work = cand
            chosen.append(idx)
            if len(chosen) == need:
                return chosen
    return None


# -- biholomorphic transport of the component table ---------------------------


def transform_target(Mp: GraphedManifold, phi_p: SeriesMap) -> GraphedManifold:
    """Graphed equations of the image manifold under t'' = phi'(t').

    Solves the transformed graph with the implicit function theorem; raises
    when the transformed manifold is not graphable in the inherited split.
    """
    if any(phi_p.constant_terms()):
        raise ReflectionError("target change must fix the origin")
    ctx_tp = VariableContext(Mp.names.t)
    if phi_p.context != ctx_tp:
        phi_p = phi_p.remapped(ctx_tp)
    lin = [[c.derive(i).constant_term() for i in range(Mp.n)]
           for c in phi_p.components]
    if numeric_rank(lin) < Mp.n:
        raise ReflectionError("target change is not invertible")
    ctx_src = Mp.ctx_theta
    N = Mp.order
    tau_map = dict(zip(Mp.names.t, Mp.names.tau))
    ctx_taup = VariableContext(Mp.names.tau)
    phibar = [c.conjugate_swapped(tau_map, ctx_taup)
              for c in phi_p.components]
    zetas = [TruncatedSeries.variable(ctx_src, N, n) for n in Mp.names.zeta]
    th = list(Mp.theta.components)
    phibar_on = [c.compose(zetas + th) for c in phibar]
    S = phibar_on[:Mp.m] + [c.remapped(ctx_src) for c in phi_p.components]

    temp = tuple("tc%d" % i for i in range(len(S)))
    ctx_big = VariableContext(temp + ctx_src.names)
    eqs = []
    for i, s in enumerate(S):
        eqs.append(s.remapped(ctx_big)
                   - TruncatedSeries.variable(ctx_big, N, temp[i]))
    try:
        inv = formal_ift(SeriesMap(eqs), list(ctx_src.names))
    except SeriesError as exc:
        raise ReflectionError("target split failure after the change: %s"
                              % exc)
    theta_new = [phibar_on[Mp.m + j].compose(list(inv.components))
                 for j in range(Mp.d)]
    rename = dict(zip(temp, ctx_src.names))
    theta_new = [t.remapped(ctx_src, rename) for t in theta_new]
    return GraphedManifold.from_theta(Mp.m, Mp.d, SeriesMap(theta_new),
                                      primed=True)


def composed_jet_table(hmap: FormalCRMap, depth: int) -> dict:
    """(j, beta) -> (1/beta!) [d^beta theta'_j](fbar o, h o) at zeta = 0.

    These are the right-hand sides of the component expansion, as series in
    the source t variables; entry (j, beta) is exact to order - |beta|.
    """
    M, Mp = hmap.M, hmap.Mp
    N = hmap.order
    ctx = M.ctx_restrict_xi
    th = [t.remapped(ctx) for t in M.theta.components]
    zetas = [TruncatedSeries.variable(ctx, N, n) for n in M.names.zeta]
    fbar_on = [c.compose(zetas + th) for c in hmap.fbar.components]
    h_emb = [c.remapped(ctx) for c in hmap.h.components]
    ctx_t = VariableContext(M.names.t)
    at_zero = {n: TruncatedSeries.zero(ctx_t, N) for n in M.names.zeta}
    out = {}
    for j in range(Mp.d):
        for beta in multidegrees(Mp.m, depth):
            d = Mp.theta[j].derive_multi(tuple(beta) + zero_exponent(Mp.n))
            val = d.compose(fbar_on + h_emb) * (ONE / factorial_multi(beta))
            out[(j, beta)] = val.substitute(at_zero, ctx_t)
    return out


def target_change_transport(components: ReflectionComponents,
                            phi_p: SeriesMap) -> ReflectionComponents:
    """Transport a component table through a target change of coordinates.

    Recomputes the graph of the image manifold, then evaluates the new
    components through the inversion formula applied to the composed jet
    table of the change (the substitution chain at zeta = 0), finally
    substituting h.  Consistency with the direct recomputation holds within
    the shared precision.
    """
    h = components.h
    M, Mp = h.M, h.Mp
    N = h.order
    Mpp = transform_target(Mp, phi_p)
    ctx_tp = VariableContext(Mp.names.t)
    if phi_p.context != ctx_tp:
        phi_p = phi_p.remapped(ctx_tp)
    hpp = FormalCRMap(SeriesMap([c.compose(list(h.h.components))
                                 for c in phi_p.components]), M, Mpp)
    change = FormalCRMap(phi_p, Mp, Mpp)

    gmax = components.gmax
    depth = min(gmax + N, N)
    q = composed_jet_table(change, depth)

    ctx_t_p = VariableContext(Mp.names.t)
    tps = [TruncatedSeries.variable(ctx_t_p, N, n) for n in Mp.names.t]
    zero = TruncatedSeries.zero(ctx_t_p, N)
    th0 = [t.compose([zero] * Mp.m + tps) for t in Mp.theta.components]
    fb0 = [c.compose([zero] * Mp.m + th0) for c in change.fbar.components]

    raw = invert_expansion(q, fb0, Mp.m, depth)
    table = {}
    h_args = list(h.h.components)
    for (j, beta), s in raw.items():
        if sum(beta) > gmax:
            continue
        composed = s.compose(h_args)
        entry = table.setdefault(tuple(beta), [None] * h.dp)
        entry[j] = composed
    ctx_t = VariableContext(M.names.t)
    final = {}
    for gamma, entry in table.items():
        filled = [e if e is not None
                  else TruncatedSeries.zero(ctx_t, N - sum(gamma))
                  for e in entry]
        if any(filled):
            final[gamma] = filled
    return ReflectionComponents(hpp, gmax, final)


def chain_pullback(F: SeriesMap, chain: SegreChain) -> SeriesMap:
    """Compose a map on the joint (t, tau) context with a Segre chain.

    When the map only involves t (resp. tau) variables and the chain's last
    flow acts on the other block, the pullback collapses to the shorter
    chain; the collapse is asserted exactly before returning.
    """
    M = chain.M
    if F.context != M.ctx_joint:
        F = F.remapped(M.ctx_joint)
    pulled = F.compose(chain.components)
    if chain.k >= 1:
        used = set()
        for c in F.components:
            used |= {M.ctx_joint.names[i] for i in c.support_variables()}
        t_names = set(M.names.t)
        tau_names = set(M.names.tau)
        pure_t = used <= t_names
        pure_tau = used <= tau_names
        barred_first = chain.start_side == "barred"
        last_flow_barred = (chain.k % 2 == 1) == barred_first
        collapses = (pure_t and last_flow_barred) or \
                    (pure_tau and not last_flow_barred)
        if collapses and chain.k >= 2:
            shorter = chain.restricted_to_shorter(chain.k - 1)
            expect = F.compose(shorter.components).remapped(pulled.context)
            if expect != pulled:
                raise AssertionError(
                    "parity collapse violated on a chain pullback")
    return pulled
