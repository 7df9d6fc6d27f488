"""Generic submanifolds in complexified graphed form.

A manifold enters as a real defining system rho(t, conj t) = 0.  Replacing
the conjugated variables by independent ones and solving for the transversal
coordinates produces the graphed equations xi = Theta(zeta, t), equivalently
w = ThetaBar(z, tau), which are the fundamental data everything else in the
package consumes.  The two graphs are coefficient-conjugates of one another;
that reality invariant is checked, never assumed.

Variable conventions (unprimed source, primed target via the `primed` flag):
z1..zm, w1..wd are the t-coordinates, zeta1..zetam, xi1..xid the tau-ones.
The joint context used by derivations is ordered (z, w, zeta, xi).
"""

from __future__ import annotations

from .context import VariableContext, multidegrees, numbered
from .gaussian import GaussianRational, I, ONE, ZERO
from .linalg import numeric_rank
from .series import SeriesMap, TruncatedSeries, SeriesError, formal_ift


class ManifoldError(ValueError):
    pass


def _swap_map_for(context: VariableContext, n: int):
    names = context.names
    out = {}
    for i in range(n):
        out[names[i]] = names[n + i]
        out[names[n + i]] = names[i]
    return out


class Names:
    """Coordinate name bundle for one manifold."""

    __slots__ = ("z", "w", "zeta", "xi")

    def __init__(self, m, d, primed=False):
        p = "p" if primed else ""
        self.z = numbered("z" + p, m)
        self.w = numbered("w" + p, d)
        self.zeta = numbered("zeta" + p, m)
        self.xi = numbered("xi" + p, d)

    @property
    def t(self):
        return self.z + self.w

    @property
    def tau(self):
        return self.zeta + self.xi

    def swap_map(self):
        """Renaming that conjugates roles: z <-> zeta, w <-> xi."""
        out = {}
        for a, b in zip(self.z, self.zeta):
            out[a] = b
            out[b] = a
        for a, b in zip(self.w, self.xi):
            out[a] = b
            out[b] = a
        return out


class RealDefiningSystem:
    """d real-analytic defining series in complexified form.

    The context of `rho` must list the n t-coordinates first and their
    complexified conjugates second, in matching order.  Reality means
    rho_j(t, tau) == conj-coefficients of rho_j with the two blocks swapped.
    Components satisfying the identity with a minus sign (the usual way
    equations like w = conj(w) + i*z*conj(z) are written) describe the same
    zero set after multiplication by i; they are normalized on input.
    """

    def __init__(self, n, d, rho: SeriesMap, *, check=True):
        if len(rho.components) != d:
            raise ManifoldError("expected %d defining series" % d)
        if rho.arity != 2 * n:
            raise ManifoldError("context must hold t and tau (%d variables)"
                                % (2 * n))
        self.n = n
        self.d = d
        if check:
            if any(rho.constant_terms()):
                raise ManifoldError("defining series must vanish at 0")
            swap = _swap_map_for(rho.context, n)
            comps = []
            for j, r in enumerate(rho.components):
                flipped = r.conjugate_swapped(swap)
                if flipped == r:
                    comps.append(r)
                elif flipped == -r:
                    comps.append(r * I)
                else:
                    raise ManifoldError(
                        "defining system is not real (component %d)" % j)
            rho = SeriesMap(comps)
        self.rho = rho

    def _swap_map(self):
        return _swap_map_for(self.rho.context, self.n)

    def reality_defect(self):
        """Index of the first component violating (normalized) reality."""
        swap = self._swap_map()
        for j, r in enumerate(self.rho.components):
            if r.conjugate_swapped(swap) != r:
                return j
        return None

    @staticmethod
    def symmetrize(n, d, rho: SeriesMap) -> "RealDefiningSystem":
        """Project arbitrary series onto real ones:
        rho -> (rho + swapped conjugate)/2.  Used to manufacture test data.
        """
        swap = _swap_map_for(rho.context, n)
        half = GaussianRational(1) / 2
        comps = [(r + r.conjugate_swapped(swap)) * half
                 for r in rho.components]
        return RealDefiningSystem(n, d, SeriesMap(comps))

    def t_jacobian_at_zero(self):
        return [[r.derive(i).constant_term() for i in range(self.n)]
                for r in self.rho.components]


def _greedy_split(jac, n, d):
    """Choose d pivot columns of the d x n matrix `jac` (indices into t)."""
    rows = [list(r) for r in jac]
    pivots = []
    rank = 0
    for col in range(n):
        piv = next((r for r in range(rank, d) if rows[r][col]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = rows[rank][col].inverse()
        rows[rank] = [x * inv for x in rows[rank]]
        for r in range(d):
            if r != rank and rows[r][col]:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        pivots.append(col)
        rank += 1
        if rank == d:
            break
    return pivots, rank


class GraphedManifold:
    """Complexified generic submanifold in graphed form.

    theta: d series over (zeta, z, w);  theta_bar: d series over (z, zeta, xi).
    The pair is articulated by the reality involution
    theta_bar(z, zeta, theta(zeta, z, w)) == w (mod degree order+1).
    """

    def __init__(self, m, d, theta: SeriesMap, theta_bar: SeriesMap,
                 names: Names, *, check=True):
        self.m = m
        self.d = d
        self.n = m + d
        self.names = names
        self.theta = theta
        self.theta_bar = theta_bar
        self.order = theta.order
        self.ctx_theta = VariableContext(names.zeta + names.z + names.w)
        self.ctx_theta_bar = VariableContext(names.z + names.zeta + names.xi)
        self.ctx_joint = VariableContext(names.z + names.w + names.zeta + names.xi)
        if theta.context != self.ctx_theta:
            raise ManifoldError("theta context must be (zeta, z, w)")
        if theta_bar.context != self.ctx_theta_bar:
            raise ManifoldError("theta_bar context must be (z, zeta, xi)")
        if check:
            if any(theta.constant_terms()) or any(theta_bar.constant_terms()):
                raise ManifoldError("graph series must vanish at 0")
            swapped = SeriesMap([
                t.conjugate_swapped(names.swap_map(), self.ctx_theta_bar)
                for t in theta.components])
            if swapped != theta_bar:
                raise ManifoldError("theta_bar is not the conjugate of theta")
            rep = verify_reality(self)
            if not rep.ok:
                raise ManifoldError(
                    "reality involution fails at degree %s" % rep.first_failing_degree)

    # -- builders ----------------------------------------------------------

    @classmethod
    def from_theta_bar(cls, m, d, theta_bar: SeriesMap, *, primed=False,
                       check=True) -> "GraphedManifold":
        names = Names(m, d, primed)
        ctx_tb = VariableContext(names.z + names.zeta + names.xi)
        if theta_bar.context != ctx_tb:
            theta_bar = theta_bar.remapped(ctx_tb)
        ctx_t = VariableContext(names.zeta + names.z + names.w)
        theta = SeriesMap([
            t.conjugate_swapped(names.swap_map(), ctx_t)
            for t in theta_bar.components])
        return cls(m, d, theta, theta_bar, names, check=check)

    @classmethod
    def from_theta(cls, m, d, theta: SeriesMap, *, primed=False,
                   check=True) -> "GraphedManifold":
        names = Names(m, d, primed)
        ctx_t = VariableContext(names.zeta + names.z + names.w)
        if theta.context != ctx_t:
            theta = theta.remapped(ctx_t)
        ctx_tb = VariableContext(names.z + names.zeta + names.xi)
        theta_bar = SeriesMap([
            t.conjugate_swapped(names.swap_map(), ctx_tb)
            for t in theta.components])
        return cls(m, d, theta, theta_bar, names, check=check)

    def embedded_theta(self) -> SeriesMap:
        """theta over the joint (z, w, zeta, xi) context."""
        return self.theta.remapped(self.ctx_joint)

    def embedded_theta_bar(self) -> SeriesMap:
        return self.theta_bar.remapped(self.ctx_joint)

    # -- restriction to the manifold ----------------------------------------

    @property
    def ctx_restrict_xi(self):
        """Context after substituting xi := theta: (z, w, zeta)."""
        return VariableContext(self.names.z + self.names.w + self.names.zeta)

    @property
    def ctx_restrict_w(self):
        """Context after substituting w := theta_bar: (z, zeta, xi)."""
        return VariableContext(self.names.z + self.names.zeta + self.names.xi)

    def restrict(self, f, side: str):
        """Substitute one graphed equation into a series over the joint context.

        side='xi' replaces xi by theta(zeta, t); side='w' replaces w by
        theta_bar(z, tau).  Maps restrict componentwise.
        """
        if isinstance(f, SeriesMap):
            return SeriesMap([self.restrict(c, side) for c in f.components])
        if f.context != self.ctx_joint:
            f = f.remapped(self.ctx_joint)
        if side == "xi":
            target = self.ctx_restrict_xi
            repl = {name: s.remapped(target)
                    for name, s in zip(self.names.xi, self.theta.components)}
        elif side == "w":
            target = self.ctx_restrict_w
            repl = {name: s.remapped(target)
                    for name, s in zip(self.names.w, self.theta_bar.components)}
        else:
            raise ValueError("side must be 'xi' or 'w'")
        return f.substitute(repl, target)

    def __repr__(self):
        return "GraphedManifold(m=%d, d=%d, order=%d)" % (self.m, self.d, self.order)


class RealityReport:
    __slots__ = ("ok", "first_failing_degree")

    def __init__(self, ok, first_failing_degree=None):
        self.ok = ok
        self.first_failing_degree = first_failing_degree

    def __repr__(self):
        if self.ok:
            return "RealityReport(ok)"
        return "RealityReport(fails at degree %s)" % self.first_failing_degree


def verify_reality(M: GraphedManifold) -> RealityReport:
    """Check the involution identity in substituted form, both ways."""
    worst = None
    ctx_zw_zeta = VariableContext(M.names.z + M.names.w + M.names.zeta)
    theta_there = [t.remapped(ctx_zw_zeta) for t in M.theta.components]
    for j, tb in enumerate(M.theta_bar.components):
        repl = {name: s for name, s in zip(M.names.xi, theta_there)}
        res = tb.substitute(repl, ctx_zw_zeta) \
            - TruncatedSeries.variable(ctx_zw_zeta, M.order, M.names.w[j])
        if res:
            v = res.valuation()
            worst = v if worst is None else min(worst, v)
    ctx_zeta_t = VariableContext(M.names.zeta + M.names.z + M.names.w)
    ctx_back = VariableContext(M.names.zeta + M.names.z + M.names.xi)
    tb_there = [t.remapped(ctx_back) for t in M.theta_bar.components]
    for j, th in enumerate(M.theta.components):
        repl = {name: s for name, s in zip(M.names.w, tb_there)}
        res = th.substitute(repl, ctx_back) \
            - TruncatedSeries.variable(ctx_back, M.order, M.names.xi[j])
        if res:
            v = res.valuation()
            worst = v if worst is None else min(worst, v)
    return RealityReport(worst is None, worst)


def complexify_and_graph(system: RealDefiningSystem, split=None,
                         *, primed=False) -> GraphedManifold:
    """Solve the complexified defining system for the transversal block.

    `split`, when given, lists the d indices (into the t-coordinates) used
    as w; otherwise greedy column pivoting on d rho/d t(0) picks them.
    """
    n, d = system.n, system.d
    jac = system.t_jacobian_at_zero()
    if split is None:
        split, rank = _greedy_split(jac, n, d)
        if rank < d:
            raise ManifoldError(
                "manifold is not generic: rank d rho/d t(0) = %d < %d"
                % (rank, d))
    else:
        split = list(split)
        block = [[jac[r][c] for c in split] for r in range(d)]
        if numeric_rank(block) < d:
            raise ManifoldError("supplied split has singular transversal block")
    m = n - d
    names = Names(m, d, primed)
    z_pos = [i for i in range(n) if i not in set(split)]

    # Rename rho into the split coordinates, joint context (z, w, zeta, xi).
    old = system.rho.context.names
    rename = {}
    for k, i in enumerate(z_pos):
        rename[old[i]] = names.z[k]
        rename[old[n + i]] = names.zeta[k]
    for k, i in enumerate(split):
        rename[old[i]] = names.w[k]
        rename[old[n + i]] = names.xi[k]
    ctx_joint = VariableContext(names.z + names.w + names.zeta + names.xi)
    rho = system.rho.remapped(ctx_joint, rename)
    try:
        theta_bar = formal_ift(rho, list(names.w))
    except SeriesError as exc:
        raise ManifoldError("implicit solve for the graph failed: %s" % exc)
    ctx_tb = VariableContext(names.z + names.zeta + names.xi)
    theta_bar = theta_bar.remapped(ctx_tb)
    ctx_t = VariableContext(names.zeta + names.z + names.w)
    theta = SeriesMap([t.conjugate_swapped(names.swap_map(), ctx_t)
                       for t in theta_bar.components])
    return GraphedManifold(m, d, theta, theta_bar, names)


class Derivation:
    """First-order operator  sum_v coeff_v * d/dx_v  on a fixed context.

    Coefficients are series over the same context; missing entries mean 0.
    Constant-coefficient entries may be given as plain numbers.
    """

    __slots__ = ("context", "coeffs", "label", "forbidden")

    def __init__(self, context: VariableContext, coeffs: dict, label="",
                 forbidden=frozenset()):
        self.context = context
        norm = {}
        for key, val in coeffs.items():
            i = key if isinstance(key, int) else context.index(key)
            norm[i] = val
        self.coeffs = norm
        self.label = label
        self.forbidden = frozenset(context.index(n) if isinstance(n, str) else n
                                   for n in forbidden)

    def apply(self, f: TruncatedSeries) -> TruncatedSeries:
        if f.context != self.context:
            f = f.remapped(self.context)
        if self.forbidden and (f.support_variables() & self.forbidden):
            raise SeriesError(
                "operand involves jet symbols beyond the lifted level")
        out = None
        for i, c in self.coeffs.items():
            df = f.derive(i)
            if isinstance(c, TruncatedSeries):
                piece = df * c.truncated(df.order)
            else:
                piece = df * c
            out = piece if out is None else out + piece
        if out is None:
            raise SeriesError("empty derivation")
        return out

    def apply_map(self, F: SeriesMap) -> SeriesMap:
        return SeriesMap([self.apply(c) for c in F.components])

    def __repr__(self):
        return "Derivation(%s)" % (self.label or "?")


def cr_fields(M: GraphedManifold):
    """The two families of complexified CR fields (L_k, and barred)."""
    ctxj = M.ctx_joint
    tb = M.embedded_theta_bar()
    th = M.embedded_theta()
    L = []
    for k, zk in enumerate(M.names.z):
        coeffs = {zk: ONE}
        for j, wj in enumerate(M.names.w):
            coeffs[wj] = tb[j].derive(ctxj.index(zk))
        L.append(Derivation(ctxj, coeffs, label="L_%s" % zk))
    Lbar = []
    for k, zetak in enumerate(M.names.zeta):
        coeffs = {zetak: ONE}
        for j, xij in enumerate(M.names.xi):
            coeffs[xij] = th[j].derive(ctxj.index(zetak))
        Lbar.append(Derivation(ctxj, coeffs, label="Lbar_%s" % zetak))
    return L, Lbar


def transversal_fields(M: GraphedManifold):
    """The two transversal families (Upsilon_j, and barred)."""
    ctxj = M.ctx_joint
    th = M.embedded_theta()
    tb = M.embedded_theta_bar()
    U = []
    for j, wj in enumerate(M.names.w):
        coeffs = {wj: ONE}
        for l, xil in enumerate(M.names.xi):
            coeffs[xil] = th[l].derive(ctxj.index(wj))
        U.append(Derivation(ctxj, coeffs, label="Ups_%s" % wj))
    Ubar = []
    for j, xij in enumerate(M.names.xi):
        coeffs = {xij: ONE}
        for l, wl in enumerate(M.names.w):
            coeffs[wl] = tb[l].derive(ctxj.index(xij))
        Ubar.append(Derivation(ctxj, coeffs, label="UpsBar_%s" % xij))
    return U, Ubar


class DerivationWord:
    """An iterated word L^beta Ups^delta (or the barred pair)."""

    __slots__ = ("beta", "delta", "side")

    def __init__(self, beta, delta=None, side="unbarred"):
        self.beta = tuple(beta)
        self.delta = tuple(delta) if delta is not None else ()
        if side not in ("unbarred", "barred"):
            raise ValueError("side must be 'unbarred' or 'barred'")
        self.side = side

    @property
    def total_order(self):
        return sum(self.beta) + sum(self.delta)

    def __repr__(self):
        return "DerivationWord(beta=%r, delta=%r, %s)" % (
            self.beta, self.delta, self.side)


def apply_derivation(M: GraphedManifold, word: DerivationWord,
                     f: TruncatedSeries) -> TruncatedSeries:
    """Apply L^beta Ups^delta (or barred) to a series over the joint context.

    Precision drops by the total order of the word.
    """
    if word.total_order > f.order:
        raise SeriesError("derivation word exhausts the series order")
    L, Lbar = cr_fields(M)
    U, Ubar = transversal_fields(M)
    fields_L = L if word.side == "unbarred" else Lbar
    fields_U = U if word.side == "unbarred" else Ubar
    if len(word.beta) != M.m or (word.delta and len(word.delta) != M.d):
        raise ValueError("word shape does not match the manifold")
    out = f if f.context == M.ctx_joint else f.remapped(M.ctx_joint)
    for j in reversed(range(M.d if word.delta else 0)):
        for _ in range(word.delta[j]):
            out = fields_U[j].apply(out)
    for k in reversed(range(M.m)):
        for _ in range(word.beta[k]):
            out = fields_L[k].apply(out)
    return out


# -- formal jet symbols ------------------------------------------------------


class JetSymbols:
    """Formal variables u_{c,alpha} standing for the strict jet values
    (d^alpha phi_c)(y) - (d^alpha phi_c)(0) of an unknown map phi in the
    variables `dep_names`, up to |alpha| <= level.

    `constants[c][alpha]` holds the jet of the concrete map at 0 so that
    derivations can rebuild (d^alpha phi_c)(y) = constant + symbol.
    """

    def __init__(self, prefix, n_components, dep_names, level, constants=None):
        self.prefix = prefix
        self.n_components = n_components
        self.dep_names = tuple(dep_names)
        self.level = level
        self.alphas = list(multidegrees(len(self.dep_names), level))
        self.names = tuple(
            "%s%d_%s" % (prefix, c + 1, "_".join(map(str, a)))
            for c in range(n_components) for a in self.alphas)
        self.constants = constants or {}

    def name(self, comp, alpha):
        return "%s%d_%s" % (self.prefix, comp + 1, "_".join(map(str, alpha)))

    def constant(self, comp, alpha) -> GaussianRational:
        return self.constants.get((comp, tuple(alpha)), ZERO)

    def jet_series(self, comp, alpha, context, order):
        """constant + symbol, as a series over `context`."""
        base = TruncatedSeries.constant(context, order, self.constant(comp, alpha))
        return base + TruncatedSeries.variable(context, order, self.name(comp, alpha))


def extend_derivation_to_jets(D: Derivation, blocks, context: VariableContext,
                              order: int) -> Derivation:
    """Lift a base-context derivation to a context with jet symbols.

    For each block and each symbol u_{c,alpha} below the top level, the
    lifted operator gains the coefficient
    sum_v a_v * (const + u)_{c, alpha+e_v} over the block's dependency
    variables v.  Top-level symbols are marked forbidden: applying the lifted
    derivation to an operand that still involves them would silently drop
    terms, so it raises instead.
    """
    base_coeffs = {}
    for key, val in D.coeffs.items():
        name = D.context.names[key] if isinstance(key, int) else key
        if isinstance(val, TruncatedSeries):
            val = val.remapped(context)
        base_coeffs[name] = val
    coeffs = dict(base_coeffs)
    forbidden = set()
    for block in blocks:
        active = [(slot, base_coeffs[n])
                  for slot, n in enumerate(block.dep_names)
                  if n in base_coeffs]
        for c in range(block.n_components):
            for alpha in block.alphas:
                if sum(alpha) >= block.level:
                    forbidden.add(block.name(c, alpha))
                    continue
                total = None
                for slot, a_v in active:
                    up = list(alpha)
                    up[slot] += 1
                    target = block.jet_series(c, tuple(up), context, order)
                    piece = target * a_v
                    total = piece if total is None else total + piece
                if total is not None:
                    coeffs[block.name(c, alpha)] = total
    return Derivation(context, coeffs, label=D.label + "^jet",
                      forbidden=frozenset(forbidden))
