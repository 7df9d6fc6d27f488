"""Segre varieties: multiflows, chains, minimality, jets.

Chains are kept as maps (never as point sets): the k-th chain is the
alternating composition of the two CR multiflows starting from the origin,
a series map in the mk multitime variables.  Minimality is decided through
the generic rank of the chains; the classical bound says the type is at
most d+1, so a chain budget of d+2 already decides the question at the
working truncation order.
"""

from __future__ import annotations

import random
from math import comb

from .context import VariableContext, multidegrees
from .gaussian import ONE, ZERO
from .linalg import generic_rank, numeric_rank, random_rational_point
from .manifold import GraphedManifold, ManifoldError
from .series import (SeriesMap, TruncatedSeries, SeriesError,
                     factorial_multi)


def chain_time_names(m: int, k: int):
    return tuple("z%d_%d" % (j, i) for j in range(1, k + 1)
                 for i in range(1, m + 1))


def origin_point(M: GraphedManifold, context: VariableContext, order=None):
    order = order if order is not None else M.order
    zero = TruncatedSeries.zero(context, order)
    return [zero] * (2 * M.n)


def _split_point(M, p):
    m, d = M.m, M.d
    return p[:m], p[m:m + d], p[m + d:2 * m + d], p[2 * m + d:]


def check_on_manifold(M: GraphedManifold, p):
    """Exact membership check: xi components equal theta(zeta, t)."""
    z, w, zeta, xi = _split_point(M, p)
    for j in range(M.d):
        expected = M.theta[j].compose(list(zeta) + list(z) + list(w))
        if expected != xi[j].truncated(expected.order):
            raise ManifoldError("flow base point is off the manifold")


def flow(M: GraphedManifold, field: str, p, time):
    """Multiflow of one of the four tangent families through p.

    `field` is one of 'L', 'Lbar', 'Ups', 'UpsBar'; `time` has m series for
    the CR flows and d for the transversal ones.  The image stays on the
    manifold and time 0 is the identity.
    """
    p = list(p)
    check_on_manifold(M, p)
    z, w, zeta, xi = _split_point(M, p)
    time = list(time)
    if field in ("L", "Lbar"):
        if len(time) != M.m:
            raise ValueError("CR flows take m time components")
    elif field in ("Ups", "UpsBar"):
        if len(time) != M.d:
            raise ValueError("transversal flows take d time components")
    else:
        raise ValueError("unknown field %r" % field)
    if field == "L":
        nz = [a + b for a, b in zip(z, time)]
        nw = [M.theta_bar[j].compose(nz + list(zeta) + list(xi))
              for j in range(M.d)]
        return nz + nw + list(zeta) + list(xi)
    if field == "Lbar":
        nzeta = [a + b for a, b in zip(zeta, time)]
        nxi = [M.theta[j].compose(nzeta + list(z) + list(w))
               for j in range(M.d)]
        return list(z) + list(w) + nzeta + nxi
    if field == "Ups":
        nw = [a + b for a, b in zip(w, time)]
        nxi = [M.theta[j].compose(list(zeta) + list(z) + nw)
               for j in range(M.d)]
        return list(z) + nw + list(zeta) + nxi
    nxi = [a + b for a, b in zip(xi, time)]
    nw = [M.theta_bar[j].compose(list(z) + list(zeta) + nxi)
          for j in range(M.d)]
    return list(z) + nw + list(zeta) + nxi


class SegreChain:
    """The k-th (conjugate) Segre chain as a map of the multitimes."""

    __slots__ = ("M", "k", "start_side", "components", "context", "order")

    def __init__(self, M, k, start_side, components):
        self.M = M
        self.k = k
        self.start_side = start_side
        self.components = components
        self.context = components.context
        self.order = components.order

    @property
    def t_components(self):
        return SeriesMap(self.components.components[:self.M.n])

    @property
    def tau_components(self):
        return SeriesMap(self.components.components[self.M.n:])

    def on_manifold_defect(self):
        """Valuation of the worst xi - theta residual; None when exact."""
        m, d = self.M.m, self.M.d
        comps = self.components.components
        z, w = comps[:m], comps[m:m + d]
        zeta, xi = comps[m + d:2 * m + d], comps[2 * m + d:]
        worst = None
        for j in range(d):
            res = self.M.theta[j].compose(list(zeta) + list(z) + list(w)) \
                - xi[j].truncated(self.order)
            if res:
                v = res.valuation()
                worst = v if worst is None else min(worst, v)
        return worst

    def restricted_to_shorter(self, k2: int) -> "SegreChain":
        """Set the trailing time blocks to zero: the length-k2 prefix chain."""
        if k2 > self.k:
            raise ValueError("cannot extend a chain by restriction")
        m = self.M.m
        sub = VariableContext(chain_time_names(m, k2))
        zero = TruncatedSeries.zero(sub, self.order)
        args = []
        for name in self.context.names:
            step = int(name.split("_")[0][1:])
            if step <= k2:
                args.append(TruncatedSeries.variable(sub, self.order, name))
            else:
                args.append(zero)
        return SegreChain(self.M, k2, self.start_side,
                          self.components.compose(args))

    def __repr__(self):
        return "SegreChain(k=%d, %s, order=%d)" % (
            self.k, self.start_side, self.order)


DEFAULT_CHAIN_BUDGET = 5_000_000


def chain(M: GraphedManifold, k: int, start_side: str = "barred",
          budget: int = DEFAULT_CHAIN_BUDGET) -> SegreChain:
    """Alternating flow composition from the origin (Gamma or conjugate).

    Cost grows combinatorially in k*m and the order; `budget` caps the
    number of potential monomials of one chain component.
    """
    if k < 1:
        raise ValueError("chain length must be >= 1")
    if start_side not in ("barred", "unbarred"):
        raise ValueError("start_side must be 'barred' or 'unbarred'")
    from .context import count_multidegrees
    if count_multidegrees(M.m * k, M.order) > budget:
        raise SeriesError(
            "chain budget exceeded: %d time variables at order %d"
            % (M.m * k, M.order))
    ctx = VariableContext(chain_time_names(M.m, k))
    p = origin_point(M, ctx)
    for j in range(1, k + 1):
        time = [TruncatedSeries.variable(ctx, M.order, "z%d_%d" % (j, i))
                for i in range(1, M.m + 1)]
        first_barred = (start_side == "barred")
        barred_step = (j % 2 == 1) == first_barred
        p = flow(M, "Lbar" if barred_step else "L", p, time)
    return SegreChain(M, k, start_side, SeriesMap(p))


def conjugate_chain_symmetry_defect(M, k):
    """sigma-bar symmetry: conj(Gamma_k) with swapped blocks == conjugate
    chain.  Returns None when the identity holds exactly."""
    g = chain(M, k, "unbarred")
    gb = chain(M, k, "barred")
    n = M.n
    swapped = list(g.components.components[n:]) + list(g.components.components[:n])
    for a, b in zip(swapped, gb.components.components):
        if a.conjugate() != b:
            return (a, b)
    return None


class MinimalityReport:
    __slots__ = ("minimal", "nu0", "ranks", "mu0_witness", "kmax", "order",
                 "conclusive")

    def __init__(self, minimal, nu0, ranks, mu0_witness, kmax, order,
                 conclusive):
        self.minimal = minimal
        self.nu0 = nu0
        self.ranks = ranks
        self.mu0_witness = mu0_witness
        self.kmax = kmax
        self.order = order
        self.conclusive = conclusive

    def __repr__(self):
        return ("MinimalityReport(minimal=%s, nu0=%s, ranks=%s, "
                "witness=%s, kmax=%d, order=%d)" % (
                    self.minimal, self.nu0, self.ranks,
                    self.mu0_witness is not None, self.kmax, self.order))


def minimality(M: GraphedManifold, kmax=None, seed: int = 0) -> MinimalityReport:
    """Decide minimality through chain generic ranks (at truncation order).

    nu0 is the smallest nu with generic rank 2m+d for the chains of length
    nu+1 of both parities; since the type never exceeds d+1, the default
    budget 2(d+1)+1 settles the question and leaves room for the witness
    search on the chain of length 2 nu0 + 1.
    """
    if kmax is None:
        kmax = 2 * (M.d + 1) + 1
    if kmax < 2:
        raise ValueError("kmax must be at least 2")
    full = 2 * M.m + M.d
    ranks = {}
    chains_b = {}
    nu0 = None
    for k in range(1, kmax + 1):
        gb = chain(M, k, "barred")
        gu = chain(M, k, "unbarred")
        chains_b[k] = gb
        rb = generic_rank(gb.components, seed=seed)
        ru = generic_rank(gu.components, seed=seed)
        ranks[k] = (rb, ru)
        if nu0 is None and rb == full and ru == full:
            nu0 = k - 1
        if nu0 is not None and k >= 2 * nu0 + 1:
            break
    minimal = nu0 is not None
    conclusive = minimal or kmax >= M.d + 2
    witness = None
    if minimal:
        mu0 = 2 * nu0 + 1
        if mu0 <= max(chains_b):
            witness = _zero_fiber_witness(M, chains_b[mu0], nu0, seed)
    return MinimalityReport(minimal, nu0, ranks, witness, kmax, M.order,
                            conclusive)


def _zero_fiber_witness(M, gamma, nu0, seed, attempts=8):
    """Sample mirrored multitimes (a_1..a_nu, 0, -a_nu..-a_1): they retrace
    the flows, so they always land in the zero fiber; test full Jacobian
    rank there at seeded random rational parameters."""
    rng = random.Random(seed)
    m = M.m
    jac = gamma.components.jacobian()
    for _ in range(attempts):
        a = random_rational_point(m * nu0, rng)
        point = list(a)
        point += [ZERO] * m
        for j in range(nu0 - 1, -1, -1):
            point += [-x for x in a[j * m:(j + 1) * m]]
        values = gamma.components.evaluate(point)
        if any(values):
            raise AssertionError("mirrored multitime left the zero fiber")
        rank = numeric_rank([[e.evaluate(point) for e in row] for row in jac])
        if rank == 2 * M.m + M.d:
            return point
    return None


class JetMapData:
    """The order-k jet map of the conjugate Segre varieties.

    Components over (zeta', z', w'): first the m' plain zeta' variables,
    then (1/beta'!) d^beta'/d zeta'^beta' theta'_j for every j and every
    |beta'| <= k, with beta' in canonical graded order inside each j.
    """

    __slots__ = ("M", "k", "components", "betas")

    def __init__(self, M, k, components, betas):
        self.M = M
        self.k = k
        self.components = components
        self.betas = betas

    def jet_block(self):
        """The components past the plain zeta' prefix."""
        return SeriesMap(self.components.components[self.M.m:])

    def project(self, k2: int) -> "JetMapData":
        """Drop jet entries of order above k2 (projection compatibility)."""
        if k2 > self.k:
            raise ValueError("cannot project upward")
        keep = [c for c in self.components.components[:self.M.m]]
        idx = self.M.m
        for _ in range(self.M.d):
            for beta in self.betas:
                if sum(beta) <= k2:
                    keep.append(self.components.components[idx])
                idx += 1
        betas = [b for b in self.betas if sum(b) <= k2]
        return JetMapData(self.M, k2, SeriesMap(keep), betas)

    def __repr__(self):
        return "JetMapData(k=%d, %d components)" % (
            self.k, len(self.components.components))


def segre_jet_map(M: GraphedManifold, k: int) -> JetMapData:
    """phi'_k: (zeta, t) -> (zeta, normalized zeta-jets of theta)."""
    if k > M.order:
        raise SeriesError("jet order exceeds the truncation order")
    out_order = M.order - k
    ctx = M.ctx_theta
    comps = [TruncatedSeries.variable(ctx, out_order, n) for n in M.names.zeta]
    betas = list(multidegrees(M.m, k))
    for j in range(M.d):
        for beta in betas:
            exp = tuple(beta) + (0,) * M.n
            df = M.theta[j].derive_multi(exp)
            scale = ONE / factorial_multi(beta)
            comps.append((df * scale).truncated(out_order))
    expected = M.m + M.d * comb(M.m + k, k)
    assert len(comps) == expected
    return JetMapData(M, k, SeriesMap(comps), betas)
