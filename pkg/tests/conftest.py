"""Shared fixtures: model manifolds and seeded random data generators."""

import random
from fractions import Fraction

import pytest

from crreflect.context import VariableContext, multidegrees
from crreflect.gaussian import GaussianRational, I
from crreflect.manifold import RealDefiningSystem, complexify_and_graph
from crreflect.series import SeriesMap, TruncatedSeries


def make_heisenberg(order=8, primed=False):
    """w = conj(w) + i z conj(z) in C^2."""
    ctx = VariableContext(("t1", "t2", "tau1", "tau2"))
    t1 = TruncatedSeries.variable(ctx, order, "t1")
    t2 = TruncatedSeries.variable(ctx, order, "t2")
    s1 = TruncatedSeries.variable(ctx, order, "tau1")
    s2 = TruncatedSeries.variable(ctx, order, "tau2")
    system = RealDefiningSystem(2, 1, SeriesMap([t2 - s2 - I * t1 * s1]))
    return complexify_and_graph(system, primed=primed)


def make_sphere3(order=8, primed=False):
    """w = conj(w) + i (z1 conj(z1) + z2 conj(z2)) in C^3."""
    ctx = VariableContext(("t1", "t2", "t3", "tau1", "tau2", "tau3"))
    v = {n: TruncatedSeries.variable(ctx, order, n) for n in ctx.names}
    rho = v["t3"] - v["tau3"] - I * (v["t1"] * v["tau1"]
                                     + v["t2"] * v["tau2"])
    system = RealDefiningSystem(3, 1, SeriesMap([rho]))
    return complexify_and_graph(system, primed=primed)


def make_ex121(order=8, primed=True):
    """The degenerate hypersurface w = conj(w) + i z1 conj(z1) in C^3."""
    ctx = VariableContext(("t1", "t2", "t3", "tau1", "tau2", "tau3"))
    v = {n: TruncatedSeries.variable(ctx, order, n) for n in ctx.names}
    rho = v["t3"] - v["tau3"] - I * v["t1"] * v["tau1"]
    system = RealDefiningSystem(3, 1, SeriesMap([rho]))
    return complexify_and_graph(system, primed=primed)


def make_flat(order=8, m=1, d=1, primed=False):
    n = m + d
    ctx = VariableContext(tuple("t%d" % i for i in range(1, n + 1))
                          + tuple("tau%d" % i for i in range(1, n + 1)))
    comps = []
    for j in range(d):
        wj = TruncatedSeries.variable(ctx, order, "t%d" % (m + j + 1))
        xij = TruncatedSeries.variable(ctx, order, "tau%d" % (m + j + 1))
        comps.append(wj - xij)
    return complexify_and_graph(RealDefiningSystem(n, d, SeriesMap(comps)),
                                primed=primed)


def make_z2zb2(order=8, primed=False):
    """w = conj(w) + i z^2 conj(z)^2: minimal but Levi-degenerate at 0."""
    ctx = VariableContext(("t1", "t2", "tau1", "tau2"))
    t1 = TruncatedSeries.variable(ctx, order, "t1")
    t2 = TruncatedSeries.variable(ctx, order, "t2")
    s1 = TruncatedSeries.variable(ctx, order, "tau1")
    s2 = TruncatedSeries.variable(ctx, order, "tau2")
    system = RealDefiningSystem(
        2, 1, SeriesMap([t2 - s2 - I * t1 * t1 * s1 * s1]))
    return complexify_and_graph(system, primed=primed)


def random_coeff(rng, small=False):
    span = 3 if small else 9
    return GaussianRational(Fraction(rng.randint(-span, span),
                                     rng.randint(1, 4)),
                            Fraction(rng.randint(-span, span),
                                     rng.randint(1, 4)))


def random_series(ctx, order, rng, degree=None, min_degree=0, density=0.6):
    degree = order if degree is None else degree
    terms = {}
    for e in multidegrees(ctx.arity, degree):
        if sum(e) < min_degree:
            continue
        if rng.random() > density:
            continue
        c = random_coeff(rng, small=True)
        if c:
            terms[e] = c
    return TruncatedSeries(ctx, order, terms)


def random_real_system(seed, m, d, order, degree=3):
    """A seeded random real defining system, generic at 0 by construction.

    The linear part is i(w_j - xi_j); random degree>=2 terms are added and
    symmetrized so reality holds exactly.
    """
    rng = random.Random(seed)
    n = m + d
    ctx = VariableContext(tuple("t%d" % i for i in range(1, n + 1))
                          + tuple("tau%d" % i for i in range(1, n + 1)))
    comps = []
    for j in range(d):
        wj = TruncatedSeries.variable(ctx, order, "t%d" % (m + j + 1))
        xij = TruncatedSeries.variable(ctx, order, "tau%d" % (m + j + 1))
        noise = random_series(ctx, order, rng, degree=degree, min_degree=2,
                              density=0.35)
        comps.append((wj - xij) * I + noise)
    return RealDefiningSystem.symmetrize(n, d, SeriesMap(comps))


def sparse_noise(ctx, order, rng, n_terms=2, degree=3):
    """A handful of random terms of degree 2..degree."""
    terms = {}
    pool = [e for e in multidegrees(ctx.arity, degree) if 2 <= sum(e)]
    for _ in range(n_terms):
        e = pool[rng.randrange(len(pool))]
        c = random_coeff(rng, small=True)
        if c:
            terms[e] = terms.get(e, c * 0) + c
    return TruncatedSeries(ctx, order, terms)


def random_minimal_manifold(seed, order=6):
    """Seeded random minimal manifold; the Levi term guarantees minimality
    (the type is then decided by chains of length at most d+1)."""
    rng = random.Random(seed)
    dims = [(1, 1), (2, 1), (1, 2)][seed % 3]
    m, d = dims
    n = m + d
    ctx = VariableContext(tuple("t%d" % i for i in range(1, n + 1))
                          + tuple("tau%d" % i for i in range(1, n + 1)))
    comps = []
    for j in range(d):
        wj = TruncatedSeries.variable(ctx, order, "t%d" % (m + j + 1))
        xij = TruncatedSeries.variable(ctx, order, "tau%d" % (m + j + 1))
        levi = TruncatedSeries.zero(ctx, order)
        for k in range(m):
            zk = TruncatedSeries.variable(ctx, order, "t%d" % (k + 1))
            zetak = TruncatedSeries.variable(ctx, order, "tau%d" % (k + 1))
            levi = levi + zk * zetak
        noise = sparse_noise(ctx, order, rng, n_terms=2, degree=3)
        comps.append((wj - xij) * I - levi + noise)
    system = RealDefiningSystem.symmetrize(n, d, SeriesMap(comps))
    return complexify_and_graph(system)


ACCEPTANCE_LINES = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    _ACCEPTANCE_OUTCOMES[report.nodeid] = report.outcome


_ACCEPTANCE_OUTCOMES = {}


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, outside capture."""
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for nodeid in sorted(_ACCEPTANCE_OUTCOMES):
        name = nodeid.split("::")[-1]
        number = int(name.split("_")[2])
        outcome = _ACCEPTANCE_OUTCOMES[nodeid]
        detail = ACCEPTANCE_LINES.get(number, "")
        terminalreporter.write_line(
            "  criterion %2d: %s  %s"
            % (number, "PASS" if outcome == "passed" else outcome.upper(),
               detail))


@pytest.fixture(scope="session")
def heisenberg():
    return make_heisenberg()


@pytest.fixture(scope="session")
def heisenberg_target():
    return make_heisenberg(primed=True)
