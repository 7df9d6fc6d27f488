"""Exact linear algebra over the Gaussian rationals and their polynomials.

Two rank notions live here.  `numeric_rank` works on constant matrices.
`symbolic_rank` computes the rank of a matrix of (truncated) polynomial
entries over the fraction field of the polynomial ring, via fraction-free
Bareiss elimination with exact multivariate division; a seeded random
evaluation supplies a fast certified lower bound that the symbolic result
is checked against.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .gaussian import GaussianRational, ONE, ZERO
from .kernels import iadd_scaled, mul_terms
from .series import TruncatedSeries, SeriesMap, _grlex_key


def numeric_rank(matrix) -> int:
    """Rank of a matrix of GaussianRational entries (row reduction)."""
    rows = [list(r) for r in matrix]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = rows[rank][col].inverse()
        rows[rank] = [x * inv for x in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
        if rank == len(rows):
            break
    return rank


def rank_at_origin(F: SeriesMap) -> int:
    """Rank of the Jacobian of F evaluated at 0."""
    jac = [[c.derive(i).constant_term() for i in range(F.arity)]
           for c in F.components]
    return numeric_rank(jac)


def random_rational_point(arity: int, rng: random.Random):
    """Small random rationals, dense enough to avoid accidental collisions."""
    pts = []
    for _ in range(arity):
        num = rng.randint(-17, 17)
        den = rng.randint(1, 7)
        pts.append(GaussianRational(Fraction(num, den)))
    return pts


def _poly_divexact(f: dict, g: dict) -> dict:
    """Exact division of term dicts (any degrees); graded-lex reduction."""
    if not f:
        return {}
    if not g:
        raise ZeroDivisionError("polynomial division by zero")
    glead = max(g, key=_grlex_key)
    gc = g[glead]
    q: dict = {}
    rem = dict(f)
    while rem:
        flead = max(rem, key=_grlex_key)
        t = tuple(a - b for a, b in zip(flead, glead))
        if any(x < 0 for x in t):
            raise ArithmeticError("inexact polynomial division")
        coeff = rem[flead] / gc
        q[t] = coeff
        iadd_scaled(rem, mul_terms({t: coeff}, g, -1), -ONE)
    return q


def bareiss_rank(entries) -> int:
    """Fraction-free elimination on a matrix of term dicts; exact rank.

    Intermediate entries stay genuine minors of the input (the two-step
    division is always exact), so growth is bounded by the size of the
    actual minors.  The sparsest available pivot is chosen at each step and
    the matrix is oriented with the short side as rows.
    """
    m = [[dict(e) for e in row] for row in entries]
    if not m:
        return 0
    if len(m) > len(m[0]):
        m = [[m[r][c] for r in range(len(m))] for c in range(len(m[0]))]
    nrows, ncols = len(m), len(m[0])
    arity = None
    for row in m:
        for e in row:
            if e:
                arity = len(next(iter(e)))
                break
        if arity is not None:
            break
    if arity is None:
        return 0
    prev = {(0,) * arity: ONE}
    rank = 0
    for col in range(ncols):
        piv = None
        best = None
        for r in range(rank, nrows):
            if m[r][col]:
                size = len(m[r][col])
                if best is None or size < best:
                    best, piv = size, r
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pivot = m[rank][col]
        for r in range(rank + 1, nrows):
            head = m[r][col]
            for c in range(col, ncols):
                term = mul_terms(pivot, m[r][c], -1)
                if head:
                    iadd_scaled(term, mul_terms(head, m[rank][c], -1), -ONE)
                m[r][c] = _poly_divexact(term, prev) if term else {}
        prev = pivot
        rank += 1
        if rank == nrows:
            break
    return rank


def symbolic_rank(matrix, seed: int = 0) -> int:
    """Generic rank of a matrix of TruncatedSeries entries.

    The value is the rank over the fraction field of the polynomial ring of
    the stored truncations; it equals the true generic rank once the
    truncation order is past the degree where the rank stabilizes.
    """
    entries = [[e.terms if isinstance(e, TruncatedSeries) else dict(e)
                for e in row] for row in matrix]
    rank = bareiss_rank(entries)
    if matrix and matrix[0]:
        arity = (matrix[0][0].context.arity
                 if isinstance(matrix[0][0], TruncatedSeries) else None)
        if arity is not None:
            rng = random.Random(seed)
            point = random_rational_point(arity, rng)
            numeric = numeric_rank(
                [[e.evaluate(point) for e in row] for row in matrix])
            if numeric > rank:
                raise AssertionError(
                    "rank witness exceeds symbolic rank (%d > %d)"
                    % (numeric, rank))
    return rank


def generic_rank(F: SeriesMap, seed: int = 0) -> int:
    """Generic rank of the Jacobian of a series map (0 for the zero map)."""
    if all(c.is_zero() for c in F.components):
        return 0
    return symbolic_rank(F.jacobian(), seed=seed)


def solve_constant_system(matrix, rhs):
    """Solve a square exact linear system; raises ZeroDivisionError if singular."""
    n = len(matrix)
    a = [list(matrix[i]) + [rhs[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        a[col], a[piv] = a[piv], a[col]
        inv = a[col][col].inverse()
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def kernel_basis(matrix):
    """Basis of the right kernel of a GaussianRational matrix.

    Returns a list of vectors (lists); empty list for a trivial kernel.
    """
    if not matrix:
        return []
    nrows, ncols = len(matrix), len(matrix[0])
    a = [list(r) for r in matrix]
    pivots = []
    rank = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, nrows) if a[r][col]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = a[rank][col].inverse()
        a[rank] = [x * inv for x in a[rank]]
        for r in range(nrows):
            if r != rank and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[rank])]
        pivots.append(col)
        rank += 1
        if rank == nrows:
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [ZERO] * ncols
        v[fc] = ONE
        for r, pc in enumerate(pivots):
            v[pc] = -a[r][fc]
        basis.append(v)
    return basis
