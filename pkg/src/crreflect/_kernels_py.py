"""Pure-Python reference implementation of the hot series kernels.

`series` imports these through `kernels`, which prefers the compiled
Cython twin (`_kernels`) when it is available.  Both implementations must
produce identical term dictionaries: keys are exponent tuples, values are
nonzero :class:`~crreflect.gaussian.GaussianRational` coefficients.
"""

from __future__ import annotations

BACKEND = "python"


def mul_terms(A: dict, B: dict, order: int) -> dict:
    """Truncated product of two term dicts (total degree <= order).

    A negative order disables truncation (used by the symbolic rank code,
    where entries are honest polynomials).
    """
    if not A or not B:
        return {}
    out: dict = {}
    if order >= 0:
        buckets: dict = {}
        for eb, cb in B.items():
            buckets.setdefault(sum(eb), []).append((eb, cb))
        degs = sorted(buckets)
        for ea, ca in A.items():
            room = order - sum(ea)
            if room < 0:
                continue
            for db in degs:
                if db > room:
                    break
                for eb, cb in buckets[db]:
                    e = tuple(map(sum, zip(ea, eb)))
                    c = ca * cb
                    acc = out.get(e)
                    out[e] = c if acc is None else acc + c
    else:
        for ea, ca in A.items():
            for eb, cb in B.items():
                e = tuple(map(sum, zip(ea, eb)))
                c = ca * cb
                acc = out.get(e)
                out[e] = c if acc is None else acc + c
    return {e: c for e, c in out.items() if c}


def iadd_scaled(out: dict, A: dict, coeff) -> None:
    """In-place `out += coeff * A`; zero entries are removed."""
    if not coeff or not A:
        return
    for e, c in A.items():
        acc = out.get(e)
        v = coeff * c if acc is None else acc + coeff * c
        if v:
            out[e] = v
        elif acc is not None:
            del out[e]
