# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of `_kernels_py`.

Same contract, same results, just faster: the complex-rational arithmetic
is inlined on the (a + b*i)/c integer triples of GaussianRational, with a
single gcd normalization per produced coefficient.
"""

import math

from cpython.ref cimport Py_INCREF
from cpython.tuple cimport PyTuple_New, PyTuple_SET_ITEM

from .gaussian import GaussianRational

BACKEND = "cython"

cdef object _gcd = math.gcd
cdef object _GR = GaussianRational


cdef inline object _mk(object a, object b, object c):
    """Normalize a triple and wrap it; c is always positive here."""
    cdef object g = _gcd(_gcd(a, b), c)
    if g != 1:
        a = a // g
        b = b // g
        c = c // g
    obj = _GR.__new__(_GR)
    obj.a = a
    obj.b = b
    obj.c = c
    return obj


cdef inline long _deg(tuple e):
    cdef long s = 0
    cdef Py_ssize_t i
    for i in range(len(e)):
        s += <long> e[i]
    return s


cdef inline tuple _eadd(tuple ea, tuple eb):
    cdef Py_ssize_t i, n = len(ea)
    cdef tuple out = PyTuple_New(n)
    cdef object v
    for i in range(n):
        v = (<object> ea[i]) + (<object> eb[i])
        Py_INCREF(v)
        PyTuple_SET_ITEM(out, i, v)
    return out


def mul_terms(dict A, dict B, long order):
    """Truncated product of two term dicts (total degree <= order).

    A negative order disables truncation.
    """
    if not A or not B:
        return {}
    cdef dict out = {}
    cdef dict buckets
    cdef list degs, items
    cdef tuple ea, eb, e, pair
    cdef object ca, cb, acc, db_obj
    cdef object a1, b1, c1, a2, b2, c2, ra, rb, rc
    cdef long room, db
    cdef Py_ssize_t j
    if order >= 0:
        buckets = {}
        for eb, cb in B.items():
            db_obj = _deg(eb)
            items = <list> buckets.get(db_obj)
            if items is None:
                buckets[db_obj] = [(eb, cb)]
            else:
                items.append((eb, cb))
        degs = sorted(buckets)
        for ea, ca in A.items():
            room = order - _deg(ea)
            if room < 0:
                continue
            a1 = ca.a
            b1 = ca.b
            c1 = ca.c
            for db_obj in degs:
                db = <long> db_obj
                if db > room:
                    break
                items = <list> buckets[db_obj]
                for j in range(len(items)):
                    pair = <tuple> items[j]
                    eb = <tuple> pair[0]
                    cb = pair[1]
                    a2 = cb.a
                    b2 = cb.b
                    c2 = cb.c
                    ra = a1 * a2 - b1 * b2
                    rb = a1 * b2 + b1 * a2
                    rc = c1 * c2
                    e = _eadd(ea, eb)
                    acc = out.get(e)
                    if acc is None:
                        out[e] = _mk(ra, rb, rc)
                    else:
                        out[e] = _mk(acc.a * rc + ra * acc.c,
                                     acc.b * rc + rb * acc.c,
                                     acc.c * rc)
    else:
        for ea, ca in A.items():
            a1 = ca.a
            b1 = ca.b
            c1 = ca.c
            for eb, cb in B.items():
                a2 = cb.a
                b2 = cb.b
                c2 = cb.c
                ra = a1 * a2 - b1 * b2
                rb = a1 * b2 + b1 * a2
                rc = c1 * c2
                e = _eadd(ea, eb)
                acc = out.get(e)
                if acc is None:
                    out[e] = _mk(ra, rb, rc)
                else:
                    out[e] = _mk(acc.a * rc + ra * acc.c,
                                 acc.b * rc + rb * acc.c,
                                 acc.c * rc)
    return {e: c for e, c in out.items() if c}


def iadd_scaled(dict out, dict A, coeff):
    """In-place `out += coeff * A`; zero entries are removed."""
    if not coeff or not A:
        return
    cdef object a1 = coeff.a, b1 = coeff.b, c1 = coeff.c
    cdef tuple e
    cdef object c, acc, ra, rb, rc, v
    for e, c in A.items():
        ra = a1 * c.a - b1 * c.b
        rb = a1 * c.b + b1 * c.a
        rc = c1 * c.c
        acc = out.get(e)
        if acc is None:
            out[e] = _mk(ra, rb, rc)
        else:
            v = _mk(acc.a * rc + ra * acc.c,
                    acc.b * rc + rb * acc.c,
                    acc.c * rc)
            if v.a != 0 or v.b != 0:
                out[e] = v
            else:
                del out[e]
