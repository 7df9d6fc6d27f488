#!/usr/bin/env python3
"""Benchmark the compiled series kernels against the pure-Python fallback.

Times the two hot operations (truncated multiplication and scaled
accumulation) on dense random series of a few representative shapes, plus
one end-to-end composition through the public API under each backend.

Run:  python benchmarks/bench_kernels.py
"""

import random
import time
from fractions import Fraction

from crreflect import _kernels_py
from crreflect.context import VariableContext, multidegrees
from crreflect.gaussian import GaussianRational
from crreflect.series import TruncatedSeries

try:
    from crreflect import _kernels
except ImportError:
    _kernels = None


def dense_terms(arity, order, rng, density=1.0):
    terms = {}
    for e in multidegrees(arity, order):
        if rng.random() > density:
            continue
        c = GaussianRational(Fraction(rng.randint(-99, 99), rng.randint(1, 12)),
                             Fraction(rng.randint(-99, 99), rng.randint(1, 12)))
        if c:
            terms[e] = c
    return terms


def time_op(fn, repeat=3):
    best = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        best = dt if best is None or dt < best else best
    return best, out


def bench_mul(backend, A, B, order):
    return time_op(lambda: backend.mul_terms(A, B, order))


def bench_accumulate(backend, A, coeff, repeat=200):
    def job():
        out = {}
        for _ in range(repeat):
            backend.iadd_scaled(out, A, coeff)
        return out
    return time_op(job)


def bench_compose(order, arity, rng):
    ctx = VariableContext(tuple("x%d" % i for i in range(arity)))
    f = TruncatedSeries(ctx, order, dense_terms(arity, order, rng))
    args = []
    for i in range(arity):
        terms = dense_terms(arity, order, rng, density=0.5)
        terms.pop((0,) * arity, None)
        args.append(TruncatedSeries(ctx, order, terms))
    return time_op(lambda: f.compose(args), repeat=2)


def main():
    rng = random.Random(20240)
    shapes = [(2, 10), (4, 8), (6, 6)]
    print("kernel backends: pure python%s"
          % (", cython" if _kernels else " (extension not built)"))
    print()
    print("%-28s %12s %12s %8s" % ("operation", "python", "cython", "speedup"))
    for arity, order in shapes:
        A = dense_terms(arity, order, rng)
        B = dense_terms(arity, order, rng)
        t_py, out_py = bench_mul(_kernels_py, A, B, order)
        label = "mul  %d vars, order %d" % (arity, order)
        if _kernels:
            t_cy, out_cy = bench_mul(_kernels, A, B, order)
            assert out_py == out_cy, "backends disagree"
            print("%-28s %10.1f ms %10.1f ms %7.1fx"
                  % (label, t_py * 1e3, t_cy * 1e3, t_py / t_cy))
        else:
            print("%-28s %10.1f ms %12s" % (label, t_py * 1e3, "-"))
    A = dense_terms(4, 8, rng)
    coeff = GaussianRational(Fraction(3, 7), Fraction(-2, 5))
    t_py, out_py = bench_accumulate(_kernels_py, A, coeff)
    if _kernels:
        t_cy, out_cy = bench_accumulate(_kernels, A, coeff)
        assert out_py == out_cy
        print("%-28s %10.1f ms %10.1f ms %7.1fx"
              % ("iadd_scaled 4 vars x200", t_py * 1e3, t_cy * 1e3,
                 t_py / t_cy))
    else:
        print("%-28s %10.1f ms %12s"
              % ("iadd_scaled 4 vars x200", t_py * 1e3, "-"))

    # End-to-end composition under the selected backend (whichever is live).
    t, _ = bench_compose(6, 3, rng)
    from crreflect.kernels import BACKEND
    print()
    print("compose 3 vars, order 6 under selected backend (%s): %.1f ms"
          % (BACKEND, t * 1e3))


if __name__ == "__main__":
    main()
