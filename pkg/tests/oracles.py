"""Independent reference computations used by the tests.

Nothing here calls into the closed-form machinery of ``bfr``: counts come
from brute force over integer sequences and set partitions, integrals from
adaptive quadrature on the raw integrand.
"""
import itertools
import math

import numpy as np
from scipy import integrate


def catalan(m: int) -> int:
    return math.comb(2 * m, m) // (m + 1)


def bell(m: int) -> int:
    row = [1]
    for _ in range(m):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def brute_paths(m: int):
    """All integer sequences with S_0=0, S_m=m, S_j <= min(j, S_{j+1})."""
    out = []
    for mid in itertools.product(range(m + 1), repeat=max(m - 1, 0)):
        s = (0,) + mid + (m,) if m > 0 else (0,)
        if all(s[j] <= min(j, s[j + 1]) for j in range(1, m)):
            out.append(s)
    return out


def brute_partitions(m: int):
    """All set partitions of {1..m} as lists of sorted tuples."""
    if m == 0:
        yield []
        return
    items = list(range(1, m + 1))

    def rec(rest):
        if not rest:
            yield []
            return
        first, tail = rest[0], rest[1:]
        for r in range(len(tail) + 1):
            for comb in itertools.combinations(tail, r):
                left = [x for x in tail if x not in comb]
                for p in rec(left):
                    yield [tuple(sorted((first,) + comb))] + p

    yield from rec(items)


def path_from_cells(cells, m: int):
    """S_j = number of indices in cells whose maximum is <= j."""
    s = [0] * (m + 1)
    for c in cells:
        for j in range(max(c), m + 1):
            s[j] += len(c)
    return tuple(s)


def card_bruteforce(path):
    m = len(path) - 1
    return sum(1 for p in brute_partitions(m) if path_from_cells(p, m) == tuple(path))


def g_function(knots, left, right):
    """Plain-Python piecewise-linear evaluator (zero outside the knots)."""
    knots = list(knots)

    def g(y):
        for i in range(len(knots) - 1):
            a, b = knots[i], knots[i + 1]
            if a <= y < b or (i == len(knots) - 2 and y == b):
                return left[i] + (right[i] - left[i]) * (y - a) / (b - a)
        return 0.0

    return g


def quad_kappa_integral(ell, a, b, g, tau, points=None):
    """int_a^b Gamma(ell) (1+g(y))^-ell / (4 tau) dy by adaptive quadrature."""
    f = lambda y: math.gamma(ell) * (1.0 + g(y)) ** (-ell) / (4.0 * tau)
    pts = None if points is None else [p for p in points if a < p < b]
    val, _ = integrate.quad(f, a, b, points=pts, epsabs=0, epsrel=1e-13, limit=500)
    return val


def quad_neg_log_laplace(g, tau, points=None):
    f = lambda y: math.log1p(g(y)) / (4.0 * tau)
    pts = None if points is None else [p for p in points if -2 * tau < p < 2 * tau]
    val, _ = integrate.quad(f, -2 * tau, 2 * tau, points=pts, epsabs=0, epsrel=1e-13, limit=500)
    return val


def quad_kappa(ell, g):
    """int_0^inf x^(ell-1) e^{-(1+g) x} dx, the gamma-process tilted moment."""
    val, _ = integrate.quad(lambda x: x ** (ell - 1) * math.exp(-(1.0 + g) * x), 0, np.inf, epsabs=0, epsrel=1e-13)
    return val


def ttt_integral(times, a, b, weights=None):
    """int_a^b sum_i w_i I(T_i >= t) dt by summing exact overlaps."""
    w = np.ones(len(times)) if weights is None else np.asarray(weights)
    return float(sum(wi * max(0.0, min(b, ti) - a) for ti, wi in zip(times, w)))
