"""Independent brute-force references used by the tests.

Nothing here imports the kernels or the mask materialization code.
"""
import math
from fractions import Fraction

import numpy as np


def fib_list(a, b, count):
    seq = [a, b]
    while len(seq) < count:
        seq.append(seq[-1] + seq[-2])
    return seq[:count]


def floor_phi_bisect(m):
    """floor(m * phi) by exact rational bisection on phi = (1 + sqrt5)/2."""
    # x <= m*phi  <=>  2x - m <= m*sqrt5  <=>  (2x - m < 0) or (2x - m)^2 <= 5 m^2
    lo, hi = 0, 2 * m + 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        t = 2 * mid - m
        if t < 0 or t * t <= 5 * m * m:
            lo = mid
        else:
            hi = mid
    return lo


def wythoff_pair_bisect(i):
    m = floor_phi_bisect(i)
    a = floor_phi_bisect(m)
    # floor(m phi^2) with phi^2 = (3 + sqrt5)/2: same bisection on 2x - 3m <= m sqrt5
    lo, hi = 0, 3 * m + 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        t = 2 * mid - 3 * m
        if t < 0 or t * t <= 5 * m * m:
            lo = mid
        else:
            hi = mid
    return a, lo


def brute_pairs(n, offsets, diagonal=False):
    """Set of 1-based patch pairs (j, k) with |j-k| in offsets (plus j == k if diagonal)."""
    allowed = set(offsets)
    out = set()
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            d = abs(j - k)
            if d in allowed or (diagonal and d == 0):
                out.add((j, k))
    return out


def brute_dense(n, offsets, diagonal=False, class_token=True, extra=()):
    m = np.zeros((n + 1, n + 1), dtype=bool)
    for j, k in brute_pairs(n, offsets, diagonal):
        m[j, k] = True
    for j, k in extra:
        m[j, k] = True
    if class_token:
        m[0, :] = True
        m[:, 0] = True
    return m


def softmax_blocked(s, admissible, fill=-1e30):
    z = np.where(admissible, s, fill)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def central_difference(f, x, step=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + step
        fp = f(x)
        x[idx] = old - step
        fm = f(x)
        x[idx] = old
        g[idx] = (fp - fm) / (2 * step)
    return g


def exact_ratio_percent(kept, n):
    return float(Fraction(n * n - kept, n * n) * 100)


def head_bound_direct(a, b, w, n):
    phi = (1 + math.sqrt(5)) / 2
    psi = (1 - math.sqrt(5)) / 2
    return 2 * n * ((math.log(math.sqrt(5) * w + abs(a * phi - b)) - math.log(b - a * psi)) / math.log(phi) + 1)
