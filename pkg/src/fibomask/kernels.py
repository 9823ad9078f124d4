"""Hot loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom pick one flavour according to
``fibomask._accel.HAVE_NUMBA`` (``FIBO_NO_NUMBA=1`` forces numpy). Integer
kernels are bit-identical across flavours; ``pair_dots`` agrees to rounding
(summation order differs).
"""
import math

import numpy as np

from . import _accel
from .prng import MASK64, SplitMix64

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_U64MAX = np.uint64(MASK64)


# ---------------------------------------------------------------- band masks


def _band_mask_loop(n_patches, offsets, diagonal, class_token):
    n = n_patches + 1
    out = np.zeros((n, n), dtype=np.bool_)
    start = 0 if class_token else 1
    for t in range(offsets.shape[0]):
        o = offsets[t]
        if o <= 0:
            continue
        for j in range(start, n - o):
            out[j, j + o] = True
            out[j + o, j] = True
    if diagonal:
        for j in range(1, n):
            out[j, j] = True
    if class_token:
        for j in range(n):
            out[0, j] = True
            out[j, 0] = True
    return out


def band_mask_numpy(n_patches, offsets, diagonal, class_token):
    n = n_patches + 1
    out = np.zeros((n, n), dtype=np.bool_)
    start = 0 if class_token else 1
    for o in np.asarray(offsets, dtype=np.int64):
        if o <= 0 or o >= n - start:
            continue
        j = np.arange(start, n - o)
        out[j, j + o] = True
        out[j + o, j] = True
    if diagonal:
        j = np.arange(1, n)
        out[j, j] = True
    if class_token:
        out[0, :] = True
        out[:, 0] = True
    return out


# ---------------------------------------------------------- gathered scores


def _pair_dots_loop(q, k, rows, cols, scale):
    m = rows.shape[0]
    d = q.shape[1]
    out = np.empty(m, dtype=np.float64)
    for t in range(m):
        r = rows[t]
        c = cols[t]
        acc = 0.0
        for p in range(d):
            acc += q[r, p] * k[c, p]
        out[t] = acc * scale
    return out


def pair_dots_numpy(q, k, rows, cols, scale):
    return np.einsum("ij,ij->i", q[rows], k[cols]) * scale


# -------------------------------------------------------- distinct sampling


def _sample_distinct_loop(n_items, k, seed):
    pool = np.arange(n_items, dtype=np.int64)
    state = np.uint64(seed)
    for i in range(k):
        span = np.uint64(n_items - i)
        # largest accepted draw: drop the incomplete top block of size 2^64 mod span
        limit = _U64MAX - ((np.uint64(0) - span) % span)
        while True:
            state = state + _GAMMA
            z = state
            z = (z ^ (z >> _S30)) * _MIX1
            z = (z ^ (z >> _S27)) * _MIX2
            z = z ^ (z >> _S31)
            if z <= limit:
                break
        j = i + np.int64(z % span)
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    return pool[:k].copy()


def sample_distinct_numpy(n_items, k, seed):
    pool = np.arange(n_items, dtype=np.int64)
    rng = SplitMix64(int(seed))
    for i in range(k):
        j = i + rng.below(n_items - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k].copy()


# ------------------------------------------------------ Wythoff membership


@_accel.njit
def _floor_phi(m):
    # isqrt is unavailable under numba: float estimate, then exact correction
    s = np.int64(math.sqrt(5.0 * m * m))
    t = 5 * m * m
    while s * s > t:
        s -= 1
    while (s + 1) * (s + 1) <= t:
        s += 1
    return (m + s) // 2


def _row_membership_loop(max_value, n_rows, modified):
    counts = np.zeros(max_value + 1, dtype=np.int64)
    stamp = np.zeros(max_value + 1, dtype=np.int64)
    for i in range(1, n_rows + 1):
        m = _floor_phi(np.int64(i))
        a = _floor_phi(m)
        b = a + m
        if modified:
            bm = b - a
            a = a - bm
            b = bm
        if a > max_value and b > max_value:
            continue
        x, y = a, b
        if 1 <= x <= max_value and stamp[x] != i:
            stamp[x] = i
            counts[x] += 1
        while y <= max_value:
            if y >= 1 and stamp[y] != i:
                stamp[y] = i
                counts[y] += 1
            x, y = y, x + y
    return counts


def row_membership_numpy(max_value, n_rows, modified):
    from .seqcore import modified_wythoff_pair, wythoff_pair

    counts = np.zeros(max_value + 1, dtype=np.int64)
    pair = modified_wythoff_pair if modified else wythoff_pair
    for i in range(1, n_rows + 1):
        a, b = pair(i)
        members = set()
        if a <= max_value:
            members.add(a)
        x, y = a, b
        while y <= max_value:
            members.add(y)
            x, y = y, x + y
        members.discard(0)
        if members:
            counts[np.fromiter(members, dtype=np.int64)] += 1
    return counts


# ----------------------------------------------------------- dispatch table

band_mask_numba = _accel.njit(_band_mask_loop)
pair_dots_numba = _accel.njit(_pair_dots_loop)
_sample_distinct_jit = _accel.njit(_sample_distinct_loop)


def sample_distinct_numba(n_items, k, seed):
    # seeds above 2^63 would otherwise be typed as int64 and rejected;
    # errstate only matters when the loop runs interpreted (FIBO_NO_NUMBA=1)
    with np.errstate(over="ignore"):
        return _sample_distinct_jit(n_items, k, np.uint64(int(seed) & MASK64))

row_membership_numba = _accel.njit(_row_membership_loop)

if _accel.HAVE_NUMBA:
    band_mask = band_mask_numba
    pair_dots = pair_dots_numba
    sample_distinct = sample_distinct_numba
    row_membership = row_membership_numba
else:
    band_mask = band_mask_numpy
    pair_dots = pair_dots_numpy
    sample_distinct = sample_distinct_numpy
    row_membership = row_membership_numpy
