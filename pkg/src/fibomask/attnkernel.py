"""Reference multi-head self-attention over a token matrix with per-head masks.

Scores are only evaluated on admissible pairs; every other entry carries the
``BLOCKED`` sentinel and gets probability zero. ``dense_block_forward`` is the
plain all-pairs path used as an oracle, and ``attention_vjp`` is the
hand-written reverse pass.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels, prng
from .maskgen import SupportSet


class DegenerateRowError(ValueError):
    """A softmax row has no admissible entry."""


class _Blocked:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BLOCKED"


BLOCKED = _Blocked()


@dataclass(frozen=True)
class HeadScores:
    values: np.ndarray
    admissible: np.ndarray
    dot_products: int

    def __getitem__(self, idx):
        j, k = idx
        return self.values[j, k] if self.admissible[j, k] else BLOCKED

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class AttentionBlockParams:
    wq: np.ndarray  # (h, d, d_h)
    wk: np.ndarray
    wv: np.ndarray
    wz: np.ndarray  # (h * d_h, d)
    seed: int = None

    @property
    def heads(self):
        return self.wq.shape[0]

    @property
    def dim(self):
        return self.wq.shape[1]

    @property
    def head_dim(self):
        return self.wq.shape[2]

    @classmethod
    def init(cls, d, h, seed=42):
        """Uniform(-1/sqrt(d), 1/sqrt(d)) entries from four SplitMix64 sub-streams."""
        if d % h:
            raise ValueError(f"d={d} is not divisible by h={h}")
        dh = d // h
        bound = 1.0 / math.sqrt(d)
        shapes = [(h, d, dh)] * 3 + [(h * dh, d)]
        arrays = [
            prng.uniform_array(prng.sub_seed(seed, 0x51 + t), shape, -bound, bound)
            for t, shape in enumerate(shapes)
        ]
        return cls(*arrays, seed=seed)


def random_tokens(n_tokens, d, seed, scale=1.0):
    return prng.uniform_array(prng.sub_seed(seed, 0x7F), (n_tokens, d), -scale, scale)


def _check_mask(mask, n_tokens):
    if mask.n_patches + 1 != n_tokens:
        raise ValueError(
            f"mask covers {mask.n_patches} patches + class token, got {n_tokens} tokens"
        )


def masked_scores(q, k, mask):
    """Scaled dot products ``<q_j, k_k>/sqrt(d_h)`` evaluated only on ``mask``."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.ndim != 2 or q.shape != k.shape:
        raise ValueError(f"Q and K must share a 2-d shape, got {q.shape} and {k.shape}")
    _check_mask(mask, q.shape[0])
    admissible = mask.dense()
    rows, cols = np.nonzero(admissible)
    values = np.zeros(admissible.shape, dtype=np.float64)
    values[rows, cols] = kernels.pair_dots(
        np.ascontiguousarray(q), np.ascontiguousarray(k), rows, cols, 1.0 / math.sqrt(q.shape[1])
    )
    return HeadScores(values, admissible, int(rows.size))


def masked_softmax(scores):
    """Row softmax over admissible entries; blocked entries become exactly 0."""
    adm = scores.admissible
    if not adm.any(axis=1).all():
        bad = int(np.flatnonzero(~adm.any(axis=1))[0])
        raise DegenerateRowError(f"row {bad} has no admissible entry")
    logits = np.where(adm, scores.values, -np.inf)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.where(adm, np.exp(np.where(adm, shifted, 0.0)), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def _project(x, params):
    q = np.einsum("nd,hde->hne", x, params.wq)
    k = np.einsum("nd,hde->hne", x, params.wk)
    v = np.einsum("nd,hde->hne", x, params.wv)
    return q, k, v


def _forward(x, params, masks):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.dim:
        raise ValueError(f"X must be (N+1, {params.dim}), got {x.shape}")
    if len(masks) != params.heads:
        raise ValueError(f"need {params.heads} masks, got {len(masks)}")
    q, k, v = _project(x, params)
    probs, dots = [], 0
    for i, mask in enumerate(masks):
        s = masked_scores(q[i], k[i], mask)
        dots += s.dot_products
        probs.append(masked_softmax(s))
    a = np.stack(probs)
    z = np.einsum("hnm,hme->hne", a, v)
    out = np.concatenate(list(z), axis=1) @ params.wz
    cache = {"x": x, "q": q, "k": k, "v": v, "a": a, "z": z, "dot_products": dots}
    return out, cache


def fibottention_block_forward(x, params, layer_masks):
    """``concat_i(softmax(S_i) V_i) W_Z`` with head ``i`` restricted to ``layer_masks[i]``."""
    return _forward(x, params, layer_masks)[0]


def full_mask(n_patches):
    return SupportSet(
        n_patches, tuple(range(1, n_patches)), include_class_token=True, include_diagonal=True
    )


def dense_block_forward(x, params):
    """All-pairs attention with plain matrix products (oracle path)."""
    x = np.asarray(x, dtype=np.float64)
    q, k, v = _project(x, params)
    s = np.einsum("hne,hme->hnm", q, k) / math.sqrt(params.head_dim)
    s = s - s.max(axis=2, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=2, keepdims=True)
    z = np.einsum("hnm,hme->hne", a, v)
    return np.concatenate(list(z), axis=1) @ params.wz


def blocked_logit_forward(x, params, masks, fill=-1e30):
    """Dense oracle: blocked logits replaced by ``fill`` before a plain softmax."""
    x = np.asarray(x, dtype=np.float64)
    q, k, v = _project(x, params)
    s = np.einsum("hne,hme->hnm", q, k) / math.sqrt(params.head_dim)
    adm = np.stack([m.dense() for m in masks])
    s = np.where(adm, s, fill)
    s = s - s.max(axis=2, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=2, keepdims=True)
    z = np.einsum("hnm,hme->hne", a, v)
    return np.concatenate(list(z), axis=1) @ params.wz


def head_outputs(x, params, masks):
    """Per-head features ``Y_i = softmax(S_i) V_i``, each ``(N+1) x d_h``."""
    _, cache = _forward(x, params, masks)
    return list(cache["z"])


@dataclass(frozen=True)
class Gradients:
    x: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wz: np.ndarray


def attention_vjp(x, params, masks, upstream):
    """Gradients of ``<upstream, forward(x)>`` w.r.t. ``x`` and every weight."""
    out, c = _forward(x, params, masks)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != out.shape:
        raise ValueError(f"upstream must have shape {out.shape}, got {g.shape}")
    h, dh = params.heads, params.head_dim
    zcat = np.concatenate(list(c["z"]), axis=1)
    d_wz = zcat.T @ g
    dz = (g @ params.wz.T).reshape(g.shape[0], h, dh).transpose(1, 0, 2)
    a, q, k, v, xx = c["a"], c["q"], c["k"], c["v"], c["x"]
    d_a = np.einsum("hne,hme->hnm", dz, v)
    d_v = np.einsum("hnm,hne->hme", a, dz)
    # softmax Jacobian; a == 0 on blocked entries so they receive no gradient
    d_s = a * (d_a - (d_a * a).sum(axis=2, keepdims=True))
    scale = 1.0 / math.sqrt(dh)
    d_q = np.einsum("hnm,hme->hne", d_s, k) * scale
    d_k = np.einsum("hnm,hne->hme", d_s, q) * scale
    d_wq = np.einsum("nd,hne->hde", xx, d_q)
    d_wk = np.einsum("nd,hne->hde", xx, d_k)
    d_wv = np.einsum("nd,hne->hde", xx, d_v)
    d_x = (
        np.einsum("hne,hde->nd", d_q, params.wq)
        + np.einsum("hne,hde->nd", d_k, params.wk)
        + np.einsum("hne,hde->nd", d_v, params.wv)
    )
    return Gradients(d_x, d_wq, d_wk, d_wv, d_wz)


def finite_difference_check(x, params, masks, upstream, step=1e-5, samples=None, seed=0):
    """Largest gradient mismatch against central differences, per array.

    The error of an array is ``max |analytic - numeric| / max(max |numeric|, 1e-12)``.
    ``samples`` limits each array to that many seeded coordinates.
    """
    grads = attention_vjp(x, params, masks, upstream)
    g = np.asarray(upstream, dtype=np.float64)
    base = {"x": np.array(x, dtype=np.float64), "wq": params.wq.copy(), "wk": params.wk.copy(),
            "wv": params.wv.copy(), "wz": params.wz.copy()}

    def objective(arrays):
        p = AttentionBlockParams(arrays["wq"], arrays["wk"], arrays["wv"], arrays["wz"])
        return float(np.sum(g * fibottention_block_forward(arrays["x"], p, masks)))

    errors = {}
    for t, name in enumerate(base):
        arr = base[name]
        flat_size = arr.size
        if samples is None or samples >= flat_size:
            coords = np.arange(flat_size)
        else:
            coords = np.sort(kernels.sample_distinct(flat_size, samples, prng.sub_seed(seed, t)))
        analytic = getattr(grads, name).ravel()[coords]
        numeric = np.empty(coords.size)
        for n, idx in enumerate(coords):
            work = dict(base)
            plus = arr.copy()
            plus.flat[idx] += step
            work[name] = plus
            f_plus = objective(work)
            minus = arr.copy()
            minus.flat[idx] -= step
            work[name] = minus
            f_minus = objective(work)
            numeric[n] = (f_plus - f_minus) / (2.0 * step)
        denom = max(float(np.abs(numeric).max(initial=0.0)), 1e-12)
        errors[name] = float(np.abs(analytic - numeric).max(initial=0.0)) / denom
    return errors
