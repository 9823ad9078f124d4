"""Per-head sparse support sets: Fibottention masks and the baseline families.

Token grid convention: index 0 is the class token, patches are 1..N. A
``SupportSet`` stores diagonal offsets (each offset ``o`` admits ``|j-k| = o``
between patches) and, for unstructured patterns, an explicit pair list.
Counts and pruning ratios are always taken over the N x N patch grid.
"""
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels, prng
from .seqcore import (
    EmptySequenceError,
    family_sequence,
    generalized_fibonacci,
    modified_wythoff_pair,
    wythoff_pair,
)

VARIANTS = ("wythoff", "modified_wythoff")


@dataclass(frozen=True, eq=False)
class SupportSet:
    n_patches: int
    offsets: tuple = ()
    include_class_token: bool = True
    include_diagonal: bool = False
    explicit_pairs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = self.n_patches
        if n < 1:
            raise ValueError("n_patches must be >= 1")
        offs = tuple(sorted({int(o) for o in self.offsets}))
        if offs and (offs[0] < 1 or offs[-1] > n - 1):
            raise ValueError(f"offsets must lie in [1, {n - 1}], got {offs}")
        object.__setattr__(self, "offsets", offs)
        if self.explicit_pairs is not None:
            pairs = np.asarray(self.explicit_pairs, dtype=np.int64).reshape(-1, 2)
            if pairs.size and (pairs.min() < 1 or pairs.max() > n):
                raise ValueError("explicit pairs must index patches 1..N")
            pairs.setflags(write=False)
            object.__setattr__(self, "explicit_pairs", pairs)

    def dense(self):
        """Boolean ``(N+1) x (N+1)`` admissibility matrix, class token at index 0."""
        out = kernels.band_mask(
            self.n_patches,
            np.asarray(self.offsets, dtype=np.int64),
            self.include_diagonal,
            self.include_class_token,
        )
        if self.explicit_pairs is not None and len(self.explicit_pairs):
            out[self.explicit_pairs[:, 0], self.explicit_pairs[:, 1]] = True
        return out

    def patch_mask(self):
        return self.dense()[1:, 1:]

    @property
    def n_pairs(self):
        """Admissible pairs on the patch grid."""
        if self.explicit_pairs is None:
            n = self.n_patches
            return sum(2 * (n - o) for o in self.offsets) + (n if self.include_diagonal else 0)
        return int(self.patch_mask().sum())

    @property
    def class_token_pairs(self):
        return 2 * self.n_patches + 1 if self.include_class_token else 0

    def pairs(self):
        """Row and column indices of every admissible entry of ``dense()``."""
        return np.nonzero(self.dense())

    def key(self):
        extra = None if self.explicit_pairs is None else self.explicit_pairs.tobytes()
        return (self.n_patches, self.offsets, self.include_class_token, self.include_diagonal, extra)

    def __eq__(self, other):
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class HeadMaskConfig:
    h: int = 12
    w_min: int = 5
    w_max: int = 65
    n_patches: int = 196
    variant: str = "wythoff"
    layers: int = 1
    seed: int = 42

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("need at least one head")
        if self.n_patches < 2:
            raise ValueError("need at least two patches")
        if not 1 <= self.w_min <= self.w_max <= self.n_patches:
            raise ValueError(
                f"need 1 <= w_min <= w_max <= N, got w_min={self.w_min}, "
                f"w_max={self.w_max}, N={self.n_patches}"
            )
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.layers < 1:
            raise ValueError("need at least one layer")

    @property
    def windows(self):
        return head_window_sizes(self.h, self.w_min, self.w_max)


@dataclass(frozen=True)
class MaskStack:
    base: tuple
    masks: tuple
    permutations: tuple

    @property
    def layers(self):
        return len(self.masks)

    @property
    def heads(self):
        return len(self.base)


def head_window_sizes(h, w_min, w_max):
    """``w_i = w_min + floor((w_max - w_min)(i-1)/(h-1))``; a single head gets ``w_min``."""
    if h < 1:
        raise ValueError("h must be >= 1")
    if not 1 <= w_min <= w_max:
        raise ValueError(f"need 1 <= w_min <= w_max, got {w_min}, {w_max}")
    if h == 1:
        return [w_min]
    return [w_min + ((w_max - w_min) * (i - 1)) // (h - 1) for i in range(1, h + 1)]


def support_from_sequence(seq, w, n_patches, include_class_token=True):
    """Keep the distinct sequence elements in ``[1, min(w, N-1)]`` as offsets."""
    if n_patches < 2:
        raise ValueError("need at least two patches")
    cap = min(w, n_patches - 1)
    offsets = {int(o) for o in seq if 1 <= o <= cap}
    return SupportSet(n_patches, tuple(offsets), include_class_token=include_class_token)


def fibottention_base_masks(cfg):
    pair = wythoff_pair if cfg.variant == "wythoff" else modified_wythoff_pair
    base = []
    for i, w in enumerate(cfg.windows, start=1):
        a, b = pair(i)
        seq = generalized_fibonacci(a, b, w)
        base.append(support_from_sequence(seq, w, cfg.n_patches, include_class_token=True))
    return tuple(base)


def fibottention_masks(cfg):
    """Per-head Wythoff masks, shuffled independently for every layer.

    Layer ``l`` (0-based) draws its permutation from SplitMix64(seed XOR l);
    head ``j`` of that layer holds ``base[perm[j]]``.
    """
    base = fibottention_base_masks(cfg)
    perms, layers = [], []
    for layer in range(cfg.layers):
        perm = prng.permutation(cfg.h, prng.sub_seed(cfg.seed, layer))
        perms.append(perm)
        layers.append(tuple(base[p] for p in perm))
    return MaskStack(base=base, masks=tuple(layers), permutations=tuple(perms))


def local_window_mask(n_patches, w, include_diagonal, include_class_token=True):
    if not 0 <= w <= n_patches - 1:
        raise ValueError(f"need 0 <= w <= N-1, got w={w}")
    return SupportSet(
        n_patches,
        tuple(range(1, w + 1)),
        include_class_token=include_class_token,
        include_diagonal=include_diagonal,
    )


def _flat_to_pairs(flat, n_patches):
    flat = np.sort(np.asarray(flat, dtype=np.int64))
    return np.stack([flat // n_patches + 1, flat % n_patches + 1], axis=1)


def random_mask(n_patches, keep_fraction, force_class_token, seed):
    """``round(keep_fraction * N^2)`` distinct patch pairs, uniform without replacement."""
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in [0, 1]")
    total = n_patches * n_patches
    k = int(np.floor(keep_fraction * total + 0.5))
    flat = kernels.sample_distinct(total, k, prng.MASK64 & int(seed))
    return SupportSet(
        n_patches,
        (),
        include_class_token=force_class_token,
        explicit_pairs=_flat_to_pairs(flat, n_patches),
    )


def bigbird_mask(n_patches, w, g, r, seed, class_token_global=True):
    """Local window with diagonal, ``g`` global tokens, ``r`` random extra pairs.

    With ``class_token_global`` the class token is the first global token, so
    only ``g - 1`` patch tokens get dense rows and columns. Random pairs are
    drawn without replacement from patch pairs outside the structured union.
    """
    if w < 0 or g < 0 or r < 0:
        raise ValueError("w, g and r must be nonnegative")
    n = n_patches
    local = local_window_mask(n, min(w, n - 1), include_diagonal=True, include_class_token=False)
    union = local.patch_mask().copy()
    patch_globals = max(g - 1, 0) if class_token_global else g
    patch_globals = min(patch_globals, n)
    union[:patch_globals, :] = True
    union[:, :patch_globals] = True
    outside = np.flatnonzero(~union.ravel())
    take = min(r, outside.size)
    picked = outside[kernels.sample_distinct(outside.size, take, prng.MASK64 & int(seed))]
    structured = np.flatnonzero(union.ravel() & ~local.patch_mask().ravel())
    extra = np.concatenate([structured, picked])
    return SupportSet(
        n,
        local.offsets,
        include_class_token=bool(class_token_global and g >= 1),
        include_diagonal=True,
        explicit_pairs=_flat_to_pairs(extra, n),
    )


def strided_mask(n_patches, stride, local, include_class_token=True):
    """Pairs with ``|j-k| <= local`` or ``(j-k) mod stride == 0``."""
    if stride < 1 or local < 0:
        raise ValueError("need stride >= 1 and local >= 0")
    top = n_patches - 1
    offsets = set(range(1, min(local, top) + 1)) | set(range(stride, top + 1, stride))
    return SupportSet(
        n_patches,
        tuple(offsets),
        include_class_token=include_class_token,
        include_diagonal=True,
    )


def dilated_heads_masks(h, c, variable, windows, n_patches, include_class_token=True):
    """Constant-dilation ``(c n)`` heads; ``variable`` shifts head ``i`` by ``i - 1``."""
    if c < 1:
        raise ValueError("dilation factor c must be >= 1")
    if len(windows) != h:
        raise ValueError("need one window per head")
    masks = []
    for i, w in enumerate(windows, start=1):
        shift = i - 1 if variable else 0
        try:
            seq = family_sequence("linear-shifted", (c, shift), w)
        except EmptySequenceError:
            seq = ()
        masks.append(support_from_sequence(seq, w, n_patches, include_class_token))
    return masks


def offset_family_masks(h, delta, windows, n_patches, include_class_token=True):
    """Head ``i`` uses ``Fib(i + delta, i + delta)`` capped at its window."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if len(windows) != h:
        raise ValueError("need one window per head")
    return [
        support_from_sequence(
            generalized_fibonacci(i + delta, i + delta, w), w, n_patches, include_class_token
        )
        for i, w in enumerate(windows, start=1)
    ]


def family_masks(rule, param, windows, n_patches, include_class_token=True):
    """Same-rule heads (power, poly, linear, ...) each capped at its own window."""
    masks = []
    for w in windows:
        try:
            seq = family_sequence(rule, param, w)
        except EmptySequenceError:
            seq = ()
        masks.append(support_from_sequence(seq, w, n_patches, include_class_token))
    return masks


def pruning_ratio(masks):
    """Percentage of the N x N patch grid left out, averaged over heads."""
    masks = list(masks)
    if not masks:
        raise ValueError("need at least one mask")
    n = masks[0].n_patches
    if any(m.n_patches != n for m in masks):
        raise ValueError("masks must share N")
    mean_pairs = sum(m.n_pairs for m in masks) / len(masks)
    return 100.0 * (1.0 - mean_pairs / (n * n))


def overlap_histogram(masks):
    """Offset -> number of heads whose support contains that diagonal."""
    masks = list(masks)
    if masks and any(m.n_patches != masks[0].n_patches for m in masks):
        raise ValueError("masks must share N")
    counts = Counter()
    for m in masks:
        counts.update(m.offsets)
    return dict(sorted(counts.items()))


def local_window_table(n_patches=196, windows=(2, 10, 15, 20, 40)):
    """Rows of (w, ratio with diagonal, ratio without diagonal)."""
    return [
        (
            w,
            pruning_ratio([local_window_mask(n_patches, w, True)]),
            pruning_ratio([local_window_mask(n_patches, w, False)]),
        )
        for w in windows
    ]
