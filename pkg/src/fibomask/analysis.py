"""Exact checks of the sparsity and complexity bounds, FLOP projection, head diversity."""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .maskgen import (
    HeadMaskConfig,
    fibottention_base_masks,
    local_window_mask,
)
from .seqcore import LOG_PHI, PHI, PSI, SQRT5, modified_wythoff_pair, wythoff_pair


class DomainError(ValueError):
    """Inputs fall outside the hypotheses under which a bound is claimed."""


def lemma2_bound(a, b, w, n):
    """Upper bound on ``|Omega_w^Fib(a,b)|`` for ``1 <= a < b <= w <= N`` (natural log)."""
    if not (1 <= a < b <= w <= n):
        raise DomainError(f"bound needs 1 <= a < b <= w <= N, got a={a}, b={b}, w={w}, N={n}")
    depth = (math.log(SQRT5 * w + abs(a * PHI - b)) - math.log(b - a * PSI)) / LOG_PHI + 1.0
    return 2.0 * n * depth


def theorem1_bound(n, d, w_max):
    """Both forms of the total query-key cost bound: ``(tight, simplified)``."""
    if n < 1 or d < 1 or w_max < 1:
        raise DomainError("N, d and w_max must be positive")
    if w_max > n:
        raise DomainError(f"w_max={w_max} exceeds N={n}")
    tight = 2.0 * n * d * (2.08 * math.log((SQRT5 + 1.0) * w_max) - 1.0)
    simplified = 4.16 * n * d * math.log(3.3 * n)
    return tight, simplified


@dataclass(frozen=True)
class HeadBound:
    head: int
    a: int
    b: int
    window: int
    measured: int
    bound: float = None
    slack: float = None
    passed: bool = None
    note: str = ""


@dataclass(frozen=True)
class BoundReport:
    n_patches: int
    d: int
    h: int
    w_max: int
    variant: str
    heads: tuple
    measured_dot_products: float
    tight_bound: float
    simplified_bound: float
    tight_passed: bool
    simplified_passed: bool

    @property
    def passed(self):
        heads_ok = all(hb.passed for hb in self.heads if hb.passed is not None)
        return heads_ok and self.tight_passed and self.simplified_passed

    def to_dict(self):
        out = asdict(self)
        out["heads"] = [asdict(hb) for hb in self.heads]
        out["passed"] = self.passed
        return out


def verify_bounds(cfg, d):
    """Measured per-head counts against the per-head and total bounds for ``cfg``."""
    if d % cfg.h:
        raise ValueError(f"d={d} is not divisible by h={cfg.h}")
    pair = wythoff_pair if cfg.variant == "wythoff" else modified_wythoff_pair
    base = fibottention_base_masks(cfg)
    rows = []
    for i, (mask, w) in enumerate(zip(base, cfg.windows), start=1):
        a, b = pair(i)
        measured = mask.n_pairs
        try:
            bound = lemma2_bound(a, b, w, cfg.n_patches)
        except DomainError:
            rows.append(HeadBound(i, a, b, w, measured, note="outside a < b <= w hypotheses"))
            continue
        rows.append(HeadBound(i, a, b, w, measured, bound, bound - measured, measured <= bound))
    total = (d / cfg.h) * sum(m.n_pairs for m in base)
    tight, simplified = theorem1_bound(cfg.n_patches, d, cfg.w_max)
    return BoundReport(
        n_patches=cfg.n_patches,
        d=d,
        h=cfg.h,
        w_max=cfg.w_max,
        variant=cfg.variant,
        heads=tuple(rows),
        measured_dot_products=total,
        tight_bound=tight,
        simplified_bound=simplified,
        tight_passed=total <= tight,
        simplified_passed=total <= simplified,
    )


def head_diversity(ys):
    """Mean over head pairs of ``||Y_i - Y_j||_F / (||Y_i||_F + ||Y_j||_F)``.

    Pairs where both features are zero contribute 0.
    """
    ys = [np.asarray(y, dtype=np.float64) for y in ys]
    h = len(ys)
    if h < 2:
        raise ValueError("diversity needs at least two heads")
    if any(y.shape != ys[0].shape for y in ys):
        raise ValueError("head features must share a shape")
    norms = [np.linalg.norm(y) for y in ys]
    total = 0.0
    for i in range(h):
        for j in range(i + 1, h):
            denom = norms[i] + norms[j]
            if denom > 0.0:
                total += np.linalg.norm(ys[i] - ys[j]) / denom
    return 2.0 * total / (h * (h - 1))


@dataclass(frozen=True)
class DiversityStats:
    samples: tuple
    min: float
    max: float
    median: float
    q1: float
    q3: float

    def to_dict(self):
        return asdict(self)


def diversity_stats(values):
    """Five-number summary; quartiles interpolate linearly between order statistics."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        raise ValueError("need at least one value")
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    return DiversityStats(
        samples=tuple(float(x) for x in v),
        min=float(v.min()),
        max=float(v.max()),
        median=float(med),
        q1=float(q1),
        q3=float(q3),
    )


def default_windows(n):
    """Window bounds scaled from the ViT-B setting: ``w_min = 5``, ``w_max = min(65 N / 196, N)``."""
    w_max = min(max(65 * n // 196, 5), n)
    return 5, w_max


def third_windows(n):
    return 5, max(n // 3, 5)


WINDOW_RULES = {"default": default_windows, "third": third_windows}


def _rule_masks(rule, n, h):
    if rule == "full":
        return [local_window_mask(n, n - 1, include_diagonal=True)] * h
    w_min, w_max = WINDOW_RULES[rule](n)
    return list(fibottention_base_masks(HeadMaskConfig(h=h, w_min=w_min, w_max=w_max, n_patches=n)))


@dataclass(frozen=True)
class FlopRow:
    image_side: int
    patch_size: int
    n_patches: int
    dense: float
    sparse: float
    class_token: float
    ratio: float


@dataclass(frozen=True)
class FlopReport:
    d: int
    h: int
    rule: str
    rows: tuple

    def to_dict(self):
        return {"d": self.d, "h": self.h, "rule": self.rule, "rows": [asdict(r) for r in self.rows]}

    def csv_rows(self):
        header = ["image_side", "patch_size", "n_patches", "dense", "sparse", "class_token", "ratio"]
        return header, [[getattr(r, k) for k in header] for r in self.rows]


def flop_projection(sweep, d=768, h=12, rule="default"):
    """Query-key multiply-accumulates per attention layer as resolution grows.

    ``dense = N^2 d``; ``sparse = (d/h) sum_i |Omega_i|`` over patch pairs.
    Class-token dot products are reported in their own column and left out of
    the ratio so that it compares the patch grids like for like.
    """
    if d % h:
        raise ValueError(f"d={d} is not divisible by h={h}")
    if rule not in WINDOW_RULES and rule != "full":
        raise ValueError(f"unknown window rule {rule!r}")
    rows = []
    for side, patch in sweep:
        if side % patch:
            raise ValueError(f"patch size {patch} does not divide image side {side}")
        n = (side // patch) ** 2
        masks = _rule_masks(rule, n, h)
        dense = float(n * n * d)
        sparse = (d / h) * sum(m.n_pairs for m in masks)
        cls = (d / h) * sum(m.class_token_pairs for m in masks)
        rows.append(FlopRow(side, patch, n, dense, sparse, cls, sparse / dense))
    return FlopReport(d, h, rule, tuple(rows))
