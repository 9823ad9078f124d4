"""Fibonacci-dilated sparse attention masks, a reference attention kernel and bound checks."""
from ._accel import backend
from .analysis import (
    BoundReport,
    DiversityStats,
    FlopReport,
    diversity_stats,
    flop_projection,
    head_diversity,
    lemma2_bound,
    theorem1_bound,
    verify_bounds,
)
from .attnkernel import (
    BLOCKED,
    AttentionBlockParams,
    attention_vjp,
    dense_block_forward,
    fibottention_block_forward,
    head_outputs,
    masked_scores,
    masked_softmax,
)
from .maskgen import (
    HeadMaskConfig,
    MaskStack,
    SupportSet,
    bigbird_mask,
    dilated_heads_masks,
    fibottention_masks,
    head_window_sizes,
    local_window_mask,
    offset_family_masks,
    overlap_histogram,
    pruning_ratio,
    random_mask,
    strided_mask,
    support_from_sequence,
)
from .seqcore import (
    DilationSequence,
    FibParams,
    binet,
    binet_first_form,
    family_sequence,
    generalized_fibonacci,
    modified_wythoff_pair,
    wythoff_pair,
)

__version__ = "0.1.0"
