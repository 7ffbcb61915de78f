from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import P_VARIANTS, ModelConfig, ModelConfigError
from .network import (
    ForwardOutput,
    SequenceBatch,
    attention_mask,
    attention_matrices,
    bins_needed,
    embed_sequences,
    forward,
    fuse,
    indicator_bins,
    init_params,
    item_pairs,
    make_batch,
    score_all,
    score_candidates,
    sia_forward,
)
from .preference import P_EPSILON, init_P, project_P

__all__ = [
    "CheckpointError", "load_checkpoint", "save_checkpoint", "P_VARIANTS", "ModelConfig",
    "ModelConfigError", "ForwardOutput", "SequenceBatch", "attention_mask", "attention_matrices",
    "bins_needed", "embed_sequences", "forward", "fuse", "indicator_bins", "init_params",
    "item_pairs", "make_batch", "score_all", "score_candidates", "sia_forward", "P_EPSILON",
    "init_P", "project_P",
]
