from .vocab import NUM_RESERVED, PAD_ID, UNK_ID, MASK_ID, CLS_ID, Vocabulary, build_vocab
from .corpus import (
    CorpusParams,
    Record,
    gen_synthetic_corpus,
    load_corpus,
    planted_label,
    save_corpus,
)
from .masking import MaskedBatch, MaskingConfig, mask_batch
from .partition import IMBALANCED_RATIOS, PartitionSpec, largest_remainder_sizes, partition
from .batching import Batch, make_batches

__all__ = [
    "NUM_RESERVED",
    "PAD_ID",
    "UNK_ID",
    "MASK_ID",
    "CLS_ID",
    "Vocabulary",
    "build_vocab",
    "CorpusParams",
    "Record",
    "gen_synthetic_corpus",
    "load_corpus",
    "planted_label",
    "save_corpus",
    "MaskedBatch",
    "MaskingConfig",
    "mask_batch",
    "IMBALANCED_RATIOS",
    "PartitionSpec",
    "largest_remainder_sizes",
    "partition",
    "Batch",
    "make_batches",
]
