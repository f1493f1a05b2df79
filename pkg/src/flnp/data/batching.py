"""Deterministic batch construction from labeled records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import Rng
from ..tensor import UsageError
from .corpus import Record
from .vocab import CLS_ID, PAD_ID, Vocabulary


@dataclass(frozen=True)
class Batch:
    input_ids: np.ndarray  # [B, T] int64, cls-prefixed, padded with pad id
    lengths: np.ndarray  # [B] int64, valid tokens per row (cls included)
    labels: np.ndarray  # [B] int64 record labels

    @property
    def attention_mask(self) -> np.ndarray:
        seq = self.input_ids.shape[1]
        return (np.arange(seq) < self.lengths[:, None]).astype(np.float64)


def make_batches(
    records: list[Record],
    vocab: Vocabulary,
    batch_size: int,
    max_seq_len: int,
    rng: Rng | None = None,
) -> list[Batch]:
    """Shuffle (when an rng is given), encode, truncate and pad.

    Sequences are truncated to max_seq_len - 1 tokens and prefixed with
    the cls token, so every row fits within max_seq_len. Rows in a batch
    share the length of its longest member, padded with the pad id.
    With rng=None the record order is preserved.
    """
    if batch_size < 1:
        raise UsageError(f"batch_size must be >= 1, got {batch_size}")
    if max_seq_len < 2:
        raise UsageError(f"max_seq_len must be >= 2, got {max_seq_len}")
    ordered = rng.shuffled(records) if rng is not None else list(records)

    batches: list[Batch] = []
    for start in range(0, len(ordered), batch_size):
        chunk = ordered[start : start + batch_size]
        encoded = [[CLS_ID] + vocab.encode(tokens[: max_seq_len - 1]) for _, tokens in chunk]
        lengths = np.asarray([len(row) for row in encoded], dtype=np.int64)
        width = int(lengths.max())
        ids = np.full((len(chunk), width), PAD_ID, dtype=np.int64)
        for i, row in enumerate(encoded):
            ids[i, : len(row)] = row
        labels = np.asarray([label for label, _ in chunk], dtype=np.int64)
        batches.append(Batch(input_ids=ids, lengths=lengths, labels=labels))
    return batches
