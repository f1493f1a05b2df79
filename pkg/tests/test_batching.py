import numpy as np
import pytest

from flnp.data import CLS_ID, PAD_ID, build_vocab, make_batches
from flnp.rng import Rng
from flnp.tensor import UsageError

VOCAB = build_vocab(["alpha beta gamma delta epsilon"], max_size=12)
RECORDS = [
    (0, ["alpha", "beta"]),
    (1, ["gamma"]),
    (0, ["delta", "epsilon", "alpha", "beta"]),
    (1, ["beta", "beta", "beta"]),
    (0, ["alpha"]),
]


def test_batch_size_one_preserves_order_without_rng():
    batches = make_batches(RECORDS, VOCAB, batch_size=1, max_seq_len=10, rng=None)
    assert len(batches) == len(RECORDS)
    for batch, (label, tokens) in zip(batches, RECORDS):
        assert batch.labels.tolist() == [label]
        assert batch.input_ids[0, 0] == CLS_ID
        assert batch.input_ids[0, 1:].tolist() == VOCAB.encode(tokens)


def test_rows_share_padded_width():
    batches = make_batches(RECORDS, VOCAB, batch_size=3, max_seq_len=10, rng=None)
    for batch in batches:
        width = batch.input_ids.shape[1]
        assert width == batch.lengths.max()
        for row, length in zip(batch.input_ids, batch.lengths):
            assert np.all(row[length:] == PAD_ID)
            assert np.all(row[:length] != PAD_ID)


def test_epoch_covers_every_record_once():
    batches = make_batches(RECORDS, VOCAB, batch_size=2, max_seq_len=10, rng=Rng(3))
    total = sum(len(b.labels) for b in batches)
    assert total == len(RECORDS)


def test_truncation_keeps_cls_within_limit():
    long = [(1, ["alpha"] * 50)]
    batches = make_batches(long, VOCAB, batch_size=1, max_seq_len=8, rng=None)
    ids = batches[0].input_ids
    assert ids.shape[1] == 8
    assert ids[0, 0] == CLS_ID
    assert batches[0].lengths[0] == 8


def test_attention_mask_matches_lengths():
    batches = make_batches(RECORDS, VOCAB, batch_size=5, max_seq_len=10, rng=None)
    mask = batches[0].attention_mask
    for row, length in zip(mask, batches[0].lengths):
        assert row[:length].sum() == length
        assert row[length:].sum() == 0


def test_shuffle_determinism():
    a = make_batches(RECORDS, VOCAB, batch_size=2, max_seq_len=10, rng=Rng(9))
    b = make_batches(RECORDS, VOCAB, batch_size=2, max_seq_len=10, rng=Rng(9))
    for x, y in zip(a, b):
        assert np.array_equal(x.input_ids, y.input_ids)
        assert np.array_equal(x.labels, y.labels)


def test_validation():
    with pytest.raises(UsageError):
        make_batches(RECORDS, VOCAB, batch_size=0, max_seq_len=10)
    with pytest.raises(UsageError):
        make_batches(RECORDS, VOCAB, batch_size=1, max_seq_len=1)
