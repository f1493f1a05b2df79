"""Bidirectional transformer encoder with MLM and classification heads.

Layout per layer: multi-head self-attention (padding masked) -> residual
add + layer norm -> two-layer GELU feed-forward (inner width 4*d_model)
-> residual add + layer norm. Token and position embeddings are learned.
Heads are floor(d_model / n_heads) wide; their concatenation (which is
n_heads * d_head, not necessarily d_model) is projected back to d_model.

Classification mean-pools hidden states over unpadded positions; the MLM
head is an affine map to vocabulary logits, untied from the embedding.
"""

from __future__ import annotations

import math

import numpy as np

from ..tensor import (
    Tensor,
    UsageError,
    add,
    embedding_lookup,
    gelu,
    layer_norm,
    matmul,
    mul,
    reduce_sum,
    reshape,
    softmax_rows,
    transpose,
)
from .base import ModelBase, ParamSpec
from .config import ModelConfig

_NEG_BIG = 1.0e30  # additive mask value; exp underflows to exactly 0


def transformer_manifest(config: ModelConfig, mode: str) -> list[ParamSpec]:
    d = config.d_model
    width = config.n_heads * config.d_head
    specs: list[ParamSpec] = [
        ("emb.tok", (config.vocab_size, d), "embed"),
        ("emb.pos", (config.max_seq_len, d), "embed"),
    ]
    for i in range(config.n_layers):
        p = f"enc.{i}"
        specs += [
            (f"{p}.attn.wq", (d, width), "weight"),
            (f"{p}.attn.bq", (width,), "bias"),
            (f"{p}.attn.wk", (d, width), "weight"),
            (f"{p}.attn.bk", (width,), "bias"),
            (f"{p}.attn.wv", (d, width), "weight"),
            (f"{p}.attn.bv", (width,), "bias"),
            (f"{p}.attn.wo", (width, d), "weight"),
            (f"{p}.attn.bo", (d,), "bias"),
            (f"{p}.ln1.g", (d,), "gain"),
            (f"{p}.ln1.b", (d,), "bias"),
            (f"{p}.ffn.w1", (d, config.d_ffn), "weight"),
            (f"{p}.ffn.b1", (config.d_ffn,), "bias"),
            (f"{p}.ffn.w2", (config.d_ffn, d), "weight"),
            (f"{p}.ffn.b2", (d,), "bias"),
            (f"{p}.ln2.g", (d,), "gain"),
            (f"{p}.ln2.b", (d,), "bias"),
        ]
    if mode == "mlm":
        specs += [("mlm.w", (d, config.vocab_size), "weight"), ("mlm.b", (config.vocab_size,), "bias")]
    else:
        specs += [("cls.w", (d, config.n_classes), "weight"), ("cls.b", (config.n_classes,), "bias")]
    return specs


class TransformerModel(ModelBase):
    @staticmethod
    def specs_for(config: ModelConfig, mode: str) -> list[ParamSpec]:
        return transformer_manifest(config, mode)

    def param_specs(self) -> list[ParamSpec]:
        return transformer_manifest(self.config, self.mode)

    def forward(
        self,
        token_ids: np.ndarray,
        attention_mask: np.ndarray,
        return_attention: bool = False,
    ):
        """Hidden states [B, T, d_model]; optionally the per-layer attention
        weight arrays [B, H, T, T] for inspection."""
        cfg = self.config
        p = self.params
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 2:
            raise UsageError(f"token batch must be 2-d, got shape {ids.shape}")
        batch, seq = ids.shape
        if seq == 0:
            raise UsageError("empty sequence batch")
        if seq > cfg.max_seq_len:
            raise UsageError(f"sequence length {seq} exceeds max_seq_len {cfg.max_seq_len}")
        mask = np.asarray(attention_mask, dtype=np.float64)
        if mask.shape != (batch, seq):
            raise UsageError(f"attention mask shape {mask.shape} does not match batch {(batch, seq)}")

        positions = np.broadcast_to(np.arange(seq, dtype=np.int64), (batch, seq))
        h = add(embedding_lookup(p["emb.tok"], ids), embedding_lookup(p["emb.pos"], positions))

        # keys at padding get a huge negative additive score
        mask_bias = Tensor((mask - 1.0)[:, None, None, :] * _NEG_BIG)
        scale = 1.0 / math.sqrt(cfg.d_head)
        attentions: list[np.ndarray] = []
        for i in range(cfg.n_layers):
            h, attn = self._layer(i, h, mask_bias, batch, seq, scale)
            if return_attention:
                attentions.append(attn)
        if return_attention:
            return h, attentions
        return h

    def _layer(self, i: int, h: Tensor, mask_bias: Tensor, batch: int, seq: int, scale: float):
        cfg = self.config
        p = self.params
        heads, dh = cfg.n_heads, cfg.d_head
        pre = f"enc.{i}"

        def split_heads(x: Tensor) -> Tensor:
            x = reshape(x, (batch, seq, heads, dh))
            return transpose(x, (0, 2, 1, 3))  # [B, H, T, dh]

        q = split_heads(add(matmul(h, p[f"{pre}.attn.wq"]), p[f"{pre}.attn.bq"]))
        k = split_heads(add(matmul(h, p[f"{pre}.attn.wk"]), p[f"{pre}.attn.bk"]))
        v = split_heads(add(matmul(h, p[f"{pre}.attn.wv"]), p[f"{pre}.attn.bv"]))

        scores = add(mul(matmul(q, transpose(k, (0, 1, 3, 2))), scale), mask_bias)
        attn = softmax_rows(scores)  # [B, H, T, T]
        ctx = matmul(attn, v)  # [B, H, T, dh]
        ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (batch, seq, heads * dh))
        out = add(matmul(ctx, p[f"{pre}.attn.wo"]), p[f"{pre}.attn.bo"])

        h = layer_norm(add(h, out), p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
        f = add(matmul(gelu(add(matmul(h, p[f"{pre}.ffn.w1"]), p[f"{pre}.ffn.b1"])), p[f"{pre}.ffn.w2"]), p[f"{pre}.ffn.b2"])
        h = layer_norm(add(h, f), p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
        return h, attn.data

    def mlm_logits(self, hidden: Tensor) -> Tensor:
        """Vocabulary logits [B, T, V]."""
        if self.mode != "mlm":
            raise UsageError(f"model is in mode '{self.mode}', not 'mlm'")
        batch, seq, d = hidden.shape
        flat = reshape(hidden, (batch * seq, d))
        logits = add(matmul(flat, self.params["mlm.w"]), self.params["mlm.b"])
        return reshape(logits, (batch, seq, self.config.vocab_size))

    def classify_logits(self, hidden: Tensor, attention_mask: np.ndarray) -> Tensor:
        """Class logits [B, n_classes] from mask-weighted mean pooling."""
        if self.mode != "classify":
            raise UsageError(f"model is in mode '{self.mode}', not 'classify'")
        mask = np.asarray(attention_mask, dtype=np.float64)
        counts = np.maximum(mask.sum(axis=1), 1.0)
        pooled = reduce_sum(mul(hidden, Tensor(mask[:, :, None])), axis=1)
        pooled = mul(pooled, Tensor((1.0 / counts)[:, None]))
        return add(matmul(pooled, self.params["cls.w"]), self.params["cls.b"])
