"""Stacked unidirectional LSTM text classifier.

Standard gate equations per timestep, with the fused projection
gates = x @ wx + h @ wh + b split into (input, forget, cell, output)
chunks: i,f,o are sigmoid gates, the cell candidate is tanh, then
c = f*c + i*g and h = o*tanh(c). Classification reads the top layer's
hidden state at each sequence's last valid timestep through one affine
layer (no pooling).
"""

from __future__ import annotations

import numpy as np

from ..tensor import (
    Tensor,
    UsageError,
    add,
    embedding_lookup,
    matmul,
    mul,
    narrow,
    sigmoid,
    tanh,
)
from .base import ModelBase, ParamSpec
from .config import ModelConfig


def lstm_manifest(config: ModelConfig) -> list[ParamSpec]:
    d = config.d_model
    specs: list[ParamSpec] = [("emb.tok", (config.vocab_size, d), "embed")]
    for i in range(config.n_layers):
        specs += [
            (f"lstm.{i}.wx", (d, 4 * d), "weight"),
            (f"lstm.{i}.wh", (d, 4 * d), "weight"),
            (f"lstm.{i}.b", (4 * d,), "bias"),
        ]
    specs += [("cls.w", (d, config.n_classes), "weight"), ("cls.b", (config.n_classes,), "bias")]
    return specs


class LstmClassifier(ModelBase):
    @staticmethod
    def specs_for(config: ModelConfig) -> list[ParamSpec]:
        return lstm_manifest(config)

    def param_specs(self) -> list[ParamSpec]:
        return lstm_manifest(self.config)

    def forward(self, token_ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        """Class logits [B, n_classes]."""
        cfg = self.config
        p = self.params
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[1] == 0:
            raise UsageError(f"token batch must be [B, T] with T >= 1, got shape {ids.shape}")
        lengths = np.asarray(lengths, dtype=np.int64)
        batch, seq = ids.shape
        if lengths.shape != (batch,) or lengths.min() < 1 or lengths.max() > seq:
            raise UsageError(f"lengths must lie in [1, {seq}] per row")

        d = cfg.d_model
        h = [Tensor(np.zeros((batch, d))) for _ in range(cfg.n_layers)]
        c = [Tensor(np.zeros((batch, d))) for _ in range(cfg.n_layers)]
        last = Tensor(np.zeros((batch, d)))

        for t in range(seq):
            x = embedding_lookup(p["emb.tok"], ids[:, t])
            for layer in range(cfg.n_layers):
                gates = add(
                    add(matmul(x, p[f"lstm.{layer}.wx"]), matmul(h[layer], p[f"lstm.{layer}.wh"])),
                    p[f"lstm.{layer}.b"],
                )
                gi = sigmoid(narrow(gates, 1, 0, d))
                gf = sigmoid(narrow(gates, 1, d, d))
                gc = tanh(narrow(gates, 1, 2 * d, d))
                go = sigmoid(narrow(gates, 1, 3 * d, d))
                c[layer] = add(mul(gf, c[layer]), mul(gi, gc))
                h[layer] = mul(go, tanh(c[layer]))
                x = h[layer]
            # latch the top hidden state on each row's final valid step
            pick = (lengths - 1 == t).astype(np.float64)[:, None]
            if pick.any():
                sel = Tensor(pick)
                last = add(mul(sel, h[-1]), mul(Tensor(1.0 - pick), last))

        return add(matmul(last, p["cls.w"]), p["cls.b"])

    def classify_logits(self, token_ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        return self.forward(token_ids, lengths)
