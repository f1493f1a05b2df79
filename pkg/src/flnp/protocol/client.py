"""Client side of the round protocol.

A client owns its data shard (resolved by the provisioned client id, so
identity does not depend on connection order), holds out the trailing
20% of the shard for local validation, and trains only on the rest.
Every received global model is verified against the session key and the
local manifest before any weights load.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..data import Record, Vocabulary
from ..models import build_model
from ..models.config import ModelConfig
from ..optim import Adam
from ..rng import Rng
from ..tensor import UsageError
from ..training import (
    TrainSettings,
    evaluate,
    prepare_eval_batches,
    split_holdout,
    train_epochs,
)
from ..transport.codec import sign, verify_auth
from .fedavg import ProtocolError
from .messages import (
    ErrorMsg,
    FlMessage,
    GlobalModel,
    Hello,
    LocalUpdate,
    Provisioned,
    RoundComplete,
    Shutdown,
)

LOCAL_VAL_MASK_KEY = 0x4C56414C  # "LVAL"


@dataclass(frozen=True)
class ClientTrainConfig:
    model_config: ModelConfig
    mode: str  # "mlm" | "classify"
    vocab: Vocabulary
    settings: TrainSettings
    batch_seed: int
    shard_provider: Callable[[int], list[Record]]


class FlClient:
    def __init__(self, name: str, auth_token: str, config: ClientTrainConfig) -> None:
        self.name = name
        self.auth_token = auth_token
        self.config = config
        self.client_id: Optional[int] = None
        self.session_key: bytes = b""
        self.phase = "unprovisioned"
        self.done = False
        self.round_history: list[RoundComplete] = []
        self._model = None
        self._optimizer: Optional[Adam] = None
        self._train_records: list[Record] = []
        self._val_batches: list = []

    def hello(self) -> Hello:
        return Hello(client_name=self.name, auth_token=self.auth_token)

    def handle(self, msg: FlMessage) -> list[FlMessage]:
        if isinstance(msg, Provisioned):
            return self._on_provisioned(msg)
        if isinstance(msg, GlobalModel):
            return self._on_global_model(msg)
        if isinstance(msg, RoundComplete):
            self.round_history.append(msg)
            return []
        if isinstance(msg, Shutdown):
            self.done = True
            self.phase = "idle"
            return []
        if isinstance(msg, ErrorMsg):
            raise ProtocolError(msg.code, msg.detail)
        return [ErrorMsg("unexpected_message", type(msg).__name__)]

    def _on_provisioned(self, msg: Provisioned) -> list[FlMessage]:
        self.client_id = msg.client_id
        self.session_key = msg.session_key
        shard = self.config.shard_provider(msg.client_id)
        self._train_records, holdout = split_holdout(shard, self.config.settings.holdout_frac)
        mask_rng = Rng(self.config.batch_seed).split(msg.client_id).split(LOCAL_VAL_MASK_KEY)
        self._val_batches = prepare_eval_batches(
            holdout, self.config.vocab, self.config.settings, mask_rng
        )
        self.phase = "idle"
        return []

    def _on_global_model(self, msg: GlobalModel) -> list[FlMessage]:
        if self.client_id is None:
            raise ProtocolError("not_provisioned", "global model before provisioning")
        if not verify_auth(msg, self.session_key):
            raise ProtocolError("auth_failed", "global model failed tag verification")
        self.phase = "training"
        try:
            if self._model is None:
                self._model = build_model(self.config.model_config, self.config.mode, msg.params)
            else:
                self._model.load_params(msg.params)
        except UsageError as exc:
            self.phase = "idle"
            return [sign(ErrorMsg("manifest_mismatch", str(exc)), self.session_key)]

        settings = self.config.settings
        if self._optimizer is None or settings.reset_optimizer:
            self._optimizer = Adam(self._model.params, lr=msg.lr)
        round_rng = Rng(self.config.batch_seed).split(self.client_id).split(msg.round)
        train_loss, train_top1 = train_epochs(
            self._model,
            self._optimizer,
            self._train_records,
            self.config.vocab,
            settings,
            round_rng,
            epochs=msg.local_epochs,
        )
        val_loss, val_top1 = evaluate(self._model, self._val_batches)
        metrics = {
            "train_loss": train_loss,
            "train_top1_accuracy": train_top1,
            "val_loss": val_loss,
            "val_top1_accuracy": val_top1,
        }
        update = LocalUpdate(
            client_id=self.client_id,
            round=msg.round,
            params=self._model.export_params().quantize32(),
            n_samples=len(self._train_records),
            local_metrics=metrics,
        )
        self.phase = "uploading"
        out = [sign(update, self.session_key)]
        self.phase = "idle"
        return out
