from .config import ConfigError, ModelConfig, PRESETS, preset
from .base import ModelBase, init_model, build_model
from .transformer import TransformerModel, transformer_manifest
from .lstm import LstmClassifier, lstm_manifest

__all__ = [
    "ConfigError",
    "ModelConfig",
    "PRESETS",
    "preset",
    "ModelBase",
    "init_model",
    "build_model",
    "TransformerModel",
    "transformer_manifest",
    "LstmClassifier",
    "lstm_manifest",
]
