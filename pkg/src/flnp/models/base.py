"""Shared model machinery: manifests, weight init, export/load."""

from __future__ import annotations

import numpy as np

from ..params import ParameterSet
from ..rng import Rng
from ..tensor import Tensor, UsageError
from .config import ConfigError, ModelConfig

EMBED_STD = 0.02

# init kinds: "weight" uniform(+-1/sqrt(fan_in)), "embed" normal(0, 0.02),
# "bias" zeros, "gain" ones
ParamSpec = tuple[str, tuple[int, ...], str]


def init_array(spec: ParamSpec, rng: Rng) -> np.ndarray:
    name, shape, kind = spec
    if kind == "weight":
        bound = 1.0 / float(np.sqrt(shape[0]))
        return rng.uniform(-bound, bound, shape)
    if kind == "embed":
        return rng.normal(0.0, EMBED_STD, shape)
    if kind == "bias":
        return np.zeros(shape, dtype=np.float64)
    if kind == "gain":
        return np.ones(shape, dtype=np.float64)
    raise ValueError(f"unknown init kind '{kind}' for {name}")


class ModelBase:
    """Owns a config, a mode and the named parameter tensors.

    An instance is confined to one execution context; cloning a model
    means exporting and re-loading its ParameterSet.
    """

    def __init__(self, config: ModelConfig, mode: str, params: dict[str, Tensor]) -> None:
        self.config = config
        self.mode = mode
        self.params = params

    def param_specs(self) -> list[ParamSpec]:
        raise NotImplementedError

    def manifest(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        return tuple((name, shape) for name, shape, _ in self.param_specs())

    def export_params(self) -> ParameterSet:
        return ParameterSet((name, t.data) for name, t in self.params.items())

    def load_params(self, ps: ParameterSet) -> None:
        """Replace all weights; names and shapes must match the manifest."""
        expected = self.manifest()
        if ps.manifest() != expected:
            raise UsageError(
                f"parameter set manifest does not match model "
                f"({len(ps.manifest())} vs {len(expected)} entries)"
            )
        for name, _ in expected:
            self.params[name].data = np.array(ps[name], dtype=np.float64, copy=True)

    def named_parameters(self) -> dict[str, Tensor]:
        return self.params


def _materialize(specs: list[ParamSpec], seed: int) -> dict[str, Tensor]:
    rng = Rng(seed)
    return {
        name: Tensor(init_array((name, shape, kind), rng), requires_grad=True)
        for name, shape, kind in specs
    }


def init_model(config: ModelConfig, seed: int, mode: str = "classify"):
    """Fresh model with seed-deterministic weights drawn in manifest order."""
    from .lstm import LstmClassifier
    from .transformer import TransformerModel

    if mode not in ("mlm", "classify"):
        raise ConfigError(f"unknown mode '{mode}'")
    if config.kind == "lstm":
        if mode == "mlm":
            raise ConfigError("the LSTM model has no MLM head; it only classifies")
        specs = LstmClassifier.specs_for(config)
        return LstmClassifier(config, mode, _materialize(specs, seed))
    specs = TransformerModel.specs_for(config, mode)
    return TransformerModel(config, mode, _materialize(specs, seed))


def build_model(config: ModelConfig, mode: str, ps: ParameterSet):
    """Model wrapping an existing ParameterSet (no random init)."""
    model = init_model(config, seed=0, mode=mode)
    model.load_params(ps)
    return model
