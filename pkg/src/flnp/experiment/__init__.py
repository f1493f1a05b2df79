from .config import DataConfig, ExperimentConfig, Seeds, load_config
from .metrics import MetricsRecord, emit_metrics, parse_metrics
from .runner import RunResult, build_dataset, run_experiment

__all__ = [
    "DataConfig",
    "ExperimentConfig",
    "Seeds",
    "load_config",
    "MetricsRecord",
    "emit_metrics",
    "parse_metrics",
    "RunResult",
    "build_dataset",
    "run_experiment",
]
