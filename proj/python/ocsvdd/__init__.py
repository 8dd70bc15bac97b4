"""Deep SVDD and Meta-SVDD one-class detectors."""

from ._core import (
    ConfigError,
    DimensionError,
    EncoderConfig,
    FormatError,
    InputError,
    LooConfig,
    MetaConfig,
    MetaModel,
    NumericError,
    OcsvddError,
    ParseError,
    SvddModel,
    SynthConfig,
    TaskDataset,
    TrainConfig,
    adapt_and_score,
    auc,
    eval_loo,
    generate_synthetic,
    gradient_fidelity,
    load_task,
    load_task_dir,
    meta_train,
    train_ocsvdd,
    write_synthetic,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "EncoderConfig",
    "FormatError",
    "InputError",
    "LooConfig",
    "MetaConfig",
    "MetaModel",
    "NumericError",
    "OcsvddError",
    "ParseError",
    "SvddModel",
    "SynthConfig",
    "TaskDataset",
    "TrainConfig",
    "adapt_and_score",
    "auc",
    "eval_loo",
    "generate_synthetic",
    "gradient_fidelity",
    "load_task",
    "load_task_dir",
    "meta_train",
    "train_ocsvdd",
    "write_synthetic",
]
