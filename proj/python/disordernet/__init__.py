"""Skin lesion patch classifier, training, evaluation and sliding-window scanner."""

from ._core import (
    PATCH_SIZE,
    ConfigError,
    DivergenceError,
    Error,
    FormatError,
    IoError,
    LoadError,
    Network,
    ParamError,
    PatchDataset,
    ShapeError,
    TrainConfig,
    build_disordernet,
    confusion,
    load_dataset,
    load_model,
    report,
    roc,
    run_cli,
    scan,
    score_dataset,
    split,
    synth_face,
    synth_patches,
    train,
    write_dataset,
)

__all__ = [
    "PATCH_SIZE",
    "ConfigError",
    "DivergenceError",
    "Error",
    "FormatError",
    "IoError",
    "LoadError",
    "Network",
    "ParamError",
    "PatchDataset",
    "ShapeError",
    "TrainConfig",
    "build_disordernet",
    "confusion",
    "load_dataset",
    "load_model",
    "report",
    "roc",
    "run_cli",
    "scan",
    "score_dataset",
    "split",
    "synth_face",
    "synth_patches",
    "train",
    "write_dataset",
]
