"""Powerprop training, magnitude pruning and continual learning.

Thin wrapper around the C++ core; see the project README for the full CLI.
"""

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    NumericalError,
    appendix_a,
    continual,
    default_keep_schedule,
    gen_data,
    git_describe,
    grad_scale,
    infer_task,
    magnitude_mask_bits,
    matmul,
    preset,
    preset_names,
    prune_sweep,
    psi,
    psi_inverse,
    sample_gaussian,
    topk_indices_by_magnitude,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "appendix_a",
    "continual",
    "default_keep_schedule",
    "gen_data",
    "git_describe",
    "grad_scale",
    "infer_task",
    "magnitude_mask_bits",
    "matmul",
    "preset",
    "preset_names",
    "prune_sweep",
    "psi",
    "psi_inverse",
    "sample_gaussian",
    "topk_indices_by_magnitude",
    "train",
]
