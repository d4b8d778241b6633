"""CLI utilities for fusedet."""

from .args import DEFAULT_CONFIG, SUBCOMMANDS, build_parser, init_config, parse_args
from .display import (
    ablation_table,
    console,
    metrics_table,
    selftest_table,
    show_dataset,
    show_training,
)

__all__ = [
    "parse_args",
    "build_parser",
    "init_config",
    "DEFAULT_CONFIG",
    "SUBCOMMANDS",
    "console",
    "metrics_table",
    "ablation_table",
    "selftest_table",
    "show_dataset",
    "show_training",
]
