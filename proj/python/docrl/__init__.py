"""Python bindings for the docrl toolkit."""

import sys

from ._docrl import (
    BpeModel,
    ConfigError,
    DataError,
    __version__,
    alpha_sweep_files,
    bbox_reward,
    convert,
    deflate_size,
    detect_loops,
    evaluate_corpus,
    iou,
    match_boxes,
    normalize_document,
    parse_page,
    prune_vocab,
    run_cli,
    sanitize,
    score_rollout,
    soup_files,
    task_arithmetic_files,
    train_bpe,
    validate_math,
)

__all__ = [
    "BpeModel",
    "ConfigError",
    "DataError",
    "__version__",
    "alpha_sweep_files",
    "bbox_reward",
    "convert",
    "deflate_size",
    "detect_loops",
    "evaluate_corpus",
    "iou",
    "match_boxes",
    "normalize_document",
    "parse_page",
    "prune_vocab",
    "run_cli",
    "sanitize",
    "score_rollout",
    "soup_files",
    "task_arithmetic_files",
    "train_bpe",
    "validate_math",
]


def main() -> int:
    """Console entry point; same flags as the native `docrl` binary."""
    return run_cli(sys.argv[1:])
