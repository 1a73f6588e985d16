"""Pool-based active learning with an LLM as the labeling oracle."""

import json
import os

from ._alm import (
    AlmError,
    ValidationError,
    build_chat_request,
    entropy,
    hash_embed,
    kfold,
    load_embeddings,
    make_blobs,
    metrics,
    parse_label,
    preset_template,
)
from . import _alm

__all__ = [
    "AlmError",
    "ValidationError",
    "build_chat_request",
    "canonical_config",
    "entropy",
    "hash_embed",
    "kfold",
    "load_embeddings",
    "make_blobs",
    "metrics",
    "parse_label",
    "preset_template",
    "run",
]


def canonical_config(config):
    """Validated config dict with defaults filled in."""
    return json.loads(_alm.canonical_config(json.dumps(config)))


def run(config, base=".", force=False):
    """Run an experiment from a config dict or a path to a config file; returns the summary."""
    if isinstance(config, (str, os.PathLike)):
        path = os.fspath(config)
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
    return json.loads(_alm.run_experiment(json.dumps(config), os.fspath(base), force))
