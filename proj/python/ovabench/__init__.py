"""Softmax and one-vs-all probability heads on a 2D toy task."""

import json

from ._core import (
    HEADS,
    Model,
    NumericError,
    ShapeError,
    auroc_auprc,
    boxplot_stats,
    corrupt,
    ece,
    gen_ood,
    gen_ring,
    logit_gradient,
    loss,
    pca2,
    probabilities,
    ring_means,
)
from . import _core


def default_config():
    return json.loads(_core.default_config())


def train(config, x, y):
    """Returns (Model, final train accuracy)."""
    return _core.train(json.dumps(config), x, y)


def run_all(config):
    """Runs the full pipeline; returns (ok, error message)."""
    return _core.run_all(json.dumps(config))


__all__ = [
    "HEADS",
    "Model",
    "NumericError",
    "ShapeError",
    "auroc_auprc",
    "boxplot_stats",
    "corrupt",
    "default_config",
    "ece",
    "gen_ood",
    "gen_ring",
    "logit_gradient",
    "loss",
    "pca2",
    "probabilities",
    "ring_means",
    "run_all",
    "train",
]
