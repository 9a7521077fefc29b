"""Supervised event abstraction: train a linear-chain CRF on annotated XES logs and
use it to label and collapse unannotated ones. Logs are passed around as XES text."""

import json

from ._evabs import (
    EvabsError,
    Model,
    ModelFormatError,
    ParseError,
    collapse,
    event_labels,
    fit,
    generate,
    levenshtein_distance,
    levenshtein_similarity,
    run_labels,
    strip_labels,
)
from ._evabs import evaluate_json as _evaluate_json


def evaluate(xes, protocol="loocv", folds=10, fold_seed=0, mode="events", l1=0.1, threads=1):
    """Cross-validation report as a dict (see the JSON written by `evabs evaluate --report`)."""
    return json.loads(_evaluate_json(xes, protocol, folds, fold_seed, mode, l1, threads))


__all__ = [
    "EvabsError",
    "Model",
    "ModelFormatError",
    "ParseError",
    "collapse",
    "evaluate",
    "event_labels",
    "fit",
    "generate",
    "levenshtein_distance",
    "levenshtein_similarity",
    "run_labels",
    "strip_labels",
]
