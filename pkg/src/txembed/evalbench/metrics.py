"""Precision, recall and F-score with phishing (+1) as the positive class."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    fscore: float
    tp: int
    fp: int
    fn: int
    tn: int
    precision_undefined: bool = False
    recall_undefined: bool = False


def metrics_from_labels(pred, truth) -> Metrics:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth != 1)))
    fn = int(np.sum((pred != 1) & (truth == 1)))
    tn = int(pred.size - tp - fp - fn)
    p_undef = tp + fp == 0
    r_undef = tp + fn == 0
    precision = 0.0 if p_undef else tp / (tp + fp)
    recall = 0.0 if r_undef else tp / (tp + fn)
    f = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    return Metrics(precision, recall, f, tp, fp, fn, tn, p_undef, r_undef)


def compute_metrics(predictions, truth: Mapping[str, int]) -> Metrics:
    """Score ``predictions`` (mapping id -> label, or Prediction objects) against ``truth``."""
    if not isinstance(predictions, Mapping):
        predictions = {p.node_id: p.label for p in predictions}
    if set(predictions) != set(truth):
        missing = set(truth) ^ set(predictions)
        raise KeyError(f"prediction/truth id sets differ ({len(missing)} ids)")
    ids = sorted(truth)
    return metrics_from_labels([predictions[i] for i in ids], [truth[i] for i in ids])
