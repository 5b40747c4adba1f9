"""Multi-label evaluation: per-class AP/AUC, calibration error, BCE, and F1.

Ranking metrics use an explicit deterministic tie rule (stable descending
sort, ties resolved by ascending original index) so results are identical
across platforms and can be checked against brute-force oracles exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import sigmoid
from .validation import (
    as_matrix,
    as_vector,
    check_binary,
    check_probabilities,
    check_same_shape,
)


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value for the given labels."""


def _check_pair(scores, labels):
    scores = as_vector(scores, "scores")
    labels = as_vector(labels, "labels")
    if scores.size == 0:
        raise ValueError("empty input")
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    check_binary(labels)
    return scores, labels


def average_precision(scores, labels) -> float:
    """AP with ties broken by ascending original index.

    AP = (1/P) * sum over positive ranks k of precision@k. The final sum uses
    exactly-rounded summation so it is reproducible bit-for-bit.
    """
    scores, labels = _check_pair(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    cum_hits = np.cumsum(hits)
    ranks = np.arange(1, scores.size + 1)
    terms = (cum_hits[hits == 1.0] / ranks[hits == 1.0]).tolist()
    return math.fsum(terms) / n_pos


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
    correctly, ties counted 0.5. Computed via midranks; exact in float64."""
    scores, labels = _check_pair(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined without both classes")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1.0].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _per_class(scores, labels, metric):
    scores = as_matrix(scores, "scores", allow_empty=False)
    labels = as_matrix(labels, "labels", allow_empty=False)
    check_same_shape(scores, labels, "scores", "labels")
    check_binary(labels)
    values = np.full(scores.shape[1], np.nan)
    skipped: list[int] = []
    for k in range(scores.shape[1]):
        try:
            values[k] = metric(scores[:, k], labels[:, k])
        except UndefinedMetricError:
            skipped.append(k)
    return values, skipped


def mean_ap(scores, labels):
    """Macro mean AP over classes with at least one positive.

    Returns ``(map, per_class, skipped)``; classes without positives are
    skipped and reported. Raises if every class is skipped.
    """
    per_class, skipped = _per_class(scores, labels, average_precision)
    defined = per_class[~np.isnan(per_class)]
    if defined.size == 0:
        raise UndefinedMetricError("all classes skipped: no positive labels")
    return float(defined.mean()), per_class, skipped


def mean_auc(scores, labels):
    """Macro mean AUC over classes with both positives and negatives."""
    per_class, skipped = _per_class(scores, labels, roc_auc)
    defined = per_class[~np.isnan(per_class)]
    if defined.size == 0:
        raise UndefinedMetricError("all classes skipped: single-class labels")
    return float(defined.mean()), per_class, skipped


def ece(probs, labels, n_bins: int = 15) -> float:
    """Expected calibration error over equal-width bins.

    Bin index is ``floor(p * n_bins)`` clamped to the last bin, so p = 1.0
    lands in the top bin; empty bins contribute nothing.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    probs = as_vector(probs, "probs")
    labels = as_vector(labels, "labels")
    if probs.size == 0:
        raise ValueError("empty input")
    if probs.shape != labels.shape:
        raise ValueError("probs and labels must have the same length")
    check_probabilities(probs, "probs")
    check_binary(labels)
    idx = np.minimum((probs * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.float64)
    conf_sums = np.bincount(idx, weights=probs, minlength=n_bins)
    pos_sums = np.bincount(idx, weights=labels, minlength=n_bins)
    total = 0.0
    n = probs.size
    for b in range(n_bins):
        if counts[b] > 0:
            gap = abs(conf_sums[b] / counts[b] - pos_sums[b] / counts[b])
            total += counts[b] / n * gap
    return total


def mece(probs, labels, n_bins: int = 15):
    """Mean per-class ECE over every class (ECE is defined even without
    positives, so nothing is skipped). Returns ``(mece, per_class)``."""
    probs = as_matrix(probs, "probs", allow_empty=False)
    labels = as_matrix(labels, "labels", allow_empty=False)
    check_same_shape(probs, labels, "probs", "labels")
    per_class = np.array(
        [ece(probs[:, k], labels[:, k], n_bins) for k in range(probs.shape[1])]
    )
    return float(per_class.mean()), per_class


def macro_f1(scores, labels, threshold: float = 0.5) -> float:
    """Macro F1 at a fixed probability threshold (prediction = score >= t).

    Per-class F1 is 0 whenever precision + recall is 0, including classes
    with no positives and no predicted positives.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    scores = as_matrix(scores, "scores", allow_empty=False)
    labels = as_matrix(labels, "labels", allow_empty=False)
    check_same_shape(scores, labels, "scores", "labels")
    check_binary(labels)
    pred = scores >= threshold
    pos = labels == 1.0
    f1s = []
    for k in range(scores.shape[1]):
        tp = float(np.sum(pred[:, k] & pos[:, k]))
        fp = float(np.sum(pred[:, k] & ~pos[:, k]))
        fn = float(np.sum(~pred[:, k] & pos[:, k]))
        denom = 2.0 * tp + fp + fn
        f1s.append(2.0 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(f1s))


def log_loss(probs, labels, eps: float = 1e-7) -> float:
    """Mean binary cross-entropy of probabilities (clamped into [eps, 1-eps])."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    p = np.clip(probs, eps, 1.0 - eps)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


@dataclass(frozen=True)
class EvalConfig:
    n_bins: int = 15
    f1_threshold: float = 0.5
    scores_are: str = "probabilities"  # or "logits"

    def __post_init__(self):
        if self.scores_are not in ("probabilities", "logits"):
            raise ValueError("scores_are must be 'probabilities' or 'logits'")


@dataclass
class EvalReport:
    """Aggregated metric surface for one score/label matrix pair."""

    per_class_ap: np.ndarray
    map: float
    per_class_auc: np.ndarray
    mauc: float
    per_class_ece: np.ndarray
    mece: float
    bce: float
    macro_f1: float
    skipped_classes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        def _clean(arr):
            return [None if math.isnan(v) else v for v in arr.tolist()]

        return {
            "map": self.map,
            "mauc": self.mauc,
            "mece": self.mece,
            "bce": self.bce,
            "macro_f1": self.macro_f1,
            "per_class_ap": _clean(self.per_class_ap),
            "per_class_auc": _clean(self.per_class_auc),
            "per_class_ece": self.per_class_ece.tolist(),
            "skipped_classes": list(self.skipped_classes),
        }


def evaluate(scores, labels, config: EvalConfig = EvalConfig()) -> EvalReport:
    """One-pass assembly of the full metric surface.

    Ranking metrics (AP, AUC) run on raw scores; calibration, BCE, and F1 run
    on probabilities (the sigmoid of the scores when ``scores_are='logits'``).
    """
    scores = as_matrix(scores, "scores", allow_empty=False)
    labels = as_matrix(labels, "labels", allow_empty=False)
    check_same_shape(scores, labels, "scores", "labels")
    check_binary(labels)
    probs = sigmoid(scores) if config.scores_are == "logits" else scores
    check_probabilities(probs, "scores")

    map_value, per_class_ap, skipped = mean_ap(scores, labels)
    mauc_value, per_class_auc, _ = mean_auc(scores, labels)
    mece_value, per_class_ece = mece(probs, labels, config.n_bins)
    return EvalReport(
        per_class_ap=per_class_ap,
        map=map_value,
        per_class_auc=per_class_auc,
        mauc=mauc_value,
        per_class_ece=per_class_ece,
        mece=mece_value,
        bce=log_loss(probs, labels),
        macro_f1=macro_f1(probs, labels, config.f1_threshold),
        skipped_classes=skipped,
    )
