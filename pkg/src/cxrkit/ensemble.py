"""Projection-aware logit ensembling.

Members are abstract logit sources (files or in-process models). This module
averages them, grid-searches convex weights per projection, routes samples by
predicted projection, and fuses the two branch ensembles into one 30-class
score matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import metrics
from .losses import sigmoid
from .validation import as_matrix, as_vector, check_binary, check_same_shape

AP_PA = "AP_PA"
LATERAL = "LATERAL"
PROJECTIONS = (AP_PA, LATERAL)
ROUTED_CLASS_COUNT = 30

GRID_OBJECTIVES = ("map", "mauc", "neg_bce")


@dataclass
class EnsembleWeights:
    """Convex member weights, one vector per projection."""

    ap_pa: np.ndarray
    lateral: np.ndarray
    members: list[str] = field(default_factory=list)
    step: float = 0.05
    objective: str = "map"

    def __post_init__(self):
        self.ap_pa = _check_simplex(as_vector(self.ap_pa, "ap_pa weights"), tol=1e-9)
        self.lateral = _check_simplex(
            as_vector(self.lateral, "lateral weights"), tol=1e-9
        )

    def for_projection(self, tag: str) -> np.ndarray:
        if tag == AP_PA:
            return self.ap_pa
        if tag == LATERAL:
            return self.lateral
        raise ValueError(f"unknown projection tag {tag!r}")

    def to_dict(self) -> dict:
        return {
            "ap_pa": self.ap_pa.tolist(),
            "lateral": self.lateral.tolist(),
            "members": list(self.members),
            "step": self.step,
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleWeights":
        if not isinstance(doc, dict) or "ap_pa" not in doc or "lateral" not in doc:
            raise ValueError("weights document needs 'ap_pa' and 'lateral' vectors")
        return cls(
            ap_pa=np.asarray(doc["ap_pa"], dtype=np.float64),
            lateral=np.asarray(doc["lateral"], dtype=np.float64),
            members=list(doc.get("members", [])),
            step=float(doc.get("step", 0.05)),
            objective=str(doc.get("objective", "map")),
        )


def _check_simplex(w: np.ndarray, tol: float) -> np.ndarray:
    if w.size == 0:
        raise ValueError("weight vector must be non-empty")
    if (w < -tol).any() or abs(float(w.sum()) - 1.0) > tol:
        raise ValueError("weights must be nonnegative and sum to 1")
    return w


def _check_members(member_logits) -> list[np.ndarray]:
    mats = [as_matrix(m, f"member {i}", allow_empty=False) for i, m in enumerate(member_logits)]
    if not mats:
        raise ValueError("member list must be non-empty")
    for i, m in enumerate(mats[1:], start=1):
        check_same_shape(mats[0], m, "member 0", f"member {i}")
    return mats


def weighted_logit_average(member_logits, weights) -> np.ndarray:
    """Convex combination sum_m w_m * L_m of same-shape logit matrices."""
    mats = _check_members(member_logits)
    w = as_vector(weights, "weights")
    if w.size != len(mats):
        raise ValueError("one weight per member required")
    _check_simplex(w, tol=1e-6)
    out = w[0] * mats[0]
    for wm, m in zip(w[1:], mats[1:]):
        out = out + wm * m
    return out


def tta_average(view_logits) -> np.ndarray:
    """Uniform mean over test-time-augmentation views."""
    mats = _check_members(view_logits)
    out = mats[0].copy()
    for m in mats[1:]:
        out += m
    return out / len(mats)


def simplex_lattice(n_members: int, step: float):
    """All weight vectors on the simplex lattice with the given spacing.

    Yields float vectors in lexicographic order of their integer lattice
    coordinates. ``step`` must evenly divide 1.
    """
    if n_members < 1:
        raise ValueError("need at least one member")
    if step <= 0 or step > 1:
        raise ValueError("step must lie in (0, 1]")
    ticks = 1.0 / step
    if abs(ticks - round(ticks)) > 1e-9:
        raise ValueError("step must evenly divide 1")
    ticks = int(round(ticks))

    def compositions(remaining: int, slots: int):
        if slots == 1:
            yield (remaining,)
            return
        for first in range(remaining + 1):
            for rest in compositions(remaining - first, slots - 1):
                yield (first,) + rest

    for counts in compositions(ticks, n_members):
        yield np.asarray(counts, dtype=np.float64) / ticks


def _grid_objective(objective: str):
    if objective == "map":
        return lambda avg, labels: metrics.mean_ap(avg, labels)[0]
    if objective == "mauc":
        return lambda avg, labels: metrics.mean_auc(avg, labels)[0]
    if objective == "neg_bce":
        return lambda avg, labels: -metrics.log_loss(sigmoid(avg), labels)
    raise ValueError(f"objective must be one of {GRID_OBJECTIVES}")


def grid_search_weights(member_logits, labels, step: float = 0.05,
                        objective: str = "map"):
    """Exhaustive simplex-lattice search for the best member weighting.

    Evaluates the objective on the weighted logit average at every lattice
    point and returns ``(weights, best_score)``. Ties keep the weight vector
    whose integer lattice coordinates are lexicographically smallest.
    """
    mats = _check_members(member_logits)
    labels = as_matrix(labels, "labels", allow_empty=False)
    check_same_shape(mats[0], labels, "member 0", "labels")
    check_binary(labels)
    score_fn = _grid_objective(objective)

    best_weights = None
    best_score = -np.inf
    for weights in simplex_lattice(len(mats), step):
        score = score_fn(weighted_logit_average(mats, weights), labels)
        if score > best_score:
            best_score = score
            best_weights = weights
    return best_weights, float(best_score)


@dataclass
class LinearRouter:
    """Logistic projection classifier: P(AP_PA) = sigmoid(w . x + b)."""

    weights: np.ndarray
    bias: float
    threshold: float = 0.5

    def __post_init__(self):
        self.weights = as_vector(self.weights, "router weights")
        if not np.isfinite(self.bias):
            raise ValueError("router bias must be finite")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("router threshold must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearRouter":
        if not isinstance(doc, dict) or "weights" not in doc or "bias" not in doc:
            raise ValueError("router document needs 'weights' and 'bias'")
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            threshold=float(doc.get("threshold", 0.5)),
        )


def predict_projection(features, router: LinearRouter):
    """Per-sample projection tag and AP/PA probability.

    Samples at or above the threshold are tagged AP_PA (the >= convention
    applies at the boundary).
    """
    x = as_matrix(features, "features", allow_empty=False)
    if x.shape[1] != router.weights.size:
        raise ValueError(
            f"feature width {x.shape[1]} does not match router width {router.weights.size}"
        )
    probs = sigmoid(x @ router.weights + router.bias)
    tags = np.where(probs >= router.threshold, AP_PA, LATERAL)
    return tags, probs


def train_linear_router(features, projection_labels, epochs: int = 300,
                        lr: float = 0.5, seed: int = 0,
                        threshold: float = 0.5) -> LinearRouter:
    """Fit the logistic router by full-batch gradient descent.

    Labels are binary with 1 = AP_PA. Deterministic: zero initialization plus
    a fixed update order; the seed is accepted for interface stability and
    reserved for randomized initialization variants.
    """
    x = as_matrix(features, "features", allow_empty=False)
    y = as_vector(projection_labels, "projection_labels")
    if y.size != x.shape[0]:
        raise ValueError("one projection label per sample required")
    check_binary(y, "projection_labels")
    if y.min() == y.max():
        raise ValueError("projection labels contain a single class")
    del seed  # reserved; current initialization is deterministic without it

    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    for _ in range(epochs):
        p = sigmoid(x @ w + b)
        err = p - y
        w -= lr * (x.T @ err) / n
        b -= lr * float(err.mean())
    return LinearRouter(weights=w, bias=b, threshold=threshold)


class ProjectionRouter(BaseEstimator, ClassifierMixin):
    """Scikit-learn estimator facade over the logistic projection router.

    ``fit(X, y)`` takes binary labels (1 = AP_PA); ``predict`` returns 0/1 and
    ``predict_tags`` the projection tag strings.
    """

    def __init__(self, epochs: int = 300, lr: float = 0.5, threshold: float = 0.5,
                 seed: int = 0):
        self.epochs = epochs
        self.lr = lr
        self.threshold = threshold
        self.seed = seed

    def fit(self, X, y):
        self.router_ = train_linear_router(
            X, y, epochs=self.epochs, lr=self.lr, seed=self.seed,
            threshold=self.threshold,
        )
        self.classes_ = np.array([0.0, 1.0])
        return self

    def predict_proba(self, X):
        _, p = predict_projection(X, self.router_)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        tags, _ = predict_projection(X, self.router_)
        return (tags == AP_PA).astype(np.float64)

    def predict_tags(self, X):
        tags, _ = predict_projection(X, self.router_)
        return tags


def routed_predict(branch_member_logits: dict, router_decisions,
                   weights: EnsembleWeights) -> np.ndarray:
    """Fuse the two projection ensembles along router decisions.

    ``branch_member_logits`` maps each projection tag to that branch's member
    list; every member is an aligned n x 30 matrix. Sample i's output row
    comes from the branch selected by ``router_decisions[i]``.
    """
    decisions = np.asarray(router_decisions)
    for tag in PROJECTIONS:
        if tag not in branch_member_logits:
            raise ValueError(f"missing branch logits for projection {tag}")
    branch_avgs = {}
    n_rows = None
    for tag in PROJECTIONS:
        avg = weighted_logit_average(
            branch_member_logits[tag], weights.for_projection(tag)
        )
        if avg.shape[1] != ROUTED_CLASS_COUNT:
            raise ValueError(
                f"routed prediction requires {ROUTED_CLASS_COUNT} classes, got {avg.shape[1]}"
            )
        if n_rows is None:
            n_rows = avg.shape[0]
        elif avg.shape[0] != n_rows:
            raise ValueError("branch logit sets are row-misaligned")
        branch_avgs[tag] = avg
    if decisions.shape != (n_rows,):
        raise ValueError("one routing decision per sample required")
    unknown = set(np.unique(decisions)) - set(PROJECTIONS)
    if unknown:
        raise ValueError(f"unknown projection tags {sorted(unknown)}")
    mask = (decisions == AP_PA)[:, None]
    return np.where(mask, branch_avgs[AP_PA], branch_avgs[LATERAL])


class LogitEnsemble(BaseEstimator):
    """Estimator facade over the simplex grid search.

    ``fit(member_logits, labels)`` stores the best weights for one projection;
    ``transform`` averages new member logits with them.
    """

    def __init__(self, step: float = 0.05, objective: str = "map"):
        self.step = step
        self.objective = objective

    def fit(self, member_logits, labels):
        self.weights_, self.best_score_ = grid_search_weights(
            member_logits, labels, step=self.step, objective=self.objective
        )
        return self

    def transform(self, member_logits):
        return weighted_logit_average(member_logits, self.weights_)
