"""Dual-branch training engine.

One pair of projection heads feeds two objectives: a symmetric image-text
contrastive loss over per-sample synthesized reports, and an asymmetric
multi-label loss over cosine similarities to per-class text projections. The
asymmetric branch owns only a scale and bias on those similarities, so it
shapes the shared embedding during training and costs nothing at inference.

Also here: AdamW with decoupled weight decay, EMA shadow weights, cosine
annealing, per-epoch description shuffling, and the leak-free proxy-validation
split used to score zero-shot generalization without target labels.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from . import metrics
from .losses import AslParams, asl_loss, contrastive_loss, sigmoid
from .numerics import (
    SeededRng,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    permutation,
)
from .validation import as_matrix, as_vector, check_binary, check_same_shape
from .zeroshot import TextStubEmbedder

NORMAL_STUDY_TEXT = "no acute findings normal study"
PROXY_CLASS_COUNT = 30
PROXY_HELDOUT_SIZE = 6

PARAM_NAMES = ("w_img", "w_txt", "log_temperature", "asl_scale", "asl_bias")


@dataclass
class DualBranchModel:
    """Shared projection heads plus the loss-only calibration scalars.

    ``asl_scale`` and ``asl_bias`` appear only inside the training loss;
    inference uses ``w_img``, ``w_txt``, and the temperature alone.
    """

    w_img: np.ndarray
    w_txt: np.ndarray
    log_temperature: float = math.log(0.07)
    asl_scale: float = 5.0
    asl_bias: float = -2.0

    def __post_init__(self):
        self.w_img = as_matrix(self.w_img, "w_img", allow_empty=False)
        self.w_txt = as_matrix(self.w_txt, "w_txt", allow_empty=False)
        if self.w_img.shape[1] != self.w_txt.shape[1]:
            raise ValueError("image and text heads must share the projection dim")
        for name in ("log_temperature", "asl_scale", "asl_bias"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def temperature(self) -> float:
        return math.exp(self.log_temperature)

    @classmethod
    def initialize(cls, d_img: int, d_txt: int, d_proj: int, seed: int = 0,
                   init_scale: float = 0.0, log_temperature: float = math.log(0.07),
                   asl_scale: float = 5.0, asl_bias: float = -2.0) -> "DualBranchModel":
        rng = SeededRng(seed)
        w_img = np.eye(d_img, d_proj)
        w_txt = np.eye(d_txt, d_proj)
        if init_scale > 0:
            w_img = w_img + init_scale * rng.normal((d_img, d_proj))
            w_txt = w_txt + init_scale * rng.normal((d_txt, d_proj))
        return cls(w_img=w_img, w_txt=w_txt, log_temperature=log_temperature,
                   asl_scale=asl_scale, asl_bias=asl_bias)

    def param_dict(self) -> dict[str, np.ndarray]:
        return {
            "w_img": self.w_img.copy(),
            "w_txt": self.w_txt.copy(),
            "log_temperature": np.array([[self.log_temperature]]),
            "asl_scale": np.array([[self.asl_scale]]),
            "asl_bias": np.array([[self.asl_bias]]),
        }

    @classmethod
    def from_param_dict(cls, params: dict[str, np.ndarray]) -> "DualBranchModel":
        return cls(
            w_img=np.asarray(params["w_img"], dtype=np.float64),
            w_txt=np.asarray(params["w_txt"], dtype=np.float64),
            log_temperature=float(np.asarray(params["log_temperature"]).ravel()[0]),
            asl_scale=float(np.asarray(params["asl_scale"]).ravel()[0]),
            asl_bias=float(np.asarray(params["asl_bias"]).ravel()[0]),
        )

    def copy(self) -> "DualBranchModel":
        return replace(self, w_img=self.w_img.copy(), w_txt=self.w_txt.copy())


@dataclass(frozen=True)
class TrainConfig:
    """Optimization recipe for the dual-branch trainer."""

    lr_max: float = 1e-6
    lr_min: float = 0.0
    weight_decay: float = 0.01
    ema_decay: float = 0.999
    t_max: int = 7
    alpha: float = 1.5
    asl: AslParams = field(default_factory=AslParams)
    batch_size: int = 64
    epochs: int = 7
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    train_temperature: bool = True

    def __post_init__(self):
        if self.lr_max <= 0:
            raise ValueError("lr_max must be > 0")
        if self.lr_min < 0 or self.lr_min > self.lr_max:
            raise ValueError("lr_min must lie in [0, lr_max]")
        if not (0.0 <= self.ema_decay < 1.0):
            raise ValueError("ema_decay must lie in [0, 1)")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


def shuffle_concat_descriptions(label_row, descriptions, rng: SeededRng,
                                separator: str = "; ",
                                normal_text: str = NORMAL_STUDY_TEXT) -> str:
    """Synthesize one sample's report from its positive-class descriptions.

    The positive classes' descriptions are shuffled with the provided stream
    and joined; all-negative rows yield the fixed normal-study sentence.
    """
    row = as_vector(label_row, "label_row")
    check_binary(row, "label_row")
    positives = np.flatnonzero(row == 1.0)
    if positives.size == 0:
        return normal_text
    texts = []
    for k in positives:
        if k >= len(descriptions) or not descriptions[k]:
            raise ValueError(f"missing description for positive class {int(k)}")
        texts.append(descriptions[k])
    order = permutation(len(texts), rng)
    return separator.join(texts[i] for i in order)


@dataclass
class DualBranchLoss:
    """Combined objective value with per-parameter gradients."""

    value: float
    con_value: float
    asl_value: float
    grads: dict[str, np.ndarray]


def dual_branch_loss(model: DualBranchModel, img_features, txt_features,
                     class_txt_features, labels, alpha: float,
                     asl_params: AslParams = AslParams()) -> DualBranchLoss:
    """Forward pass of the combined objective with analytic gradients.

    The contrastive branch aligns projected image rows with projected
    per-sample text rows; the asymmetric branch classifies each sample against
    the projected class texts through ``sigmoid(scale * cos + bias)``.
    Gradients cover all five parameter groups.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    x = as_matrix(img_features, "img_features", allow_empty=False)
    t = as_matrix(txt_features, "txt_features", allow_empty=False)
    c = as_matrix(class_txt_features, "class_txt_features", allow_empty=False)
    y = as_matrix(labels, "labels", allow_empty=False)
    check_binary(y)
    if x.shape[0] != t.shape[0] or x.shape[0] != y.shape[0]:
        raise ValueError("img_features, txt_features, and labels disagree on batch size")
    if y.shape[1] != c.shape[0]:
        raise ValueError("labels and class_txt_features disagree on class count")
    if x.shape[1] != model.w_img.shape[0] or t.shape[1] != model.w_txt.shape[0]:
        raise ValueError("feature widths do not match the model heads")
    if c.shape[1] != model.w_txt.shape[0]:
        raise ValueError("class text width does not match the text head")

    tau = model.temperature
    scale, bias = model.asl_scale, model.asl_bias

    img_proj = x @ model.w_img
    txt_proj = t @ model.w_txt
    class_proj = c @ model.w_txt

    con = contrastive_loss(img_proj, txt_proj, tau)

    img_unit, img_flags = l2_normalize_rows(img_proj, return_flags=True)
    class_unit, class_flags = l2_normalize_rows(class_proj, return_flags=True)
    cosines = img_unit @ class_unit.T
    logits = scale * cosines + bias
    asl = asl_loss(logits, y, asl_params)
    g_logits = asl.gradient

    # Asymmetric-branch gradients, pre-alpha.
    grad_img_unit = scale * (g_logits @ class_unit)
    grad_class_unit = scale * (g_logits.T @ img_unit)
    grad_img_proj_asl = l2_normalize_rows_backward(
        img_proj, img_unit, grad_img_unit, img_flags
    )
    grad_class_proj = l2_normalize_rows_backward(
        class_proj, class_unit, grad_class_unit, class_flags
    )
    grad_scale = float(np.sum(g_logits * cosines))
    grad_bias = float(np.sum(g_logits))

    grads = {
        "w_img": x.T @ (con.grad_img + alpha * grad_img_proj_asl),
        "w_txt": t.T @ con.grad_txt + alpha * (c.T @ grad_class_proj),
        "log_temperature": np.array([[con.grad_temperature * tau]]),
        "asl_scale": np.array([[alpha * grad_scale]]),
        "asl_bias": np.array([[alpha * grad_bias]]),
    }
    value = con.value + alpha * asl.value
    return DualBranchLoss(value=value, con_value=con.value, asl_value=asl.value,
                          grads=grads)


@dataclass
class AdamWState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_adamw_state(params: dict[str, np.ndarray]) -> AdamWState:
    return AdamWState(
        step=0,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adamw_step(params, grads, state: AdamWState, lr: float,
               weight_decay: float = 0.01, betas=(0.9, 0.999),
               eps: float = 1e-8):
    """One AdamW update with decoupled weight decay.

    Decay multiplies parameters by (1 - lr * wd) separately from the
    bias-corrected adaptive step. Returns ``(new_params, new_state)``.
    """
    beta1, beta2 = betas
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        m = beta1 * state.m[key] + (1.0 - beta1) * g
        v = beta2 * state.v[key] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        decayed = p * (1.0 - lr * weight_decay)
        new_params[key] = decayed - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[key] = m
        new_v[key] = v
    return new_params, AdamWState(step=t, m=new_m, v=new_v)


def cosine_lr(epoch: float, cfg: TrainConfig) -> float:
    """Cosine-annealed learning rate at the given epoch (0 -> lr_max,
    t_max -> lr_min). Epochs past t_max clamp to lr_min with a warning."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if epoch > cfg.t_max:
        warnings.warn("epoch beyond t_max; clamping to lr_min", stacklevel=2)
        return cfg.lr_min
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (
        1.0 + math.cos(math.pi * epoch / cfg.t_max)
    )


def ema_update(shadow, params, decay: float):
    """shadow <- decay * shadow + (1 - decay) * params, per coordinate."""
    if not (0.0 <= decay < 1.0):
        raise ValueError("decay must lie in [0, 1)")
    if isinstance(shadow, dict):
        return {k: decay * shadow[k] + (1.0 - decay) * params[k] for k in shadow}
    return decay * np.asarray(shadow) + (1.0 - decay) * np.asarray(params)


def zero_shot_scores(model: DualBranchModel, img_features,
                     class_txt_features) -> np.ndarray:
    """Cosine similarity of projected images to projected class texts.

    The inference path: only ``w_img``, ``w_txt`` (and, for probabilities, the
    temperature) participate; the asymmetric-branch scalars never do.
    """
    x = as_matrix(img_features, "img_features", allow_empty=False)
    c = as_matrix(class_txt_features, "class_txt_features", allow_empty=False)
    img_unit = l2_normalize_rows(x @ model.w_img)
    class_unit = l2_normalize_rows(c @ model.w_txt)
    return img_unit @ class_unit.T


def zero_shot_probabilities(model: DualBranchModel, img_features,
                            class_txt_features) -> np.ndarray:
    """Sigmoid of the temperature-scaled zero-shot similarities."""
    return sigmoid(zero_shot_scores(model, img_features, class_txt_features)
                   / model.temperature)


@dataclass
class DualBranchDataset:
    """Training inputs (precomputed features, never images) plus an optional
    zero-shot evaluation split scored per epoch."""

    features: np.ndarray
    labels: np.ndarray
    class_descriptions: list[str]
    embedder: TextStubEmbedder
    eval_features: np.ndarray | None = None
    eval_labels: np.ndarray | None = None
    eval_class_descriptions: list[str] | None = None
    normal_text: str = NORMAL_STUDY_TEXT

    def __post_init__(self):
        self.features = as_matrix(self.features, "features", allow_empty=False)
        self.labels = as_matrix(self.labels, "labels", allow_empty=False)
        check_binary(self.labels)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on sample count")
        if len(self.class_descriptions) != self.labels.shape[1]:
            raise ValueError("one description per label column required")
        has_eval = self.eval_features is not None
        if has_eval != (self.eval_labels is not None) or has_eval != (
            self.eval_class_descriptions is not None
        ):
            raise ValueError("eval features, labels, and descriptions go together")
        if has_eval:
            self.eval_features = as_matrix(self.eval_features, "eval_features")
            self.eval_labels = as_matrix(self.eval_labels, "eval_labels")
            check_binary(self.eval_labels)
            if len(self.eval_class_descriptions) != self.eval_labels.shape[1]:
                raise ValueError("one description per eval label column required")

    @property
    def has_eval(self) -> bool:
        return self.eval_features is not None


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss_total: float
    loss_con: float
    loss_asl: float
    val_map: float


@dataclass
class TrainResult:
    model: DualBranchModel
    ema_model: DualBranchModel
    best_model: DualBranchModel
    best_epoch: int
    trace: list[EpochRecord]
    baseline_val_map: float


def _val_map(model: DualBranchModel, dataset: DualBranchDataset,
             eval_class_txt: np.ndarray | None) -> float:
    if not dataset.has_eval:
        return float("nan")
    scores = zero_shot_scores(model, dataset.eval_features, eval_class_txt)
    return metrics.mean_ap(scores, dataset.eval_labels)[0]


def train(model_init: DualBranchModel, dataset: DualBranchDataset,
          cfg: TrainConfig) -> TrainResult:
    """Run the dual-branch recipe; deterministic given ``cfg.seed``.

    Per epoch: one fresh sample permutation, fresh description shuffles for
    every sample, AdamW updates at the cosine-annealed rate, and an EMA update
    after every step. The trace logs per-epoch mean losses and the zero-shot
    validation mAP of the current (raw) model.
    """
    rng = SeededRng(cfg.seed)
    params = model_init.param_dict()
    ema_params = model_init.param_dict()
    opt_state = init_adamw_state(params)

    class_txt = dataset.embedder.embed_many(dataset.class_descriptions)
    eval_class_txt = (
        dataset.embedder.embed_many(dataset.eval_class_descriptions)
        if dataset.has_eval else None
    )
    baseline_val_map = _val_map(model_init, dataset, eval_class_txt)

    best_model = model_init.copy()
    best_epoch = 0
    best_val = baseline_val_map
    trace: list[EpochRecord] = []
    n = dataset.features.shape[0]

    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg)
        order = permutation(n, rng)
        sums = {"total": 0.0, "con": 0.0, "asl": 0.0}
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            texts = [
                shuffle_concat_descriptions(
                    dataset.labels[i], dataset.class_descriptions, rng,
                    normal_text=dataset.normal_text,
                )
                for i in batch
            ]
            txt_features = dataset.embedder.embed_many(texts)
            model = DualBranchModel.from_param_dict(params)
            loss = dual_branch_loss(
                model, dataset.features[batch], txt_features, class_txt,
                dataset.labels[batch], cfg.alpha, cfg.asl,
            )
            grads = loss.grads
            if not cfg.train_temperature:
                grads = dict(grads)
                grads["log_temperature"] = np.zeros((1, 1))
            params, opt_state = adamw_step(
                params, grads, opt_state, lr,
                weight_decay=cfg.weight_decay, betas=cfg.betas, eps=cfg.eps,
            )
            ema_params = ema_update(ema_params, params, cfg.ema_decay)
            sums["total"] += loss.value
            sums["con"] += loss.con_value
            sums["asl"] += loss.asl_value
            n_batches += 1

        current = DualBranchModel.from_param_dict(params)
        val = _val_map(current, dataset, eval_class_txt)
        trace.append(EpochRecord(
            epoch=epoch + 1,
            lr=lr,
            loss_total=sums["total"] / n_batches,
            loss_con=sums["con"] / n_batches,
            loss_asl=sums["asl"] / n_batches,
            val_map=val,
        ))
        if dataset.has_eval and (math.isnan(best_val) or val > best_val):
            best_val = val
            best_model = current.copy()
            best_epoch = epoch + 1

    final = DualBranchModel.from_param_dict(params)
    ema_model = DualBranchModel.from_param_dict(ema_params)
    if not dataset.has_eval:
        best_model, best_epoch = final.copy(), cfg.epochs
    return TrainResult(
        model=final,
        ema_model=ema_model,
        best_model=best_model,
        best_epoch=best_epoch,
        trace=trace,
        baseline_val_map=baseline_val_map,
    )


@dataclass(frozen=True)
class ProxyFoldSpec:
    """One leak-free proxy-validation fold: exactly six held-out classes."""

    group_id: str
    heldout_classes: tuple[int, ...]
    group_label: str = ""

    def __post_init__(self):
        held = tuple(int(k) for k in self.heldout_classes)
        object.__setattr__(self, "heldout_classes", held)
        if len(held) != PROXY_HELDOUT_SIZE or len(set(held)) != PROXY_HELDOUT_SIZE:
            raise ValueError(f"exactly {PROXY_HELDOUT_SIZE} distinct held-out classes required")
        if any(k < 0 or k >= PROXY_CLASS_COUNT for k in held):
            raise ValueError(f"held-out classes must lie in [0, {PROXY_CLASS_COUNT})")

    def retained_classes(self) -> np.ndarray:
        held = set(self.heldout_classes)
        return np.array([k for k in range(PROXY_CLASS_COUNT) if k not in held])

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "heldout_classes": list(self.heldout_classes),
            "group_label": self.group_label,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProxyFoldSpec":
        if not isinstance(doc, dict) or "group_id" not in doc or "heldout_classes" not in doc:
            raise ValueError("fold document needs 'group_id' and 'heldout_classes'")
        return cls(
            group_id=str(doc["group_id"]),
            heldout_classes=tuple(doc["heldout_classes"]),
            group_label=str(doc.get("group_label", "")),
        )


def default_proxy_folds() -> list[ProxyFoldSpec]:
    """Three pairwise-disjoint six-class groups over the 30-class space."""
    return [
        ProxyFoldSpec("A", tuple(range(6, 12)), "Structural Anomalies & Devices"),
        ProxyFoldSpec("B", tuple(range(0, 6)), "High Prevalence Diseases"),
        ProxyFoldSpec("C", tuple(range(24, 30)), "Critical & Rare Conditions"),
    ]


def check_folds_disjoint(folds) -> None:
    seen: set[int] = set()
    for fold in folds:
        held = set(fold.heldout_classes)
        if held & seen:
            raise ValueError("proxy folds must hold out pairwise-disjoint classes")
        seen |= held


def build_proxy_split(labels, fold: ProxyFoldSpec):
    """Leak-free split: training keeps only samples with zero positives among
    the held-out classes; evaluation keeps every sample.

    Returns ``(train_indices, eval_indices)``. Training labels must then be
    restricted to the retained classes (see :func:`proxy_dataset`).
    """
    y = as_matrix(labels, "labels", allow_empty=False)
    check_binary(y)
    if y.shape[1] != PROXY_CLASS_COUNT:
        raise ValueError(f"proxy splits are defined over {PROXY_CLASS_COUNT} classes")
    held = list(fold.heldout_classes)
    train_indices = np.flatnonzero(y[:, held].sum(axis=1) == 0)
    if train_indices.size == 0:
        raise ValueError("empty training set: every sample is positive for a held-out class")
    return train_indices, np.arange(y.shape[0])


def proxy_dataset(features, labels, class_descriptions,
                  fold: ProxyFoldSpec, embedder: TextStubEmbedder,
                  normal_text: str = NORMAL_STUDY_TEXT) -> DualBranchDataset:
    """Assemble the training dataset for one proxy fold.

    Training rows exclude held-out positives and training labels are
    restricted to the retained classes; evaluation scores the full sample set
    against the held-out classes' descriptions.
    """
    x = as_matrix(features, "features", allow_empty=False)
    y = as_matrix(labels, "labels", allow_empty=False)
    train_idx, eval_idx = build_proxy_split(y, fold)
    retained = fold.retained_classes()
    held = list(fold.heldout_classes)
    return DualBranchDataset(
        features=x[train_idx],
        labels=y[np.ix_(train_idx, retained)],
        class_descriptions=[class_descriptions[k] for k in retained],
        embedder=embedder,
        eval_features=x[eval_idx],
        eval_labels=y[np.ix_(eval_idx, held)],
        eval_class_descriptions=[class_descriptions[k] for k in held],
        normal_text=normal_text,
    )


@dataclass
class ProxyReport:
    """Per-group zero-shot mAP over held-out classes, plus the average."""

    group_maps: dict[str, float]
    average: float

    def to_dict(self) -> dict:
        doc = {gid: self.group_maps[gid] for gid in sorted(self.group_maps)}
        doc["average"] = self.average
        return doc


def evaluate_proxy(scores, labels, folds) -> ProxyReport:
    """Mean AP over each fold's held-out classes and the overall average.

    ``scores`` is either one n x 30 matrix used for every fold or a mapping
    from group id to that fold's own score matrix.
    """
    y = as_matrix(labels, "labels", allow_empty=False)
    if y.shape[1] != PROXY_CLASS_COUNT:
        raise ValueError(f"proxy evaluation is defined over {PROXY_CLASS_COUNT} classes")
    check_folds_disjoint(folds)
    group_maps: dict[str, float] = {}
    for fold in folds:
        fold_scores = scores[fold.group_id] if isinstance(scores, dict) else scores
        s = as_matrix(fold_scores, f"scores[{fold.group_id}]", allow_empty=False)
        check_same_shape(s, y, "scores", "labels")
        held = list(fold.heldout_classes)
        group_maps[fold.group_id] = metrics.mean_ap(s[:, held], y[:, held])[0]
    average = float(np.mean(list(group_maps.values())))
    return ProxyReport(group_maps=group_maps, average=average)


class DualBranchAligner(BaseEstimator):
    """Scikit-learn estimator facade over the dual-branch trainer.

    ``fit(X, Y)`` trains the projection heads on feature rows X and binary
    label matrix Y using stub text embeddings of the per-class descriptions;
    ``transform(X)`` returns zero-shot similarity scores against the fitted
    class texts and ``predict_proba(X)`` their temperature-scaled sigmoid.
    """

    def __init__(self, class_descriptions=None, projection_dim: int = 16,
                 text_dim: int = 16, lr_max: float = 1e-3, lr_min: float = 0.0,
                 weight_decay: float = 0.01, ema_decay: float = 0.999,
                 t_max: int = 7, alpha: float = 1.5, gamma_pos: float = 0.0,
                 gamma_neg: float = 4.0, batch_size: int = 64, epochs: int = 7,
                 seed: int = 0, embed_seed: int = 0,
                 train_temperature: bool = True):
        self.class_descriptions = class_descriptions
        self.projection_dim = projection_dim
        self.text_dim = text_dim
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.weight_decay = weight_decay
        self.ema_decay = ema_decay
        self.t_max = t_max
        self.alpha = alpha
        self.gamma_pos = gamma_pos
        self.gamma_neg = gamma_neg
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.embed_seed = embed_seed
        self.train_temperature = train_temperature

    def fit(self, X, Y):
        from .synthdata import gen_descriptions

        x = as_matrix(X, "X", allow_empty=False)
        y = as_matrix(Y, "Y", allow_empty=False)
        descriptions = self.class_descriptions
        if descriptions is None:
            descriptions = gen_descriptions(y.shape[1], seed=self.embed_seed)
        embedder = TextStubEmbedder(dim=self.text_dim, seed=self.embed_seed)
        dataset = DualBranchDataset(
            features=x, labels=y, class_descriptions=list(descriptions),
            embedder=embedder,
        )
        cfg = TrainConfig(
            lr_max=self.lr_max, lr_min=self.lr_min,
            weight_decay=self.weight_decay, ema_decay=self.ema_decay,
            t_max=self.t_max, alpha=self.alpha,
            asl=AslParams(gamma_pos=self.gamma_pos, gamma_neg=self.gamma_neg),
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
            train_temperature=self.train_temperature,
        )
        model_init = DualBranchModel.initialize(
            x.shape[1], self.text_dim, self.projection_dim, seed=self.seed
        )
        result = train(model_init, dataset, cfg)
        self.model_ = result.model
        self.ema_model_ = result.ema_model
        self.trace_ = result.trace
        self.class_txt_ = embedder.embed_many(list(descriptions))
        return self

    def transform(self, X):
        return zero_shot_scores(self.model_, X, self.class_txt_)

    def predict_proba(self, X):
        return zero_shot_probabilities(self.model_, X, self.class_txt_)
