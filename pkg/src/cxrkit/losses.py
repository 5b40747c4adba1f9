"""Training objectives with analytic gradients.

All losses operate on float64 matrices and return both the scalar value and
the exact gradient of the (numerically clamped) expression actually computed,
so central finite differences reproduce every gradient to high precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import l2_normalize_rows, l2_normalize_rows_backward
from .validation import as_matrix, check_binary, check_same_shape


@dataclass(frozen=True)
class AslParams:
    """Focusing exponents for the asymmetric loss.

    ``gamma_neg > gamma_pos`` down-weights easy negatives relative to
    positives, which is the asymmetry that helps rare classes. ``prob_eps``
    clamps probabilities into [prob_eps, 1 - prob_eps] before the logs; the
    reported gradient is the gradient of the clamped expression.
    """

    gamma_pos: float = 0.0
    gamma_neg: float = 4.0
    prob_eps: float = 1e-7

    def __post_init__(self):
        if self.gamma_pos < 0 or self.gamma_neg < 0:
            raise ValueError("focusing exponents must be >= 0")
        if not (0.0 < self.prob_eps < 0.5):
            raise ValueError("prob_eps must lie in (0, 0.5)")


@dataclass
class LossValue:
    """Scalar loss plus (optionally) the gradient w.r.t. its logit input."""

    value: float
    gradient: np.ndarray | None = None


@dataclass
class ContrastiveLossValue:
    """Symmetric contrastive loss with gradients for both embedding inputs.

    ``grad_temperature`` is d(loss)/d(temperature), included because the
    temperature is a trainable parameter downstream.
    """

    value: float
    grad_img: np.ndarray = field(repr=False, default=None)
    grad_txt: np.ndarray = field(repr=False, default=None)
    grad_temperature: float = 0.0


def sigmoid(logits):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def _check_loss_inputs(logits, labels):
    logits = as_matrix(logits, "logits", allow_empty=False)
    labels = as_matrix(labels, "labels", allow_empty=False)
    check_same_shape(logits, labels, "logits", "labels")
    check_binary(labels)
    return logits, labels


def asl_loss(logits, labels, params: AslParams = AslParams()) -> LossValue:
    """Asymmetric loss over an n x K batch of logits and binary labels.

    Per element: ``-(1-p)^gamma_pos * log(p)`` for positives and
    ``-p^gamma_neg * log(1-p)`` for negatives, with p the clamped sigmoid of
    the logit. Reduction is the mean over classes then the mean over samples
    (equivalently the mean over all entries). Gradient is w.r.t. the logits.
    """
    logits, labels = _check_loss_inputs(logits, labels)
    eps = params.prob_eps
    gp, gn = params.gamma_pos, params.gamma_neg

    p_raw = sigmoid(logits)
    active = (p_raw > eps) & (p_raw < 1.0 - eps)
    p = np.clip(p_raw, eps, 1.0 - eps)
    q = 1.0 - p
    log_p = np.log(p)
    log_q = np.log(q)

    pos_loss = -np.power(q, gp) * log_p
    neg_loss = -np.power(p, gn) * log_q
    value = float(np.mean(np.where(labels == 1.0, pos_loss, neg_loss)))

    # d/dp of each branch; the gamma terms vanish when the exponent is zero.
    dpos = gp * np.power(q, gp - 1.0) * log_p - np.power(q, gp) / p if gp > 0 else -1.0 / p
    dneg = -gn * np.power(p, gn - 1.0) * log_q + np.power(p, gn) / q if gn > 0 else 1.0 / q
    dloss_dp = np.where(labels == 1.0, dpos, dneg)
    dp_dz = np.where(active, p_raw * (1.0 - p_raw), 0.0)
    grad = dloss_dp * dp_dz / logits.size
    return LossValue(value=value, gradient=grad)


def bce_loss(logits, labels, prob_eps: float = 1e-7) -> LossValue:
    """Binary cross-entropy with the same probability clamp as the ASL.

    Computed through a separate, power-free path; it must agree with
    ``asl_loss`` at zero focusing exponents.
    """
    logits, labels = _check_loss_inputs(logits, labels)
    p_raw = sigmoid(logits)
    active = (p_raw > prob_eps) & (p_raw < 1.0 - prob_eps)
    p = np.clip(p_raw, prob_eps, 1.0 - prob_eps)
    value = float(np.mean(np.where(labels == 1.0, -np.log(p), -np.log(1.0 - p))))
    dloss_dp = np.where(labels == 1.0, -1.0 / p, 1.0 / (1.0 - p))
    grad = dloss_dp * np.where(active, p_raw * (1.0 - p_raw), 0.0) / logits.size
    return LossValue(value=value, gradient=grad)


def _row_softmax(s: np.ndarray) -> np.ndarray:
    shifted = s - s.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _diag_log_softmax(s: np.ndarray) -> np.ndarray:
    """log softmax(s)[i, i] per row, numerically stable."""
    m = s.max(axis=1)
    lse = m + np.log(np.exp(s - m[:, None]).sum(axis=1))
    return np.diag(s) - lse


def contrastive_loss(img_emb, txt_emb, temperature: float) -> ContrastiveLossValue:
    """Symmetric image-text contrastive objective with diagonal targets.

    Both inputs are row-normalized internally; the similarity matrix is scaled
    by 1/temperature, and the loss is the mean of the row-wise and column-wise
    cross-entropies against the matched (diagonal) pairs. Gradients are w.r.t.
    the raw (pre-normalization) inputs and the temperature.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    img = as_matrix(img_emb, "img_emb", allow_empty=False)
    txt = as_matrix(txt_emb, "txt_emb", allow_empty=False)
    check_same_shape(img, txt, "img_emb", "txt_emb")
    b = img.shape[0]

    img_n, img_flags = l2_normalize_rows(img, return_flags=True)
    txt_n, txt_flags = l2_normalize_rows(txt, return_flags=True)
    sims = img_n @ txt_n.T / temperature

    value = float(
        -0.5 * (np.mean(_diag_log_softmax(sims)) + np.mean(_diag_log_softmax(sims.T)))
    )

    p_rows = _row_softmax(sims)
    p_cols = _row_softmax(sims.T).T
    eye = np.eye(b)
    grad_sims = ((p_rows - eye) + (p_cols - eye)) / (2.0 * b)

    grad_img_n = grad_sims @ txt_n / temperature
    grad_txt_n = grad_sims.T @ img_n / temperature
    grad_img = l2_normalize_rows_backward(img, img_n, grad_img_n, img_flags)
    grad_txt = l2_normalize_rows_backward(txt, txt_n, grad_txt_n, txt_flags)
    grad_temperature = float(-np.sum(grad_sims * sims) / temperature)
    return ContrastiveLossValue(
        value=value,
        grad_img=grad_img,
        grad_txt=grad_txt,
        grad_temperature=grad_temperature,
    )


def total_loss(con, asl, alpha: float) -> LossValue:
    """Combined objective: contrastive value plus ``alpha`` times the ASL value.

    When both inputs carry gradients over the same tensor the gradients
    combine linearly; otherwise the per-parameter combination is performed by
    the caller that owns the shared parameters (see the dual-branch trainer).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    value = float(con.value) + alpha * float(asl.value)
    grad_con = getattr(con, "gradient", None)
    grad_asl = getattr(asl, "gradient", None)
    gradient = None
    if (
        grad_con is not None
        and grad_asl is not None
        and np.shape(grad_con) == np.shape(grad_asl)
    ):
        gradient = np.asarray(grad_con) + alpha * np.asarray(grad_asl)
    return LossValue(value=value, gradient=gradient)
