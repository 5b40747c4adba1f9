"""Zero-shot scoring from image embeddings and text prompts.

Class scores come from paired positive/negative prompt similarities pushed
through a temperature-scaled two-way softmax, optionally ensembled over many
prompt variants and augmentation views. A deterministic bag-of-words stub
embedder stands in for a real text encoder so the whole pipeline runs with no
external model dependencies.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import metrics
from .ensemble import tta_average
from .losses import sigmoid
from .numerics import SeededRng, fnv1a64, l2_normalize_rows
from .validation import as_matrix

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_MASK64 = (1 << 64) - 1
_SEED_SALT = 0x9E3779B97F4A7C15


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class TextStubEmbedder:
    """Deterministic bag-of-words embedder.

    Each token maps to a unit vector drawn from a stream seeded by
    ``fnv1a64(token) XOR (seed * golden ratio)``; a text embeds as the
    L2-normalized sum of its token vectors. Tokens are summed in sorted order,
    so any permutation of the same tokens embeds bit-identically. Texts with
    no tokens embed to the zero vector (flagged).
    """

    def __init__(self, dim: int = 512, seed: int = 0):
        if dim < 8:
            raise ValueError("embedding dim must be >= 8")
        self.dim = dim
        self.seed = seed
        self._salt = (int(seed) * _SEED_SALT) & _MASK64
        self._token_cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            rng = SeededRng(fnv1a64(token) ^ self._salt)
            raw = rng.normal(self.dim)
            vec = raw / np.linalg.norm(raw)
            self._token_cache[token] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        tokens = _tokenize(text)
        if not tokens:
            return np.zeros(self.dim)
        total = np.zeros(self.dim)
        for token in sorted(tokens):
            total += self.token_vector(token)
        norm = np.linalg.norm(total)
        if norm < 1e-12:
            return np.zeros(self.dim)
        return total / norm

    def embed_many(self, texts) -> np.ndarray:
        return np.vstack([self.embed(t) for t in texts])


def embed_text_stub(text: str, dim: int = 512, seed: int = 0) -> np.ndarray:
    """One-shot form of :class:`TextStubEmbedder` for single texts."""
    return TextStubEmbedder(dim=dim, seed=seed).embed(text)


@dataclass
class EmbeddingSet:
    """Image (or text) embeddings, row-normalized on load."""

    ids: list[str]
    vectors: np.ndarray
    view_tag: str = ""
    zero_flags: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_matrix(cls, matrix, ids=None, view_tag: str = "") -> "EmbeddingSet":
        m = as_matrix(matrix, "embeddings", allow_empty=False)
        vectors, flags = l2_normalize_rows(m, return_flags=True)
        if ids is None:
            ids = [str(i) for i in range(vectors.shape[0])]
        if len(ids) != vectors.shape[0]:
            raise ValueError("one id per embedding row required")
        return cls(ids=list(ids), vectors=vectors, view_tag=view_tag, zero_flags=flags)


@dataclass
class PromptSet:
    """Per-class prompt collections with a fixed class order.

    Every class needs at least one name prompt and one negative prompt;
    descriptions are optional.
    """

    classes: list[str]
    names: dict[str, list[str]]
    descriptions: dict[str, list[str]]
    negatives: dict[str, list[str]]

    def __post_init__(self):
        for cls_name in self.classes:
            if not self.names.get(cls_name):
                raise ValueError(f"class {cls_name!r} needs at least one name prompt")
            if not self.negatives.get(cls_name):
                raise ValueError(f"class {cls_name!r} needs at least one negative prompt")
            self.descriptions.setdefault(cls_name, [])

    def positives_for(self, cls_name: str) -> list[str]:
        return list(self.names[cls_name]) + list(self.descriptions[cls_name])

    def to_dict(self) -> dict:
        doc = {"classes": list(self.classes)}
        for cls_name in self.classes:
            doc[cls_name] = {
                "names": list(self.names[cls_name]),
                "descriptions": list(self.descriptions[cls_name]),
                "negatives": list(self.negatives[cls_name]),
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PromptSet":
        if not isinstance(doc, dict) or "classes" not in doc:
            raise ValueError("prompt file needs a top-level 'classes' array")
        classes = list(doc["classes"])
        names, descriptions, negatives = {}, {}, {}
        for cls_name in classes:
            if cls_name not in doc:
                raise ValueError(f"prompt file has no entry for class {cls_name!r}")
            entry = doc[cls_name]
            if not isinstance(entry, dict):
                raise ValueError(f"prompt entry for class {cls_name!r} must be an object")
            names[cls_name] = list(entry.get("names", []))
            descriptions[cls_name] = list(entry.get("descriptions", []))
            negatives[cls_name] = list(entry.get("negatives", []))
        return cls(classes=classes, names=names, descriptions=descriptions,
                   negatives=negatives)

    @classmethod
    def load(cls, path) -> "PromptSet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _image_matrix(img) -> np.ndarray:
    if isinstance(img, EmbeddingSet):
        return img.vectors
    return l2_normalize_rows(as_matrix(img, "image embeddings", allow_empty=False))


def _stack_normalized(vectors, name: str) -> np.ndarray:
    m = as_matrix(np.vstack([np.asarray(v, dtype=np.float64).ravel() for v in vectors]),
                  name, allow_empty=False)
    return l2_normalize_rows(m)


def class_probability_posneg(img, pos_txt, neg_txt, temperature: float = 0.07) -> np.ndarray:
    """P(class | image) from paired positive/negative prompt embeddings.

    ``p = exp(s+/t) / (exp(s+/t) + exp(s-/t))`` with s+/s- the cosine
    similarities to the per-class positive and negative prompts; equivalently
    the sigmoid of ``(s+ - s-)/t``.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    imgs = _image_matrix(img)
    pos = _stack_normalized(pos_txt, "positive prompt embeddings")
    neg = _stack_normalized(neg_txt, "negative prompt embeddings")
    if pos.shape != neg.shape:
        raise ValueError("positive and negative prompt sets must match in shape")
    if pos.shape[1] != imgs.shape[1]:
        raise ValueError("prompt and image embedding dims differ")
    s_pos = imgs @ pos.T
    s_neg = imgs @ neg.T
    return sigmoid((s_pos - s_neg) / temperature)


def prompt_ensemble(img, prompt_variants, temperature: float = 0.07,
                    mode: str = "prob") -> np.ndarray:
    """Ensemble class probabilities over per-class prompt variants.

    ``prompt_variants`` is a list (one entry per class) of non-empty lists of
    (positive, negative) embedding pairs. ``mode='prob'`` averages the
    per-variant probabilities; ``mode='embed'`` averages the normalized
    embeddings first and scores once.
    """
    if mode not in ("prob", "embed"):
        raise ValueError("mode must be 'prob' or 'embed'")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    imgs = _image_matrix(img)
    if not prompt_variants or any(len(v) == 0 for v in prompt_variants):
        raise ValueError("every class needs at least one prompt variant")

    n, k = imgs.shape[0], len(prompt_variants)
    out = np.zeros((n, k))
    for c, variants in enumerate(prompt_variants):
        pos = _stack_normalized([p for p, _ in variants], "positive variants")
        neg = _stack_normalized([q for _, q in variants], "negative variants")
        if pos.shape[1] != imgs.shape[1]:
            raise ValueError(
                f"prompt embedding dim {pos.shape[1]} does not match image dim {imgs.shape[1]}"
            )
        if mode == "prob":
            probs = sigmoid((imgs @ pos.T - imgs @ neg.T) / temperature)
            out[:, c] = probs.mean(axis=1)
        else:
            pos_avg = l2_normalize_rows(pos.mean(axis=0, keepdims=True))
            neg_avg = l2_normalize_rows(neg.mean(axis=0, keepdims=True))
            s = (imgs @ pos_avg.T - imgs @ neg_avg.T) / temperature
            out[:, c] = sigmoid(s)[:, 0]
    return out


def build_prompt_variants(prompt_set: PromptSet, embedder: TextStubEmbedder):
    """Embed the hybrid (names + descriptions) variant list for every class.

    Positive variant i pairs with negative prompt ``i mod n_negatives``, so
    every variant stays scoreable when fewer negatives exist.
    """
    variants = []
    for cls_name in prompt_set.classes:
        positives = prompt_set.positives_for(cls_name)
        negatives = prompt_set.negatives[cls_name]
        pairs = []
        for i, pos_text in enumerate(positives):
            neg_text = negatives[i % len(negatives)]
            pairs.append((embedder.embed(pos_text), embedder.embed(neg_text)))
        variants.append(pairs)
    return variants


def hybrid_prompt_scores(img, prompt_set: PromptSet, embedder: TextStubEmbedder,
                         temperature: float = 0.07, mode: str = "prob") -> np.ndarray:
    """Score classes with the union of name and description prompts."""
    return prompt_ensemble(
        img, build_prompt_variants(prompt_set, embedder),
        temperature=temperature, mode=mode,
    )


def tta_scores(view_scores) -> np.ndarray:
    """Uniform mean over per-view score matrices."""
    return tta_average(view_scores)


def zeroshot_evaluate(probabilities, labels,
                      config: metrics.EvalConfig = metrics.EvalConfig()) -> metrics.EvalReport:
    """Convenience wrapper over :func:`cxrkit.metrics.evaluate`."""
    return metrics.evaluate(probabilities, labels, config)


class PromptScorer(BaseEstimator, TransformerMixin):
    """Estimator facade: fit on a PromptSet, transform image embeddings
    into an n x K class-probability matrix."""

    def __init__(self, temperature: float = 0.07, mode: str = "prob",
                 dim: int = 512, seed: int = 0):
        self.temperature = temperature
        self.mode = mode
        self.dim = dim
        self.seed = seed

    def fit(self, prompt_set: PromptSet, y=None):
        embedder = TextStubEmbedder(dim=self.dim, seed=self.seed)
        self.classes_ = list(prompt_set.classes)
        self.variants_ = build_prompt_variants(prompt_set, embedder)
        return self

    def transform(self, X):
        return prompt_ensemble(
            X, self.variants_, temperature=self.temperature, mode=self.mode
        )
