"""Deterministic synthetic benchmarks.

Generators for long-tailed multi-label feature/label sets, projection-shifted
feature distributions, and per-class pseudo-descriptions. Classes are linearly
separable up to noise so small heads can learn, and rare-class difficulty
comes purely from the label imbalance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import SeededRng, l2_normalize_rows
from .validation import as_matrix


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a synthetic long-tailed dataset."""

    n_samples: int
    n_classes: int = 30
    zipf_exponent: float = 1.2
    feature_dim: int = 32
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_classes < 1 or self.feature_dim < 1:
            raise ValueError("counts must be positive")
        if self.zipf_exponent < 0:
            raise ValueError("zipf exponent must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")


@dataclass
class LongTailData:
    features: np.ndarray
    labels: np.ndarray
    prototypes: np.ndarray
    prevalence: np.ndarray
    background: np.ndarray


def prevalence_curve(n_classes: int, zipf_exponent: float) -> np.ndarray:
    """Zipf prevalences rescaled so the head class sits at 0.5."""
    ranks = np.arange(1, n_classes + 1, dtype=np.float64)
    curve = ranks ** (-zipf_exponent)
    return 0.5 * curve / curve[0]


def _unit_rows(rng: SeededRng, n: int, dim: int) -> np.ndarray:
    return l2_normalize_rows(rng.normal((n, dim)))


def gen_longtail(spec: SynthSpec, prototypes=None) -> LongTailData:
    """Long-tailed multi-label features and labels.

    Labels are independent Bernoulli draws from the Zipf prevalence curve with
    one positive per class force-injected; each feature row is the normalized
    sum of its positive classes' prototypes (a dedicated background prototype
    for all-negative rows) plus isotropic Gaussian noise.

    ``prototypes`` overrides the default seeded random unit vectors, which
    lets callers tie image prototypes to text embeddings when cross-modal
    structure is needed.
    """
    rng = SeededRng(spec.seed)
    if prototypes is None:
        protos = _unit_rows(rng, spec.n_classes, spec.feature_dim)
    else:
        protos = as_matrix(prototypes, "prototypes", allow_empty=False)
        if protos.shape != (spec.n_classes, spec.feature_dim):
            raise ValueError("prototypes must be n_classes x feature_dim")
    background = _unit_rows(rng, 1, spec.feature_dim)[0]

    prevalence = prevalence_curve(spec.n_classes, spec.zipf_exponent)
    labels = (rng.random((spec.n_samples, spec.n_classes)) < prevalence).astype(np.float64)
    for k in range(spec.n_classes):
        if labels[:, k].sum() == 0:
            labels[rng.below(spec.n_samples), k] = 1.0

    features = _features_from_labels(labels, protos, background)
    if spec.noise_sigma > 0:
        features = features + spec.noise_sigma * rng.normal(features.shape)
    return LongTailData(
        features=features,
        labels=labels,
        prototypes=protos,
        prevalence=prevalence,
        background=background,
    )


def text_linked_prototypes(class_txt_embeddings, feature_dim: int,
                           seed: int = 0) -> np.ndarray:
    """Class prototypes tied to text embeddings through one hidden linear map.

    Each prototype is the normalized image of the class's text embedding under
    a fixed seeded random matrix, so image features correlate with text the
    way real modalities do and cross-modal alignment is learnable; marginally
    every prototype is still a random unit vector. The mixing stream is forked
    off the seed so it never overlaps the label/noise streams.
    """
    txt = as_matrix(class_txt_embeddings, "class_txt_embeddings", allow_empty=False)
    rng = SeededRng(seed).fork()
    mixing = rng.normal((feature_dim, txt.shape[1]))
    return l2_normalize_rows(txt @ mixing.T)


def _features_from_labels(labels, prototypes, background) -> np.ndarray:
    mixed = labels @ prototypes
    empty = labels.sum(axis=1) == 0
    mixed[empty] = background
    norms = np.sqrt(np.einsum("ij,ij->i", mixed, mixed))
    degenerate = norms < 1e-12
    if degenerate.any():
        mixed[degenerate] = background
        norms = np.sqrt(np.einsum("ij,ij->i", mixed, mixed))
    return mixed / norms[:, None]


@dataclass
class ProjectionData:
    features: np.ndarray
    projection_labels: np.ndarray
    class_labels: np.ndarray
    offset: np.ndarray


def gen_projection_split(spec: SynthSpec, lateral_fraction: float = 0.2,
                         offset_scale: float = 2.0) -> ProjectionData:
    """Long-tailed data with a frontal/lateral projection shift.

    Lateral samples (the minority) receive a fixed offset vector before noise;
    projection labels are 1 for AP/PA and 0 for Lateral.
    """
    if not (0.0 < lateral_fraction < 1.0):
        raise ValueError("lateral fraction must lie in (0, 1)")
    if offset_scale < 0:
        raise ValueError("offset scale must be >= 0")
    rng = SeededRng(spec.seed)
    protos = _unit_rows(rng, spec.n_classes, spec.feature_dim)
    background = _unit_rows(rng, 1, spec.feature_dim)[0]
    offset = offset_scale * _unit_rows(rng, 1, spec.feature_dim)[0]

    prevalence = prevalence_curve(spec.n_classes, spec.zipf_exponent)
    labels = (rng.random((spec.n_samples, spec.n_classes)) < prevalence).astype(np.float64)
    projection = (rng.random(spec.n_samples) >= lateral_fraction).astype(np.float64)

    features = _features_from_labels(labels, protos, background)
    features = features + (1.0 - projection)[:, None] * offset
    if spec.noise_sigma > 0:
        features = features + spec.noise_sigma * rng.normal(features.shape)
    return ProjectionData(
        features=features,
        projection_labels=projection,
        class_labels=labels,
        offset=offset,
    )


_PATTERNS = (
    "diffuse", "focal", "patchy", "linear", "nodular",
    "confluent", "reticular", "scattered", "bilateral", "subtle",
)
_FINDINGS = (
    "increased density", "decreased density", "opacity", "lucency",
    "consolidation", "thickening", "distortion", "calcification",
)
_REGIONS = (
    "upper zone", "lower zone", "perihilar region", "costophrenic angle",
    "cardiac border", "apical segment", "retrocardiac space", "lung periphery",
)


def gen_descriptions(n_classes: int, seed: int = 0) -> list[str]:
    """Deterministic, pairwise-distinct multi-word class descriptions.

    Pattern and finding indices walk the two banks at unit stride, so the
    (pattern, finding) pair is unique for up to lcm(10, 8) = 40 classes and
    consecutive classes share almost no words.
    """
    if n_classes < 0:
        raise ValueError("n_classes must be >= 0")
    max_classes = np.lcm(len(_PATTERNS), len(_FINDINGS))
    if n_classes > max_classes:
        raise ValueError("description template space exhausted")
    rng = SeededRng(seed)
    off_p = rng.below(len(_PATTERNS))
    off_f = rng.below(len(_FINDINGS))
    off_r = rng.below(len(_REGIONS))
    out = []
    for k in range(n_classes):
        p = (k + off_p) % len(_PATTERNS)
        f = (k + off_f) % len(_FINDINGS)
        r = (k + off_r) % len(_REGIONS)
        out.append(f"{_PATTERNS[p]} {_FINDINGS[f]} in the {_REGIONS[r]}")
    return out
