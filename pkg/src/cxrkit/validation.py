"""Input validation helpers shared by every public entry point."""
from __future__ import annotations

import numpy as np


def as_matrix(x, name: str = "matrix", allow_empty: bool = True) -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {m.ndim}-D")
    if not allow_empty and (m.shape[0] == 0 or m.shape[1] == 0):
        raise ValueError(f"{name} must be non-empty")
    if m.size and not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.size and not np.isfinite(v).all():
        raise ValueError(f"{name} contains non-finite entries")
    return v


def check_same_shape(a: np.ndarray, b: np.ndarray, a_name: str, b_name: str) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"shape mismatch: {a_name} is {a.shape}, {b_name} is {b.shape}"
        )


def check_binary(labels: np.ndarray, name: str = "labels") -> None:
    if labels.size and not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError(f"{name} must contain only 0 and 1")


def check_probabilities(p: np.ndarray, name: str = "probabilities") -> None:
    if p.size and ((p < 0.0).any() or (p > 1.0).any()):
        raise ValueError(f"{name} must lie in [0, 1]")
