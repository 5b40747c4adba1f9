"""Deterministic numeric substrate.

Everything downstream (losses, metrics, ensembling, training) runs on plain
float64 numpy arrays and on the seeded generator defined here, so results are
bit-reproducible across runs and platforms.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .validation import as_matrix

ZERO_NORM_EPS = 1e-12

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / float(1 << 53)


def _mix64(z: int) -> int:
    """SplitMix64 output function (Steele/Lea/Flood finalizer) on a python int."""
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """SplitMix64 pseudo-random generator.

    State update rule: ``state_{i} = (state_{i-1} + 0x9E3779B97F4A7C15) mod 2^64``;
    the i-th output is the state passed through two xor-shift-multiply rounds
    (multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB) and a final
    ``z ^ (z >> 31)``. The sequence depends only on the 64-bit seed, so equal
    seeds give equal streams on every platform.

    Derived draws are defined in terms of the uint64 stream:

    * ``random()``     -- top 53 bits of one draw, scaled to [0, 1).
    * ``below(n)``     -- one-or-more draws with rejection sampling (no modulo
      bias): reject ``u >= floor(2^64 / n) * n``, then return ``u % n``.
    * ``normal()``     -- Box-Muller on exactly two draws per value;
      ``u1 = (d0 >> 11 + 1) / 2^53`` (never zero), ``u2 = (d1 >> 11) / 2^53``,
      value ``sqrt(-2 ln u1) * cos(2 pi u2)``.

    Instances are single-owner; ``fork()`` consumes one draw and seeds an
    independent child stream from it.
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    @property
    def state(self) -> int:
        return self._state

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN_GAMMA) & _MASK64
        return _mix64(self._state)

    def _u64_array(self, n: int) -> np.ndarray:
        """n sequential uint64 outputs, vectorized (identical to n next_u64 calls)."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + steps * np.uint64(_GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN_GAMMA) & _MASK64
        return z

    def random(self, size: int | tuple[int, ...] | None = None):
        if size is None:
            return (self.next_u64() >> 11) * _INV_2_53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        out = (self._u64_array(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return out.reshape(shape)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        threshold = ((1 << 64) // n) * n
        u = self.next_u64()
        while u >= threshold:
            u = self.next_u64()
        return u % n

    def normal(self, size: int | tuple[int, ...] | None = None):
        if size is None:
            a = (self.next_u64() >> 11) * _INV_2_53 + _INV_2_53
            b = (self.next_u64() >> 11) * _INV_2_53
            return float(np.sqrt(-2.0 * np.log(a)) * np.cos(2.0 * np.pi * b))
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        draws = self._u64_array(2 * n) >> np.uint64(11)
        u1 = draws[0::2].astype(np.float64) * _INV_2_53 + _INV_2_53
        u2 = draws[1::2].astype(np.float64) * _INV_2_53
        out = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return out.reshape(shape)

    def fork(self) -> "SeededRng":
        """Deterministically derived, independent child generator."""
        return SeededRng(self.next_u64())


def permutation(n: int, rng: SeededRng) -> np.ndarray:
    """Uniform permutation of 0..n-1 via Fisher-Yates on the given stream."""
    if n < 0:
        raise ValueError("permutation size must be >= 0")
    out = np.arange(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def l2_normalize_rows(m, return_flags: bool = False):
    """Scale each row to unit Euclidean norm.

    Rows with norm below 1e-12 are passed through unchanged; when
    ``return_flags`` is true the second return value marks those rows.
    """
    m = as_matrix(m, "matrix")
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError("empty input")
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    flags = norms < ZERO_NORM_EPS
    safe = np.where(flags, 1.0, norms)
    out = m / safe[:, None]
    if return_flags:
        return out, flags
    return out


def cosine_similarity(a, b, return_flags: bool = False):
    """Pairwise cosine similarity between rows of ``a`` (n x d) and ``b`` (m x d).

    Zero-norm rows contribute similarity 0; ``return_flags`` additionally
    returns the (row-of-a, row-of-b) zero-norm masks.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] == 0 or b.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError("empty input")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"dimension mismatch: a has {a.shape[1]} columns, b has {b.shape[1]}"
        )
    an, aflags = l2_normalize_rows(a, return_flags=True)
    bn, bflags = l2_normalize_rows(b, return_flags=True)
    sim = an @ bn.T
    if aflags.any():
        sim[aflags, :] = 0.0
    if bflags.any():
        sim[:, bflags] = 0.0
    if return_flags:
        return sim, aflags, bflags
    return sim


def l2_normalize_rows_backward(raw: np.ndarray, unit: np.ndarray,
                               grad_unit: np.ndarray, flags: np.ndarray) -> np.ndarray:
    """Backprop through row normalization x -> x/||x||.

    Zero-norm rows pass through normalization unchanged, so their gradient
    passes through unchanged as well.
    """
    norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
    safe = np.where(flags, 1.0, norms)
    dots = np.einsum("ij,ij->i", grad_unit, unit)
    out = (grad_unit - dots[:, None] * unit) / safe[:, None]
    if flags.any():
        out[flags] = grad_unit[flags]
    return out


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], x, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    The oracle used to validate every analytic gradient in the package; it must
    stay independent of the code paths it checks.
    """
    if h <= 0:
        raise ValueError("step h must be > 0")
    x = np.asarray(x, dtype=np.float64).ravel()
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_gradient_error(analytic, numeric) -> float:
    """Scale-free gradient discrepancy: ||a - n|| / max(||a||, ||n||, tiny)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)), 1e-30)
    return float(np.linalg.norm(a - n)) / denom


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding; stable across processes."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h
