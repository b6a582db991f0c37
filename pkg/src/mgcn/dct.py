"""Temporal trajectory codec: replicate padding plus an orthonormal
type-II cosine transform applied per pose dimension.

The transform is a precomputed basis-matrix multiply rather than an FFT:
sizes here are tiny, the map stays trivially differentiable (it is a fixed
linear operator, so it participates in the autodiff tape), and roundtrip /
energy identities hold to float64 precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Tensor, matmul, transpose
from .errors import InputError


@dataclass(frozen=True)
class DctConfig:
    """Window geometry: N observed frames, T future frames, D kept coefficients."""

    n_history: int
    n_future: int
    n_coeffs: int | None = None

    def __post_init__(self):
        if self.n_history < 1:
            raise InputError(f"n_history must be >= 1, got {self.n_history}")
        if self.n_future < 0:
            raise InputError(f"n_future must be >= 0, got {self.n_future}")
        if self.n_coeffs is None:
            object.__setattr__(self, "n_coeffs", self.length)
        if not 1 <= self.n_coeffs <= self.length:
            raise InputError(
                f"n_coeffs must lie in [1, {self.length}], got {self.n_coeffs}")

    @property
    def length(self) -> int:
        return self.n_history + self.n_future


@lru_cache(maxsize=None)
def dct_basis(length: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row d is the d-th cosine atom over `length` samples."""
    if length < 1:
        raise InputError(f"basis length must be >= 1, got {length}")
    t = np.arange(length, dtype=np.float64)
    d = np.arange(length, dtype=np.float64)[:, None]
    basis = np.cos(np.pi * (2.0 * t + 1.0) * d / (2.0 * length))
    basis *= np.sqrt(2.0 / length)
    basis[0] *= np.sqrt(0.5)
    basis.setflags(write=False)
    return basis


def pad_replicate(frames: np.ndarray, t_future: int) -> np.ndarray:
    """Extend a pose sequence by repeating its last frame t_future times."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise InputError(f"expected a non-empty frames matrix, got shape {frames.shape}")
    if t_future < 0:
        raise InputError(f"t_future must be >= 0, got {t_future}")
    if t_future == 0:
        return frames.copy()
    tail = np.repeat(frames[-1:], t_future, axis=0)
    return np.concatenate([frames, tail], axis=0)


def dct_encode(seq, cfg: DctConfig):
    """Encode an (N+T) x K sequence to K x D coefficients, one row per dimension.

    Accepts a plain array or a Tensor; a Tensor stays on the tape.
    """
    n = seq.shape[0]
    if n != cfg.length:
        raise InputError(f"sequence length {n} does not match config length {cfg.length}")
    basis = dct_basis(cfg.length)[:cfg.n_coeffs]
    if isinstance(seq, Tensor):
        return transpose(matmul(Tensor(basis), seq))
    return (basis @ np.asarray(seq, dtype=np.float64)).T


def dct_decode(coeffs, length: int):
    """Invert K x D coefficients to a length x K sequence (zero-padded above D)."""
    d = coeffs.shape[1]
    if d > length:
        raise InputError(f"cannot decode {d} coefficients to length {length}")
    basis = dct_basis(length)[:d]
    if isinstance(coeffs, Tensor):
        return transpose(matmul(coeffs, Tensor(basis)))
    return (np.asarray(coeffs, dtype=np.float64) @ basis).T
