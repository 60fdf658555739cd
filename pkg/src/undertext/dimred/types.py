"""Shared containers and small numeric helpers for the embedding methods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class Embedding:
    """N x q latent coordinates, row i matching row i of the projected data."""

    values: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]


def as_matrix(data) -> np.ndarray:
    """Accept a DesignMatrix or a plain 2-D array; return float64 (N, D)."""
    values = getattr(data, "values", data)
    arr = np.asarray(values, np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"expected a 2-D data matrix, got shape {arr.shape}")
    return arr


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive.

    Ties resolve to the lowest index (argmax picks the first maximum), making
    eigenvector orientation reproducible across runs.
    """
    out = vectors.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def check_columns(data: np.ndarray, expected: int, what: str) -> None:
    if data.shape[1] != expected:
        raise ConfigError(f"{what}: data has {data.shape[1]} columns, model expects {expected}")
