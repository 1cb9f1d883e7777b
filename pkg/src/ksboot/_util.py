"""Small shared validation helpers."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateSampleError


def as_sample(x, min_len: int = 1) -> np.ndarray:
    """Coerce to a 1-D float array and check basic sanity."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D sample, got shape {arr.shape}")
    if arr.size < min_len:
        raise DegenerateSampleError(f"sample of length {arr.size} is shorter than {min_len}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite values")
    return arr
