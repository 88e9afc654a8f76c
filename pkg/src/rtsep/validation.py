"""Input validation helpers shared by the estimator, engine, and CLI."""

from __future__ import annotations

import numpy as np


def check_audio(x, channels: int | None = None, name: str = "audio") -> np.ndarray:
    """Coerce to a (channels, samples) float32 array and validate it.

    Accepts (samples,) mono input, promoting it to one channel. Raises
    ValueError on wrong dimensionality, channel mismatch, or non-finite
    samples.
    """
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or (channels, samples), got shape {arr.shape}")
    if channels is not None and arr.shape[0] != channels:
        raise ValueError(f"{name} must have {channels} channels, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def check_finite(x: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x
