"""Input validation helpers used across the public API surface."""

from __future__ import annotations

import numpy as np

from .errors import DimMismatch, InvalidInput


def as_points(x, name: str = "points") -> np.ndarray:
    """Coerce ``x`` to an (N, 3) float64 array of finite 3D points."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInput(f"{name} must have shape (N, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


def as_vector(x, dim: int, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape[0] != dim:
        raise DimMismatch(f"{name} must have dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


def check_unit_rows(rows: np.ndarray, name: str, atol: float = 1e-5, allow_zero: bool = False) -> None:
    norms = np.linalg.norm(rows, axis=-1)
    ok = np.abs(norms - 1.0) <= atol
    if allow_zero:
        ok |= norms == 0.0
    if not np.all(ok):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise InvalidInput(f"{name} rows must be unit norm (worst deviation {worst:.2e})")


def normalized_rows(rows: np.ndarray, zero_tol: float = 1e-12) -> np.ndarray:
    """L2-normalize rows; rows with norm below ``zero_tol`` stay zero."""
    rows = np.asarray(rows)
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    safe = np.where(norms > zero_tol, norms, 1.0)
    out = rows / safe
    out = np.where(norms > zero_tol, out, 0.0)
    return out
