"""Gaussian RBF kernel in width parameterization: exp(-|x - xi|^2 / (2 gamma^2))."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch


def rbf_kernel(x, xi, gamma: float) -> float:
    x = np.asarray(x, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if x.shape != xi.shape:
        raise DimensionMismatch(f"vectors have {x.size} and {xi.size} entries")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = x - xi
    return float(np.exp(-(d @ d) / (2.0 * gamma * gamma)))


def squared_distances(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"points have {A.shape[1]} and {B.shape[1]} coordinates")
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    D = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    if B is A:
        np.fill_diagonal(D, 0.0)
    return D


def kernel_from_distances(D: np.ndarray, gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return np.exp(-D / (2.0 * gamma * gamma))


def rbf_gram(A: np.ndarray, B: np.ndarray | None = None, gamma: float = 1.0) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B`` (``A`` with itself by default)."""
    return kernel_from_distances(squared_distances(A, B), gamma)
