"""Pure-NumPy distance kernel, the fallback when the compiled one is absent."""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def pairwise_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix of shape (len(queries), len(points)).

    Brute force by explicit differences (no a^2+b^2-2ab shortcut): slower but
    free of the cancellation error that shortcut suffers for near-duplicates.
    """
    q = np.ascontiguousarray(queries, dtype=np.float64)
    p = np.ascontiguousarray(points, dtype=np.float64)
    out = np.empty((q.shape[0], p.shape[0]), dtype=np.float64)
    for i in range(q.shape[0]):
        d = p - q[i]
        out[i] = np.sqrt(np.einsum("ij,ij->i", d, d))
    return out
