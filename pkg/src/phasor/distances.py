"""Distance functions shared by the detector and the baseline."""

import numpy as np

METRICS = ("euclidean", "manhattan", "chebyshev")


def distances_to(points, v, metric="euclidean"):
    """Distances from each row of `points` (n, D) to the vector `v` (D,)."""
    diff = points - v
    if metric == "euclidean":
        return np.sqrt((diff * diff).sum(axis=1))
    if metric == "manhattan":
        return np.abs(diff).sum(axis=1)
    if metric == "chebyshev":
        return np.abs(diff).max(axis=1)
    raise ValueError(f"unknown distance metric: {metric!r}")
