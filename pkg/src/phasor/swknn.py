"""Sliding-window k-nearest-neighbor outlier detection baseline.

Purely geometric: a point is scored by its distance to the k-th nearest
neighbor among the points of the trailing time window. Kept deliberately
simple (linear scan over a growing ring buffer, no index); it exists as
the comparison baseline that is blind to out-of-phase anomalies.
"""

import numpy as np

from .distances import METRICS, distances_to
from .errors import DimensionError, OutOfOrderError, ParameterError
from .model import ScoreRecord


class SWKnn:
    """Time-based sliding-window kNN outlier scorer.

    Evicts points older than `window` seconds, scores the arriving point
    against what remains (k_nn-th nearest distance; farthest available
    when the window holds fewer than k_nn points; 0 with the warmup flag
    when empty), then inserts the point.
    """

    def __init__(self, window, k_nn=5, distance="euclidean"):
        if not window > 0:
            raise ParameterError(f"window must be > 0, got {window}")
        if k_nn < 1:
            raise ParameterError(f"k_nn must be >= 1, got {k_nn}")
        if distance not in METRICS:
            raise ParameterError(f"distance must be one of {METRICS}, got {distance!r}")
        self.window = float(window)
        self.k_nn = int(k_nn)
        self.distance = distance
        self._dim = None
        self._pos = None
        self._t = None
        self._start = 0
        self._end = 0
        self.t_last = -np.inf

    @property
    def window_count(self):
        return self._end - self._start

    def process_point(self, v, t):
        v = np.asarray(v, dtype=float)
        t = float(t)
        if v.ndim != 1:
            raise DimensionError(f"expected a 1-D feature vector, got shape {v.shape}")
        if self._dim is None:
            self._dim = v.shape[0]
            cap = 1024
            self._pos = np.empty((cap, self._dim), dtype=float)
            self._t = np.empty(cap, dtype=float)
        elif v.shape[0] != self._dim:
            raise DimensionError(
                f"point has {v.shape[0]} features, detector expects {self._dim}"
            )
        if t < self.t_last:
            raise OutOfOrderError(f"timestamp {t} precedes previous point at {self.t_last}")
        self.t_last = t

        while self._start < self._end and self._t[self._start] <= t - self.window:
            self._start += 1

        count = self._end - self._start
        if count == 0:
            score, warmup = 0.0, True
        else:
            d = distances_to(self._pos[self._start : self._end], v, self.distance)
            if count >= self.k_nn:
                score = float(np.partition(d, self.k_nn - 1)[self.k_nn - 1])
            else:
                score = float(d.max())
            warmup = False

        self._append(v, t)
        return ScoreRecord(t=t, score=score, warmup=warmup, n_active=count, sampled=True)

    def _append(self, v, t):
        if self._end == self._t.shape[0]:
            count = self._end - self._start
            if self._start > 0:
                self._pos[:count] = self._pos[self._start : self._end]
                self._t[:count] = self._t[self._start : self._end]
            else:
                self._pos = np.concatenate([self._pos, np.empty_like(self._pos)])
                self._t = np.concatenate([self._t, np.empty_like(self._t)])
            self._start, self._end = 0, count
        self._pos[self._end] = v
        self._t[self._end] = t
        self._end += 1
