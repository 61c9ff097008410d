"""Streaming outlier detection with a fixed-size set of periodic observers.

The model keeps ``k`` sampled data points ("observers"). Each observer
carries ``n_bins`` complex coefficients that accumulate, with exponential
decay of time constant ``T``, how often the observer was among the ``x``
nearest observers of arriving points. Because the coefficients rotate at
harmonics of the base period ``T0`` while decaying, they converge to the
one-sided frequency representation of the observer's neighborhood arrival
rate. Evaluating that representation at the current time tells whether an
observer's neighborhood is currently populated ("active") or between
bursts ("asleep"); only active observers are used as the reference for
outlier scoring. A point that lands on a sleeping cluster is therefore
scored against far-away active observers and stands out, which is exactly
the out-of-phase (contextual) case that purely geometric sliding-window
detectors cannot see.

Concurrency: a model is single-writer. ``process_point`` mutates state and
must be serialized per instance; read-only inspection (``observers``,
``temporal_shape``, ``spectrum_magnitude``, ``snapshot``) may run
concurrently with each other but not with ``process_point``. Ensemble
members are independent models and may be advanced in parallel, one writer
each.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distances import METRICS, distances_to
from .errors import (
    DimensionError,
    EmptyModelError,
    OutOfOrderError,
    ParameterError,
    SnapshotError,
)

SNAPSHOT_FORMAT = "phasor-model"
SNAPSHOT_VERSION = 1
ENSEMBLE_FORMAT = "phasor-ensemble"


@dataclass(frozen=True)
class ModelParams:
    """Detector parameters.

    k: number of observers held by the model.
    x: number of nearest observers considered for scoring and updates.
    T: time constant of the exponential forgetting window, in seconds.
    T0: base period of the frequency representation, in seconds. Bin n
        captures the periodicity T0/n; bin 0 is the time-averaged
        observation mass.
    n_bins: number of frequency bins per observer.
    q_id: fraction of observers allowed to be idle, in [0, 1].
    seed: seed of the model's random sampling stream.
    distance: one of "euclidean", "manhattan", "chebyshev".
    """

    k: int
    x: int
    T: float
    T0: float
    n_bins: int
    q_id: float
    seed: int = 0
    distance: str = "euclidean"

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.x < 1:
            raise ParameterError(f"x must be >= 1, got {self.x}")
        if not self.T > 0:
            raise ParameterError(f"T must be > 0, got {self.T}")
        if not self.T0 > 0:
            raise ParameterError(f"T0 must be > 0, got {self.T0}")
        if self.n_bins < 1:
            raise ParameterError(f"n_bins must be >= 1, got {self.n_bins}")
        if not 0.0 <= self.q_id <= 1.0:
            raise ParameterError(f"q_id must be within [0, 1], got {self.q_id}")
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")
        if self.distance not in METRICS:
            raise ParameterError(
                f"distance must be one of {METRICS}, got {self.distance!r}"
            )
        if self.T0 >= self.T:
            warnings.warn(
                f"T0 ({self.T0}) should be reasonably smaller than T ({self.T}) "
                "for the frequency representation to be accurate",
                stacklevel=2,
            )
        if self.x > self.k:
            warnings.warn(f"x ({self.x}) > k ({self.k}) has no effect", stacklevel=2)


@dataclass
class Observer:
    """A sampled point plus the temporal profile of its neighborhood.

    position: the observer's location in feature space.
    coeffs: complex coefficients, one per frequency bin; coeffs[0] is real.
    h: the maximum value coeffs[0] could have reached since insertion;
       coeffs[0].real / h in (0, 1] normalizes away observer age.
    inserted_at: stream time at which the observer was sampled.
    """

    position: np.ndarray
    coeffs: np.ndarray
    h: float
    inserted_at: float


@dataclass
class ScoreRecord:
    """Per-point output of the scorers.

    warmup is True when there was nothing to score against (empty model);
    n_active is the number of active observers at scoring time (window
    size for the sliding-window baseline); sampled tells whether the point
    was absorbed into the model.
    """

    t: float
    score: float
    warmup: bool
    n_active: int
    sampled: bool


def inverse_ft(coeffs, t_offset, t0):
    """Evaluate the temporal shape encoded by `coeffs` at `t_offset`.

    Computes Re(sum_n coeffs[n] * exp(j * t_offset * n * 2pi / t0)) along
    the last axis. `t_offset` is relative to the current stream time;
    offset 0 yields the activity statistic used for the active-observer
    view, bit-identically (the phase factors are exactly one).
    """
    coeffs = np.asarray(coeffs)
    if t_offset == 0.0:
        return coeffs.sum(axis=-1).real
    n = np.arange(coeffs.shape[-1])
    phase = np.exp(1j * (2.0 * np.pi / t0) * t_offset * n)
    return (coeffs * phase).sum(axis=-1).real


def temporal_shape(obs, t_offset, t0):
    """Reconstructed neighborhood arrival intensity of one observer.

    `t_offset` may be a scalar or an array of offsets (seconds, relative
    to the current stream time). One base period `t0` spans the full
    recoverable shape.
    """
    t_offset = np.asarray(t_offset, dtype=float)
    if t_offset.ndim == 0:
        return float(inverse_ft(obs.coeffs, float(t_offset), t0))
    return np.array([inverse_ft(obs.coeffs, off, t0) for off in t_offset])


def spectrum_magnitude(obs):
    """Magnitude per frequency bin; bin n corresponds to period T0/n."""
    return np.abs(obs.coeffs)


class ObserverModel:
    """Single-pass streaming outlier detector with constant per-point cost.

    Feed points in timestamp order through :meth:`process_point`; each call
    returns a :class:`ScoreRecord`. Per-point work and memory depend only
    on (k, x, n_bins, D), never on the number of points seen.

    Two models built with equal parameters produce bit-identical outputs
    on identical streams.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self._rng = np.random.Generator(np.random.PCG64(params.seed))
        self._dim = None
        self._n = 0
        self._pos = None
        self._coeffs = None
        self._h = None
        self._inserted_at = None
        self.i_lao = 0
        self.t_lao = 0.0
        self.points_seen = 0
        self.t_last = -math.inf
        # per-bin fade exponent: coeffs[n] *= exp(_fade_base[n] * dt)
        self._fade_base = (
            -1.0 / params.T
            + 1j * (2.0 * np.pi / params.T0) * np.arange(params.n_bins)
        )

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------

    @property
    def observer_count(self):
        return self._n

    @property
    def dim(self):
        return self._dim

    def observers(self):
        """Copies of the current observers, in insertion order."""
        return [
            Observer(
                position=self._pos[i].copy(),
                coeffs=self._coeffs[i].copy(),
                h=float(self._h[i]),
                inserted_at=float(self._inserted_at[i]),
            )
            for i in range(self._n)
        ]

    def threshold(self):
        """Activity threshold: the q_id-percentile of the bin-0 values.

        The largest value rho such that at most q_id * |observers| of the
        observers have coeffs[0].real strictly below rho. Realized as an
        order statistic: index floor(q_id * m) of the ascending values,
        clamped to the maximum when q_id = 1.
        """
        if self._n == 0:
            raise EmptyModelError("model has no observers")
        values = np.sort(self._coeffs[: self._n, 0].real)
        idx = math.floor(self.params.q_id * self._n)
        if idx >= self._n:
            idx = self._n - 1
        return float(values[idx])

    def active_indices(self):
        """Indices of currently active observers, in insertion order.

        An observer is active when its temporal shape evaluated at the
        current time clears the threshold. Never empty: if the strict rule
        excludes everyone, the single observer with the highest activity
        statistic (oldest on ties) is returned.
        """
        if self._n == 0:
            raise EmptyModelError("model has no observers")
        stats = inverse_ft(self._coeffs[: self._n], 0.0, self.params.T0)
        active = np.flatnonzero(stats >= self.threshold())
        if active.size == 0:
            active = np.array([int(np.argmax(stats))])
        return active

    def nearest(self, v, pool="all"):
        """Indices of the min(x, pool size) observers closest to `v`.

        Ascending by distance; ties broken by insertion order (older
        observer first). `pool` is "all" or "active".
        """
        v = self._check_vector(v)
        if self._n == 0:
            raise EmptyModelError("model has no observers")
        if pool == "all":
            candidates = np.arange(self._n)
        elif pool == "active":
            candidates = self.active_indices()
        else:
            raise ValueError(f"pool must be 'all' or 'active', got {pool!r}")
        dists = distances_to(self._pos[candidates], v, self.params.distance)
        order = np.argsort(dists, kind="stable")
        return candidates[order[: min(self.params.x, candidates.size)]]

    def score(self, v):
        """Outlier score of `v` against the current model, without update.

        Median distance to the nearest active observers; 0.0 when the
        model is empty.
        """
        if self._n == 0:
            return 0.0
        v = self._check_vector(v)
        na = self.nearest(v, pool="active")
        return float(np.median(distances_to(self._pos[na], v, self.params.distance)))

    # ------------------------------------------------------------------
    # processing
    # ------------------------------------------------------------------

    def process_point(self, v, t):
        """Score `v` at time `t`, then absorb it into the model.

        Steps, in order: build the nearest and nearest-active sets, report
        the median distance to the nearest-active set, decay every
        observer by the elapsed time, credit one observation to each of
        the nearest observers (membership fixed before the decay), and
        finally decide at the sampling rate whether `v` replaces the least
        used observer. Raises OutOfOrderError when `t` precedes the
        previous point.
        """
        v = self._check_vector(v, allow_new=True)
        t = float(t)
        if t < self.t_last:
            raise OutOfOrderError(
                f"timestamp {t} precedes previous point at {self.t_last}"
            )
        i = self.points_seen + 1

        if self._n == 0:
            # bootstrap: nothing to score against, sample unconditionally
            # (no random draw is consumed on this path)
            self._insert(v, t, i)
            self.points_seen = i
            self.t_last = t
            return ScoreRecord(t=t, score=0.0, warmup=True, n_active=0, sampled=True)

        dists = distances_to(self._pos[: self._n], v, self.params.distance)
        order = np.argsort(dists, kind="stable")
        nearest_all = order[: min(self.params.x, self._n)]

        active = self.active_indices()
        order_a = np.argsort(dists[active], kind="stable")
        nearest_active = active[order_a[: min(self.params.x, active.size)]]
        score = float(np.median(dists[nearest_active]))

        self.fade(t - self.t_last)
        self._coeffs[nearest_all] += 1.0

        prob = self.sampling_probability(nearest_all, t)
        sampled = self._rng.random() <= prob
        if sampled:
            self._insert(v, t, i)

        self.points_seen = i
        self.t_last = t
        return ScoreRecord(
            t=t,
            score=score,
            warmup=False,
            n_active=int(active.size),
            sampled=bool(sampled),
        )

    def sampling_probability(self, nearest_idx, t):
        """Probability of adopting a point arriving at `t` whose nearest
        observers are `nearest_idx`.

        min(1, k^2/(T*x) * (local / total bin-0 mass) * (time since the
        last adoption / points since the last adoption)). Tuned so that
        on a steady stream about k points are adopted per time window T;
        the mass ratio steers adoptions toward underrepresented regions.
        """
        if self._n == 0:
            return 1.0
        p0 = self._coeffs[: self._n, 0].real
        total = p0.sum()
        # total can underflow to 0 after an extreme time gap; every
        # observer is equally stale then, so the density ratio is 1
        ratio = p0[nearest_idx].sum() / total if total > 0.0 else 1.0
        k, x, big_t = self.params.k, self.params.x, self.params.T
        i = self.points_seen + 1
        return min(
            1.0,
            (k * k / (big_t * x))
            * ratio
            * (t - self.t_lao)
            / max(1, i - self.i_lao),
        )

    def fade(self, dt):
        """Decay all observers by `dt` seconds.

        Coefficients are multiplied by exp((-1/T + j*n*2pi/T0) * dt),
        evaluated from `dt` in one step so that phase error does not
        accumulate over long streams; h decays by exp(-dt/T) and then
        counts the new point (+1 for every observer, observed or not).
        """
        if dt < 0:
            raise OutOfOrderError(f"negative time step: {dt}")
        if self._n == 0:
            return
        factors = np.exp(self._fade_base * dt)
        self._coeffs[: self._n] *= factors
        # h must decay by the exact same factor as bin 0, or rounding can
        # push the usage ratio of an always-observed observer above 1
        self._h[: self._n] = self._h[: self._n] * factors[0].real + 1.0

    def _insert(self, v, t, i):
        if self._pos is None:
            k, nb = self.params.k, self.params.n_bins
            self._pos = np.empty((k, self._dim), dtype=float)
            self._coeffs = np.empty((k, nb), dtype=complex)
            self._h = np.empty(k, dtype=float)
            self._inserted_at = np.empty(k, dtype=float)
        if self._n == self.params.k:
            # evict the observer with the lowest age-normalized use;
            # argmin takes the first (oldest) minimizer
            victim = int(np.argmin(self._coeffs[: self._n, 0].real / self._h[: self._n]))
            last = self._n - 1
            for arr in (self._pos, self._coeffs, self._h, self._inserted_at):
                arr[victim:last] = arr[victim + 1 : last + 1]
            slot = last
        else:
            slot = self._n
            self._n += 1
        self._pos[slot] = v
        self._coeffs[slot] = 1.0 + 0.0j
        self._h[slot] = 1.0
        self._inserted_at[slot] = t
        self.i_lao = i
        self.t_lao = t

    def _check_vector(self, v, allow_new=False):
        v = np.asarray(v, dtype=float)
        if v.ndim != 1:
            raise DimensionError(f"expected a 1-D feature vector, got shape {v.shape}")
        if self._dim is None:
            if allow_new:
                self._dim = v.shape[0]
            return v
        if v.shape[0] != self._dim:
            raise DimensionError(
                f"point has {v.shape[0]} features, model expects {self._dim}"
            )
        return v

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def snapshot(self):
        """Lossless dict representation of the full model state."""
        p = self.params
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "params": {
                "k": p.k,
                "x": p.x,
                "T": p.T,
                "T0": p.T0,
                "n_bins": p.n_bins,
                "q_id": p.q_id,
                "seed": p.seed,
                "distance": p.distance,
            },
            "dim": self._dim,
            "observers": [
                {
                    "position": self._pos[j].tolist(),
                    "coeffs": [[c.real, c.imag] for c in self._coeffs[j]],
                    "h": float(self._h[j]),
                    "inserted_at": float(self._inserted_at[j]),
                }
                for j in range(self._n)
            ],
            "i_lao": self.i_lao,
            "t_lao": self.t_lao,
            "points_seen": self.points_seen,
            "t_last": None if self.t_last == -math.inf else self.t_last,
            "rng_state": json.dumps(self._rng.bit_generator.state).encode().hex(),
        }

    @classmethod
    def restore(cls, snap):
        """Rebuild a model from :meth:`snapshot` output.

        The restored model continues the stream exactly as the original
        would have.
        """
        if not isinstance(snap, dict) or snap.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotError("not a model snapshot")
        if snap.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version: {snap.get('version')!r}")
        try:
            params = ModelParams(**snap["params"])
            model = cls(params)
            observers = snap["observers"]
            dim = snap["dim"]
            if len(observers) > params.k:
                raise SnapshotError(
                    f"snapshot has {len(observers)} observers, limit is k={params.k}"
                )
            model._dim = dim
            if observers:
                model._pos = np.empty((params.k, dim), dtype=float)
                model._coeffs = np.empty((params.k, params.n_bins), dtype=complex)
                model._h = np.empty(params.k, dtype=float)
                model._inserted_at = np.empty(params.k, dtype=float)
                for j, rec in enumerate(observers):
                    if len(rec["coeffs"]) != params.n_bins:
                        raise SnapshotError(
                            f"observer {j} has {len(rec['coeffs'])} coefficient bins, "
                            f"params say n_bins={params.n_bins}"
                        )
                    if len(rec["position"]) != dim:
                        raise SnapshotError(
                            f"observer {j} has a {len(rec['position'])}-D position, "
                            f"snapshot says dim={dim}"
                        )
                    model._pos[j] = rec["position"]
                    model._coeffs[j] = [complex(re, im) for re, im in rec["coeffs"]]
                    model._h[j] = rec["h"]
                    model._inserted_at[j] = rec["inserted_at"]
                model._n = len(observers)
            model.i_lao = int(snap["i_lao"])
            model.t_lao = float(snap["t_lao"])
            model.points_seen = int(snap["points_seen"])
            model.t_last = -math.inf if snap["t_last"] is None else float(snap["t_last"])
            bg = np.random.PCG64()
            bg.state = json.loads(bytes.fromhex(snap["rng_state"]))
            model._rng = np.random.Generator(bg)
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotError(f"malformed snapshot: {exc}") from exc
        return model


class Ensemble:
    """A bag of independently evolving models sharing all parameters
    except the seed (member seed = base seed + member index).

    The combined score of a point is the median of the member scores; the
    warmup and sampled flags are OR-ed and n_active is the smallest member
    value. A 1-member ensemble behaves exactly like the bare model.
    """

    def __init__(self, params: ModelParams, size: int = 9):
        if size < 1:
            raise ParameterError(f"ensemble size must be >= 1, got {size}")
        self.members = [
            ObserverModel(
                ModelParams(
                    k=params.k,
                    x=params.x,
                    T=params.T,
                    T0=params.T0,
                    n_bins=params.n_bins,
                    q_id=params.q_id,
                    seed=params.seed + m,
                    distance=params.distance,
                )
            )
            for m in range(size)
        ]

    def process_point(self, v, t):
        records = [m.process_point(v, t) for m in self.members]
        return ScoreRecord(
            t=float(t),
            score=float(np.median([r.score for r in records])),
            warmup=any(r.warmup for r in records),
            n_active=min(r.n_active for r in records),
            sampled=any(r.sampled for r in records),
        )

    def snapshot(self):
        return {
            "format": ENSEMBLE_FORMAT,
            "version": SNAPSHOT_VERSION,
            "members": [m.snapshot() for m in self.members],
        }

    @classmethod
    def restore(cls, snap):
        if not isinstance(snap, dict) or snap.get("format") != ENSEMBLE_FORMAT:
            raise SnapshotError("not an ensemble snapshot")
        if snap.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version: {snap.get('version')!r}")
        members = snap.get("members")
        if not members:
            raise SnapshotError("ensemble snapshot has no members")
        ens = cls.__new__(cls)
        ens.members = [ObserverModel.restore(m) for m in members]
        return ens
