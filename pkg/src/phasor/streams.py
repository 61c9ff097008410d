"""Synthetic labeled stream generation.

Builds timestamped point streams from a small declarative spec: Gaussian
clusters that switch on and off at phase windows of their own period,
plus two kinds of injected anomalies. Spatial outliers are uniform
background noise away from every cluster; contextual outliers land on a
cluster's footprint while that cluster is switched off, so they are
geometrically unremarkable and only their timing is wrong.
"""

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ParameterError


class Label(IntEnum):
    NORMAL = 0
    SPATIAL = 1
    CONTEXTUAL = 2


@dataclass(frozen=True)
class ClusterSpec:
    """One periodic cluster.

    Points are emitted as a Poisson process of `base_rate` points/second
    while the phase of `t` within `period` falls in [on_start, on_end);
    positions are isotropic Gaussian around `center`, truncated at
    `radius` (3 sigma).
    """

    center: tuple
    radius: float
    base_rate: float
    duty: tuple = (0.0, 1.0)
    period: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"radius must be > 0, got {self.radius}")
        if not self.base_rate > 0:
            raise ParameterError(f"base_rate must be > 0, got {self.base_rate}")
        if not self.period > 0:
            raise ParameterError(f"period must be > 0, got {self.period}")
        a, b = self.duty
        if not (0.0 <= a < b <= 1.0):
            raise ParameterError(f"duty must satisfy 0 <= on_start < on_end <= 1, got {self.duty}")

    @property
    def off_fraction(self):
        a, b = self.duty
        return 1.0 - (b - a)

    def is_on(self, t):
        phase = (t % self.period) / self.period
        a, b = self.duty
        return a <= phase < b


@dataclass(frozen=True)
class StreamSpec:
    """A full stream: clusters plus background and out-of-phase anomalies.

    Rates are points/second. Spatial outliers are uniform over the
    bounding box of the clusters (rejecting anything within twice a
    cluster radius); contextual outliers reuse a cluster's spatial
    distribution but only during that cluster's off phase.
    """

    clusters: tuple
    duration: float
    dims: int = 2
    spatial_outlier_rate: float = 0.0
    contextual_outlier_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterError(f"duration must be > 0, got {self.duration}")
        if self.dims < 1:
            raise ParameterError(f"dims must be >= 1, got {self.dims}")
        if not self.clusters:
            raise ParameterError("at least one cluster is required")
        object.__setattr__(self, "clusters", tuple(self.clusters))
        for c in self.clusters:
            if len(c.center) != self.dims:
                raise ParameterError(
                    f"cluster center {c.center} does not have dims={self.dims}"
                )
        if self.spatial_outlier_rate < 0 or self.contextual_outlier_rate < 0:
            raise ParameterError("outlier rates must be non-negative")
        if self.contextual_outlier_rate > 0 and all(
            c.off_fraction == 0.0 for c in self.clusters
        ):
            raise ParameterError(
                "contextual outliers require at least one cluster with an off phase"
            )


@dataclass
class LabeledPoint:
    t: float
    v: np.ndarray
    label: int


def _bounding_box(spec):
    centers = np.array([c.center for c in spec.clusters], dtype=float)
    radii = np.array([c.radius for c in spec.clusters])
    lo = (centers - 5.0 * radii[:, None]).min(axis=0)
    hi = (centers + 5.0 * radii[:, None]).max(axis=0)
    return lo, hi


def _truncated_gaussian(rng, count, dims, radius):
    """Isotropic Gaussian offsets with sigma = radius/3, resampled to stay
    within `radius` of the origin."""
    sigma = radius / 3.0
    out = rng.standard_normal((count, dims)) * sigma
    while True:
        bad = np.flatnonzero(np.linalg.norm(out, axis=1) > radius)
        if bad.size == 0:
            return out
        out[bad] = rng.standard_normal((bad.size, dims)) * sigma


def _on_windows(cluster, duration):
    a, b = cluster.duty
    p = cluster.period
    cycle = 0
    while cycle * p + a * p < duration:
        w0 = cycle * p + a * p
        w1 = min(cycle * p + b * p, duration)
        if w1 > w0:
            yield w0, w1
        cycle += 1


def active_duration(cluster, duration):
    """Total time the cluster is on within [0, duration)."""
    return sum(w1 - w0 for w0, w1 in _on_windows(cluster, duration))


def generate(spec: StreamSpec):
    """Generate the stream described by `spec` as a list of LabeledPoint,
    sorted by strictly increasing timestamp. Identical spec and seed give
    an identical stream."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    times, positions, labels = [], [], []

    for c in spec.clusters:
        center = np.asarray(c.center, dtype=float)
        for w0, w1 in _on_windows(c, spec.duration):
            n = rng.poisson(c.base_rate * (w1 - w0))
            if n == 0:
                continue
            times.append(rng.uniform(w0, w1, n))
            positions.append(center + _truncated_gaussian(rng, n, spec.dims, c.radius))
            labels.append(np.full(n, Label.NORMAL, dtype=int))

    if spec.spatial_outlier_rate > 0:
        lo, hi = _bounding_box(spec)
        centers = np.array([c.center for c in spec.clusters], dtype=float)
        radii = np.array([c.radius for c in spec.clusters])
        n = rng.poisson(spec.spatial_outlier_rate * spec.duration)
        if n > 0:
            pos = rng.uniform(lo, hi, (n, spec.dims))
            while True:
                d = np.linalg.norm(pos[:, None, :] - centers[None, :, :], axis=2)
                bad = np.flatnonzero((d < 2.0 * radii[None, :]).any(axis=1))
                if bad.size == 0:
                    break
                pos[bad] = rng.uniform(lo, hi, (bad.size, spec.dims))
            times.append(rng.uniform(0.0, spec.duration, n))
            positions.append(pos)
            labels.append(np.full(n, Label.SPATIAL, dtype=int))

    if spec.contextual_outlier_rate > 0:
        eligible = [c for c in spec.clusters if c.off_fraction > 0.0]
        n = rng.poisson(spec.contextual_outlier_rate * spec.duration)
        for _ in range(n):
            c = eligible[rng.integers(len(eligible))]
            while True:
                t = rng.uniform(0.0, spec.duration)
                if not c.is_on(t):
                    break
            center = np.asarray(c.center, dtype=float)
            times.append(np.array([t]))
            positions.append(center + _truncated_gaussian(rng, 1, spec.dims, c.radius))
            labels.append(np.array([Label.CONTEXTUAL], dtype=int))

    if not times:
        return []
    t = np.concatenate(times)
    v = np.concatenate(positions)
    lab = np.concatenate(labels)
    order = np.argsort(t, kind="stable")
    t, v, lab = t[order], v[order], lab[order]
    for j in range(1, len(t)):  # break exact timestamp ties, keep order strict
        if t[j] <= t[j - 1]:
            t[j] = np.nextafter(t[j - 1], math.inf)
    return [LabeledPoint(float(t[j]), v[j], int(lab[j])) for j in range(len(t))]


def _lower_gamma_regularized(s, z, terms=200):
    # series P(s, z) = z^s e^-z / Gamma(s+1) * sum z^k / prod(s+1..s+k)
    total = 1.0
    term = 1.0
    for k in range(1, terms):
        term *= z / (s + k)
        total += term
        if term < 1e-16 * total:
            break
    return math.exp(s * math.log(z) - z - math.lgamma(s + 1.0)) * total


def _truncated_gaussian_pdf(offset, radius, dims):
    r = float(np.linalg.norm(offset))
    if r > radius:
        return 0.0
    sigma = radius / 3.0
    dens = math.exp(-0.5 * (r / sigma) ** 2) / (
        (2.0 * math.pi) ** (dims / 2.0) * sigma**dims
    )
    return dens / _lower_gamma_regularized(dims / 2.0, 4.5)


def rate_at(spec: StreamSpec, v, t):
    """Expected arrival-rate density (points per second per unit volume)
    at location `v` and time `t` under the generating process.

    Background terms use the uniform-box density without the small
    correction for the volume excluded around clusters.
    """
    v = np.asarray(v, dtype=float)
    total = 0.0
    for c in spec.clusters:
        if c.is_on(t):
            total += c.base_rate * _truncated_gaussian_pdf(
                v - np.asarray(c.center, dtype=float), c.radius, spec.dims
            )
    if spec.spatial_outlier_rate > 0:
        lo, hi = _bounding_box(spec)
        centers = np.array([c.center for c in spec.clusters], dtype=float)
        radii = np.array([c.radius for c in spec.clusters])
        inside = bool(np.all(v >= lo) and np.all(v <= hi))
        clear = bool(
            (np.linalg.norm(v - centers, axis=1) >= 2.0 * radii).all()
        )
        if inside and clear:
            total += spec.spatial_outlier_rate / float(np.prod(hi - lo))
    if spec.contextual_outlier_rate > 0:
        eligible = [c for c in spec.clusters if c.off_fraction > 0.0]
        for c in eligible:
            if not c.is_on(t):
                per_cluster = spec.contextual_outlier_rate / len(eligible)
                total += (
                    per_cluster
                    / c.off_fraction
                    * _truncated_gaussian_pdf(
                        v - np.asarray(c.center, dtype=float), c.radius, spec.dims
                    )
                )
    return total


def poc_preset(
    seed=1,
    contextual_frac=0.005,
    spatial_frac=0.005,
    base_period=500.0,
    duration=None,
    rate=2.0,
    dims=2,
):
    """Five periodic clusters with staggered on/off windows and periods
    {P, P, P/2, P/2, P/4}, plus injected anomalies.

    `contextual_frac` and `spatial_frac` are fractions of the expected
    clustered point count, so 0.005 yields roughly 0.5% of labeled
    contextual outliers in the stream.
    """
    if duration is None:
        duration = 40.0 * base_period
    if dims < 2:
        raise ParameterError("the preset needs dims >= 2")

    def pad(xy):
        return tuple(xy) + (0.0,) * (dims - 2)

    p = base_period
    clusters = (
        ClusterSpec(pad((0.0, 0.0)), 1.0, rate, (0.0, 0.5), p),
        ClusterSpec(pad((10.0, 0.0)), 1.0, rate, (0.5, 1.0), p),
        ClusterSpec(pad((0.0, 10.0)), 1.0, rate, (0.0, 0.5), p / 2.0),
        ClusterSpec(pad((10.0, 10.0)), 1.0, rate, (0.5, 1.0), p / 2.0),
        ClusterSpec(pad((5.0, 5.0)), 1.0, rate, (0.25, 0.75), p / 4.0),
    )
    expected_normal = sum(
        c.base_rate * active_duration(c, duration) for c in clusters
    )
    return StreamSpec(
        clusters=clusters,
        duration=duration,
        dims=dims,
        spatial_outlier_rate=spatial_frac * expected_normal / duration,
        contextual_outlier_rate=contextual_frac * expected_normal / duration,
        seed=seed,
    )
