"""Acceptance suite: one test per release criterion, one printed verdict
line per criterion (run with `pytest -s tests/test_acceptance.py -v` to
see them as they complete). Statistical criteria use fixed seeds, so the
whole suite is deterministic.
"""

import gc
import json
import math
import time
import tracemalloc

import numpy as np

import phasor.io as pio
from phasor import ModelParams, ObserverModel, SWKnn
from phasor.metrics import adjust, average_precision, roc_auc
from phasor.model import inverse_ft, temporal_shape
from phasor.streams import ClusterSpec, StreamSpec, generate, poc_preset

from reference import NaiveModel, definitional_ap, pairwise_auc


def report(num, name, ok, detail):
    print(f"\nACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


# ---------------------------------------------------------------------------
# 1. Full-pipeline equivalence against the naive line-by-line reference
# ---------------------------------------------------------------------------

def random_case(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 21))
    ps = dict(
        k=k,
        x=int(rng.integers(1, k + 1)),
        T=float(rng.uniform(20.0, 200.0)),
        n_bins=int(rng.integers(1, 9)),
        q_id=float(rng.random()),
        seed=int(rng.integers(0, 2**31)),
        distance=("euclidean", "manhattan", "chebyshev")[seed % 3],
    )
    ps["T0"] = ps["T"] / float(rng.uniform(2.0, 20.0))
    n_points = int(rng.integers(50, 501))
    dim = int(rng.integers(1, 5))
    t = 0.0
    stream = []
    for _ in range(n_points):
        if rng.random() > 0.05:  # keep a few dt = 0 repeats in the mix
            t += float(rng.exponential(0.3))
        v = rng.normal(size=dim) + rng.integers(0, 3) * 4.0
        stream.append((t, v))
    return ps, stream


def test_c1_oracle_equivalence():
    started = time.perf_counter()
    worst = 0.0
    total = 0
    for seed in range(20):
        ps, stream = random_case(seed)
        engine = ObserverModel(ModelParams(**ps))
        naive = NaiveModel(**ps)
        for t, v in stream:
            got = engine.process_point(v, t)
            t_ref, score, warmup, n_active, sampled = naive.process_point(list(v), t)
            assert (got.warmup, got.n_active, got.sampled) == (warmup, n_active, sampled), (
                f"seed {seed}: flags diverged at t={t}"
            )
            worst = max(worst, abs(got.score - score))
            total += 1
    elapsed = time.perf_counter() - started
    report(
        1,
        "oracle-equivalence",
        worst <= 1e-9 and elapsed < 10.0,
        f"20 streams, {total} points, max |dscore| = {worst:.2e}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. Sampling rate: about k adoptions per time window T on steady streams
# ---------------------------------------------------------------------------

def stationary_points(rate, duration, seed):
    spec = StreamSpec(
        clusters=(ClusterSpec(center=(0.0, 0.0), radius=1.0, base_rate=rate),),
        duration=duration,
        dims=2,
        seed=seed,
    )
    return generate(spec)


def test_c2_sampling_rate():
    started = time.perf_counter()
    T = 500.0
    pts = stationary_points(rate=8.0, duration=12 * T, seed=101)
    means = {}
    for k in (50, 200):
        m = ObserverModel(ModelParams(k=k, x=5, T=T, T0=50.0, n_bins=4, q_id=0.2, seed=3))
        st = np.array([p.t for p in pts if m.process_point(p.v, p.t).sampled])
        windows = [((st >= w0) & (st < w0 + T)).sum() for w0 in np.arange(2 * T, 12 * T, T)]
        means[k] = float(np.mean(windows))
        assert abs(means[k] - k) <= 0.25 * k, (
            f"k={k}: mean adoptions per window {means[k]:.1f} outside k +- 25%"
        )

    day, week = 86400.0, 604800.0
    pts = stationary_points(rate=0.02, duration=28 * day, seed=55)
    m = ObserverModel(ModelParams(k=400, x=5, T=week, T0=week / 8, n_bins=8, q_id=0.2, seed=9))
    st = np.array([p.t for p in pts if m.process_point(p.v, p.t).sampled])
    daily = [((st >= d) & (st < d + day)).sum() for d in np.arange(14 * day, 28 * day, day)]
    daily_mean = float(np.mean(daily))
    elapsed = time.perf_counter() - started
    report(
        2,
        "sampling-rate",
        abs(daily_mean - 57.0) <= 15.0 and elapsed < 120.0,
        f"per-T means {means[50]:.1f}/{means[200]:.1f} (targets 50/200), "
        f"daily mean {daily_mean:.1f} (target 57+-15), {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 3. Frequency recovery: cosine-modulated arrivals reconstructed from the
#    dominant observer's coefficients
# ---------------------------------------------------------------------------

def test_c3_ft_recovery():
    started = time.perf_counter()
    t0_period = 60.0
    t_const = 10 * t0_period
    duration = 6 * t_const  # evaluate after a 5T burn-in
    r0 = 55000.0 / duration
    rng = np.random.default_rng(77)
    m = ObserverModel(
        ModelParams(k=25, x=3, T=t_const, T0=t0_period, n_bins=12, q_id=0.2, seed=4)
    )
    r_max = r0 * 1.8
    t = 0.0
    n = 0
    while t < duration:
        t += rng.exponential(1.0 / r_max)
        rate = r0 * (1.0 + 0.8 * math.cos(2 * math.pi * t / t0_period))
        if rng.random() < rate / r_max:  # thinning
            m.process_point(rng.normal(size=2) * 0.1, t)
            n += 1
    assert n >= 50_000, f"stream too short: {n} points"
    dominant = max(m.observers(), key=lambda o: o.coeffs[0].real)
    offsets = np.arange(64) * t0_period / 64.0
    shape = temporal_shape(dominant, offsets, t0_period)
    truth = 1.0 + 0.8 * np.cos(2 * math.pi * (m.t_last + offsets) / t0_period)
    a = shape - shape.mean()
    b = truth - truth.mean()
    pearson = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    elapsed = time.perf_counter() - started
    report(
        3,
        "ft-recovery",
        pearson >= 0.9 and elapsed < 60.0,
        f"{n} points, pearson r = {pearson:.4f} (need >= 0.9), {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 4. Out-of-phase blindness gap: detector holds its AUC as the contextual
#    fraction grows while the sliding-window baseline degrades
# ---------------------------------------------------------------------------

def test_c4_contextual_auc_trend():
    started = time.perf_counter()
    t0_period = 500.0
    t_const = 5 * t0_period
    duration = 8 * t_const
    burn = 2 * t_const
    det_auc, sw_auc = [], []
    fractions = (0.0, 0.005, 0.01, 0.02)
    for frac in fractions:
        spec = poc_preset(
            seed=1000 + int(frac * 1000),
            contextual_frac=frac,
            spatial_frac=0.005,
            base_period=t0_period,
            duration=duration,
            rate=2.0,
        )
        pts = generate(spec)
        detector = ObserverModel(
            ModelParams(k=150, x=5, T=t_const, T0=t0_period, n_bins=32, q_id=0.3, seed=7)
        )
        baseline = SWKnn(window=t0_period, k_nn=5)
        for algo, out in ((detector, det_auc), (baseline, sw_auc)):
            scores, labels = [], []
            for p in pts:
                rec = algo.process_point(p.v, p.t)
                if p.t >= burn and not rec.warmup:
                    scores.append(rec.score)
                    labels.append(1 if p.label >= 1 else 0)
            out.append(roc_auc(scores, labels))
    elapsed = time.perf_counter() - started
    monotone = all(sw_auc[i + 1] <= sw_auc[i] + 1e-9 for i in range(len(sw_auc) - 1))
    ok = (
        all(a >= 0.95 for a in det_auc)
        and monotone
        and det_auc[-1] - sw_auc[-1] >= 0.05
        and elapsed < 300.0
    )
    detail = (
        "detector AUC " + "/".join(f"{a:.3f}" for a in det_auc)
        + ", baseline " + "/".join(f"{a:.3f}" for a in sw_auc)
        + f", gap at 2% = {det_auc[-1] - sw_auc[-1]:.3f}, {elapsed:.0f}s"
    )
    report(4, "contextual-auc-trend", ok, detail)


# ---------------------------------------------------------------------------
# 5. Metric oracles (stand-in for the external benchmark study): exact
#    agreement with brute-force AUC/AP plus the chance-adjustment anchors
# ---------------------------------------------------------------------------

def test_c5_metric_oracles():
    rng = np.random.default_rng(59)
    worst_auc = worst_ap = 0.0
    done = 0
    while done < 25:
        scores = np.round(rng.random(200), 2)
        labels = (rng.random(200) < rng.uniform(0.05, 0.5)).astype(int)
        if labels.sum() in (0, 200):
            continue
        done += 1
        worst_auc = max(worst_auc, abs(roc_auc(scores, labels) - pairwise_auc(scores, labels)))
        worst_ap = max(
            worst_ap,
            abs(average_precision(scores, labels) - definitional_ap(list(scores), list(labels))),
        )
    anchors = (
        adjust(1.0, 0.3) == 1.0
        and adjust(0.25, 0.25) == 0.0
        and adjust(0.2, 0.25) < 0.0
    )
    ok = worst_auc <= 1e-12 and worst_ap <= 1e-12 and anchors
    report(
        5,
        "metric-oracles",
        ok,
        f"25 instances of 200 points, max |dAUC| = {worst_auc:.1e}, "
        f"max |dAP| = {worst_ap:.1e}, adjustment anchors {'ok' if anchors else 'broken'}",
    )


# ---------------------------------------------------------------------------
# 6. Constant per-point cost and length-independent memory on 1M points
# ---------------------------------------------------------------------------

N_POINTS = 1_000_000
CHUNK = 20_000


def million_point_chunks(seed):
    """Stationary stream generated into reused buffers (nothing retained)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    dts = np.empty(CHUNK)
    vs = np.empty((CHUNK, 3))
    done = 0
    t = 0.0
    while done < N_POINTS:
        n = min(CHUNK, N_POINTS - done)
        rng.standard_exponential(out=dts[:n])
        rng.standard_normal(out=vs[:n])
        ts = t + np.cumsum(dts[:n]) * 0.01
        t = float(ts[-1])
        yield ts, vs[:n]
        done += n


def cost_model():
    return ObserverModel(
        ModelParams(k=50, x=4, T=200.0, T0=20.0, n_bins=8, q_id=0.2, seed=3)
    )


def test_c6_constant_per_point_cost():
    started = time.perf_counter()
    model = cost_model()
    lap = np.empty(N_POINTS, dtype=np.int64)
    i = 0
    gc.disable()
    for ts, vs in million_point_chunks(17):
        for j in range(len(ts)):
            t0 = time.perf_counter_ns()
            model.process_point(vs[j], ts[j])
            lap[i] = time.perf_counter_ns() - t0
            i += 1
    gc.enable()
    early = float(np.median(lap[:100_000]))
    late = float(np.median(lap[900_000:]))
    ratio = late / early

    model = cost_model()
    tracemalloc.start()
    i = 0
    at_100k = None
    for ts, vs in million_point_chunks(17):
        for j in range(len(ts)):
            model.process_point(vs[j], ts[j])
            i += 1
            if i == 100_000:
                gc.collect()
                at_100k = tracemalloc.get_traced_memory()
    gc.collect()
    at_1m = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    current_growth = at_1m[0] - at_100k[0]
    peak_growth = at_1m[1] - at_100k[1]
    elapsed = time.perf_counter() - started
    ok = (
        ratio <= 1.5
        and current_growth < 1_000_000
        and peak_growth < 1_000_000
        and elapsed < 300.0
    )
    report(
        6,
        "constant-per-point-cost",
        ok,
        f"median {early/1e3:.1f}us -> {late/1e3:.1f}us (ratio {ratio:.2f}, need <= 1.5), "
        f"memory growth 100k->1M: current {current_growth/1e3:+.0f}KB "
        f"peak {peak_growth/1e3:+.0f}KB, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 7. Invariant suites, 1000 randomized cases each
# ---------------------------------------------------------------------------

def drive(rng, n_points=20):
    k = int(rng.integers(1, 9))
    m = ObserverModel(
        ModelParams(
            k=k,
            x=int(rng.integers(1, k + 1)),
            T=float(rng.uniform(5.0, 100.0)),
            T0=float(rng.uniform(0.5, 4.0)),
            n_bins=int(rng.integers(1, 7)),
            q_id=float(rng.random()),
            seed=int(rng.integers(0, 2**31)),
        )
    )
    t = 0.0
    for _ in range(n_points):
        t += float(rng.exponential(0.4))
        yield m, m.process_point(rng.normal(size=2), t)


def test_c7_invariant_suites():
    cases = 1000
    dc_bad = ratio_bad = 0
    rng = np.random.default_rng(600)
    for _ in range(cases):
        for m, _rec in drive(rng):
            n = m.observer_count
            if (m._coeffs[:n, 0].imag != 0.0).any():
                dc_bad += 1
            usage = m._coeffs[:n, 0].real / m._h[:n]
            if not ((usage > 0.0) & (usage <= 1.0)).all():
                ratio_bad += 1
    print(f"\n  c7a dc-realness: {cases} cases, {dc_bad} violations")
    print(f"  c7b usage-ratio-bound: {cases} cases, {ratio_bad} violations")

    fade_bad = 0
    rng = np.random.default_rng(601)
    for _ in range(cases):
        n_bins = int(rng.integers(1, 8))
        params = ModelParams(
            k=1, x=1, T=float(rng.uniform(5.0, 100.0)), T0=float(rng.uniform(0.5, 4.0)),
            n_bins=n_bins, q_id=0.0, seed=1,
        )
        a, b = ObserverModel(params), ObserverModel(params)
        v = rng.normal(size=2)
        a.process_point(v, 0.0)
        b.process_point(v, 0.0)
        coeffs = rng.normal(size=n_bins) + 1j * rng.normal(size=n_bins)
        coeffs[0] = abs(coeffs[0].real) + 0j
        a._coeffs[0] = coeffs
        b._coeffs[0] = coeffs.copy()
        d1, d2 = rng.exponential(20.0, size=2)
        a.fade(d1)
        a.fade(d2)
        b.fade(d1 + d2)
        if not np.allclose(a._coeffs[0], b._coeffs[0], rtol=1e-9, atol=0.0):
            fade_bad += 1
    print(f"  c7c fading-composability: {cases} cases, {fade_bad} violations")

    recon_bad = 0
    rng = np.random.default_rng(602)
    for _ in range(cases):
        n_bins = int(rng.integers(1, 8))
        coeffs = (rng.normal(size=n_bins) + 1j * rng.normal(size=n_bins)).reshape(1, -1)
        stat = inverse_ft(coeffs, 0.0, 7.0)[0]
        obs_stat = inverse_ft(coeffs[0], 0.0, 7.0)
        if stat != obs_stat:
            recon_bad += 1
    print(f"  c7d activity-equals-shape-at-zero: {cases} cases, {recon_bad} violations")

    snap_bad = 0
    rng = np.random.default_rng(603)
    for _ in range(cases):
        pipe = list(drive(rng, n_points=12))
        m = pipe[-1][0]
        m2 = ObserverModel.restore(json.loads(json.dumps(m.snapshot())))
        t = m.t_last
        for _ in range(8):
            t += float(rng.exponential(0.4))
            v = rng.normal(size=2)
            if m.process_point(v, t) != m2.process_point(v, t):
                snap_bad += 1
                break
    print(f"  c7e snapshot-roundtrip-identity: {cases} cases, {snap_bad} violations")

    det_bad = 0
    rng = np.random.default_rng(604)
    for _ in range(cases):
        k = int(rng.integers(1, 9))
        params = ModelParams(
            k=k, x=int(rng.integers(1, k + 1)), T=float(rng.uniform(5.0, 100.0)),
            T0=float(rng.uniform(0.5, 4.0)), n_bins=int(rng.integers(1, 7)),
            q_id=float(rng.random()), seed=int(rng.integers(0, 2**31)),
        )
        a, b = ObserverModel(params), ObserverModel(params)
        t = 0.0
        for _ in range(15):
            t += float(rng.exponential(0.4))
            v = rng.normal(size=2)
            if a.process_point(v, t) != b.process_point(v, t):
                det_bad += 1
                break
    print(f"  c7f determinism: {cases} cases, {det_bad} violations")

    total_bad = dc_bad + ratio_bad + fade_bad + recon_bad + snap_bad + det_bad
    report(
        7,
        "invariant-suites",
        total_bad == 0,
        f"6 suites x {cases} cases, {total_bad} total violations",
    )


# ---------------------------------------------------------------------------
# 8. Off-phase observers leave the active set
# ---------------------------------------------------------------------------

def test_c8_off_phase_exclusion():
    started = time.perf_counter()
    t0_period = 200.0
    t_const = 1000.0
    spec = StreamSpec(
        clusters=(
            ClusterSpec(center=(0.0, 0.0), radius=1.0, base_rate=2.0),
            ClusterSpec(center=(10.0, 0.0), radius=1.0, base_rate=4.0,
                        duty=(0.0, 0.5), period=t0_period),
        ),
        duration=10 * t_const,
        dims=2,
        seed=202,
    )
    pts = generate(spec)
    m = ObserverModel(
        ModelParams(k=40, x=5, T=t_const, T0=t0_period, n_bins=32, q_id=0.35, seed=11)
    )
    b_center = np.array([10.0, 0.0])
    evals = violations = 0
    for p in pts:
        m.process_point(p.v, p.t)
        if p.t < 4 * t_const:
            continue
        phase = (p.t % t0_period) / t0_period
        if phase >= 0.5:  # the on/off cluster's quiet half-period
            active = m.active_indices()
            evals += 1
            violations += bool(
                (np.linalg.norm(m._pos[active] - b_center, axis=1) < 2.5).any()
            )
    rate = violations / evals
    elapsed = time.perf_counter() - started
    report(
        8,
        "off-phase-exclusion",
        rate <= 0.10,
        f"{violations}/{evals} off-phase evaluations still active = {rate:.2%} "
        f"(need <= 10%), {elapsed:.0f}s",
    )
