"""Command-line interface: generate, score, evaluate and inspect streams.

Exit codes: 0 success, 2 usage errors, 3 input parse errors, 4 data
contract violations (out-of-order timestamps, dimension drift, degenerate
metric input, malformed snapshots).
"""

import functools
import json
import math
import sys

import click
import numpy as np

from . import io as pio
from .errors import (
    MetricError,
    OutOfOrderError,
    ParameterError,
    PhasorError,
    SnapshotError,
    StreamParseError,
)
from .metrics import adjust, average_precision, precision_at_n, roc_auc
from .model import (
    Ensemble,
    ModelParams,
    ObserverModel,
    spectrum_magnitude,
    temporal_shape,
)
from .streams import ClusterSpec, StreamSpec, generate, poc_preset
from .swknn import SWKnn

EXIT_PARSE = 3
EXIT_DATA = 4


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StreamParseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_PARSE)
        except (OutOfOrderError, SnapshotError, MetricError, ParameterError, PhasorError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)

    return wrapper


@click.group()
@click.version_option(package_name="phasor")
def main():
    """Streaming outlier detection with periodic observer models."""


def _duration(_ctx, param, value):
    if value is None:
        return None
    try:
        return pio.parse_duration(value)
    except ParameterError as exc:
        raise click.BadParameter(str(exc), param=param)


def _spec_from_file(path, seed):
    try:
        with open(path) as fh:
            raw = json.load(fh)
        clusters = [
            ClusterSpec(
                center=tuple(c["center"]),
                radius=c["radius"],
                base_rate=c["base_rate"],
                duty=tuple(c.get("duty", (0.0, 1.0))),
                period=c.get("period", 1.0),
            )
            for c in raw["clusters"]
        ]
        return StreamSpec(
            clusters=tuple(clusters),
            duration=raw["duration"],
            dims=raw.get("dims", len(clusters[0].center)),
            spatial_outlier_rate=raw.get("spatial_outlier_rate", 0.0),
            contextual_outlier_rate=raw.get("contextual_outlier_rate", 0.0),
            seed=raw.get("seed", 0) if seed is None else seed,
        )
    except json.JSONDecodeError as exc:
        raise StreamParseError(f"{path} is not valid JSON: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise StreamParseError(f"{path}: missing or malformed field {exc}") from None


@main.command("gen")
@click.option("--preset", type=click.Choice(["poc"]), default=None, help="Built-in stream preset.")
@click.option("--spec-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON stream spec (see README for the schema).")
@click.option("--seed", type=int, default=None,
              help="Generator seed [default: 1, or the spec file's own].")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output stream CSV.")
@click.option("--duration", callback=_duration, default=None,
              help="Stream length, e.g. 20000 or 2h (preset only).")
@click.option("--base-period", callback=_duration, default=None,
              help="Base period of the preset clusters.")
@click.option("--rate", type=float, default=2.0, show_default=True,
              help="Per-cluster on-phase rate, points/s (preset only).")
@click.option("--dims", type=int, default=2, show_default=True)
@click.option("--contextual-rate", type=float, default=0.005, show_default=True,
              help="Contextual outliers as a fraction of clustered points (preset only).")
@click.option("--spatial-rate", type=float, default=0.005, show_default=True,
              help="Spatial outliers as a fraction of clustered points (preset only).")
@click.option("--fig", type=click.Path(dir_okay=False), default=None,
              help="Also render a scatter of the stream to this image file.")
@_handle_errors
def cmd_gen(preset, spec_file, seed, out, duration, base_period, rate, dims,
            contextual_rate, spatial_rate, fig):
    """Generate a labeled synthetic stream CSV."""
    if spec_file is not None and preset is not None:
        raise click.UsageError("--preset and --spec-file are mutually exclusive")
    if spec_file is not None:
        spec = _spec_from_file(spec_file, seed)
    else:
        kwargs = dict(seed=1 if seed is None else seed, contextual_frac=contextual_rate,
                      spatial_frac=spatial_rate, rate=rate, dims=dims)
        if base_period is not None:
            kwargs["base_period"] = base_period
        if duration is not None:
            kwargs["duration"] = duration
        spec = poc_preset(**kwargs)
    points = generate(spec)
    pio.write_stream(out, points)
    click.echo(f"wrote {len(points)} points to {out}")
    if fig:
        from . import plots

        plots.save_stream_scatter(points, fig)
        click.echo(f"wrote {fig}")


@main.command("score")
@click.option("--algo", type=click.Choice(["phasor", "swknn"]), default="phasor",
              show_default=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Input stream CSV.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output score CSV.")
@click.option("--k", type=int, default=250, show_default=True, help="Observers held by the model.")
@click.option("--x", type=int, default=5, show_default=True, help="Nearest observers used.")
@click.option("--T", "t_const", callback=_duration, default=None,
              help="Forgetting time constant, e.g. 1w (required for phasor).")
@click.option("--T0", "t0", callback=_duration, default=None,
              help="Base period of the frequency bins, e.g. 2000m (required for phasor).")
@click.option("--bins", type=int, default=64, show_default=True, help="Frequency bins.")
@click.option("--qid", type=float, default=0.2, show_default=True, help="Idle observer fraction.")
@click.option("--distance", type=click.Choice(["euclidean", "manhattan", "chebyshev"]),
              default="euclidean", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ensemble", type=int, default=1, show_default=True,
              help="Number of independent detectors; the median score is reported.")
@click.option("--model-out", type=click.Path(dir_okay=False), default=None,
              help="Write the final model snapshot here (phasor only).")
@click.option("--checkpoint-every", callback=_duration, default=None,
              help="Also rewrite the snapshot whenever this much stream time elapses.")
@click.option("--window", callback=_duration, default=None,
              help="Sliding window length (required for swknn).")
@click.option("--knn", type=int, default=5, show_default=True,
              help="Neighbor rank used by swknn scoring.")
@_handle_errors
def cmd_score(algo, in_path, out, k, x, t_const, t0, bins, qid, distance, seed,
              ensemble, model_out, checkpoint_every, window, knn):
    """Score a stream CSV, one record per input row."""
    if checkpoint_every is not None and not model_out:
        raise click.UsageError("--checkpoint-every needs --model-out")
    if algo == "phasor":
        if t_const is None or t0 is None:
            raise click.UsageError("--T and --T0 are required for the phasor detector")
        params = ModelParams(k=k, x=x, T=t_const, T0=t0, n_bins=bins, q_id=qid,
                             seed=seed, distance=distance)
        detector = ObserverModel(params) if ensemble == 1 else Ensemble(params, ensemble)
    else:
        if window is None:
            raise click.UsageError("--window is required for swknn")
        if model_out or checkpoint_every:
            raise click.UsageError("model snapshots are only supported for --algo phasor")
        if ensemble != 1:
            raise click.UsageError("--ensemble applies to --algo phasor only")
        detector = SWKnn(window=window, k_nn=knn, distance=distance)

    next_checkpoint = None
    rows = 0
    with pio.ScoreWriter(out) as writer:
        for lineno, t, v, _label in pio.read_stream(in_path):
            try:
                rec = detector.process_point(v, t)
            except PhasorError as exc:
                raise type(exc)(f"line {lineno}: {exc}") from None
            writer.write(rec)
            rows += 1
            if checkpoint_every is not None:
                if next_checkpoint is None:
                    next_checkpoint = t + checkpoint_every
                elif t >= next_checkpoint:
                    pio.save_snapshot(model_out, detector.snapshot())
                    next_checkpoint = t + checkpoint_every
    if rows == 0:
        raise StreamParseError("stream contains no data rows", line=2)
    if model_out:
        pio.save_snapshot(model_out, detector.snapshot())
        click.echo(f"wrote model snapshot to {model_out}")
    click.echo(f"scored {rows} points -> {out}")


def _aligned_labels(score_data, labels_path, scores_path):
    if labels_path is None:
        _, labels = pio.read_label_column(scores_path)
    else:
        t_lab, labels = pio.read_label_column(labels_path)
        if len(labels) != len(score_data["t"]):
            raise MetricError(
                f"length mismatch: {len(score_data['t'])} score rows vs "
                f"{len(labels)} label rows"
            )
        if t_lab is not None and not np.array_equal(t_lab, score_data["t"]):
            raise MetricError("score and label timestamps disagree")
    return labels


@main.command("eval")
@click.option("--scores", "scores_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Score CSV.")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="CSV with a `label` column (e.g. the stream file).")
@click.option("--drop-warmup", is_flag=True, help="Ignore rows flagged as warm-up.")
@click.option("--by-class", is_flag=True, help="Also report per-class AUC.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Metrics CSV.")
@click.option("--fig", type=click.Path(dir_okay=False), default=None,
              help="Render the ROC curve to this image file.")
@_handle_errors
def cmd_eval(scores_path, labels_path, drop_warmup, by_class, out, fig):
    """Compute AUC, adjusted AP and adjusted P@n for scored points."""
    data = pio.read_scores(scores_path)
    labels = _aligned_labels(data, labels_path, scores_path)
    scores = data["score"]
    keep = ~data["warmup"] if drop_warmup else np.ones(len(scores), dtype=bool)
    scores, labels = scores[keep], labels[keep]

    binary = (labels >= 1).astype(int)
    rate = binary.mean()
    ap = average_precision(scores, binary)
    p_at_n = precision_at_n(scores, binary)
    results = [
        ("auc", roc_auc(scores, binary)),
        ("aap", adjust(ap, rate)),
        ("ap_at_n", adjust(p_at_n, rate)),
        ("outlier_rate", rate),
        ("n", len(scores)),
    ]
    if by_class:
        for cls, name in ((1, "spatial"), (2, "contextual")):
            mask = (labels == 0) | (labels == cls)
            if (labels == cls).any():
                results.append((f"auc_{name}", roc_auc(scores[mask], (labels[mask] == cls).astype(int))))
    for name, value in results:
        click.echo(f"{name:>14}  {value:.6g}" if isinstance(value, float) else f"{name:>14}  {value}")
    if out:
        import csv as _csv

        with open(out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["metric", "value"])
            for name, value in results:
                w.writerow([name, pio.fmt(value) if isinstance(value, float) else value])
        click.echo(f"wrote {out}")
    if fig:
        from . import plots

        plots.save_roc(scores, binary, fig)
        click.echo(f"wrote {fig}")


def _top_observer_indices(model, top):
    p0 = np.array([o.coeffs[0].real for o in model.observers()])
    order = np.argsort(-p0, kind="stable")
    return order[: top if top else len(order)]


@main.command("inspect")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Model snapshot JSON.")
@click.option("--member", type=int, default=0, show_default=True,
              help="Ensemble member to inspect.")
@click.option("--spectrum", "mode", flag_value="spectrum", help="Magnitude per frequency bin.")
@click.option("--shape", "mode", flag_value="shape", help="Reconstructed temporal shapes.")
@click.option("--observers", "mode", flag_value="observers", help="Raw observer table.")
@click.option("--sampling-log", "mode", flag_value="sampling", help="Sampling counts per interval.")
@click.option("--horizon", callback=_duration, default=None,
              help="Offset horizon for --shape (defaults to one base period).")
@click.option("--samples", type=int, default=128, show_default=True,
              help="Grid points for --shape.")
@click.option("--top", type=int, default=0, help="Limit to the N most-observed observers.")
@click.option("--scores", "scores_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Score CSV (for --sampling-log).")
@click.option("--interval", callback=_duration, default=None,
              help="Bucket width for --sampling-log [default: 1d].")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output CSV.")
@click.option("--fig", type=click.Path(dir_okay=False), default=None,
              help="Also render a figure to this image file.")
@_handle_errors
def cmd_inspect(model_path, member, mode, horizon, samples, top, scores_path,
                interval, out, fig):
    """Export model internals or sampling diagnostics as CSV."""
    import csv as _csv

    if mode is None:
        raise click.UsageError(
            "pick one of --spectrum, --shape, --observers, --sampling-log"
        )

    if mode == "sampling":
        if scores_path is None:
            raise click.UsageError("--sampling-log needs --scores")
        data = pio.read_scores(scores_path)
        interval = interval if interval is not None else 86400.0
        t0 = data["t"][0] if len(data["t"]) else 0.0
        idx = np.floor((data["t"] - t0) / interval).astype(int)
        n_buckets = int(idx.max()) + 1 if len(idx) else 0
        counts = np.bincount(idx[data["sampled"]], minlength=n_buckets)
        starts = t0 + interval * np.arange(n_buckets)
        with open(out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["interval_start", "samples"])
            for s, c in zip(starts, counts):
                w.writerow([pio.fmt(s), int(c)])
        click.echo(f"wrote {out}")
        if fig:
            from . import plots

            plots.save_sampling(starts, counts, interval, fig)
            click.echo(f"wrote {fig}")
        return

    if model_path is None:
        raise click.UsageError(f"--{mode} needs --model")
    loaded = pio.load_model(model_path)
    if isinstance(loaded, Ensemble):
        if not 0 <= member < len(loaded.members):
            raise click.UsageError(
                f"--member must be within [0, {len(loaded.members) - 1}]"
            )
        loaded = loaded.members[member]
    model = loaded
    obs = model.observers()
    if not obs:
        raise SnapshotError("model holds no observers yet")
    t0_period = model.params.T0
    chosen = _top_observer_indices(model, top)

    if mode == "spectrum":
        with open(out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["observer", "bin", "period_s", "magnitude"])
            for i in chosen:
                mags = spectrum_magnitude(obs[i])
                for n, mag in enumerate(mags):
                    period = t0_period / n if n else math.inf
                    w.writerow([int(i), n, pio.fmt(period), pio.fmt(mag)])
        click.echo(f"wrote {out}")
        if fig:
            from . import plots

            plots.save_spectrum(
                np.array([spectrum_magnitude(obs[i]) for i in chosen]),
                t0_period, fig, labels=[f"obs {i}" for i in chosen],
            )
            click.echo(f"wrote {fig}")
    elif mode == "shape":
        horizon = horizon if horizon is not None else t0_period
        offsets = np.linspace(0.0, horizon, samples, endpoint=False)
        shapes = np.array(
            [temporal_shape(obs[i], offsets, t0_period) for i in chosen]
        )
        with open(out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["offset_s"] + [f"g{int(i)}" for i in chosen])
            for j, off in enumerate(offsets):
                w.writerow([pio.fmt(off)] + [pio.fmt(x) for x in shapes[:, j]])
        click.echo(f"wrote {out}")
        if fig:
            from . import plots

            plots.save_shapes(offsets, shapes, fig, labels=[f"obs {i}" for i in chosen])
            click.echo(f"wrote {fig}")
    else:  # observers
        dims = model.dim or 0
        thr = model.threshold()
        with open(out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(
                ["observer", "inserted_at", "h", "p0", "usage", "active"]
                + [f"f{d}" for d in range(dims)]
            )
            from .model import inverse_ft

            for i in chosen:
                o = obs[i]
                stat = float(inverse_ft(o.coeffs, 0.0, t0_period))
                w.writerow(
                    [int(i), pio.fmt(o.inserted_at), pio.fmt(o.h),
                     pio.fmt(o.coeffs[0].real), pio.fmt(o.coeffs[0].real / o.h),
                     int(stat >= thr)]
                    + [pio.fmt(x) for x in o.position]
                )
        click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
