"""Ranking metrics for scored streams: ROC AUC, average precision,
precision at n, and their chance-adjusted variants."""

import numpy as np

from .errors import MetricError


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError(
            f"scores and labels must be aligned 1-D arrays, got {scores.shape} vs {labels.shape}"
        )
    if not np.isfinite(scores).all():
        raise MetricError("scores contain non-finite values")
    labels = (labels != 0).astype(int)
    if labels.sum() == 0 or labels.sum() == len(labels):
        raise MetricError("both classes must be present")
    return scores, labels


def roc_auc(scores, labels):
    """Probability that a random outlier outscores a random inlier, ties
    counted one half (rank-sum formulation)."""
    scores, labels = _validate(scores, labels)
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    starts = np.r_[0, np.flatnonzero(s[1:] != s[:-1]) + 1]
    ends = np.r_[starts[1:], len(s)]
    avg = (starts + ends + 1) / 2.0  # average 1-based rank per tie group
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(avg, ends - starts)
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _descending_order(scores):
    # stable sort, ties keep input order
    return np.argsort(-scores, kind="stable")


def average_precision(scores, labels):
    """Mean, over the outliers, of the precision at each outlier's rank
    when sorting by descending score (ties broken by input order)."""
    scores, labels = _validate(scores, labels)
    ranked = labels[_descending_order(scores)]
    hits = np.cumsum(ranked)
    precision = hits / np.arange(1, len(ranked) + 1)
    return float(precision[ranked == 1].mean())

def precision_at_n(scores, labels, n=None):
    """Fraction of true outliers among the top n scores; n defaults to the
    number of true outliers."""
    scores, labels = _validate(scores, labels)
    if n is None:
        n = int(labels.sum())
    if not 1 <= n <= len(labels):
        raise MetricError(f"n must be within [1, {len(labels)}], got {n}")
    top = _descending_order(scores)[:n]
    return float(labels[top].sum() / n)


def adjust(metric_value, outlier_rate):
    """Chance-adjust a precision-flavored metric: random scoring maps to
    roughly 0, perfect scoring to 1. May be negative."""
    if not 0.0 < outlier_rate < 1.0:
        raise MetricError(f"outlier_rate must be in (0, 1), got {outlier_rate}")
    return (metric_value - outlier_rate) / (1.0 - outlier_rate)


def evaluate(scores, labels, n=None):
    """All metrics at once: AUC, raw and adjusted AP and P@n."""
    scores_arr, labels01 = _validate(scores, labels)
    rate = labels01.mean()
    ap = average_precision(scores_arr, labels01)
    p_at_n = precision_at_n(scores_arr, labels01, n)
    return {
        "auc": roc_auc(scores_arr, labels01),
        "ap": ap,
        "p_at_n": p_at_n,
        "aap": adjust(ap, rate),
        "ap_at_n": adjust(p_at_n, rate),
    }
