"""Independent reference implementations used to pin expected values.

Everything here is written as a literal transcription of the defining
formulas — plain Python loops, math.dist, no shared code with the package —
so agreement is meaningful.
"""

from __future__ import annotations

import math

LRD_FLOOR = 1e-12


def brute_force_lof(train, k, queries=None):
    """Literal local-outlier-factor: k-distances, reachability, lrd, score.

    With queries=None returns in-sample scores for the training points
    (neighborhoods exclude the point itself). Otherwise scores the queries in
    novelty mode, neighborhoods drawn from the training points only.
    """
    train = [list(map(float, row)) for row in train]
    m = len(train)

    def kdist_and_neighbors(point, candidates, exclude=None):
        dists = [
            (math.dist(point, train[j]), j) for j in candidates if j != exclude
        ]
        dists.sort(key=lambda t: (t[0], t[1]))
        kd = dists[k - 1][0]
        neighborhood = [(d, j) for d, j in dists if d <= kd]
        return kd, neighborhood

    all_idx = range(m)
    kdist = [0.0] * m
    neighborhoods = []
    for i in range(m):
        kd, nbrs = kdist_and_neighbors(train[i], all_idx, exclude=i)
        kdist[i] = kd
        neighborhoods.append(nbrs)

    lrd = [0.0] * m
    for i in range(m):
        reach_sum = 0.0
        for d, j in neighborhoods[i]:
            reach_sum += max(kdist[j], d)
        lrd[i] = len(neighborhoods[i]) / max(reach_sum, LRD_FLOOR)

    if queries is None:
        scores = []
        for i in range(m):
            total = 0.0
            for _, j in neighborhoods[i]:
                total += lrd[j] / lrd[i]
            scores.append(total / len(neighborhoods[i]))
        return scores

    scores = []
    for q in queries:
        q = list(map(float, q))
        kd, nbrs = kdist_and_neighbors(q, all_idx, exclude=None)
        reach_sum = 0.0
        for d, j in nbrs:
            reach_sum += max(kdist[j], d)
        lrd_q = len(nbrs) / max(reach_sum, LRD_FLOOR)
        total = 0.0
        for _, j in nbrs:
            total += lrd[j] / lrd_q
        scores.append(total / len(nbrs))
    return scores


def direct_nll(logits_rows, gold_indices, temperature=1.0):
    """Mean negative log-likelihood by direct summation of the definition."""
    total = 0.0
    for row, gold in zip(logits_rows, gold_indices):
        scaled = [z / temperature for z in row]
        exps = [math.exp(z) for z in scaled]
        denom = sum(exps)
        prob = exps[gold] / denom
        total += -math.log(prob)
    return total / len(logits_rows)


def grid_search_temperature(logits_rows, gold_indices, lo=0.25, hi=8.0, step=1e-3):
    """Exhaustive grid minimizer of the mean NLL."""
    best_t, best_v = None, math.inf
    steps = int(round((hi - lo) / step))
    for i in range(steps + 1):
        t = lo + i * step
        v = direct_nll(logits_rows, gold_indices, t)
        if v < best_v:
            best_t, best_v = t, v
    return best_t, best_v


def grid_search_temperature_vectorized(logits, gold_indices, lo=0.25, hi=8.0, step=1e-3):
    """Exhaustive grid minimizer of the mean NLL, written against the plain
    definition (exp / row-sum, no max-subtraction) with numpy for speed."""
    import numpy as np

    z = np.asarray(logits, dtype=float)
    gold = np.asarray(gold_indices)
    rows = np.arange(len(gold))
    ts = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    best_t, best_v = None, math.inf
    for start in range(0, len(ts), 256):
        block = ts[start : start + 256]
        scaled = z[None, :, :] / block[:, None, None]
        e = np.exp(scaled)
        p = e[:, rows, gold] / e.sum(axis=2)
        values = -np.log(p).mean(axis=1)
        i = int(values.argmin())
        if values[i] < best_v:
            best_t, best_v = float(block[i]), float(values[i])
    return best_t, best_v


def direct_ece(confidences, correct, n_bins):
    """Bin-weighted |accuracy - mean confidence| by direct summation."""
    n = len(confidences)
    ece = 0.0
    for b in range(n_bins):
        members = [
            (c, ok)
            for c, ok in zip(confidences, correct)
            if min(int(c * n_bins), n_bins - 1) == b
        ]
        if not members:
            continue
        p_bin = len(members) / n
        o = sum(1.0 for _, ok in members if ok) / len(members)
        e = sum(c for c, _ in members) / len(members)
        ece += p_bin * abs(o - e)
    return ece


def direct_macro_scores(confusion, class_subset=None):
    """Macro precision/recall averaged per class, then harmonically combined."""
    n = len(confusion)
    subset = list(range(n)) if class_subset is None else list(class_subset)
    precisions, recalls = [], []
    for c in subset:
        tp = confusion[c][c]
        fp = sum(confusion[r][c] for r in range(n)) - tp
        fn = sum(confusion[c][r] for r in range(n)) - tp
        precisions.append(tp / (tp + fp) if tp + fp > 0 else 0.0)
        recalls.append(tp / (tp + fn) if tp + fn > 0 else 0.0)
    precision_macro = sum(precisions) / len(subset)
    recall_macro = sum(recalls) / len(subset)
    if precision_macro + recall_macro == 0:
        f1 = 0.0
    else:
        f1 = 2 * recall_macro * precision_macro / (recall_macro + precision_macro)
    return precision_macro, recall_macro, f1


def _platt_nll_at(a, shifted_scores, targets):
    v = 0.0
    for s, t in zip(shifted_scores, targets):
        x = a * s
        # log(p) = -log(1+e^x), log(1-p) = x - log(1+e^x), stably
        if x > 0:
            log1pex = x + math.log1p(math.exp(-x))
        else:
            log1pex = math.log1p(math.exp(x))
        v -= t * (-log1pex) + (1 - t) * (x - log1pex)
    return v


def platt_slope_grid(shifted_scores, targets, lo=-60.0, hi=-1e-3, step=2e-4):
    """Grid search over the logistic slope: coarse sweep, then a fine pass."""

    def sweep(a_lo, a_hi, a_step):
        best_a, best_v = None, math.inf
        steps = int(round((a_hi - a_lo) / a_step))
        for i in range(steps + 1):
            a = a_lo + i * a_step
            v = _platt_nll_at(a, shifted_scores, targets)
            if v < best_v:
                best_a, best_v = a, v
        return best_a, best_v

    coarse_step = 0.02
    coarse_a, _ = sweep(lo, hi, coarse_step)
    return sweep(coarse_a - 2 * coarse_step, min(coarse_a + 2 * coarse_step, hi), step)
