"""Brute-force reference implementations for metric checks."""

import math


def pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def average_ranks(x):
    ranks = []
    for v in x:
        below = sum(1 for w in x if w < v)
        equal = sum(1 for w in x if w == v)
        ranks.append(below + (equal + 1) / 2)
    return ranks


def spearman(x, y):
    return pearson(average_ranks(x), average_ranks(y))


def rmse(pred, target):
    total = 0.0
    count = 0
    for row_p, row_t in zip(pred, target):
        for p, t in zip(row_p, row_t):
            total += (p - t) ** 2
            count += 1
    return math.sqrt(total / count)


def interval_accuracy(pred, target, levels=5):
    intervals = []
    for k in range(levels + 1):
        lo = 0.0 if k == 0 else (2 * k - 1) / (2 * levels)
        hi = 1.0 if k == levels else (2 * k + 1) / (2 * levels)
        intervals.append((lo, hi))
    hits = 0
    count = 0
    for row_p, row_t in zip(pred, target):
        for p, t in zip(row_p, row_t):
            k = round(t * levels)
            lo, hi = intervals[k]
            inside = lo <= p <= hi if k == levels else lo <= p < hi
            hits += inside
            count += 1
    return hits / count
