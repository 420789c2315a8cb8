"""Literal, loop-based reference implementations used as test oracles.

Everything here is written from the metric definitions with plain Python
loops and no shared code with the package.
"""
import math
from itertools import combinations


def entropy(p):
    total = sum(p)
    return -sum((x / total) * math.log2(x / total) for x in p if x / total > 1e-15)


def cosine(x, y):
    dot = sum(a * b for a, b in zip(x, y))
    return dot / (math.sqrt(sum(a * a for a in x)) * math.sqrt(sum(b * b for b in y)))


def jaccard(a, b):
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def coexposure(video_sets):
    n = len(video_sets)
    return [[0 if i == j else len(video_sets[i] & video_sets[j]) for j in range(n)] for i in range(n)]


def edges(w, theta):
    n = len(w)
    return [(i, j) for i in range(n) for j in range(i + 1, n) if w[i][j] > theta]


def density(w, theta):
    n = len(w)
    return 2 * len(edges(w, theta)) / (n * (n - 1))


def barrat(w, theta):
    """Per-node weighted clustering by enumerating every (i, j, h) triple."""
    n = len(w)
    a = [[1 if (i != j and w[i][j] > theta) else 0 for j in range(n)] for i in range(n)]
    out = []
    for i in range(n):
        k = sum(a[i])
        s = sum(w[i][j] for j in range(n) if a[i][j])
        if k < 2:
            out.append(0.0)
            continue
        acc = 0.0
        for j in range(n):
            for h in range(n):
                acc += (w[i][j] + w[i][h]) / 2 * a[i][j] * a[i][h] * a[j][h]
        out.append(acc / (s * (k - 1)))
    return out


def modularity(w, theta, labels, gamma=1.0):
    """Q = 1/2m sum_ij (w_ij - gamma s_i s_j / 2m) delta(c_i, c_j) over retained edges."""
    n = len(w)
    e = [[w[i][j] if (i != j and w[i][j] > theta) else 0 for j in range(n)] for i in range(n)]
    s = [sum(row) for row in e]
    two_m = sum(s)
    q = 0.0
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += e[i][j] - gamma * s[i] * s[j] / two_m
    return q / two_m


def rand(labels_a, labels_b):
    pairs = list(combinations(range(len(labels_a)), 2))
    agree = sum((labels_a[i] == labels_a[j]) == (labels_b[i] == labels_b[j]) for i, j in pairs)
    return agree / len(pairs)


def set_partitions(n):
    """All partitions of range(n) as restricted-growth label lists."""
    labels = [0] * n

    def rec(i, k):
        if i == n:
            yield list(labels)
            return
        for c in range(k + 1):
            labels[i] = c
            yield from rec(i + 1, max(k, c + 1))

    if n == 0:
        yield []
        return
    labels[0] = 0
    yield from rec(1, 1)


def holm(p):
    """Step-down Holm written straight from the definition."""
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, (m - rank) * p[i])
        adjusted[i] = min(1.0, running)
    return adjusted
