"""Hot numeric kernels, each with a numba loop version and a numpy version.

The public names at the bottom of the module are bound at import time (see
:mod:`recaudit._accel`). With numba enabled, the loop version is used wherever
it measured faster (``benchmarks/bench_kernels.py``); the two kernels that
reduce to a dense matrix product stay on numpy/BLAS. Both implementations are
importable under ``*_loop`` / ``*_numpy`` names so tests and the benchmark can
compare them directly.
"""
import numpy as np

from ._accel import NUMBA_ENABLED, njit

__all__ = [
    "coexposure_counts",
    "barrat_numerators",
    "louvain_local_move",
    "aggregate_adjacency",
    "sim_step",
    "sample_categorical",
]


# ---------------------------------------------------------------------------
# co-exposure counts: off-diagonal of X @ X.T for a binary incidence matrix

def coexposure_counts_numpy(incidence):
    x = np.asarray(incidence, dtype=np.int64)
    w = x @ x.T
    np.fill_diagonal(w, 0)
    return w


@njit
def coexposure_counts_loop(incidence):
    n, v = incidence.shape
    w = np.zeros((n, n), dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    for k in range(v):
        cnt = 0
        for i in range(n):
            if incidence[i, k] != 0:
                members[cnt] = i
                cnt += 1
        for a in range(cnt):
            i = members[a]
            for b in range(a + 1, cnt):
                j = members[b]
                w[i, j] += 1
                w[j, i] += 1
    return w


# ---------------------------------------------------------------------------
# weighted clustering numerators: sum_{j,h} (w_ij + w_ih)/2 a_ij a_ih a_jh

def barrat_numerators_numpy(weights, adjacency):
    a = np.asarray(adjacency, dtype=np.float64)
    wa = np.asarray(weights, dtype=np.float64) * a
    # the sum is symmetric in (j, h), so it equals sum_j w_ij a_ij (A^2)_ij
    return (wa * (a @ a)).sum(axis=1)


@njit
def barrat_numerators_loop(weights, adjacency):
    n = weights.shape[0]
    out = np.zeros(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if not adjacency[i, j]:
                continue
            for h in range(n):
                if adjacency[i, h] and adjacency[j, h]:
                    acc += 0.5 * (weights[i, j] + weights[i, h])
        out[i] = acc
    return out


# ---------------------------------------------------------------------------
# Louvain phase one: greedy local moves on a dense symmetric adjacency whose
# diagonal holds (ordered-pair) internal weight of aggregated nodes.

@njit
def louvain_local_move_loop(adj, order, resolution, comm):
    n = adj.shape[0]
    strength = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += adj[i, j]
        strength[i] = s
    two_m = 0.0
    for i in range(n):
        two_m += strength[i]
    tot = np.zeros(n)
    for i in range(n):
        tot[comm[i]] += strength[i]
    kin = np.zeros(n)
    eps = 1e-12 * two_m
    any_move = False
    for _ in range(10_000):
        moved = 0
        for idx in range(order.shape[0]):
            i = order[idx]
            own = comm[i]
            ki = strength[i]
            for c in range(n):
                kin[c] = 0.0
            for j in range(n):
                if j != i:
                    kin[comm[j]] += adj[i, j]
            tot[own] -= ki
            best = own
            best_gain = kin[own] - resolution * tot[own] * ki / two_m
            own_gain = best_gain
            for c in range(n):
                if c == own or kin[c] <= 0.0:
                    continue
                g = kin[c] - resolution * tot[c] * ki / two_m
                if g > best_gain:
                    best_gain = g
                    best = c
            if best != own and best_gain - own_gain > eps:
                comm[i] = best
                moved += 1
            else:
                best = own
            tot[best] += ki
        if moved == 0:
            break
        any_move = True
    return any_move


def louvain_local_move_numpy(adj, order, resolution, comm):
    n = adj.shape[0]
    strength = adj.sum(axis=1)
    two_m = strength.sum()
    tot = np.bincount(comm, weights=strength, minlength=n)
    eps = 1e-12 * two_m
    any_move = False
    for _ in range(10_000):
        moved = 0
        for i in order:
            own = comm[i]
            ki = strength[i]
            row = adj[i].copy()
            row[i] = 0.0
            kin = np.bincount(comm, weights=row, minlength=n)
            tot[own] -= ki
            gains = kin - resolution * tot * ki / two_m
            candidates = kin > 0.0
            candidates[own] = True
            masked = np.where(candidates, gains, -np.inf)
            best = int(np.argmax(masked))
            if best != own and masked[best] > gains[own] and masked[best] - gains[own] > eps:
                comm[i] = best
                moved += 1
            else:
                best = own
            tot[best] += ki
        if moved == 0:
            break
        any_move = True
    return any_move


@njit
def aggregate_adjacency_loop(adj, comm, k):
    n = adj.shape[0]
    out = np.zeros((k, k))
    for i in range(n):
        ci = comm[i]
        for j in range(n):
            out[ci, comm[j]] += adj[i, j]
    return out


def aggregate_adjacency_numpy(adj, comm, k):
    out = np.zeros((k, k))
    np.add.at(out, (comm[:, None], comm[None, :]), adj)
    return out


# ---------------------------------------------------------------------------
# simulator: one synchronous update of the whole population

def sim_step_numpy(x, gender, beta, tau, alpha):
    norms = np.sqrt((x * x).sum(axis=1))
    cos = (x @ x.T) / np.outer(norms, norms)
    s = cos + beta * (gender[:, None] == gender[None, :])
    np.fill_diagonal(s, -np.inf)
    z = (s - s.max(axis=1, keepdims=True)) / tau
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    pulled = p @ x
    new = x + alpha * x * pulled
    new /= new.sum(axis=1, keepdims=True)
    return new, p


@njit
def sim_step_loop(x, gender, beta, tau, alpha):
    n, d = x.shape
    xn = np.empty_like(x)
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += x[i, k] * x[i, k]
        inv = 1.0 / np.sqrt(acc)
        for k in range(d):
            xn[i, k] = x[i, k] * inv
    s = np.empty((n, n))
    for i in range(n):
        s[i, i] = 0.0
        for j in range(i + 1, n):
            dot = 0.0
            for k in range(d):
                dot += xn[i, k] * xn[j, k]
            s[i, j] = dot
            s[j, i] = dot
    p = np.zeros((n, n))
    new = np.empty_like(x)
    pulled = np.empty(d)
    for i in range(n):
        smax = -np.inf
        for j in range(n):
            if j == i:
                continue
            sij = s[i, j]
            if gender[i] == gender[j]:
                sij += beta
            s[i, j] = sij
            if sij > smax:
                smax = sij
        total = 0.0
        for j in range(n):
            if j == i:
                continue
            ev = np.exp((s[i, j] - smax) / tau)
            p[i, j] = ev
            total += ev
        for k in range(d):
            pulled[k] = 0.0
        for j in range(n):
            pij = p[i, j] / total
            p[i, j] = pij
            for k in range(d):
                pulled[k] += pij * x[j, k]
        norm = 0.0
        for k in range(d):
            val = x[i, k] + alpha * x[i, k] * pulled[k]
            new[i, k] = val
            norm += val
        for k in range(d):
            new[i, k] /= norm
    return new, p


# ---------------------------------------------------------------------------
# inverse-CDF categorical sampling, one row of probabilities per draw set

def sample_categorical_numpy(p, u):
    cum = np.cumsum(p, axis=1)
    k = p.shape[1]
    out = np.empty(u.shape, dtype=np.int64)
    for r in range(p.shape[0]):
        out[r] = np.searchsorted(cum[r], u[r] * cum[r, -1], side="right")
    np.minimum(out, k - 1, out=out)
    return out


@njit
def sample_categorical_loop(p, u):
    rows, k = p.shape
    m = u.shape[1]
    out = np.empty((rows, m), dtype=np.int64)
    cum = np.empty(k)
    for r in range(rows):
        acc = 0.0
        for c in range(k):
            acc += p[r, c]
            cum[c] = acc
        for q in range(m):
            target = u[r, q] * cum[k - 1]
            lo, hi = 0, k
            while lo < hi:
                mid = (lo + hi) // 2
                if cum[mid] <= target:
                    lo = mid + 1
                else:
                    hi = mid
            out[r, q] = min(lo, k - 1)
    return out


# matrix-product kernels: BLAS beats the compiled loops at these sizes
barrat_numerators = barrat_numerators_numpy
sim_step = sim_step_numpy

if NUMBA_ENABLED:
    coexposure_counts = coexposure_counts_loop
    louvain_local_move = louvain_local_move_loop
    aggregate_adjacency = aggregate_adjacency_loop
    sample_categorical = sample_categorical_loop
else:
    coexposure_counts = coexposure_counts_numpy
    louvain_local_move = louvain_local_move_numpy
    aggregate_adjacency = aggregate_adjacency_numpy
    sample_categorical = sample_categorical_numpy
