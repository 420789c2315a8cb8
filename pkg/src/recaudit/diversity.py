"""Content-level diversity and group comparisons."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .datamodel import (
    CAP_ISSUES,
    AnalysisWindow,
    ExposureRecord,
    Group,
    Kind,
    build_issue_vector,
    slice_window,
)

_ZERO = 1e-15


class UndefinedSimilarity(ValueError):
    """Cosine similarity requested for an all-zero vector."""


@dataclass(frozen=True)
class GroupComparison:
    metric_name: str
    mean_a: float
    sd_a: float
    mean_b: float
    sd_b: float
    n_a: int
    n_b: int
    t_stat: float
    p_value: float
    df: float
    two_tailed: bool = True

    @property
    def difference(self) -> float:
        return self.mean_a - self.mean_b


@dataclass(frozen=True)
class SimilaritySummary:
    mean: float
    sd: float
    n_pairs: int
    n_excluded: int


def shannon_entropy(distribution) -> float:
    """Entropy in bits of a nonnegative weight vector (normalized here)."""
    p = np.asarray(distribution, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("distribution has negative entries")
    total = p.sum()
    if not total > 0:
        raise ValueError("distribution is all zero")
    p = p / total
    p = p[p > _ZERO]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def structural_entropy(three_class) -> float:
    if len(three_class) != 3:
        raise ValueError("structural entropy needs exactly three classes")
    return shannon_entropy(three_class)


def cosine_similarity(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = math.sqrt(float(np.dot(x, x)))
    ny = math.sqrt(float(np.dot(y, y)))
    if nx == 0.0 or ny == 0.0:
        raise UndefinedSimilarity("cosine similarity is undefined for a zero vector")
    return float(np.dot(x, y)) / (nx * ny)


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        warnings.warn("jaccard of two empty sets defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return len(a & b) / len(union)


def pairwise_group_similarity(vectors: Mapping[str, np.ndarray], groups: Mapping[str, Group],
                              mode: str, group_a=Group.MALE, group_b=Group.FEMALE) -> SimilaritySummary:
    """Mean cosine similarity over unordered pairs.

    ``mode`` is ``"within_a"``, ``"within_b"`` or ``"between"``. Accounts with
    all-zero vectors are skipped and counted in ``n_excluded``.
    """
    ids = sorted(vectors)
    keep = [a for a in ids if np.any(np.asarray(vectors[a]) > 0)]
    excluded = len(ids) - len(keep)
    a_ids = [a for a in keep if groups[a] == group_a]
    b_ids = [a for a in keep if groups[a] == group_b]
    if mode == "within_a":
        pairs = combinations(a_ids, 2)
    elif mode == "within_b":
        pairs = combinations(b_ids, 2)
    elif mode == "between":
        pairs = ((x, y) for x in a_ids for y in b_ids)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sims = np.array([cosine_similarity(vectors[x], vectors[y]) for x, y in pairs])
    if sims.size == 0:
        raise ValueError(f"no qualifying pairs for mode {mode!r}")
    sd = float(sims.std(ddof=1)) if sims.size > 1 else 0.0
    return SimilaritySummary(float(sims.mean()), sd, int(sims.size), excluded)


def welch_ttest(sample_a, sample_b, metric_name: str = "") -> GroupComparison:
    """Two-tailed Welch t-test (unequal variances, Welch-Satterthwaite df)."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least two observations")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    sea, seb = va / na, vb / nb
    se2 = sea + seb
    if se2 == 0.0:
        if ma == mb:
            t, p, df = 0.0, 1.0, float(na + nb - 2)
        else:
            t, p, df = math.copysign(math.inf, ma - mb), 0.0, float(na + nb - 2)
    else:
        t = (ma - mb) / math.sqrt(se2)
        df = se2 ** 2 / (sea ** 2 / (na - 1) + seb ** 2 / (nb - 1))
        p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return GroupComparison(metric_name, ma, math.sqrt(va), mb, math.sqrt(vb), na, nb, t, p, df)


def compare_groups(values: Mapping[str, float], groups: Mapping[str, Group], metric_name: str,
                   group_a=Group.MALE, group_b=Group.FEMALE) -> GroupComparison:
    ids = sorted(values)
    a = [values[i] for i in ids if groups[i] == group_a]
    b = [values[i] for i in ids if groups[i] == group_b]
    return welch_ttest(a, b, metric_name)


@dataclass(frozen=True)
class IssueRow:
    issue: str
    comparison: GroupComparison

    @property
    def difference(self) -> float:
        return self.comparison.difference


def issue_share_comparison(records_by_account: Mapping[str, Sequence[ExposureRecord]],
                           groups: Mapping[str, Group], window: AnalysisWindow | None = None,
                           t_max: int = 150, kind=Kind.EXPOSURE) -> list[IssueRow]:
    """Per-issue male-minus-female comparison of account-level issue shares.

    Accounts without any issue-labelled political record in the window carry
    no share information and are left out. Rows are sorted by difference,
    largest first.
    """
    shares = {}
    for acc in sorted(records_by_account):
        recs = records_by_account[acc]
        if window is not None:
            recs = slice_window(recs, window, t_max)
        vec = build_issue_vector(recs, kind)
        if vec.any():
            shares[acc] = vec
    rows = []
    for k, issue in enumerate(CAP_ISSUES):
        col = {acc: float(v[k]) for acc, v in shares.items()}
        rows.append(IssueRow(issue, compare_groups(col, groups, issue)))
    rows.sort(key=lambda r: (-r.difference, CAP_ISSUES.index(r.issue)))
    return rows
