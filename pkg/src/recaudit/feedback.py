"""Exposure -> click -> re-exposure feedback analysis.

Each account's political records are split into consecutive stages and turned
into issue vectors. For every account and stage four reference vectors are
formed (the account itself, the rest of its community, the rest of its group
outside the community, and the other group), and outcomes at stage t+1 are
related to references at stage t, descriptively through cosine similarity and
through lagged fixed-effects regressions with account-clustered errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .datamodel import N_ISSUES, ExposureRecord, Group, Kind, build_issue_vector
from .diversity import cosine_similarity

LEVELS = ("self", "community", "in_out", "outgroup")
EXPOSURE_TO_CLICK = "exposure_to_click"
CLICK_TO_EXPOSURE = "click_to_exposure"
DIRECTIONS = (EXPOSURE_TO_CLICK, CLICK_TO_EXPOSURE)

#: (first, second) level pairs tested as "first > second".
COMPARISONS = {
    EXPOSURE_TO_CLICK: (("self", "community"), ("community", "in_out"),
                        ("community", "outgroup"), ("in_out", "outgroup")),
    CLICK_TO_EXPOSURE: (("community", "self"), ("community", "in_out"),
                        ("community", "outgroup"), ("in_out", "outgroup")),
}


def direction_kinds(direction: str) -> tuple[Kind, Kind]:
    """(predictor kind at stage t, outcome kind at stage t+1)."""
    if direction == EXPOSURE_TO_CLICK:
        return Kind.EXPOSURE, Kind.CLICK
    if direction == CLICK_TO_EXPOSURE:
        return Kind.CLICK, Kind.EXPOSURE
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class StagePartition:
    boundaries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.boundaries) < 2:
            raise ValueError("need at least two stages")
        expected = 1
        for lo, hi in self.boundaries:
            if lo != expected or hi < lo:
                raise ValueError(f"stages must be contiguous, non-empty and start at 1: {self.boundaries}")
            expected = hi + 1

    @classmethod
    def equal(cls, n_stages: int = 3, t_max: int = 150) -> "StagePartition":
        if n_stages < 2 or n_stages > t_max:
            raise ValueError("n_stages must be in [2, t_max]")
        base, extra = divmod(t_max, n_stages)
        bounds, lo = [], 1
        for s in range(n_stages):
            hi = lo + base + (1 if s < extra else 0) - 1
            bounds.append((lo, hi))
            lo = hi + 1
        return cls(tuple(bounds))

    @property
    def n_stages(self) -> int:
        return len(self.boundaries)

    @property
    def t_max(self) -> int:
        return self.boundaries[-1][1]

    def stage_of(self, step: int) -> int:
        for s, (lo, hi) in enumerate(self.boundaries):
            if lo <= step <= hi:
                return s
        raise ValueError(f"step {step} outside the staged range")


def stage_split(records: Sequence[ExposureRecord], partition: StagePartition) -> list[list[ExposureRecord]]:
    out: list[list[ExposureRecord]] = [[] for _ in range(partition.n_stages)]
    for r in records:
        out[partition.stage_of(r.step)].append(r)
    return out


def stage_vectors(records: Sequence[ExposureRecord], accounts: Sequence[str], partition: StagePartition,
                  kind) -> list[dict[str, np.ndarray]]:
    """Per stage, the issue vector of every account for one record kind."""
    per_stage = stage_split(records, partition)
    out = []
    for recs in per_stage:
        by_acc: dict[str, list[ExposureRecord]] = {a: [] for a in accounts}
        for r in recs:
            if r.account_id in by_acc:
                by_acc[r.account_id].append(r)
        out.append({a: build_issue_vector(by_acc[a], kind) for a in accounts})
    return out


# ---------------------------------------------------------------------------
# reference structures

@dataclass
class ReferenceVectors:
    """Four reference vectors per account, plus which of them were empty."""

    vectors: dict[str, dict[str, np.ndarray]]
    empty: dict[str, set[str]] = field(default_factory=dict)

    def level(self, account: str, level: str) -> np.ndarray:
        return self.vectors[account][level]


def build_reference_vectors(vectors: Mapping[str, np.ndarray], communities: Mapping[str, int],
                            groups: Mapping[str, Group]) -> ReferenceVectors:
    """Self / community / in-group-out-community / out-group references.

    Non-self references are unweighted means of the other accounts' vectors.
    Accounts whose vector is all zero carry no evidence and do not enter any
    reference set. Accounts missing from ``communities`` form their own
    singleton community.
    """
    ids = sorted(vectors)
    mat = np.array([vectors[a] for a in ids], dtype=np.float64).reshape(len(ids), -1)
    has = mat.any(axis=1)
    grp = np.array([groups[a].value for a in ids])
    comm = np.array([communities.get(a, -1 - k) for k, a in enumerate(ids)])
    refs: dict[str, dict[str, np.ndarray]] = {}
    empty: dict[str, set[str]] = {}
    for k, a in enumerate(ids):
        others = has.copy()
        others[k] = False
        same_group = grp == grp[k]
        same_comm = comm == comm[k]
        masks = {
            "community": others & same_comm & same_group,
            "in_out": others & same_group & ~same_comm,
            "outgroup": others & ~same_group,
        }
        entry = {"self": mat[k].copy()}
        flags = set()
        for level, m in masks.items():
            if m.any():
                entry[level] = mat[m].mean(axis=0)
            else:
                entry[level] = np.zeros(mat.shape[1])
                flags.add(level)
        if not has[k]:
            flags.add("self")
        refs[a] = entry
        empty[a] = flags
    return ReferenceVectors(refs, empty)


# ---------------------------------------------------------------------------
# multiple comparisons and paired tests

def holm_adjust(p_values) -> list[float]:
    """Holm step-down adjusted p-values, in the input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p[idx]))
        adjusted[idx] = running
    return adjusted.tolist()


def paired_ttest(a, b) -> tuple[float, float, float]:
    """Two-tailed paired t-test; returns (mean difference, t, p)."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    n = d.size
    if n < 2:
        raise ValueError("paired test needs at least two pairs")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        return mean, (0.0 if mean == 0.0 else math.copysign(math.inf, mean)), (1.0 if mean == 0.0 else 0.0)
    t = mean / (sd / math.sqrt(n))
    return mean, t, float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 1)))


@dataclass(frozen=True)
class LevelComparison:
    comparison: str
    n: int
    mean_difference: float
    t_stat: float
    p_value: float
    holm_p: float


@dataclass
class LevelSimilarityResult:
    direction: str
    mean_similarity: dict[str, float]
    comparisons: list[LevelComparison]
    n_used: int
    n_excluded: int
    similarities: dict[str, dict[str, float]] = field(repr=False, default_factory=dict)


def level_similarities(refs: ReferenceVectors, outcomes: Mapping[str, np.ndarray]) -> tuple[dict, int]:
    sims, excluded = {}, 0
    for a in sorted(outcomes):
        out = np.asarray(outcomes[a])
        if a not in refs.vectors or not out.any():
            excluded += 1
            continue
        entry = refs.vectors[a]
        if any(not entry[lv].any() for lv in LEVELS):
            excluded += 1
            continue
        sims[a] = {lv: cosine_similarity(entry[lv], out) for lv in LEVELS}
    return sims, excluded


def compare_levels(sims: Mapping[str, Mapping[str, float]], direction: str, n_excluded: int = 0) -> LevelSimilarityResult:
    ids = sorted(sims)
    if len(ids) < 2:
        raise ValueError("need at least two accounts with complete vectors")
    cols = {lv: np.array([sims[a][lv] for a in ids]) for lv in LEVELS}
    raw = []
    for first, second in COMPARISONS[direction]:
        md, t, p = paired_ttest(cols[first], cols[second])
        raw.append((f"{first} > {second}", md, t, p))
    adj = holm_adjust([r[3] for r in raw])
    comps = [LevelComparison(name, len(ids), md, t, p, h) for (name, md, t, p), h in zip(raw, adj)]
    means = {lv: float(cols[lv].mean()) for lv in LEVELS}
    return LevelSimilarityResult(direction, means, comps, len(ids), n_excluded, dict(sims))


def level_similarity_comparison(refs_t: ReferenceVectors, outcomes_t1: Mapping[str, np.ndarray],
                                direction: str) -> LevelSimilarityResult:
    """Cosine similarity of stage t+1 outcomes to each stage-t reference level.

    Accounts are dropped when the outcome or any reference is all zero.
    """
    sims, excluded = level_similarities(refs_t, outcomes_t1)
    return compare_levels(sims, direction, excluded)


# ---------------------------------------------------------------------------
# lagged design and regression

def lagged_design(stage_predictors: Sequence[Mapping[str, np.ndarray]],
                  stage_outcomes: Sequence[Mapping[str, np.ndarray]],
                  communities: Mapping[str, int], groups: Mapping[str, Group]) -> tuple[pd.DataFrame, int]:
    """Long-format rows (account, transition, issue) for the lagged models.

    ``stage_predictors[t]`` holds stage-t vectors of the predictor kind and
    ``stage_outcomes[t]`` stage-t vectors of the outcome kind. Returns the
    frame and the number of (account, transition) pairs dropped for an empty
    outcome vector.
    """
    if len(stage_predictors) < 2 or len(stage_predictors) != len(stage_outcomes):
        raise ValueError("need matching predictor/outcome vectors for at least two stages")
    blocks = []
    dropped = 0
    issues = np.arange(N_ISSUES)
    for t in range(len(stage_predictors) - 1):
        refs = build_reference_vectors(stage_predictors[t], communities, groups)
        outcomes = stage_outcomes[t + 1]
        for a in sorted(outcomes):
            out = np.asarray(outcomes[a], dtype=np.float64)
            if not out.any():
                dropped += 1
                continue
            entry = refs.vectors[a]
            block = {
                "account": a,
                "group": groups[a].value,
                "transition": t,
                "issue": issues,
                "outcome": out,
            }
            for lv in LEVELS:
                block[lv] = entry[lv]
            blocks.append(pd.DataFrame(block))
    if not blocks:
        raise ValueError("no rows: every outcome vector is empty")
    frame = pd.concat(blocks, ignore_index=True)
    return frame, dropped


@dataclass(frozen=True)
class Coefficient:
    beta: float
    se: float
    p_value: float
    t_stat: float
    se_classical: float

    def ci95(self, df: int) -> tuple[float, float]:
        q = stats.t.ppf(0.975, df)
        return self.beta - q * self.se, self.beta + q * self.se


@dataclass
class RegressionResult:
    coefficients: dict[str, Coefficient]
    fixed_effects: dict[str, list]
    n_obs: int
    n_clusters: int
    r_squared: float
    outcome_sd: float
    predictor_sd: dict[str, float]
    residuals: np.ndarray = field(repr=False, default=None)
    design: np.ndarray = field(repr=False, default=None)

    def raw_beta(self, name: str) -> float:
        """Coefficient on the original (unstandardized) scale."""
        return self.coefficients[name].beta * self.outcome_sd / self.predictor_sd[name]


class RankDeficientError(ValueError):
    pass


def _dummies(values: pd.Series, drop_first: bool) -> tuple[np.ndarray, list[str], list]:
    levels = sorted(values.unique())
    use = levels[1:] if drop_first else levels
    cols = np.column_stack([(values.to_numpy() == lv).astype(np.float64) for lv in use]) if use else np.empty((len(values), 0))
    return cols, [f"{values.name}={lv}" for lv in use], levels


def ols_fe_clustered(design: pd.DataFrame, predictors: Sequence[str] = LEVELS, outcome: str = "outcome",
                     fixed_effects: Sequence[str] = ("issue", "transition", "group"),
                     cluster: str = "account") -> RegressionResult:
    """OLS with fixed effects and CR1 account-clustered standard errors.

    Outcome and predictors are z-scored on the estimation sample, so the
    reported coefficients are standardized betas. There is no global
    intercept: the first fixed-effect family keeps all of its levels and every
    later family drops its first level. Families with a single level are
    omitted. p-values use a t distribution with (clusters - 1) df.
    """
    y_raw = design[outcome].to_numpy(dtype=np.float64)
    sd_y = float(y_raw.std(ddof=1))
    if not sd_y > 0:
        raise RankDeficientError(f"outcome {outcome!r} has no variance")
    y = (y_raw - y_raw.mean()) / sd_y
    cols, names, sds = [], [], {}
    for name in predictors:
        x = design[name].to_numpy(dtype=np.float64)
        sd = float(x.std(ddof=1))
        if not sd > 0:
            raise RankDeficientError(f"predictor {name!r} is constant")
        cols.append((x - x.mean()) / sd)
        names.append(name)
        sds[name] = sd
    fe_levels: dict[str, list] = {}
    first = True
    for fam in fixed_effects:
        if design[fam].nunique() < 2:
            continue
        block, block_names, levels = _dummies(design[fam], drop_first=not first)
        first = False
        cols.extend(block.T)
        names.extend(block_names)
        fe_levels[fam] = levels
    X = np.column_stack(cols)
    n, k = X.shape
    if n <= k:
        raise RankDeficientError(f"{n} observations for {k} parameters")
    rank = np.linalg.matrix_rank(X)
    if rank < k:
        _, r, piv = _pivoted_qr(X)
        bad = [names[j] for j in piv[rank:]]
        raise RankDeficientError(f"design is rank deficient; collinear column(s): {', '.join(bad)}")
    groups = design[cluster].to_numpy()
    uniq, gidx = np.unique(groups, return_inverse=True)
    n_clusters = uniq.size
    if n_clusters < 2:
        raise ValueError("clustered errors need at least two clusters")

    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    scores = np.zeros((n_clusters, k))
    np.add.at(scores, gidx, X * resid[:, None])
    meat = scores.T @ scores
    correction = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - k))
    v_cl = correction * xtx_inv @ meat @ xtx_inv
    sigma2 = float(resid @ resid) / (n - k)
    v_classic = sigma2 * xtx_inv
    ss_tot = float(y @ y)
    r2 = 1.0 - float(resid @ resid) / ss_tot

    coefs = {}
    df = n_clusters - 1
    for j, name in enumerate(names[: len(predictors)]):
        se = math.sqrt(max(v_cl[j, j], 0.0))
        t = beta[j] / se if se > 0 else math.copysign(math.inf, beta[j]) if beta[j] != 0 else 0.0
        p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df))) if math.isfinite(t) else 0.0
        coefs[name] = Coefficient(float(beta[j]), se, p, float(t), math.sqrt(max(v_classic[j, j], 0.0)))
    return RegressionResult(coefs, fe_levels, n, n_clusters, r2, sd_y, sds, resid, X)


def _pivoted_qr(X):
    from scipy.linalg import qr

    return qr(X, mode="economic", pivoting=True)


# ---------------------------------------------------------------------------
# whole-dataset driver

@dataclass
class FeedbackResult:
    stages: StagePartition
    communities: dict[str, int]
    regressions: dict[tuple[str, str], RegressionResult]
    level_rows: list[dict]
    dropped: dict[str, int]


def _subset(mapping, keep):
    return {a: v for a, v in mapping.items() if a in keep}


def run_feedback(records: Sequence[ExposureRecord], groups: Mapping[str, Group], communities: Mapping[str, int],
                 stages: StagePartition, directions: Sequence[str] = DIRECTIONS) -> FeedbackResult:
    """Level comparisons and lagged regressions for the chosen directions.

    Pooled regressions use all four levels with issue, stage and group fixed
    effects. Per-group regressions use three levels (no out-group) with issue
    and stage fixed effects.
    """
    accounts = sorted(groups)
    political = [r for r in records if r.is_political]
    exp_vecs = stage_vectors(political, accounts, stages, Kind.EXPOSURE)
    clk_vecs = stage_vectors(political, accounts, stages, Kind.CLICK)
    by_kind = {Kind.EXPOSURE: exp_vecs, Kind.CLICK: clk_vecs}
    regressions: dict[tuple[str, str], RegressionResult] = {}
    level_rows: list[dict] = []
    dropped: dict[str, int] = {}
    for direction in directions:
        pred_kind, out_kind = direction_kinds(direction)
        preds, outs = by_kind[pred_kind], by_kind[out_kind]
        frame, n_drop = lagged_design(preds, outs, communities, groups)
        dropped[direction] = n_drop
        regressions[(direction, "all")] = ols_fe_clustered(frame)
        for g in (Group.MALE, Group.FEMALE):
            sub = frame[frame["group"] == g.value]
            if sub["account"].nunique() >= 2:
                try:
                    regressions[(direction, g.value)] = ols_fe_clustered(
                        sub, predictors=LEVELS[:3], fixed_effects=("issue", "transition"))
                except (RankDeficientError, ValueError):
                    pass
        level_rows.extend(_level_rows(preds, outs, communities, groups, direction))
    return FeedbackResult(stages, dict(communities), regressions, level_rows, dropped)


def _level_rows(preds, outs, communities, groups, direction):
    rows = []
    per_transition = []
    for t in range(len(preds) - 1):
        refs = build_reference_vectors(preds[t], communities, groups)
        sims, excl = level_similarities(refs, outs[t + 1])
        per_transition.append((f"{t + 1}->{t + 2}", sims, excl))
    pooled: dict[str, dict[str, list[float]]] = {}
    for _, sims, _ in per_transition:
        for a, s in sims.items():
            acc = pooled.setdefault(a, {lv: [] for lv in LEVELS})
            for lv in LEVELS:
                acc[lv].append(s[lv])
    pooled_sims = {a: {lv: float(np.mean(v[lv])) for lv in LEVELS} for a, v in pooled.items()}
    per_transition.append(("all", pooled_sims, len(groups) - len(pooled_sims)))
    for label, sims, excl in per_transition:
        for gname in ("all", Group.MALE.value, Group.FEMALE.value):
            keep = {a for a in sims if gname == "all" or groups[a].value == gname}
            sub = _subset(sims, keep)
            if len(sub) < 2:
                continue
            res = compare_levels(sub, direction, excl)
            for c in res.comparisons:
                rows.append({
                    "direction": direction,
                    "group": gname,
                    "transition": label,
                    "comparison": c.comparison,
                    "n": c.n,
                    "mean_difference": c.mean_difference,
                    "p": c.p_value,
                    "holm_p": c.holm_p,
                })
    return rows
