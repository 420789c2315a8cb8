"""Agent-based collaborative-filtering model of gendered issue exposure.

Each agent holds a 21-dim salience vector on the simplex. At every step the
recommender scores all other agents by cosine similarity plus a same-label
bonus ``beta``, turns the scores into a softmax with temperature ``tau``, and
each agent reinforces the issues it already holds in proportion to the
probability-weighted source vectors (Hadamard product), then renormalizes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .datamodel import (
    CAP_ISSUES,
    NEWS_POLITICS,
    AccountProfile,
    Dataset,
    ExposureRecord,
    Group,
    Kind,
)

MALE, FEMALE = 0, 1


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 160
    n_issues: int = 21
    n_steps: int = 150
    beta: float = 0.1
    tau: float = 0.1
    alpha: float = 0.1
    recs_per_step: int = 10
    seed: int = 0
    sampled_update: bool = False
    record_sources: bool = False

    def __post_init__(self):
        if self.n_agents < 4 or self.n_agents % 2:
            raise ValueError("n_agents must be an even number >= 4")
        if self.n_issues < 2:
            raise ValueError("n_issues must be >= 2")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.recs_per_step < 1:
            raise ValueError("recs_per_step must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimTrajectory:
    config: SimConfig
    gender: np.ndarray
    states: np.ndarray  # (n_steps + 1, n_agents, n_issues)
    sources: np.ndarray | None = None  # (n_steps, n_agents, recs_per_step)
    row_sum_error: float = 0.0
    summary: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# ---------------------------------------------------------------------------
# model pieces

def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


INIT_STREAM, SAMPLE_STREAM, EXPORT_STREAM = 0, 1, 2


def init_population(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Uniform(0, 1) draws normalized to sum 1; first half male, second female."""
    rng = _rng(config.seed, INIT_STREAM)
    x = rng.random((config.n_agents, config.n_issues))
    x /= x.sum(axis=1, keepdims=True)
    gender = np.full(config.n_agents, FEMALE, dtype=np.int64)
    gender[: config.n_agents // 2] = MALE
    return x, gender


def similarity_matrix(x: np.ndarray, gender: np.ndarray, beta: float) -> np.ndarray:
    norms = np.sqrt((x * x).sum(axis=1))
    if np.any(norms == 0):
        raise ValueError("agent vector is all zero")
    cos = (x @ x.T) / np.outer(norms, norms)
    return cos + beta * (gender[:, None] == gender[None, :])


def recommendation_probs(s_row, tau: float) -> np.ndarray:
    """Softmax of scores over candidate sources (self already excluded)."""
    s = np.asarray(s_row, dtype=np.float64)
    z = (s - s.max()) / tau
    e = np.exp(z)
    return e / e.sum()


def probability_matrix(s: np.ndarray, tau: float) -> np.ndarray:
    s = s.copy()
    np.fill_diagonal(s, -np.inf)
    e = np.exp((s - s.max(axis=1, keepdims=True)) / tau)
    return e / e.sum(axis=1, keepdims=True)


def sample_recommendations(p: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` draws with replacement from each row of ``p`` (or from one vector)."""
    p2 = np.atleast_2d(np.asarray(p, dtype=np.float64))
    u = rng.random((p2.shape[0], m))
    out = kernels.sample_categorical(p2, u)
    return out[0] if np.ndim(p) == 1 else out


def update_state(x_i: np.ndarray, population: np.ndarray, p_i: np.ndarray, alpha: float) -> np.ndarray:
    """One agent's reinforcement update; ``p_i[i]`` must be zero."""
    pulled = p_i @ population
    new = x_i + alpha * x_i * pulled
    return new / new.sum()


def _sampled_step(x, p, sources, alpha):
    pulled = x[sources].mean(axis=1)
    new = x + alpha * x * pulled
    return new / new.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# summaries

def group_centers(x: np.ndarray, gender: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return x[gender == MALE].mean(axis=0), x[gender == FEMALE].mean(axis=0)


def _cos(a, b):
    return float(a @ b / (math.sqrt(a @ a) * math.sqrt(b @ b)))


def center_cosine(x: np.ndarray, gender: np.ndarray) -> float:
    cm, cf = group_centers(x, gender)
    return _cos(cm, cf)


def divergence(x: np.ndarray, gender: np.ndarray) -> float:
    """1 - cosine between the two group mean vectors."""
    return 1.0 - center_cosine(x, gender)


def pairwise_cosines(x: np.ndarray, gender: np.ndarray) -> dict[str, float]:
    """Mean pairwise agent cosine within each group and between groups."""
    xn = x / np.sqrt((x * x).sum(axis=1, keepdims=True))
    c = xn @ xn.T
    m = gender == MALE
    f = ~m
    def within(mask):
        sub = c[np.ix_(mask, mask)]
        k = sub.shape[0]
        return float((sub.sum() - np.trace(sub)) / (k * (k - 1)))
    return {"within_m": within(m), "within_f": within(f), "between": float(c[np.ix_(m, f)].mean())}


def summarize(states: np.ndarray, gender: np.ndarray) -> dict[str, np.ndarray]:
    rows = {"center_cosine": [], "divergence": [], "within_m": [], "within_f": [], "between": []}
    for x in states:
        cc = center_cosine(x, gender)
        rows["center_cosine"].append(cc)
        rows["divergence"].append(1.0 - cc)
        for k, v in pairwise_cosines(x, gender).items():
            rows[k].append(v)
    return {k: np.array(v) for k, v in rows.items()}


# ---------------------------------------------------------------------------
# runs

def run_simulation(config: SimConfig, summarize_steps: bool = True) -> SimTrajectory:
    """Synchronous simulation; bit-reproducible for a given config."""
    x, gender = init_population(config)
    states = np.empty((config.n_steps + 1, config.n_agents, config.n_issues))
    states[0] = x
    need_sources = config.record_sources or config.sampled_update
    sources = np.empty((config.n_steps, config.n_agents, config.recs_per_step), dtype=np.int64) if need_sources else None
    rng = _rng(config.seed, SAMPLE_STREAM)
    worst = 0.0
    for t in range(config.n_steps):
        new, p = kernels.sim_step(x, gender, float(config.beta), float(config.tau), float(config.alpha))
        worst = max(worst, float(np.max(np.abs(p.sum(axis=1) - 1.0))))
        if need_sources:
            sources[t] = kernels.sample_categorical(p, rng.random((config.n_agents, config.recs_per_step)))
            if config.sampled_update:
                new = _sampled_step(x, p, sources[t], config.alpha)
        x = new
        states[t + 1] = x
    traj = SimTrajectory(config, gender, states, sources, worst)
    if summarize_steps:
        traj.summary = summarize(states, gender)
    return traj


def issue_center_difference(traj: SimTrajectory) -> np.ndarray:
    """Male-minus-female group-center share per issue at the final step."""
    cm, cf = group_centers(traj.final, traj.gender)
    return cm - cf


@dataclass(frozen=True)
class SweepCell:
    beta: float
    tau: float
    seed: int
    final_divergence: float
    final_between_cosine: float
    initial_between_cosine: float
    final_within_m: float
    final_within_f: float
    final_between_pairwise: float


def sweep(beta_grid: Sequence[float], tau_grid: Sequence[float], seeds: Sequence[int],
          config: SimConfig | None = None,
          inspect: Callable[[SimTrajectory], None] | None = None) -> list[SweepCell]:
    """Final-state statistics for every (beta, tau, seed) cell.

    ``inspect``, when given, is called with each full trajectory before it is
    discarded (used to audit invariants across a whole sweep).
    """
    if not beta_grid or not tau_grid or not seeds:
        raise ValueError("sweep grids must be non-empty")
    base = config or SimConfig()
    base = replace(base, record_sources=False)
    cells = []
    for beta in beta_grid:
        for tau in tau_grid:
            for seed in seeds:
                cfg = replace(base, beta=float(beta), tau=float(tau), seed=int(seed))
                traj = run_simulation(cfg, summarize_steps=False)
                if inspect is not None:
                    inspect(traj)
                x0, x1 = traj.states[0], traj.final
                pw = pairwise_cosines(x1, traj.gender)
                c1 = center_cosine(x1, traj.gender)
                cells.append(SweepCell(float(beta), float(tau), int(seed), 1.0 - c1, c1,
                                       center_cosine(x0, traj.gender), pw["within_m"], pw["within_f"],
                                       pw["between"]))
    return cells


def sweep_surface(cells: Sequence[SweepCell]) -> list[dict]:
    """Mean and normal-approximation 95% CI of final divergence per (beta, tau)."""
    keyed: dict[tuple[float, float], list[float]] = {}
    for c in cells:
        keyed.setdefault((c.beta, c.tau), []).append(c.final_divergence)
    out = []
    for (beta, tau), vals in keyed.items():
        v = np.array(vals)
        half = 1.96 * v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else 0.0
        out.append({"beta": beta, "tau": tau, "n_seeds": v.size, "mean_divergence": float(v.mean()),
                    "ci_low": float(v.mean() - half), "ci_high": float(v.mean() + half)})
    return out


# ---------------------------------------------------------------------------
# synthetic log export

def export_synthetic_log(traj: SimTrajectory, issue_labels: Sequence[str] = CAP_ISSUES,
                         videos_per_issue: int = 3, seed: int | None = None) -> Dataset:
    """Turn a trajectory into exposure/click records in the log schema.

    At step t (1-based) agent i receives one exposure per sampled source; its
    issue is drawn from the source's state and the video is one of the
    source's ``videos_per_issue`` items on that issue. Repeated videos within
    a step collapse to one record. One click per step is drawn among that
    step's exposures with weight proportional to the agent's own salience of
    the exposure's issue.
    """
    cfg = traj.config
    if len(issue_labels) != cfg.n_issues:
        raise ValueError("need one issue label per model dimension")
    rng = _rng(cfg.seed if seed is None else seed, EXPORT_STREAM)
    sources = traj.sources
    if sources is None:
        srng = _rng(cfg.seed if seed is None else seed, SAMPLE_STREAM)
        sources = np.empty((cfg.n_steps, cfg.n_agents, cfg.recs_per_step), dtype=np.int64)
        for t in range(cfg.n_steps):
            p = probability_matrix(similarity_matrix(traj.states[t], traj.gender, cfg.beta), cfg.tau)
            sources[t] = kernels.sample_categorical(p, srng.random((cfg.n_agents, cfg.recs_per_step)))
    width = len(str(cfg.n_agents - 1))
    ids = [f"agent{i:0{width}d}" for i in range(cfg.n_agents)]
    profiles = [AccountProfile(ids[i], Group.MALE if traj.gender[i] == MALE else Group.FEMALE)
                for i in range(cfg.n_agents)]
    records: list[ExposureRecord] = []
    for t in range(cfg.n_steps):
        x = traj.states[t]
        src = sources[t]
        issue_draws = kernels.sample_categorical(x[src.ravel()], rng.random((src.size, 1))).reshape(src.shape)
        item_draws = rng.integers(0, videos_per_issue, size=src.shape)
        click_u = rng.random(cfg.n_agents)
        step = t + 1
        for i in range(cfg.n_agents):
            seen: dict[str, int] = {}
            for j, k, v in zip(src[i], issue_draws[i], item_draws[i]):
                vid = f"v{int(j):0{width}d}-{int(k):02d}-{int(v)}"
                if vid not in seen:
                    seen[vid] = int(k)
            vids = list(seen)
            for vid in vids:
                records.append(ExposureRecord(ids[i], step, Kind.EXPOSURE, vid, NEWS_POLITICS, True,
                                              issue_labels[seen[vid]], None))
            w = np.array([traj.states[t][i, seen[v]] for v in vids])
            cum = np.cumsum(w)
            pick = int(min(np.searchsorted(cum, click_u[i] * cum[-1], side="right"), len(vids) - 1))
            records.append(ExposureRecord(ids[i], step, Kind.CLICK, vids[pick], NEWS_POLITICS, True,
                                          issue_labels[seen[vids[pick]]], None))
    records.sort(key=ExposureRecord.sort_key)
    return Dataset(profiles, records, max(cfg.n_steps, 1))
