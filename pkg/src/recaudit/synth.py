"""Synthetic trajectory logs with planted community and feedback structure.

Used to check that the analysis pipeline recovers known dynamics. Accounts in
each group are split into communities that draw most of their videos from a
community-specific catalogue, so co-exposure networks carry the planted
communities. Stage-to-stage dynamics are planted on issue vectors:

* clicks at stage t+1 follow the account's own stage-t exposure, plus a
  smaller pull from the rest of its community;
* exposures at stage t+1 follow the community's stage-t clicks (and the
  account's own), and are pushed away from the issues clicked by other
  communities and by the other group.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import (
    CAP_ISSUES,
    N_ISSUES,
    NEWS_POLITICS,
    AccountProfile,
    Dataset,
    ExposureRecord,
    Group,
    Kind,
)
from .feedback import StagePartition, build_reference_vectors


@dataclass(frozen=True)
class PlantedConfig:
    n_per_group: int = 40
    communities_per_group: int = 3
    n_stages: int = 3
    steps_per_stage: int = 50
    exposures_per_step: int = 6
    clicks_per_step: int = 2
    community_pool: int = 4
    global_pool: int = 60
    p_community_video: float = 0.75
    profile_concentration: float = 0.3
    # clicks(t+1) ~ self, community, in/out, out-group exposure at t
    click_weights: tuple[float, float, float, float] = (0.6, 0.25, 0.0, 0.0)
    # exposure(t+1) ~ self, community, in/out, out-group clicks at t
    exposure_weights: tuple[float, float, float, float] = (0.3, 0.5, -0.3, -0.3)
    idiosyncratic: float = 0.15
    seed: int = 0


def _normalize(v):
    v = np.clip(v, 0.0, None)
    s = v.sum(axis=-1, keepdims=True)
    return np.where(s > 0, v / np.where(s > 0, s, 1.0), 1.0 / v.shape[-1])


def planted_feedback_dataset(cfg: PlantedConfig = PlantedConfig()) -> tuple[Dataset, dict[str, int]]:
    """Return the dataset and the planted community of every account."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(7,)))
    n = 2 * cfg.n_per_group
    ids = [f"m{i:03d}" for i in range(cfg.n_per_group)] + [f"f{i:03d}" for i in range(cfg.n_per_group)]
    groups = {a: (Group.MALE if a.startswith("m") else Group.FEMALE) for a in ids}
    planted = {}
    for g_idx, prefix in enumerate(("m", "f")):
        members = [a for a in ids if a.startswith(prefix)]
        for k, a in enumerate(members):
            planted[a] = g_idx * cfg.communities_per_group + k % cfg.communities_per_group
    n_comm = 2 * cfg.communities_per_group
    profiles = rng.dirichlet(np.full(N_ISSUES, cfg.profile_concentration), size=n_comm)
    comm_of = np.array([planted[a] for a in ids])

    # per-group community ids restart at 0, matching per-group detection
    local = {a: planted[a] % cfg.communities_per_group for a in ids}
    t_max = cfg.n_stages * cfg.steps_per_stage
    stages = StagePartition.equal(cfg.n_stages, t_max)

    exp_target = _normalize((1 - cfg.idiosyncratic) * profiles[comm_of]
                            + cfg.idiosyncratic * rng.dirichlet(np.ones(N_ISSUES), size=n))
    click_target = _normalize(0.7 * exp_target + 0.3 * rng.dirichlet(np.ones(N_ISSUES), size=n))

    records: list[ExposureRecord] = []
    for s, (lo, hi) in enumerate(stages.boundaries):
        if s > 0:
            e_refs = build_reference_vectors(dict(zip(ids, exp_emp)), local, groups)
            c_refs = build_reference_vectors(dict(zip(ids, clk_emp)), local, groups)
            levels = ("self", "community", "in_out", "outgroup")
            new_click = np.zeros((n, N_ISSUES))
            new_exp = np.zeros((n, N_ISSUES))
            for i, a in enumerate(ids):
                new_click[i] = sum(w * e_refs.vectors[a][lv] for w, lv in zip(cfg.click_weights, levels))
                new_exp[i] = sum(w * c_refs.vectors[a][lv] for w, lv in zip(cfg.exposure_weights, levels))
            noise = rng.dirichlet(np.ones(N_ISSUES), size=(2, n))
            click_target = _normalize(new_click + cfg.idiosyncratic * noise[0] + 0.01)
            exp_target = _normalize(new_exp + cfg.idiosyncratic * noise[1] + 0.01)
        exp_counts = np.zeros((n, N_ISSUES))
        clk_counts = np.zeros((n, N_ISSUES))
        for step in range(lo, hi + 1):
            for i, a in enumerate(ids):
                for kind, target, m, counts in ((Kind.EXPOSURE, exp_target, cfg.exposures_per_step, exp_counts),
                                                (Kind.CLICK, click_target, cfg.clicks_per_step, clk_counts)):
                    issues = rng.choice(N_ISSUES, size=m, p=target[i])
                    from_comm = rng.random(m) < cfg.p_community_video
                    seen = set()
                    for ell, own in zip(issues, from_comm):
                        if own:
                            vid = f"c{comm_of[i]}-i{ell:02d}-{rng.integers(cfg.community_pool)}"
                        else:
                            vid = f"g-i{ell:02d}-{rng.integers(cfg.global_pool)}"
                        if vid in seen:
                            continue
                        seen.add(vid)
                        counts[i, ell] += 1
                        records.append(ExposureRecord(a, step, kind, vid, NEWS_POLITICS, True, CAP_ISSUES[ell]))
        exp_emp = exp_counts / exp_counts.sum(axis=1, keepdims=True)
        clk_emp = clk_counts / clk_counts.sum(axis=1, keepdims=True)
    records.sort(key=ExposureRecord.sort_key)
    profiles_out = [AccountProfile(a, groups[a]) for a in ids]
    return Dataset(profiles_out, records, t_max), local
