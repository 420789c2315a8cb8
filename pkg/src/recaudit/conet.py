"""Account co-exposure networks: construction, topology, communities, tests."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .datamodel import (
    IDEOLOGIES,
    AnalysisWindow,
    ExposureRecord,
    Group,
    Kind,
    build_issue_vector,
    ideology_shares,
    slice_window,
)
from .louvain import louvain, modularity_dense



@dataclass(frozen=True)
class CoExposureNetwork:
    """Weighted undirected account graph; edges are pairs with ``w > threshold``."""

    nodes: tuple[str, ...]
    weights: np.ndarray
    threshold: int

    def __post_init__(self):
        w = np.asarray(self.weights)
        if w.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError("weight matrix does not match node list")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node ids")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be symmetric")
        if np.any(np.diag(w) != 0):
            w = w.copy()
            np.fill_diagonal(w, 0)
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def adjacency(self) -> np.ndarray:
        a = self.weights > self.threshold
        np.fill_diagonal(a, False)
        return a

    @property
    def edge_weights(self) -> np.ndarray:
        """Weights restricted to retained edges (zeros elsewhere)."""
        return np.where(self.adjacency, self.weights, 0).astype(np.float64)

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.nodes)}

    def subnetwork(self, ids: Sequence[str]) -> "CoExposureNetwork":
        idx = self.index()
        sel = [idx[a] for a in ids]
        return CoExposureNetwork(tuple(ids), self.weights[np.ix_(sel, sel)], self.threshold)

    def with_threshold(self, threshold: int) -> "CoExposureNetwork":
        return CoExposureNetwork(self.nodes, self.weights, int(threshold))

    def edge_list(self) -> list[tuple[str, str, int]]:
        a = self.adjacency
        rows, cols = np.nonzero(np.triu(a, 1))
        return [(self.nodes[i], self.nodes[j], int(self.weights[i, j])) for i, j in zip(rows, cols)]


@dataclass(frozen=True)
class Partition:
    assignment: dict[str, int]
    resolution: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        ids = sorted(set(self.assignment.values()))
        if ids != list(range(len(ids))):
            raise ValueError("community ids must be contiguous from 0")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for node, c in self.assignment.items():
            out.setdefault(c, []).append(node)
        return {c: sorted(v) for c, v in sorted(out.items())}

    @classmethod
    def from_labels(cls, nodes: Sequence[str], labels, resolution: float = 1.0, rng_seed: int = 0):
        mapping: dict = {}
        assignment = {}
        for node, lab in zip(nodes, labels):
            if lab not in mapping:
                mapping[lab] = len(mapping)
            assignment[node] = mapping[lab]
        return cls(assignment, resolution, rng_seed)


# ---------------------------------------------------------------------------
# construction

def incidence_matrix(records: Sequence[ExposureRecord], accounts: Sequence[str]) -> np.ndarray:
    """Binary account-by-video matrix (videos in sorted id order)."""
    videos = sorted({r.video_id for r in records})
    vidx = {v: k for k, v in enumerate(videos)}
    aidx = {a: i for i, a in enumerate(accounts)}
    x = np.zeros((len(accounts), len(videos)), dtype=np.int8)
    for r in records:
        i = aidx.get(r.account_id)
        if i is not None:
            x[i, vidx[r.video_id]] = 1
    return x


def build_coexposure(records: Sequence[ExposureRecord], political_only: bool = True,
                     window: AnalysisWindow | None = None, threshold: int = 20, t_max: int = 150,
                     accounts: Sequence[str] | None = None, retain_all: bool = False) -> CoExposureNetwork:
    """Co-exposure network over the exposure records in ``window``.

    By default the node set is every account with at least one qualifying
    exposure in the window; ``retain_all`` keeps every account in
    ``accounts`` (or every account appearing in ``records``) instead.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    recs = slice_window(records, window, t_max) if window is not None else list(records)
    recs = [r for r in recs if r.kind is Kind.EXPOSURE and (r.is_political or not political_only)]
    if not recs:
        raise ValueError("no qualifying exposures in the window")
    if retain_all:
        pool = accounts if accounts is not None else {r.account_id for r in records}
        nodes = sorted(set(pool))
    else:
        active = {r.account_id for r in recs}
        if accounts is not None:
            active &= set(accounts)
        nodes = sorted(active)
    if len(nodes) < 2:
        raise ValueError("co-exposure network needs records from at least two accounts")
    w = kernels.coexposure_counts(incidence_matrix(recs, nodes))
    return CoExposureNetwork(tuple(nodes), w, int(threshold))


# ---------------------------------------------------------------------------
# topology

def density(net: CoExposureNetwork) -> float:
    n = net.n
    if n < 2:
        raise ValueError("density needs at least two nodes")
    return 2.0 * net.n_edges / (n * (n - 1))


def clustering_per_node(net: CoExposureNetwork) -> np.ndarray:
    a = net.adjacency
    w = net.edge_weights
    num = kernels.barrat_numerators(w, a)
    strength = w.sum(axis=1)
    degree = a.sum(axis=1)
    out = np.zeros(net.n)
    ok = degree >= 2
    out[ok] = num[ok] / (strength[ok] * (degree[ok] - 1))
    return out


def weighted_clustering(net: CoExposureNetwork) -> tuple[float, np.ndarray]:
    """Mean weighted clustering over all nodes, and the per-node values.

    Nodes with fewer than two neighbours contribute zero.
    """
    per_node = clustering_per_node(net)
    mean = float(per_node.mean()) if per_node.size else 0.0
    return mean, per_node


def louvain_partition(net: CoExposureNetwork, resolution: float = 1.0, seed: int = 0) -> Partition:
    if net.n_edges == 0:
        raise ValueError("cannot detect communities in an edgeless network")
    labels = louvain(net.edge_weights, resolution=resolution, seed=seed)
    return Partition({node: int(c) for node, c in zip(net.nodes, labels)}, resolution, seed)


def modularity(net: CoExposureNetwork, partition: Partition, resolution: float | None = None) -> float:
    gamma = partition.resolution if resolution is None else resolution
    missing = [a for a in net.nodes if a not in partition.assignment]
    if missing:
        raise ValueError(f"partition does not cover nodes: {missing[:5]}")
    labels = np.array([partition.assignment[a] for a in net.nodes], dtype=np.int64)
    # restricting to the network's nodes may leave gaps in the ids
    _, labels = np.unique(labels, return_inverse=True)
    return modularity_dense(net.edge_weights, labels.astype(np.int64), gamma)


def community_continuity(early: Partition, late: Partition) -> float:
    """Pairwise co-membership agreement (Rand index) on shared nodes."""
    shared = sorted(set(early.assignment) & set(late.assignment))
    if len(shared) < 2:
        raise ValueError("continuity needs at least two shared nodes")
    e = np.array([early.assignment[a] for a in shared])
    l = np.array([late.assignment[a] for a in shared])
    same_e = e[:, None] == e[None, :]
    same_l = l[:, None] == l[None, :]
    iu = np.triu_indices(len(shared), 1)
    return float(np.mean(same_e[iu] == same_l[iu]))


def rand_index(labels_a, labels_b) -> float:
    nodes = [str(i) for i in range(len(labels_a))]
    return community_continuity(Partition.from_labels(nodes, labels_a), Partition.from_labels(nodes, labels_b))


# ---------------------------------------------------------------------------
# permutation tests

@dataclass(frozen=True)
class PermutationResult:
    observed_diff: float
    p_value: float
    n_permutations: int
    n_failed: int = 0
    null_diffs: np.ndarray = field(default=None, repr=False)


def _group_diff(metric, net, ids_a, ids_b):
    return metric(net.subnetwork(ids_a)) - metric(net.subnetwork(ids_b))


def permutation_test_network(metric: Callable[[CoExposureNetwork], float], net: CoExposureNetwork,
                             groups: Mapping[str, Group], n_permutations: int = 1000, seed: int = 0,
                             group_a=Group.MALE, group_b=Group.FEMALE) -> PermutationResult:
    """Label-reshuffling test on a network that already holds every account.

    A co-exposure weight depends only on the two accounts involved, so the
    per-group networks of any relabelling are sub-networks of ``net``.
    """
    if n_permutations < 100:
        raise ValueError("use at least 100 permutations")
    nodes = list(net.nodes)
    labels = np.array([groups[a] == group_a for a in nodes])
    if labels.all() or not labels.any():
        raise ValueError("both groups must be present")
    nodes_arr = np.array(nodes, dtype=object)
    observed = _group_diff(metric, net, list(nodes_arr[labels]), list(nodes_arr[~labels]))
    if not np.isfinite(observed):
        raise ValueError("metric is not finite on the observed networks")
    null = np.full(n_permutations, np.nan)
    failed = 0
    for r in range(n_permutations):
        rng = np.random.default_rng([seed, r])
        perm = rng.permutation(labels)
        try:
            null[r] = _group_diff(metric, net, list(nodes_arr[perm]), list(nodes_arr[~perm]))
        except (ValueError, ZeroDivisionError, FloatingPointError):
            failed += 1
    if failed:
        warnings.warn(f"{failed} permutation(s) could not be evaluated", RuntimeWarning, stacklevel=2)
    # tolerance keeps exact ties from being split by rounding noise
    tol = 1e-12 * max(1.0, abs(observed))
    extreme = int(np.sum(np.abs(null[np.isfinite(null)]) >= abs(observed) - tol))
    p = (1 + extreme) / (1 + n_permutations)
    return PermutationResult(float(observed), float(p), n_permutations, failed, null)


def permutation_test(metric: Callable[[CoExposureNetwork], float], records: Sequence[ExposureRecord],
                     groups: Mapping[str, Group], n_permutations: int = 1000, seed: int = 0,
                     political_only: bool = True, window: AnalysisWindow | None = None,
                     threshold: int = 20, t_max: int = 150, retain_all: bool = False) -> PermutationResult:
    net = build_coexposure(records, political_only, window, threshold, t_max,
                           accounts=sorted(groups), retain_all=retain_all)
    return permutation_test_network(metric, net, groups, n_permutations, seed)


# ---------------------------------------------------------------------------
# per-community content

@dataclass(frozen=True)
class CommunityProfile:
    community: int
    members: tuple[str, ...]
    n_with_evidence: int
    issue_mean: np.ndarray
    ideology_mean: np.ndarray


def community_profile(partition: Partition, records: Sequence[ExposureRecord],
                      kind=Kind.EXPOSURE) -> tuple[list[CommunityProfile], list[int]]:
    """Mean issue and ideology distribution per community.

    Returns the profiles plus the ids of communities whose members have no
    issue evidence at all (these are excluded from the profiles).
    """
    by_acc: dict[str, list[ExposureRecord]] = {a: [] for a in partition.assignment}
    for r in records:
        if r.account_id in by_acc:
            by_acc[r.account_id].append(r)
    profiles, flagged = [], []
    for c, members in partition.members().items():
        vecs = [build_issue_vector(by_acc[a], kind) for a in members]
        vecs = [v for v in vecs if v.any()]
        if not vecs:
            flagged.append(c)
            continue
        ides = [ideology_shares(by_acc[a], kind) for a in members]
        ides = [v for v in ides if v.any()]
        ide_mean = np.mean(ides, axis=0) if ides else np.zeros(len(IDEOLOGIES))
        profiles.append(CommunityProfile(c, tuple(members), len(vecs), np.mean(vecs, axis=0), ide_mean))
    return profiles, flagged


def singleton_partition(nodes: Sequence[str], resolution: float = 1.0) -> Partition:
    return Partition({a: i for i, a in enumerate(nodes)}, resolution)


def all_in_one_partition(nodes: Sequence[str], resolution: float = 1.0) -> Partition:
    return Partition({a: 0 for a in nodes}, resolution)


def group_partitions(records: Sequence[ExposureRecord], groups: Mapping[str, Group], window: AnalysisWindow | None,
                     threshold: int = 20, t_max: int = 150, resolution: float = 1.0,
                     seed: int = 0) -> dict[str, int]:
    """Louvain communities detected separately within each group's network.

    Community ids restart at 0 in each group. Accounts outside a group's
    network, or in a group whose network has no edges, are left out and are
    treated as singletons downstream.
    """
    out: dict[str, int] = {}
    for g in (Group.MALE, Group.FEMALE):
        members = sorted(a for a, gg in groups.items() if gg == g)
        try:
            net = build_coexposure(records, True, window, threshold, t_max, accounts=members)
        except ValueError:
            continue
        if net.n_edges == 0:
            continue
        part = louvain_partition(net, resolution, seed)
        out.update(part.assignment)
    return out
