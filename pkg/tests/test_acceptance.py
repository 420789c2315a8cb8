"""Acceptance criteria, one test per criterion.

Each test records a single ``[PASS]`` / ``[FAIL]`` line with the measured
quantities, echoed in the pytest terminal summary, and then asserts. Run with
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import csv
import itertools
import json
import os
import subprocess
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy import stats

import oracles
from conftest import ACCEPTANCE_LINES, planted_two_clique, random_weight_matrix
from recaudit import kernels
from recaudit.cli import dispatch
from recaudit.conet import (
    CoExposureNetwork,
    Partition,
    build_coexposure,
    density,
    louvain_partition,
    modularity,
    permutation_test_network,
    weighted_clustering,
)
from recaudit.datamodel import ExposureRecord, Group, Kind, export_log
from recaudit.diversity import cosine_similarity, jaccard, shannon_entropy, welch_ttest
from recaudit.feedback import LEVELS, holm_adjust, ols_fe_clustered
from recaudit.simulator import SimConfig, sweep
from recaudit.synth import PlantedConfig, planted_feedback_dataset

pytestmark = pytest.mark.acceptance

BETAS = (0.0, 0.05, 0.1, 0.2, 0.3, 0.5)
TAUS = (0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
N_SEEDS = 20

# filled by the simulation criteria, audited by the conservation criterion
_SIM_AUDIT = {"runs": 0, "steps": 0, "l1": 0.0, "min": np.inf, "softmax": 0.0}


def report(name, passed, detail, elapsed=None):
    tag = "PASS" if passed else "FAIL"
    timing = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    line = f"[{tag}] {name}: {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def _audit(traj):
    s = traj.states
    _SIM_AUDIT["runs"] += 1
    _SIM_AUDIT["steps"] += s.shape[0]
    _SIM_AUDIT["l1"] = max(_SIM_AUDIT["l1"], float(np.max(np.abs(s.sum(axis=2) - 1.0))))
    _SIM_AUDIT["min"] = min(_SIM_AUDIT["min"], float(s.min()))
    _SIM_AUDIT["softmax"] = max(_SIM_AUDIT["softmax"], traj.row_sum_error)


# ---------------------------------------------------------------------------
# 1. metric oracles

def test_metric_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    n_inst = 250
    worst = defaultdict(float)
    for _ in range(n_inst):
        n = int(rng.integers(2, 13))
        # entropy, cosine
        p = rng.random(n) * (rng.random(n) < 0.7)
        p[rng.integers(n)] += 0.1
        worst["entropy"] = max(worst["entropy"], abs(shannon_entropy(p) - oracles.entropy(p.tolist())))
        x, y = rng.random(n) + 1e-3, rng.random(n) + 1e-3
        worst["cosine"] = max(worst["cosine"], abs(cosine_similarity(x, y) - oracles.cosine(x.tolist(), y.tolist())))
        a = set(rng.choice(30, int(rng.integers(1, 12)), replace=False).tolist())
        b = set(rng.choice(30, int(rng.integers(1, 12)), replace=False).tolist())
        worst["jaccard"] = max(worst["jaccard"], abs(jaccard(a, b) - oracles.jaccard(a, b)))
        # co-exposure from records
        n = max(n, 2)
        inc = rng.random((n, 25)) < 0.5
        recs = [ExposureRecord(f"a{i:02d}", 1, Kind.EXPOSURE, f"v{k:02d}", "News & Politics", True)
                for i in range(n) for k in range(25) if inc[i, k]]
        sets = [{f"v{k:02d}" for k in range(25) if inc[i, k]} for i in range(n)]
        if len({r.account_id for r in recs}) == n:
            net = build_coexposure(recs, threshold=0)
            err = float(np.max(np.abs(net.weights - np.array(oracles.coexposure(sets)))))
            worst["coexposure"] = max(worst["coexposure"], err)
        # topology on a random weighted graph
        w = random_weight_matrix(rng, n, max_w=9)
        theta = int(rng.integers(0, 4))
        net = CoExposureNetwork(tuple(f"n{i:02d}" for i in range(n)), w, theta)
        wl = w.tolist()
        worst["density"] = max(worst["density"], abs(density(net) - oracles.density(wl, theta)))
        _, per = weighted_clustering(net)
        worst["clustering"] = max(worst["clustering"], float(np.max(np.abs(per - oracles.barrat(wl, theta)))))
        if net.n_edges:
            labels = rng.integers(0, 3, n)
            part = Partition.from_labels(net.nodes, labels)
            lab = [part.assignment[v] for v in net.nodes]
            gamma = float(rng.choice([0.5, 1.0, 1.5]))
            worst["modularity"] = max(worst["modularity"],
                                      abs(modularity(net, part, gamma) - oracles.modularity(wl, theta, lab, gamma)))
    elapsed = time.perf_counter() - t0
    ok = all(v <= 1e-12 for v in worst.values()) and len(worst) == 7 and elapsed < 30
    detail = f"{n_inst} instances/metric, max abs err " + ", ".join(f"{k}={v:.1e}" for k, v in sorted(worst.items()))
    assert report("metric oracles (tol 1e-12, <30s)", ok, detail, elapsed)


# ---------------------------------------------------------------------------
# 2. community detection

def test_community_detection():
    t0 = time.perf_counter()
    hits, worst_q = 0, 0.0
    for seed in range(50):
        w, truth = planted_two_clique(seed)
        net = CoExposureNetwork(tuple(f"n{i:02d}" for i in range(40)), w, 0)
        part = louvain_partition(net, seed=seed)
        labels = [part.assignment[v] for v in net.nodes]
        hits += oracles.rand(truth, labels) > 0.95
        worst_q = max(worst_q, abs(modularity(net, part) - oracles.modularity(w.tolist(), 0, labels)))
    elapsed = time.perf_counter() - t0
    ok = hits >= 48 and worst_q <= 1e-12 and elapsed < 60
    assert report("community detection (>=48/50 Rand>0.95, Q tol 1e-12, <60s)", ok,
                  f"{hits}/50 recovered, max |Q - oracle| = {worst_q:.1e}", elapsed)


# ---------------------------------------------------------------------------
# 3. statistical validity

def _null_network(rng, n=16, n_videos=60, p=0.3, theta=4):
    x = (rng.random((n, n_videos)) < p).astype(np.int8)
    nodes = tuple(f"a{i:02d}" for i in range(n))
    groups = {a: (Group.MALE if i < n // 2 else Group.FEMALE) for i, a in enumerate(nodes)}
    return CoExposureNetwork(nodes, kernels.coexposure_counts(x), theta), groups


def test_statistical_validity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    welch_p = np.array([welch_ttest(rng.normal(size=20), rng.normal(size=20)).p_value for _ in range(1000)])
    welch_rate = float(np.mean(welch_p < 0.05))

    def metric(net):
        return weighted_clustering(net)[0]

    perm_p = []
    for r in range(1000):
        net, groups = _null_network(np.random.default_rng([99, r]))
        perm_p.append(permutation_test_network(metric, net, groups, n_permutations=100, seed=r).p_value)
    perm_rate = float(np.mean(np.array(perm_p) < 0.05))

    grid = (0.0, 0.001, 0.01, 0.02, 0.03, 0.04, 0.05, 0.2, 0.5, 1.0)
    n_cases, mismatches = 0, 0
    for m in range(1, 5):
        for p in itertools.product(grid, repeat=m):
            n_cases += 1
            mismatches += holm_adjust(list(p)) != oracles.holm(list(p))
    elapsed = time.perf_counter() - t0
    ok = 0.03 <= welch_rate <= 0.07 and 0.03 <= perm_rate <= 0.07 and mismatches == 0 and elapsed < 120
    assert report("statistical validity (rates in [0.03,0.07], Holm exact, <2min)", ok,
                  f"Welch P(p<.05)={welch_rate:.3f}, permutation P(p<.05)={perm_rate:.3f}, "
                  f"Holm {n_cases - mismatches}/{n_cases} exact", elapsed)


# ---------------------------------------------------------------------------
# 4. regression recovery

def _lagged_frame(rng, betas, n_acc=40, n_trans=2, n_issues=21, noise=0.0, node_sd=0.0):
    alpha = rng.normal(size=n_issues)
    lam = rng.normal(size=n_trans)
    eta = {"male": 0.0, "female": float(rng.normal())}
    rows = []
    for i in range(n_acc):
        g = "male" if i < n_acc // 2 else "female"
        # account-level components shared by every row of the account
        x_node = rng.normal(size=4) * node_sd
        u = rng.normal() * node_sd
        for t in range(n_trans):
            for ell in range(n_issues):
                x = rng.random(4) + x_node
                y = float(betas @ x + alpha[ell] + lam[t] + eta[g] + noise * (u + rng.normal()))
                rows.append({"account": f"a{i:02d}", "group": g, "transition": t, "issue": ell,
                             "outcome": y, **dict(zip(LEVELS, x))})
    return pd.DataFrame(rows)


def test_regression_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    betas = np.array([0.45, 0.14, -0.25, 0.36])
    worst = 0.0
    for _ in range(5):
        res = ols_fe_clustered(_lagged_frame(rng, betas))
        worst = max(worst, max(abs(res.raw_beta(lv) - b) for lv, b in zip(LEVELS, betas)))
    ratios = []
    for _ in range(200):
        res = ols_fe_clustered(_lagged_frame(rng, betas, n_acc=30, noise=1.0, node_sd=1.0))
        ratios.append(np.mean([c.se / c.se_classical for c in res.coefficients.values()]))
    mean_ratio = float(np.mean(ratios))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and mean_ratio > 1.0 and elapsed < 120
    assert report("regression recovery (exact 1e-6, clustered SE > classical, <2min)", ok,
                  f"max |beta - planted| = {worst:.1e}, mean SE_cluster/SE_classical = {mean_ratio:.2f} over 200 sims",
                  elapsed)


# ---------------------------------------------------------------------------
# 5. simulated divergence dynamics

@pytest.fixture(scope="module")
def default_sweep():
    t0 = time.perf_counter()
    cells = sweep(BETAS, TAUS, list(range(N_SEEDS)), SimConfig(), inspect=_audit)
    return cells, time.perf_counter() - t0


def test_study2_reproduction(default_sweep):
    cells, elapsed = default_sweep
    by = defaultdict(list)
    for c in cells:
        by[(c.beta, c.tau)].append(c)
    # (a) beta = 0: between-pair vs within-pair divergence, paired over seeds
    null = sorted(by[(0.0, 0.1)], key=lambda c: c.seed)
    between = [1 - c.final_between_pairwise for c in null]
    within = [1 - (c.final_within_m + c.final_within_f) / 2 for c in null]
    p_a = float(stats.ttest_rel(between, within).pvalue)
    ok_a = p_a > 0.05
    # (b) beta = 0.3, tau = 0.05 against t = 0 and against the beta = 0 control
    hot = by[(0.3, 0.05)]
    final = [c.final_between_cosine for c in hot]
    initial = [c.initial_between_cosine for c in hot]
    control = [c.final_between_cosine for c in by[(0.0, 0.05)]]
    p_b0 = float(stats.mannwhitneyu(final, initial, alternative="less").pvalue)
    p_bc = float(stats.mannwhitneyu(final, control, alternative="less").pvalue)
    ok_b = p_b0 < 0.05 and p_bc < 0.05
    # (c) monotone trends of mean divergence over the grid
    mean = {k: float(np.mean([c.final_divergence for c in v])) for k, v in by.items()}
    rho_beta = [stats.spearmanr(BETAS, [mean[(b, t)] for b in BETAS]).statistic for t in TAUS]
    tau_monotone = all(all(mean[(b, t1)] >= mean[(b, t2)] for t1, t2 in zip(TAUS, TAUS[1:])) for b in BETAS if b > 0)
    ok_c = min(rho_beta) >= 0 and tau_monotone
    ok = ok_a and ok_b and ok_c and elapsed < 300
    detail = (f"(a) paired p={p_a:.3f}; (b) final {np.mean(final):.4f} vs t0 {np.mean(initial):.4f} p={p_b0:.1e}, "
              f"vs beta=0 {np.mean(control):.4f} p={p_bc:.1e}; (c) min Spearman(beta)={min(rho_beta):.2f}, "
              f"tau non-increasing at every beta>0: {tau_monotone}; {len(cells)} runs")
    assert report("divergence dynamics a/b/c (20 seeds, <5min)", ok, detail, elapsed)


# ---------------------------------------------------------------------------
# 6. feedback pattern through the pipeline

def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_feedback_pattern(tmp_path):
    t0 = time.perf_counter()
    ds, _ = planted_feedback_dataset(PlantedConfig(seed=1))
    log_path = tmp_path / "planted.jsonl"
    export_log(ds, log_path)
    code = dispatch(["feedback", "--in", str(log_path), "--out", str(tmp_path / "fb"), "--seed", "1"])
    rows = _read_csv(tmp_path / "fb" / "coefficients.csv") if code == 0 else []
    beta = {(r["direction"], r["predictor"]): float(r["beta"]) for r in rows if r["subgroup"] == "all"}
    m1 = {lv: beta.get(("exposure_to_click", lv), np.nan) for lv in LEVELS}
    m2 = {lv: beta.get(("click_to_exposure", lv), np.nan) for lv in LEVELS}
    ok1 = m1["self"] > m1["community"] > 0
    ok2 = m2["community"] > 0 and m2["in_out"] < 0 and m2["outgroup"] < 0
    elapsed = time.perf_counter() - t0
    ok = code == 0 and ok1 and ok2 and elapsed < 120
    fmt = lambda m: ", ".join(f"{k}={v:+.3f}" for k, v in m.items())
    assert report("feedback sign pattern (<2min)", ok, f"model 1: {fmt(m1)}; model 2: {fmt(m2)}", elapsed)


# ---------------------------------------------------------------------------
# 7. end-to-end determinism

def _run_report(log_path, out, threads):
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        env[var] = str(threads)
    cmd = [sys.executable, "-m", "recaudit.cli", "report", "--in", str(log_path), "--out", str(out), "--seed", "11",
           "--t-max", "60", "--permutations", "200", "--window", "last:20", "--early-window", "first:20",
           "--report-windows", "10,20,30"]
    return subprocess.run(cmd, env=env, capture_output=True, text=True).returncode


def _snapshot(out):
    files = {}
    for path in sorted(Path(out).rglob("*")):
        if path.is_file():
            data = path.read_bytes()
            if path.name == "manifest.json":
                man = json.loads(data)
                man.pop("timestamp", None)
                data = json.dumps(man, sort_keys=True).encode()
            files[str(path.relative_to(out))] = data
    return files


def test_end_to_end_determinism(tmp_path):
    t0 = time.perf_counter()
    assert dispatch(["simulate", "--out", str(tmp_path / "sim"), "--agents", "40", "--steps", "60", "--beta", "0.3",
                     "--tau", "0.05", "--export", "--seed", "5"]) == 0
    log_path = tmp_path / "sim" / "synthetic_log.jsonl"
    codes = [_run_report(log_path, tmp_path / name, threads)
             for name, threads in (("a", 1), ("b", 1), ("c", 4))]
    snaps = [_snapshot(tmp_path / name) for name in ("a", "b", "c")]
    n_files = len(snaps[0])
    same_runs = snaps[0] == snaps[1]
    same_threads = snaps[0] == snaps[2]
    elapsed = time.perf_counter() - t0
    ok = codes == [0, 0, 0] and n_files >= 15 and same_runs and same_threads
    assert report("end-to-end determinism", ok,
                  f"{n_files} files; identical across runs: {same_runs}; across 1 vs 4 threads: {same_threads}",
                  elapsed)


# ---------------------------------------------------------------------------
# 8. conservation invariants

def test_conservation_invariants():
    if _SIM_AUDIT["runs"] == 0:
        # running this criterion alone: audit a reduced sweep
        sweep(BETAS, TAUS, [0, 1], SimConfig(), inspect=_audit)
    a = _SIM_AUDIT
    ok = a["l1"] <= 1e-9 and a["min"] >= 0 and a["softmax"] <= 1e-12
    assert report("conservation invariants", ok,
                  f"{a['runs']} runs / {a['steps']} snapshots: max |L1-1|={a['l1']:.1e}, "
                  f"min entry={a['min']:.2e}, max |softmax row sum-1|={a['softmax']:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
