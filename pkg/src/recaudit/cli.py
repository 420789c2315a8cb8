"""Command-line entry point: ``recaudit <subcommand> [options]``.

Every subcommand writes its tables plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 data or validation error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import conet, diversity, feedback, simulator
from .datamodel import (
    CAP_ISSUES,
    IDEOLOGIES,
    INTEREST_CATEGORIES,
    AnalysisWindow,
    Dataset,
    Group,
    Kind,
    LogFormatError,
    build_issue_vector,
    export_log,
    ideology_shares,
    parse_log,
    political_share,
    regroup_structural,
    slice_window,
)

log = logging.getLogger("recaudit")

SUBCOMMANDS = ("ingest", "diversity", "network", "feedback", "simulate", "sweep", "report")

#: Stream ids for deriving per-module seeds from the master seed.
STREAMS = {"diversity": 0, "network": 1, "feedback": 2, "simulate": 3, "sweep": 4}

DEFAULTS = {
    "seed": 0,
    "t_max": 150,
    "format": None,
    "windows": "50",
    "stages": 3,
    "similarity_basis": "issue",
    "theta": 20,
    "gamma": 1.0,
    "window": "last:50",
    "early_window": "first:50",
    "permutations": 1000,
    "retain_all": False,
    "direction": "both",
    "community_window": "last:50",
    "agents": 160,
    "steps": 150,
    "beta": 0.1,
    "tau": 0.1,
    "alpha": 0.1,
    "recs": 10,
    "sampled_update": False,
    "export": False,
    "betas": "0,0.05,0.1,0.2,0.3,0.5",
    "taus": "0.02,0.05,0.1,0.2,0.5,1.0",
    "n_seeds": 20,
    "report_windows": "30,40,50,60,70",
    "thetas": "10,15,20,25,30",
}


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        self.stage = stage
        super().__init__(f"{stage}: {exc}")


def derive_seed(master: int, stream: str) -> int:
    """Seed for one module: first word of SeedSequence(master, spawn_key=(id,))."""
    ss = np.random.SeedSequence(master, spawn_key=(STREAMS[stream],))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# ---------------------------------------------------------------------------
# output helpers

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return value


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(h) for h in header]
            writer.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, subcommand: str, config: dict, seed: int, inputs) -> None:
    manifest = {
        "tool_version": __version__,
        "subcommand": subcommand,
        "resolved_config": config,
        "master_seed": seed,
        "input_digests": {str(p): "sha256:" + file_digest(p) for p in inputs},
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    write_json(out / "manifest.json", manifest)


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


# ---------------------------------------------------------------------------
# analyses (shared by the single subcommands and ``report``)

def _exposures(records):
    return [r for r in records if r.kind is Kind.EXPOSURE]


def run_diversity(ds: Dataset, out: Path, windows: list[int], n_stages: int, basis: str) -> None:
    groups = ds.groups
    by_acc = ds.by_account()
    acc_rows, comp_rows, issue_rows = [], [], []
    for k in windows:
        window = AnalysisWindow.last(k)
        metrics: dict[str, dict[str, float]] = {}
        for acc in sorted(by_acc):
            exp = _exposures(slice_window(by_acc[acc], window, ds.t_max))
            if not exp:
                continue
            g = groups[acc]
            cats: dict[str, int] = {}
            for r in exp:
                cats[r.category] = cats.get(r.category, 0) + 1
            three = regroup_structural(exp, INTEREST_CATEGORIES[g.value])
            ivec = build_issue_vector(exp, Kind.EXPOSURE)
            ide = ideology_shares(exp, Kind.EXPOSURE)
            m = {
                "total_entropy": diversity.shannon_entropy(list(cats.values())),
                "structural_entropy": diversity.structural_entropy(three),
                "political_share": political_share(exp),
                "interest_share": float(three[0]),
                "news_politics_share": float(three[1]),
            }
            if ivec.any():
                m["issue_entropy"] = diversity.shannon_entropy(ivec)
            if ide.any():
                for name, share in zip(IDEOLOGIES, ide):
                    m[f"ideology_{name.value}"] = float(share)
            metrics[acc] = m
            acc_rows.append([acc, g.value, k, m["total_entropy"], m["structural_entropy"],
                             m["political_share"], m["interest_share"], m["news_politics_share"],
                             m.get("issue_entropy")])
        names = ["total_entropy", "structural_entropy", "political_share", "interest_share",
                 "news_politics_share", "issue_entropy"] + [f"ideology_{i.value}" for i in IDEOLOGIES]
        for name in names:
            vals = {a: m[name] for a, m in metrics.items() if name in m}
            try:
                c = diversity.compare_groups(vals, groups, name)
            except ValueError:
                continue
            comp_rows.append([name, k, c.mean_a, c.sd_a, c.mean_b, c.sd_b, c.t_stat, c.p_value, c.n_a, c.n_b, c.df])
        try:
            rows = diversity.issue_share_comparison(by_acc, groups, window, ds.t_max)
        except ValueError:
            rows = []
        for r in rows:
            c = r.comparison
            issue_rows.append([r.issue, k, c.mean_a, c.sd_a, c.mean_b, c.sd_b, r.difference, c.t_stat, c.p_value])
    write_csv(out / "account_metrics.csv",
              ["account_id", "group", "window", "total_entropy", "structural_entropy", "political_share",
               "interest_share", "news_politics_share", "issue_entropy"], acc_rows)
    write_csv(out / "group_comparisons.csv",
              ["metric", "window", "mean_m", "sd_m", "mean_f", "sd_f", "t", "p", "n_m", "n_f", "df"], comp_rows)
    write_csv(out / "issue_comparison.csv",
              ["issue", "window", "mean_m", "sd_m", "mean_f", "sd_f", "diff", "t", "p"], issue_rows)

    stages = feedback.StagePartition.equal(n_stages, ds.t_max)
    sim_rows = []
    categories = sorted({r.category for r in ds.records})
    cidx = {c: i for i, c in enumerate(categories)}
    for s, (lo, hi) in enumerate(stages.boundaries):
        window = AnalysisWindow.steps(lo, hi)
        vecs = {}
        for acc in sorted(by_acc):
            exp = _exposures(slice_window(by_acc[acc], window, ds.t_max))
            if basis == "issue":
                vecs[acc] = build_issue_vector(exp, Kind.EXPOSURE)
            else:
                v = np.zeros(len(categories))
                for r in exp:
                    v[cidx[r.category]] += 1
                vecs[acc] = v / v.sum() if v.sum() > 0 else v
        for mode in ("within_a", "within_b", "between"):
            label = {"within_a": "within_m", "within_b": "within_f", "between": "between"}[mode]
            try:
                summ = diversity.pairwise_group_similarity(vecs, groups, mode)
            except ValueError:
                continue
            sim_rows.append([s + 1, lo, hi, label, summ.mean, summ.sd, summ.n_pairs, summ.n_excluded])
    write_csv(out / "similarity_stages.csv",
              ["stage", "step_from", "step_to", "mode", "mean", "sd", "n_pairs", "n_excluded"], sim_rows)


def _network_summary(net, resolution, seed):
    out = {"n_nodes": net.n, "n_edges": net.n_edges, "density": conet.density(net),
           "clustering": conet.weighted_clustering(net)[0], "modularity": None, "n_communities": None}
    part = None
    if net.n_edges > 0:
        part = conet.louvain_partition(net, resolution, seed)
        out["modularity"] = conet.modularity(net, part)
        out["n_communities"] = part.n_communities
    return out, part


def run_network(ds: Dataset, out: Path, theta: int, gamma: float, window: AnalysisWindow,
                early_window: AnalysisWindow, permutations: int, seed: int, retain_all: bool,
                thetas: list[int] | None = None) -> dict:
    groups = ds.groups
    accounts = sorted(groups)
    full = conet.build_coexposure(ds.records, True, window, theta, ds.t_max, accounts=accounts, retain_all=retain_all)
    early_full = conet.build_coexposure(ds.records, True, early_window, theta, ds.t_max, accounts=accounts,
                                        retain_all=retain_all)
    metrics: dict = {"theta": theta, "gamma": gamma, "window": str(window), "early_window": str(early_window),
                     "groups": {}}
    for g in (Group.MALE, Group.FEMALE):
        ids = [a for a in full.nodes if groups[a] == g]
        if len(ids) < 2:
            continue
        net = full.subnetwork(ids)
        summary, part = _network_summary(net, gamma, seed)
        early_ids = [a for a in early_full.nodes if groups[a] == g]
        early_part = None
        if len(early_ids) >= 2:
            early_net = early_full.subnetwork(early_ids)
            early_summary, early_part = _network_summary(early_net, gamma, seed)
            summary["early_modularity"] = early_summary["modularity"]
            summary["early_n_communities"] = early_summary["n_communities"]
        summary["continuity"] = None
        if part is not None and early_part is not None:
            try:
                summary["continuity"] = conet.community_continuity(early_part, part)
            except ValueError:
                pass
        metrics["groups"][g.value] = summary
        write_csv(out / f"edges_{g.value}.csv", ["source", "target", "weight"], net.edge_list())
        if part is not None:
            write_csv(out / f"communities_{g.value}.csv", ["account_id", "community"],
                      sorted(part.assignment.items()))
            profiles, flagged = conet.community_profile(part, slice_window(ds.records, window, ds.t_max))
            header = ["community", "n_members", "n_with_evidence"] + list(CAP_ISSUES) + \
                     [f"ideology_{i.value}" for i in IDEOLOGIES]
            write_csv(out / f"community_profiles_{g.value}.csv", header,
                      [[p.community, len(p.members), p.n_with_evidence, *p.issue_mean, *p.ideology_mean]
                       for p in profiles])
            if flagged:
                summary["communities_without_evidence"] = flagged

    def modularity_metric(net):
        part = conet.louvain_partition(net, gamma, seed)
        return conet.modularity(net, part)

    tests = {"density": conet.density, "clustering": lambda n: conet.weighted_clustering(n)[0],
             "modularity": modularity_metric}
    metrics["permutation"] = {}
    if permutations:
        for name, fn in tests.items():
            try:
                res = conet.permutation_test_network(fn, full, groups, permutations, seed)
            except ValueError as exc:
                metrics["permutation"][name] = {"error": str(exc)}
                continue
            metrics["permutation"][name] = {"observed_diff_m_minus_f": res.observed_diff, "p_value": res.p_value,
                                            "n_permutations": res.n_permutations, "n_failed": res.n_failed}
    write_json(out / "metrics.json", metrics)

    if thetas:
        rows = []
        for th in thetas:
            net_th = full.with_threshold(th)
            early_th = early_full.with_threshold(th)
            for g in (Group.MALE, Group.FEMALE):
                ids = [a for a in net_th.nodes if groups[a] == g]
                if len(ids) < 2:
                    continue
                s, part = _network_summary(net_th.subnetwork(ids), gamma, seed)
                e_ids = [a for a in early_th.nodes if groups[a] == g]
                es, epart = _network_summary(early_th.subnetwork(e_ids), gamma, seed) if len(e_ids) >= 2 else ({}, None)
                cont = None
                if part is not None and epart is not None:
                    try:
                        cont = conet.community_continuity(epart, part)
                    except ValueError:
                        pass
                rows.append([th, g.value, s["n_nodes"], s["n_edges"], s["density"], s["clustering"],
                             s["modularity"], es.get("modularity"), cont])
        write_csv(out / "theta_sweep.csv", ["theta", "group", "n_nodes", "n_edges", "density", "clustering",
                                            "modularity", "early_modularity", "continuity"], rows)
    return metrics


def run_feedback_cmd(ds: Dataset, out: Path, n_stages: int, direction: str, theta: int, gamma: float,
                     community_window: AnalysisWindow, seed: int) -> feedback.FeedbackResult:
    directions = feedback.DIRECTIONS if direction == "both" else (direction,)
    comms = conet.group_partitions(ds.records, ds.groups, community_window, theta, ds.t_max, gamma, seed)
    stages = feedback.StagePartition.equal(n_stages, ds.t_max)
    res = feedback.run_feedback(ds.records, ds.groups, comms, stages, directions)
    coef_rows, plot_rows = [], []
    for (direc, sub), reg in sorted(res.regressions.items()):
        df = reg.n_clusters - 1
        for name, c in reg.coefficients.items():
            lo, hi = c.ci95(df)
            coef_rows.append([name, c.beta, c.se, c.p_value, direc, sub, c.se_classical, reg.n_obs, reg.n_clusters,
                              reg.r_squared])
            plot_rows.append([direc, sub, name, c.beta, lo, hi])
    write_csv(out / "coefficients.csv", ["predictor", "beta", "se", "p", "direction", "subgroup", "se_classical",
                                         "n_obs", "n_clusters", "r_squared"], coef_rows)
    write_csv(out / "coefficient_plot.csv", ["direction", "subgroup", "predictor", "beta", "ci_low", "ci_high"],
              plot_rows)
    write_csv(out / "level_similarity.csv", ["direction", "group", "transition", "comparison", "n",
                                             "mean_difference", "p", "holm_p"], res.level_rows)
    write_csv(out / "communities.csv", ["account_id", "group", "community"],
              [[a, ds.groups[a].value, res.communities.get(a)] for a in sorted(ds.groups)])
    return res


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser, needs_input: bool):
    if needs_input:
        p.add_argument("--in", dest="input", required=True, help="trajectory log (.jsonl or .csv)")
        p.add_argument("--format", choices=("jsonl", "csv"), default=None)
        p.add_argument("--t-max", type=int, default=None, help="last step of the protocol (default 150)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--config", help="JSON file with option defaults (keys as option names, '_' for '-')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"recaudit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    p = sub.add_parser("ingest", help="validate a log and write a normalized copy")
    _common(p, True)

    p = sub.add_parser("diversity", help="entropy, shares, issue gaps and similarity series")
    _common(p, True)
    p.add_argument("--windows", help="comma-separated last-K window sizes (default 50)")
    p.add_argument("--stages", type=int, help="stages for similarity series (default 3)")
    p.add_argument("--similarity-basis", choices=("issue", "category"))

    p = sub.add_parser("network", help="co-exposure networks, communities and permutation tests")
    _common(p, True)
    _network_flags(p)

    p = sub.add_parser("feedback", help="lagged exposure/click feedback analysis")
    _common(p, True)
    p.add_argument("--stages", type=int)
    p.add_argument("--direction", choices=("both",) + feedback.DIRECTIONS)
    p.add_argument("--theta", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--community-window", help="window for community detection (default last:50)")

    p = sub.add_parser("simulate", help="run the collaborative-filtering agent model")
    _common(p, False)
    _sim_flags(p)
    p.add_argument("--export", action="store_const", const=True, default=None,
                   help="also write synthetic_log.jsonl")

    p = sub.add_parser("sweep", help="beta x tau sensitivity sweep")
    _common(p, False)
    _sim_flags(p)
    p.add_argument("--betas")
    p.add_argument("--taus")
    p.add_argument("--n-seeds", type=int, help="seeds per cell (default 20)")

    p = sub.add_parser("report", help="diversity + network + feedback in one bundle")
    _common(p, True)
    _network_flags(p)
    p.add_argument("--stages", type=int)
    p.add_argument("--report-windows")
    p.add_argument("--thetas")
    return parser


def _network_flags(p):
    p.add_argument("--theta", type=int, help="edge threshold, edges need weight > theta (default 20)")
    p.add_argument("--gamma", type=float, help="modularity resolution (default 1.0)")
    p.add_argument("--window", help="analysis window, e.g. last:50, first:50, 51-100")
    p.add_argument("--early-window", help="early window for continuity (default first:50)")
    p.add_argument("--permutations", type=int, help="label reshufflings (default 1000, 0 to skip)")
    p.add_argument("--retain-all", action="store_const", const=True, default=None,
                   help="keep accounts without political exposure as isolated nodes")


def _sim_flags(p):
    p.add_argument("--agents", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--recs", type=int, help="recommendations per agent and step")
    p.add_argument("--sampled-update", action="store_const", const=True, default=None,
                   help="update from the sampled sources instead of the full expectation")


class _UsageError(Exception):
    pass


def resolve(args: argparse.Namespace) -> dict:
    """Defaults < --config file < explicit flags."""
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise LogFormatError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise LogFormatError("config file must hold a JSON object")
    skip = {"command", "config", "verbose", "out", "input"}
    resolved = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        if value is not None:
            resolved[key] = value
        elif key in cfg:
            resolved[key] = cfg[key]
        else:
            resolved[key] = DEFAULTS.get(key)
    unknown = set(cfg) - set(resolved) - skip
    if unknown:
        raise LogFormatError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return resolved


def _load(args, conf) -> Dataset:
    try:
        return parse_log(args.input, conf["format"], conf["t_max"])
    except (OSError, LogFormatError) as exc:
        raise StageError("parse", exc) from exc


def _stage(name: str, fn: Callable, *a, **kw):
    try:
        return fn(*a, **kw)
    except StageError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _sim_config(conf, seed) -> simulator.SimConfig:
    return simulator.SimConfig(n_agents=conf["agents"], n_steps=conf["steps"], beta=conf["beta"], tau=conf["tau"],
                               alpha=conf["alpha"], recs_per_step=conf["recs"], seed=seed,
                               sampled_update=bool(conf["sampled_update"]))


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        conf = resolve(args)
        out.mkdir(parents=True, exist_ok=True)
        inputs = [Path(args.input)] if getattr(args, "input", None) else []
        if args.config:
            inputs.append(Path(args.config))
        seed = int(conf.get("seed") or 0)
        if seed < 0:
            raise _UsageError("--seed must be non-negative")
        _run(args.command, args, conf, out, seed)
        write_manifest(out, args.command, conf, seed, inputs)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"recaudit: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"recaudit: error in stage '{exc.stage}': {exc.__cause__}", file=sys.stderr)
        return 1
    except (LogFormatError, ValueError, OSError) as exc:
        print(f"recaudit: error: {exc}", file=sys.stderr)
        return 1
    return 0


def _window(text: str) -> AnalysisWindow:
    try:
        return AnalysisWindow.parse(text)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _run(command, args, conf, out: Path, seed: int) -> None:
    if command == "ingest":
        ds = _load(args, conf)
        export_log(ds, out / "records.jsonl")
        counts = {"accounts": len(ds.profiles), "records": len(ds.records), "t_max": ds.t_max,
                  "groups": {g.value: sum(p.group == g for p in ds.profiles) for g in Group},
                  "kinds": {k.value: sum(r.kind == k for r in ds.records) for k in Kind},
                  "political": sum(r.is_political for r in ds.records)}
        write_json(out / "summary.json", counts)
    elif command == "diversity":
        ds = _load(args, conf)
        _stage("diversity", run_diversity, ds, out, _ints(conf["windows"]), conf["stages"], conf["similarity_basis"])
    elif command == "network":
        ds = _load(args, conf)
        _stage("network", run_network, ds, out, conf["theta"], conf["gamma"], _window(conf["window"]),
               _window(conf["early_window"]), conf["permutations"], derive_seed(seed, "network"),
               bool(conf["retain_all"]))
    elif command == "feedback":
        ds = _load(args, conf)
        _stage("feedback", run_feedback_cmd, ds, out, conf["stages"], conf["direction"], conf["theta"],
               conf["gamma"], _window(conf["community_window"]), derive_seed(seed, "network"))
    elif command == "simulate":
        cfg = _stage("simulate", _sim_config, conf, seed)
        if conf["export"]:
            cfg = simulator.SimConfig(**{**cfg.to_dict(), "record_sources": True})
        traj = simulator.run_simulation(cfg)
        s = traj.summary
        write_csv(out / "trajectory_summary.csv",
                  ["step", "center_cosine", "divergence", "within_m", "within_f", "between"],
                  [[t, s["center_cosine"][t], s["divergence"][t], s["within_m"][t], s["within_f"][t], s["between"][t]]
                   for t in range(cfg.n_steps + 1)])
        cm, cf = simulator.group_centers(traj.final, traj.gender)
        write_csv(out / "issue_difference.csv", ["issue", "center_m", "center_f", "diff_m_minus_f"],
                  [[CAP_ISSUES[k], cm[k], cf[k], cm[k] - cf[k]] for k in range(cfg.n_issues)])
        if conf["export"]:
            if cfg.n_steps == 0:
                raise StageError("simulate", ValueError("nothing to export for zero steps"))
            export_log(simulator.export_synthetic_log(traj), out / "synthetic_log.jsonl")
    elif command == "sweep":
        base = _stage("sweep", _sim_config, conf, seed)
        seeds = [derive_seed(seed, "sweep") + k for k in range(conf["n_seeds"])]
        cells = _stage("sweep", simulator.sweep, _floats(conf["betas"]), _floats(conf["taus"]), seeds, base)
        write_csv(out / "sweep.csv", ["beta", "tau", "seed", "final_divergence", "final_between_cosine",
                                      "initial_between_cosine", "final_within_m", "final_within_f",
                                      "final_between_pairwise"],
                  [[c.beta, c.tau, c.seed, c.final_divergence, c.final_between_cosine, c.initial_between_cosine,
                    c.final_within_m, c.final_within_f, c.final_between_pairwise] for c in cells])
        write_csv(out / "surface.csv", ["beta", "tau", "n_seeds", "mean_divergence", "ci_low", "ci_high"],
                  simulator.sweep_surface(cells))
    elif command == "report":
        ds = _load(args, conf)
        for name in ("diversity", "network", "feedback"):
            (out / name).mkdir(exist_ok=True)
        _stage("diversity", run_diversity, ds, out / "diversity", _ints(conf["report_windows"]), conf["stages"],
               "issue")
        net_seed = derive_seed(seed, "network")
        _stage("network", run_network, ds, out / "network", conf["theta"], conf["gamma"], _window(conf["window"]),
               _window(conf["early_window"]), conf["permutations"], net_seed, bool(conf["retain_all"]),
               _ints(conf["thetas"]))
        _stage("feedback", run_feedback_cmd, ds, out / "feedback", conf["stages"], "both", conf["theta"],
               conf["gamma"], _window(conf["window"]), net_seed)
    else:  # pragma: no cover - argparse restricts the choices
        raise _UsageError(f"unknown subcommand {command!r}")


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
