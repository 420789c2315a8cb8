"""Trajectory-log schema, ingestion, window slicing and issue vectors.

A dataset is a list of :class:`AccountProfile` plus a list of
:class:`ExposureRecord`. Logs are JSON Lines (one record per line) or CSV with
the same column names; both carry the account's group on every row.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

#: Fixed issue order used for every issue vector and serialized table.
CAP_ISSUES: tuple[str, ...] = (
    "Macroeconomics",
    "Civil Rights",
    "Health",
    "Agriculture",
    "Labor",
    "Education",
    "Environment",
    "Energy",
    "Immigration",
    "Transportation",
    "Law and Crime",
    "Social Welfare",
    "Housing",
    "Domestic Commerce",
    "Defense",
    "Technology",
    "Foreign Trade",
    "International Affairs",
    "Government Operations",
    "Public Lands",
    "Culture",
)
OTHER_ISSUE = "Other"
N_ISSUES = len(CAP_ISSUES)
ISSUE_INDEX = {name: i for i, name in enumerate(CAP_ISSUES)}

NEWS_POLITICS = "News & Politics"

#: Default behavioral-interest categories per group.
INTEREST_CATEGORIES = {
    "male": frozenset({"Autos & Vehicles", "Sports", "Gaming"}),
    "female": frozenset({"Howto & Style", "People & Blogs"}),
}

FIELDS = ("account_id", "group", "step", "kind", "video_id", "category",
          "is_political", "issue", "ideology")


class Group(str, enum.Enum):
    MALE = "male"
    FEMALE = "female"


class Kind(str, enum.Enum):
    EXPOSURE = "exposure"
    CLICK = "click"


class Ideology(str, enum.Enum):
    LEFT = "left"
    NEUTRAL = "neutral"
    RIGHT = "right"


IDEOLOGIES = (Ideology.LEFT, Ideology.NEUTRAL, Ideology.RIGHT)
_KIND_ORDER = {Kind.EXPOSURE: 0, Kind.CLICK: 1}


class LogFormatError(ValueError):
    """Raised when a log line or row cannot be turned into a valid record."""

    def __init__(self, reason: str, line: int | None = None):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + reason)


@dataclass(frozen=True)
class AccountProfile:
    account_id: str
    group: Group


@dataclass(frozen=True)
class ExposureRecord:
    account_id: str
    step: int
    kind: Kind
    video_id: str
    category: str
    is_political: bool
    issue: str | None = None
    ideology: Ideology | None = None

    def sort_key(self):
        return (self.account_id, self.step, _KIND_ORDER[self.kind])


@dataclass(frozen=True)
class AnalysisWindow:
    """A contiguous step range, resolved lazily against ``t_max``.

    ``kind`` is one of ``"last"``, ``"first"`` or ``"range"``; ``bounds`` is
    ``(k,)`` for the first two and ``(start, stop)`` (inclusive) for ranges.
    """

    kind: str
    bounds: tuple[int, ...]

    @classmethod
    def last(cls, k: int) -> "AnalysisWindow":
        return cls("last", (int(k),))

    @classmethod
    def first(cls, k: int) -> "AnalysisWindow":
        return cls("first", (int(k),))

    @classmethod
    def steps(cls, start: int, stop: int) -> "AnalysisWindow":
        return cls("range", (int(start), int(stop)))

    @classmethod
    def parse(cls, text: str) -> "AnalysisWindow":
        """Parse ``last:50``, ``first:50`` or ``51-100``."""
        text = text.strip()
        if ":" in text:
            kind, k = text.split(":", 1)
            if kind not in ("last", "first"):
                raise ValueError(f"unknown window kind {kind!r}")
            return cls(kind, (int(k),))
        if "-" in text:
            a, b = text.split("-", 1)
            return cls.steps(int(a), int(b))
        raise ValueError(f"cannot parse window {text!r}")

    def resolve(self, t_max: int) -> tuple[int, int]:
        if t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.kind == "last":
            (k,) = self.bounds
            lo, hi = t_max - k + 1, t_max
        elif self.kind == "first":
            (k,) = self.bounds
            lo, hi = 1, k
        elif self.kind == "range":
            lo, hi = self.bounds
        else:
            raise ValueError(f"unknown window kind {self.kind!r}")
        if lo < 1 or hi > t_max or lo > hi:
            raise ValueError(f"window {self} does not fit in steps [1, {t_max}]")
        return lo, hi

    def __str__(self) -> str:
        if self.kind == "range":
            return f"{self.bounds[0]}-{self.bounds[1]}"
        return f"{self.kind}:{self.bounds[0]}"


@dataclass
class Dataset:
    profiles: list[AccountProfile]
    records: list[ExposureRecord]
    t_max: int

    @property
    def groups(self) -> dict[str, Group]:
        return {p.account_id: p.group for p in self.profiles}

    def by_account(self) -> dict[str, list[ExposureRecord]]:
        out: dict[str, list[ExposureRecord]] = {p.account_id: [] for p in self.profiles}
        for r in self.records:
            out[r.account_id].append(r)
        return out


# ---------------------------------------------------------------------------
# parsing

def _as_bool(value, line):
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("true", "1"):
            return True
        if low in ("false", "0"):
            return False
    raise LogFormatError(f"is_political must be a boolean, got {value!r}", line)


def _optional(value):
    if value is None or value == "":
        return None
    return value


def _row_to_record(row: dict, line: int, t_max: int | None) -> tuple[AccountProfile, ExposureRecord]:
    missing = [f for f in ("account_id", "group", "step", "kind", "video_id", "category", "is_political")
               if f not in row or row[f] is None or row[f] == ""]
    if missing:
        raise LogFormatError(f"missing field(s): {', '.join(missing)}", line)
    account_id = str(row["account_id"])
    try:
        group = Group(row["group"])
    except ValueError:
        raise LogFormatError(f"invalid group {row['group']!r}", line) from None
    try:
        step = int(row["step"])
    except (TypeError, ValueError):
        raise LogFormatError(f"step must be an integer, got {row['step']!r}", line) from None
    if isinstance(row["step"], float) and not float(row["step"]).is_integer():
        raise LogFormatError(f"step must be an integer, got {row['step']!r}", line)
    if step < 1 or (t_max is not None and step > t_max):
        raise LogFormatError(f"step {step} outside [1, {t_max if t_max is not None else 'inf'}]", line)
    try:
        kind = Kind(row["kind"])
    except ValueError:
        raise LogFormatError(f"invalid kind {row['kind']!r}", line) from None
    is_political = _as_bool(row["is_political"], line)
    issue = _optional(row.get("issue"))
    ideology = _optional(row.get("ideology"))
    if not is_political and (issue is not None or ideology is not None):
        raise LogFormatError("issue/ideology given on a non-political record", line)
    if issue is not None and issue not in ISSUE_INDEX and issue != OTHER_ISSUE:
        raise LogFormatError(f"invalid issue {issue!r}", line)
    if ideology is not None:
        try:
            ideology = Ideology(ideology)
        except ValueError:
            raise LogFormatError(f"invalid ideology {ideology!r}", line) from None
    rec = ExposureRecord(account_id, step, kind, str(row["video_id"]), str(row["category"]),
                         is_political, issue, ideology)
    return AccountProfile(account_id, group), rec


def _rows_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                row = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"malformed JSON ({exc.msg})", lineno) from None
            if not isinstance(row, dict):
                raise LogFormatError("expected a JSON object", lineno)
            yield lineno, row


def _rows_csv(path: Path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(FIELDS) <= set(reader.fieldnames):
            raise LogFormatError(f"CSV header must contain {', '.join(FIELDS)}", 1)
        for row in reader:
            yield reader.line_num, row


def parse_log(path, format: str | None = None, t_max: int | None = 150) -> Dataset:
    """Read and validate a trajectory log.

    Parameters
    ----------
    path : path-like
        JSON Lines or CSV file.
    format : {"jsonl", "csv"}, optional
        Inferred from the suffix when omitted.
    t_max : int or None
        Upper bound for ``step``. ``None`` takes the largest observed step.

    Returns
    -------
    Dataset
        Profiles in first-seen order, records sorted by (account, step, kind).
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    rows = _rows_csv(path) if format == "csv" else _rows_jsonl(path)

    profiles: dict[str, AccountProfile] = {}
    records: list[ExposureRecord] = []
    seen: set[tuple] = set()
    for lineno, row in rows:
        profile, rec = _row_to_record(row, lineno, t_max)
        prev = profiles.get(profile.account_id)
        if prev is None:
            profiles[profile.account_id] = profile
        elif prev.group != profile.group:
            raise LogFormatError(f"account {profile.account_id!r} has conflicting groups", lineno)
        key = (rec.account_id, rec.step, rec.video_id, rec.kind)
        if key in seen:
            raise LogFormatError(f"duplicate record {key[0]!r} step {key[1]} {key[2]!r} {key[3].value}", lineno)
        seen.add(key)
        records.append(rec)
    if not records:
        raise LogFormatError("log contains no records")
    records.sort(key=ExposureRecord.sort_key)
    resolved_t_max = t_max if t_max is not None else max(r.step for r in records)
    return Dataset(list(profiles.values()), records, resolved_t_max)


def record_to_row(rec: ExposureRecord, group: Group) -> dict:
    return {
        "account_id": rec.account_id,
        "group": group.value,
        "step": rec.step,
        "kind": rec.kind.value,
        "video_id": rec.video_id,
        "category": rec.category,
        "is_political": rec.is_political,
        "issue": rec.issue,
        "ideology": rec.ideology.value if rec.ideology is not None else None,
    }


def export_log(dataset: Dataset, path, format: str | None = None) -> None:
    """Write ``dataset`` so that :func:`parse_log` reads it back unchanged."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    groups = dataset.groups
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if format == "csv":
            writer = csv.DictWriter(fh, fieldnames=FIELDS, lineterminator="\n")
            writer.writeheader()
            for rec in dataset.records:
                row = record_to_row(rec, groups[rec.account_id])
                row["is_political"] = "true" if row["is_political"] else "false"
                writer.writerow({k: "" if v is None else v for k, v in row.items()})
        else:
            for rec in dataset.records:
                fh.write(json.dumps(record_to_row(rec, groups[rec.account_id]), ensure_ascii=False))
                fh.write("\n")


def dumps_jsonl(dataset: Dataset) -> str:
    buf = io.StringIO()
    groups = dataset.groups
    for rec in dataset.records:
        buf.write(json.dumps(record_to_row(rec, groups[rec.account_id]), ensure_ascii=False) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# windows and vectors

def slice_window(records: Sequence[ExposureRecord], window: AnalysisWindow, t_max: int) -> list[ExposureRecord]:
    lo, hi = window.resolve(t_max)
    return [r for r in records if lo <= r.step <= hi]


def _kind(kind) -> Kind:
    return kind if isinstance(kind, Kind) else Kind(kind)


def build_issue_vector(records: Iterable[ExposureRecord], kind_filter=Kind.EXPOSURE) -> np.ndarray:
    """Share of each CAP issue among one account's political records.

    Records without an issue or labelled ``Other`` are ignored. Returns the
    all-zero vector when nothing qualifies.
    """
    kind_filter = _kind(kind_filter)
    counts = np.zeros(N_ISSUES)
    for r in records:
        if r.kind is kind_filter and r.is_political and r.issue in ISSUE_INDEX:
            counts[ISSUE_INDEX[r.issue]] += 1
    total = counts.sum()
    return counts / total if total > 0 else counts


def issue_vectors(by_account: dict[str, list[ExposureRecord]], kind_filter=Kind.EXPOSURE) -> dict[str, np.ndarray]:
    return {a: build_issue_vector(recs, kind_filter) for a, recs in by_account.items()}


def regroup_structural(records: Sequence[ExposureRecord], interest_categories) -> np.ndarray:
    """Shares of (Interest, News & Politics, Others) among ``records``."""
    interest = frozenset(interest_categories)
    if not interest:
        raise ValueError("interest_categories must be non-empty")
    if not records:
        raise ValueError("cannot regroup an empty record list")
    counts = np.zeros(3)
    for r in records:
        if r.category in interest:
            counts[0] += 1
        elif r.category == NEWS_POLITICS:
            counts[1] += 1
        else:
            counts[2] += 1
    return counts / counts.sum()


def category_distribution(records: Sequence[ExposureRecord]) -> dict[str, float]:
    counts = Counter(r.category for r in records)
    total = sum(counts.values())
    return {c: n / total for c, n in sorted(counts.items())}


def political_share(records: Sequence[ExposureRecord]) -> float:
    if not records:
        raise ValueError("no records")
    return sum(r.is_political for r in records) / len(records)


def ideology_shares(records: Iterable[ExposureRecord], kind_filter=Kind.EXPOSURE) -> np.ndarray:
    """Shares of (left, neutral, right) among labelled political records."""
    kind_filter = _kind(kind_filter)
    counts = np.zeros(3)
    pos = {ide: i for i, ide in enumerate(IDEOLOGIES)}
    for r in records:
        if r.kind is kind_filter and r.is_political and r.ideology is not None:
            counts[pos[r.ideology]] += 1
    total = counts.sum()
    return counts / total if total > 0 else counts
