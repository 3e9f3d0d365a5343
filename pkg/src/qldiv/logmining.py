"""Mining ambiguous queries and their specializations from a query log.

Pipeline: parse records, split each user's stream into sessions on
inactivity gaps, count query frequencies, then for every query collect the
more specific queries that followed it in some session and keep the popular
ones.  A query with at least two popular specializations is ambiguous; its
specializations get probabilities proportional to their frequencies.
"""

from __future__ import annotations

import json
import logging
import string
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence, TextIO

__all__ = [
    "DEFAULT_GAP",
    "DEFAULT_S",
    "ModelFormatError",
    "QueryLogRecord",
    "ParseStats",
    "Session",
    "SpecializationModel",
    "normalize_query",
    "parse_log",
    "segment_sessions",
    "query_frequencies",
    "CoSessionRecommender",
    "default_recommend",
    "ambiguous_query_detect",
    "specialization_probs",
    "build_model",
    "followup_hits",
    "save_model",
    "load_model",
]

log = logging.getLogger(__name__)

DEFAULT_GAP = 30 * 60
DEFAULT_S = 10
MODEL_VERSION = 1
LOG_FORMATS = ("aol-tsv",)

_AOL_TIME = "%Y-%m-%d %H:%M:%S"
_STRIP = string.punctuation + string.whitespace
_MAX_LINE_WARNINGS = 20


class ModelFormatError(ValueError):
    """A specialization model file is malformed or of an unknown version."""


def normalize_query(text: str) -> str:
    """Lowercase, collapse whitespace and strip surrounding punctuation."""
    return " ".join(text.lower().split()).strip(_STRIP)


def _terms(query: str) -> frozenset[str]:
    return frozenset(query.split())


@dataclass(frozen=True)
class QueryLogRecord:
    query: str
    user_id: str
    timestamp: float
    clicked_urls: frozenset[str] = frozenset()
    result_urls: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.query:
            raise ValueError("empty query")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass
class ParseStats:
    records: int = 0
    skipped: int = 0


@dataclass(frozen=True)
class Session:
    user_id: str
    queries: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.queries)

    @property
    def query_strings(self) -> list[str]:
        return [q for q, _ in self.queries]


def _parse_time(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    return datetime.strptime(text, _AOL_TIME).replace(tzinfo=timezone.utc).timestamp()


def _iter_aol(fh: TextIO, name: str, stats: ParseStats) -> Iterator[QueryLogRecord]:
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if lineno == 1 and line.startswith("AnonID"):
                continue
            if not line.strip():
                stats.skipped += 1
                continue
            fields = line.split("\t")
            try:
                if len(fields) not in (3, 5):
                    raise ValueError(f"expected 3 or 5 tab-separated fields, got {len(fields)}")
                user, query, when = fields[:3]
                clicked = frozenset([fields[4].strip()]) if len(fields) == 5 and fields[4].strip() else frozenset()
                record = QueryLogRecord(
                    query=normalize_query(query),
                    user_id=user.strip(),
                    timestamp=_parse_time(when),
                    clicked_urls=clicked,
                )
                if not record.user_id:
                    raise ValueError("empty user id")
            except ValueError as exc:
                stats.skipped += 1
                if stats.skipped <= _MAX_LINE_WARNINGS:
                    log.warning("%s:%d: skipping malformed line: %s", name, lineno, exc)
                continue
            stats.records += 1
            yield record


def parse_log(
    path: str | Path,
    fmt: str = "aol-tsv",
    stats: ParseStats | None = None,
) -> Iterator[QueryLogRecord]:
    """Stream records from a query log in file order.

    The file is opened immediately, so an unreadable path raises here rather
    than on first iteration.  Malformed lines are skipped and counted in
    ``stats``.
    """
    if fmt not in LOG_FORMATS:
        raise ValueError(f"unknown log format {fmt!r}; expected one of {LOG_FORMATS}")
    fh = open(path, encoding="utf-8")
    return _iter_aol(fh, str(path), stats if stats is not None else ParseStats())


def segment_sessions(records: Iterable[QueryLogRecord], gap: float = DEFAULT_GAP) -> list[Session]:
    """Split each user's time-ordered queries wherever the pause exceeds ``gap`` seconds.

    Identical consecutive queries inside a session are collapsed.  Sessions
    are returned grouped by user (in order of first appearance), then by time.
    """
    by_user: dict[str, list[QueryLogRecord]] = defaultdict(list)
    for rec in records:
        by_user[rec.user_id].append(rec)
    sessions = []
    for user, recs in by_user.items():
        recs.sort(key=lambda r: r.timestamp)
        current: list[tuple[str, float]] = []
        last_time = None
        for rec in recs:
            if last_time is not None and rec.timestamp - last_time > gap:
                sessions.append(Session(user, tuple(current)))
                current = []
            if not current or current[-1][0] != rec.query:
                current.append((rec.query, rec.timestamp))
            last_time = rec.timestamp
        if current:
            sessions.append(Session(user, tuple(current)))
    return sessions


def query_frequencies(sessions: Iterable[Session]) -> Counter[str]:
    """Submissions per query, after collapsing repeats within a session."""
    freq: Counter[str] = Counter()
    for session in sessions:
        freq.update(session.query_strings)
    return freq


class CoSessionRecommender:
    """Suggests the queries that followed ``q`` in a session and strictly extend its terms."""

    def __init__(self, sessions: Iterable[Session]):
        followers: dict[str, set[str]] = defaultdict(set)
        for session in sessions:
            queries = session.query_strings
            for i, q in enumerate(queries):
                terms = _terms(q)
                for later in queries[i + 1 :]:
                    if terms < _terms(later):
                        followers[q].add(later)
        self._followers = dict(followers)

    def __call__(self, q: str) -> set[str]:
        return set(self._followers.get(q, ()))

    def queries(self) -> list[str]:
        return sorted(self._followers)


def default_recommend(q: str, sessions: Iterable[Session], freq: Mapping[str, int]) -> set[str]:
    """One-off candidate specializations of ``q``; build a CoSessionRecommender for repeated use."""
    if not freq.get(q):
        return set()
    return CoSessionRecommender(sessions)(q)


def ambiguous_query_detect(
    q: str,
    recommend: Callable[[str], Iterable[str]],
    freq: Mapping[str, int],
    s: int = DEFAULT_S,
) -> list[str]:
    """Popular specializations of ``q``, or an empty list if ``q`` is not ambiguous.

    A candidate survives when its frequency is at least ``f(q) / s``; at least
    two survivors are needed.  Survivors are ordered by frequency, then text.
    """
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    fq = freq.get(q, 0)
    if fq <= 0:
        return []
    kept = [c for c in recommend(q) if c != q and freq.get(c, 0) * s >= fq]
    if len(kept) < 2:
        return []
    return sorted(kept, key=lambda c: (-freq[c], c))


def specialization_probs(specs: Sequence[str], freq: Mapping[str, int]) -> list[tuple[str, float]]:
    total = sum(freq[c] for c in specs)
    return [(c, freq[c] / total) for c in specs]


@dataclass(frozen=True)
class SpecializationModel:
    """Ambiguous queries mapped to their specializations and probabilities."""

    entries: Mapping[str, tuple[tuple[str, float], ...]] = field(default_factory=dict)
    s: int = DEFAULT_S
    source: str = ""
    built_at: float | None = None

    def __post_init__(self):
        entries = {}
        for q in sorted(self.entries):
            specs = tuple((str(c), float(p)) for c, p in self.entries[q])
            if len(specs) < 2:
                raise ValueError(f"{q!r}: an ambiguous query needs at least two specializations")
            if any(c == q for c, _ in specs):
                raise ValueError(f"{q!r} listed as its own specialization")
            if any(not 0.0 < p <= 1.0 for _, p in specs):
                raise ValueError(f"{q!r}: probabilities must lie in (0, 1]")
            if abs(sum(p for _, p in specs) - 1.0) > 1e-9:
                raise ValueError(f"{q!r}: probabilities do not sum to 1")
            entries[q] = specs
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, q: object) -> bool:
        return q in self.entries

    def get(self, q: str) -> tuple[tuple[str, float], ...]:
        return self.entries.get(q, ())


def build_model(
    sessions: Sequence[Session],
    s: int = DEFAULT_S,
    recommender: Callable[[str], Iterable[str]] | None = None,
    source: str = "",
) -> SpecializationModel:
    """Run ambiguity detection for every logged query.

    ``built_at`` is the newest session timestamp, so rebuilding from the same
    log yields an identical model.
    """
    freq = query_frequencies(sessions)
    recommend = recommender if recommender is not None else CoSessionRecommender(sessions)
    entries = {}
    for q in sorted(freq):
        specs = ambiguous_query_detect(q, recommend, freq, s)
        if specs:
            entries[q] = tuple(specialization_probs(specs, freq))
    newest = max((t for sess in sessions for _, t in sess.queries), default=None)
    return SpecializationModel(entries, s=s, source=source, built_at=newest)


def followup_hits(model: SpecializationModel, sessions: Iterable[Session]) -> int:
    """Sessions in which an ambiguous query is later followed by one of its specializations."""
    hits = 0
    for session in sessions:
        queries = session.query_strings
        for i, q in enumerate(queries):
            specs = {c for c, _ in model.get(q)}
            if specs and specs.intersection(queries[i + 1 :]):
                hits += 1
                break
    return hits


def save_model(model: SpecializationModel, path: str | Path) -> None:
    doc = {
        "version": MODEL_VERSION,
        "s": model.s,
        "source": model.source,
        "built_at": model.built_at,
        "entries": {q: [{"q2": c, "p": p} for c, p in specs] for q, specs in model.entries.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> SpecializationModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model must be a JSON object")
    version = doc.get("version", MODEL_VERSION)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version!r} (expected {MODEL_VERSION})")
    try:
        s = doc["s"]
        raw = doc["entries"]
        if not isinstance(s, int) or not isinstance(raw, dict):
            raise TypeError("'s' must be an integer and 'entries' an object")
        entries = {q: tuple((e["q2"], e["p"]) for e in specs) for q, specs in raw.items()}
        return SpecializationModel(
            entries, s=s, source=doc.get("source", ""), built_at=doc.get("built_at")
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model ({exc})") from None
