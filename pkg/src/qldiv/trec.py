"""Reading and writing TREC run files and diversity qrels.

Run lines are ``qid Q0 docid rank score tag``.  Fields are split on tabs
when a line contains one (so query strings with spaces can serve as qids,
as in specialization run files), otherwise on whitespace.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, TextIO

from qldiv.corpus import ResultList
from qldiv.metrics import SubtopicJudgments

__all__ = ["RunFormatError", "read_run", "read_run_lines", "write_run", "format_run", "read_qrels", "read_topics"]


class RunFormatError(ValueError):
    pass


def _fields(line: str) -> list[str]:
    return line.split("\t") if "\t" in line else line.split()


def read_run(path: str | Path) -> dict[str, ResultList]:
    """Result lists keyed by qid, in order of first appearance, sorted by rank."""
    rows: dict[str, list[tuple[int, str, float]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = _fields(line)
            if len(parts) != 6:
                raise RunFormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            qid, _, docid, rank, score, _ = (p.strip() for p in parts)
            try:
                rows[qid].append((int(rank), docid, float(score)))
            except ValueError:
                raise RunFormatError(f"{path}:{lineno}: bad rank or score") from None
    runs = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        try:
            runs[qid] = ResultList(qid, tuple((d, s) for _, d, s in entries))
        except ValueError as exc:
            raise RunFormatError(f"{path}: {exc}") from None
    return runs


def read_run_lines(path: str | Path) -> dict[str, list[str]]:
    """Raw run lines per qid, ordered by rank, for verbatim pass-through."""
    rows: dict[str, list[tuple[int, str]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = _fields(line)
            if len(parts) != 6:
                raise RunFormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            try:
                rows[parts[0].strip()].append((int(parts[3]), line))
            except ValueError:
                raise RunFormatError(f"{path}:{lineno}: bad rank") from None
    return {qid: [line for _, line in sorted(entries, key=lambda e: e[0])] for qid, entries in rows.items()}


def format_run(results: ResultList, tag: str = "qldiv", qid: str | None = None) -> list[str]:
    qid = results.query_id if qid is None else qid
    sep = "\t" if any(c.isspace() for c in qid) else " "
    return [
        sep.join([qid, "Q0", d, str(r), repr(float(s)), tag])
        for r, (d, s) in enumerate(results.items, start=1)
    ]


def write_run(runs: Iterable[ResultList], out: TextIO, tag: str = "qldiv") -> None:
    for results in runs:
        for line in format_run(results, tag):
            out.write(line + "\n")


def read_qrels(path: str | Path) -> dict[str, SubtopicJudgments]:
    """Diversity qrels ``topic subtopic docid judgment``, uniform subtopic weights.

    Subtopics without any relevant document carry no weight and are dropped.
    """
    relevant: dict[str, dict[str, set[str]]] = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise RunFormatError(f"{path}:{lineno}: expected 'topic subtopic doc judgment'")
            topic, sub, doc, judgment = parts
            docs = relevant[topic].setdefault(sub, set())
            if int(judgment) > 0:
                docs.add(doc)
    out = {}
    for topic, subs in relevant.items():
        subs = {s: d for s, d in subs.items() if d}
        if subs:
            out[topic] = SubtopicJudgments.uniform(topic, subs)
    return out


def read_topics(path: str | Path) -> dict[str, str]:
    """``qid<TAB>query text`` lines."""
    topics = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            qid, sep, text = line.partition("\t")
            if not sep:
                raise RunFormatError(f"{path}:{lineno}: expected 'qid<TAB>query'")
            topics[qid.strip()] = text.strip()
    return topics
