"""Diversity-aware effectiveness measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from qldiv.corpus import ResultList
from qldiv.diversify import DiversificationInput, DiversifiedList, overall_utility

__all__ = [
    "DEFAULT_CUTOFFS",
    "DEFAULT_ALPHA",
    "SubtopicJudgments",
    "MetricReport",
    "alpha_ndcg",
    "ia_precision",
    "utility_ratio",
]

DEFAULT_CUTOFFS = (5, 10, 20, 100, 1000)
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class SubtopicJudgments:
    """Binary relevance per subtopic of one topic, with subtopic weights summing to 1."""

    topic_id: str
    subtopics: tuple[tuple[str, float, frozenset[str]], ...]

    def __post_init__(self):
        subs = tuple((str(s), float(w), frozenset(docs)) for s, w, docs in self.subtopics)
        ids = [s for s, _, _ in subs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"topic {self.topic_id}: duplicate subtopic id")
        if any(w <= 0 for _, w, _ in subs):
            raise ValueError(f"topic {self.topic_id}: subtopic weights must be positive")
        if subs and abs(math.fsum(w for _, w, _ in subs) - 1.0) > 1e-9:
            raise ValueError(f"topic {self.topic_id}: subtopic weights must sum to 1")
        object.__setattr__(self, "subtopics", subs)

    @classmethod
    def uniform(cls, topic_id: str, relevant: Mapping[str, Iterable[str]]) -> SubtopicJudgments:
        n = len(relevant)
        return cls(topic_id, tuple((s, 1.0 / n, frozenset(docs)) for s, docs in relevant.items()))

    def __len__(self) -> int:
        return len(self.subtopics)

    def relevant_docs(self) -> set[str]:
        out: set[str] = set()
        for _, _, docs in self.subtopics:
            out |= docs
        return out


@dataclass(frozen=True)
class MetricReport:
    metric: str
    values: dict[int, float]
    params: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, cutoff: int) -> float:
        return self.values[cutoff]


def _check(ranking: Sequence[str], judg: SubtopicJudgments, cutoffs: Sequence[int]):
    if not judg.subtopics:
        raise ValueError(f"topic {judg.topic_id}: no subtopic judgments, metric undefined")
    if len(set(ranking)) != len(ranking):
        raise ValueError("ranking contains duplicate documents")
    if any(c < 1 for c in cutoffs):
        raise ValueError("cutoffs must be positive")


def _gains(ranking: Sequence[str], subtopic_docs: list[frozenset[str]], alpha: float) -> list[float]:
    seen = [0] * len(subtopic_docs)
    out = []
    for d in ranking:
        g = 0.0
        for t, docs in enumerate(subtopic_docs):
            if d in docs:
                g += (1.0 - alpha) ** seen[t]
                seen[t] += 1
        out.append(g)
    return out


def _greedy_ideal(subtopic_docs: list[frozenset[str]], alpha: float, depth: int) -> list[float]:
    pool = sorted(set().union(*subtopic_docs))
    membership = {d: [t for t, docs in enumerate(subtopic_docs) if d in docs] for d in pool}
    seen = [0] * len(subtopic_docs)
    gains = []
    while pool and len(gains) < depth:
        best_doc, best_gain = None, -1.0
        for d in pool:
            g = sum((1.0 - alpha) ** seen[t] for t in membership[d])
            if g > best_gain:
                best_doc, best_gain = d, g
        pool.remove(best_doc)
        for t in membership[best_doc]:
            seen[t] += 1
        gains.append(best_gain)
    return gains


def _dcg(gains: Sequence[float], cutoff: int) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(gains[:cutoff]))


def alpha_ndcg(
    ranking: Sequence[str],
    judg: SubtopicJudgments,
    alpha: float = DEFAULT_ALPHA,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
) -> MetricReport:
    """alpha-NDCG at each cutoff.

    The ideal ordering is built greedily (exact ordering is NP-hard), so a
    ranking can in rare cases beat it; values are capped at 1.
    """
    _check(ranking, judg, cutoffs)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    docs = [d for _, _, d in judg.subtopics]
    depth = max(cutoffs)
    gains = _gains(list(ranking[:depth]), docs, alpha)
    ideal = _greedy_ideal(docs, alpha, depth)
    values = {}
    for c in cutoffs:
        idcg = _dcg(ideal, c)
        values[c] = min(1.0, _dcg(gains, c) / idcg) if idcg > 0 else 0.0
    return MetricReport("alpha-ndcg", values, {"alpha": alpha})


def ia_precision(
    ranking: Sequence[str],
    judg: SubtopicJudgments,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
) -> MetricReport:
    """Intent-aware precision: subtopic-weighted precision at each cutoff."""
    _check(ranking, judg, cutoffs)
    values = {}
    for c in cutoffs:
        top = ranking[:c]
        values[c] = sum(w * sum(1 for d in top if d in docs) / c for _, w, docs in judg.subtopics)
    return MetricReport("ia-p", values)


def utility_ratio(
    diversified: DiversifiedList | Sequence[str],
    original: ResultList | Sequence[str],
    inp: DiversificationInput,
    k: int,
) -> float:
    """Summed overall utility of the diversified top-k over that of the original top-k."""
    div_ids = list(diversified.selected if isinstance(diversified, DiversifiedList) else diversified)
    orig_ids = list(original.doc_ids if isinstance(original, ResultList) else original)
    if len(div_ids) < k or len(orig_ids) < k:
        raise ValueError(f"both lists need at least k={k} entries")
    num = math.fsum(overall_utility(d, inp) for d in div_ids[:k])
    den = math.fsum(overall_utility(d, inp) for d in orig_ids[:k])
    if den == 0.0:
        raise ZeroDivisionError("original top-k has zero overall utility; ratio undefined")
    return num / den
