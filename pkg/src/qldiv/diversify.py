"""Re-ranking a candidate list so that mined specializations are covered.

Three selectors share one input bundle:

* ``optselect`` maximizes the summed overall utility of the selected set
  while reserving ``floor(k * P(q'|q))`` slots for documents useful to each
  specialization ``q'``.  Candidates are bounded per specialization and
  globally, so the work is linear in the number of candidates.
* ``iaselect`` greedily maximizes the weighted probability that at least
  one selected document satisfies each specialization.
* ``xquad`` greedily mixes relevance with the still-uncovered mass of each
  specialization.

Ties are always broken towards the smaller original rank.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from qldiv.corpus import ResultList, UtilityMatrix

__all__ = [
    "DEFAULT_LAMBDA",
    "DEFAULT_THRESHOLD",
    "DiversificationInput",
    "DiversifiedList",
    "relevance_from_scores",
    "quota",
    "overall_utility",
    "overall_utilities",
    "optselect",
    "iaselect",
    "xquad",
    "ALGORITHMS",
]

DEFAULT_LAMBDA = 0.15
DEFAULT_THRESHOLD = 0.05

# Guards floor(k * p) against probabilities such as 0.3 stored as 0.29999...
_QUOTA_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class DiversificationInput:
    """Everything a selector needs for one query.

    ``relevance`` maps each candidate to P(d|q) in [0, 1];
    ``specializations`` lists ``(q', P(q'|q))`` pairs summing to 1;
    ``utilities`` holds the thresholded normalized utility of every
    candidate for every specialization.
    """

    query: str
    candidates: ResultList
    relevance: Mapping[str, float]
    specializations: Sequence[tuple[str, float]]
    utilities: UtilityMatrix
    k: int
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        specs = tuple((str(q), float(p)) for q, p in self.specializations)
        object.__setattr__(self, "specializations", specs)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        names = [q for q, _ in specs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate specialization")
        probs = np.array([p for _, p in specs], dtype=np.float64)
        if specs:
            if probs.min() < 0.0 or probs.max() > 1.0:
                raise ValueError("specialization probabilities must lie in [0, 1]")
            if abs(math.fsum(probs) - 1.0) > 1e-9:
                raise ValueError(f"specialization probabilities sum to {math.fsum(probs)}, not 1")
        doc_ids = self.candidates.doc_ids
        try:
            rel = np.array([self.relevance[d] for d in doc_ids], dtype=np.float64)
        except KeyError as exc:
            raise ValueError(f"candidate {exc.args[0]!r} has no relevance value") from None
        if rel.size and (rel.min() < 0.0 or rel.max() > 1.0):
            raise ValueError("relevance values must lie in [0, 1]")
        try:
            util = np.ascontiguousarray(self.utilities.aligned(doc_ids, names))
        except KeyError as exc:
            raise ValueError(f"{exc.args[0]!r} missing from the utility matrix") from None
        rel.flags.writeable = False
        probs.flags.writeable = False
        util.flags.writeable = False
        object.__setattr__(self, "_rel", rel)
        object.__setattr__(self, "_probs", probs)
        object.__setattr__(self, "_util", util)
        object.__setattr__(self, "_pos", {d: i for i, d in enumerate(doc_ids)})

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return self.candidates.doc_ids

    @property
    def spec_names(self) -> list[str]:
        return [q for q, _ in self.specializations]

    @property
    def relevance_array(self) -> np.ndarray:
        return self._rel

    @property
    def spec_probs(self) -> np.ndarray:
        return self._probs

    @property
    def utility_array(self) -> np.ndarray:
        """Utilities with rows in candidate order and columns in specialization order."""
        return self._util

    def position(self, doc_id: str) -> int:
        try:
            return self._pos[doc_id]
        except KeyError:
            raise KeyError(f"{doc_id!r} is not a candidate for {self.query!r}") from None


@dataclass(frozen=True)
class DiversifiedList:
    selected: tuple[str, ...]
    objective: float
    coverage: dict[str, int] = field(default_factory=dict)
    scores: tuple[float, ...] = ()
    algorithm: str = ""

    def __len__(self) -> int:
        return len(self.selected)

    def to_result_list(self, query_id: str) -> ResultList:
        """Result list whose scores only encode the selected order."""
        return ResultList.from_ids(query_id, self.selected)


def relevance_from_scores(results: ResultList) -> dict[str, float]:
    """Map retrieval scores to P(d|q) by dividing by the top score.

    Lists holding non-positive scores are min-max rescaled instead; a list
    whose scores are all equal maps every document to 1.
    """
    if len(results) == 0:
        return {}
    scores = np.array(results.scores, dtype=np.float64)
    hi, lo = scores.max(), scores.min()
    if hi == lo:
        rel = np.ones_like(scores)
    elif lo > 0.0:
        rel = scores / hi
    else:
        rel = (scores - lo) / (hi - lo)
    return dict(zip(results.doc_ids, rel.tolist()))


def quota(k: int, p: float) -> int:
    """Minimum number of selected documents owed to a specialization of probability ``p``."""
    return int(math.floor(k * p + _QUOTA_EPS))


def overall_utility(d: str, inp: DiversificationInput) -> float:
    """Relevance plus probability-weighted utility of ``d``, summed over specializations."""
    i = inp.position(d)
    m = len(inp.specializations)
    weighted = math.fsum(float(p) * float(u) for p, u in zip(inp.spec_probs, inp.utility_array[i]))
    return m * (1.0 - inp.lam) * float(inp.relevance_array[i]) + inp.lam * weighted


def overall_utilities(inp: DiversificationInput) -> np.ndarray:
    """Vectorized ``overall_utility`` over all candidates, in candidate order."""
    m = len(inp.specializations)
    u = m * (1.0 - inp.lam) * inp.relevance_array
    if m:
        u = u + inp.lam * (inp.utility_array @ inp.spec_probs)
    return u


def _by_relevance(inp: DiversificationInput, name: str) -> DiversifiedList:
    rel = inp.relevance_array
    order = np.argsort(-rel, kind="stable")[: min(inp.k, inp.n)]
    ids = inp.doc_ids
    return DiversifiedList(
        selected=tuple(ids[i] for i in order),
        objective=0.0,
        coverage={},
        scores=tuple(rel[order].tolist()),
        algorithm=name,
    )


def _top_positions(keys: np.ndarray, capacity: int) -> np.ndarray:
    """Positions of the ``capacity`` largest keys, ordered by key desc then position.

    Same contents as a max-heap bounded to ``capacity`` fed in position
    order, found by partitioning instead of per-item pushes.
    """
    n = keys.shape[0]
    if capacity <= 0 or n == 0:
        return np.empty(0, dtype=np.intp)
    if capacity >= n:
        chosen = np.arange(n)
    else:
        part = np.argpartition(-keys, capacity - 1)[:capacity]
        thr = keys[part].min()
        above = np.flatnonzero(keys > thr)
        at = np.flatnonzero(keys == thr)[: capacity - above.shape[0]]
        chosen = np.concatenate([above, at])
    return chosen[np.lexsort((chosen, -keys[chosen]))]


class _QuotaMatching:
    """Assignment of accepted documents to specialization quotas.

    Documents are grouped by their *type*, the bitmask of specializations
    they are useful for; documents of one type are interchangeable, so the
    assignment only tracks per-type counts.  ``add`` extends the assignment
    along an augmenting path when one exists.
    """

    def __init__(self, quotas: Sequence[int]):
        self.spare = list(quotas)
        self.held: list[dict[int, int]] = [{} for _ in quotas]
        self._members: dict[int, tuple[int, ...]] = {}

    def members(self, t: int) -> tuple[int, ...]:
        m = self._members.get(t)
        if m is None:
            m = self._members[t] = tuple(j for j in range(len(self.spare)) if t >> j & 1)
        return m

    def _move(self, t: int, src: int | None, dst: int):
        if src is not None:
            left = self.held[src][t] - 1
            if left:
                self.held[src][t] = left
            else:
                del self.held[src][t]
        self.held[dst][t] = self.held[dst].get(t, 0) + 1

    def add(self, t: int) -> bool:
        starts = self.members(t)
        for j in starts:
            if self.spare[j] > 0:
                self.spare[j] -= 1
                self._move(t, None, j)
                return True
        # BFS over specializations: an edge a -> b moves a document held by a to b.
        parent: dict[int, tuple[int, int] | None] = {j: None for j in starts}
        queue = deque(starts)
        while queue:
            a = queue.popleft()
            for held_type in list(self.held[a]):
                for b in self.members(held_type):
                    if b in parent:
                        continue
                    parent[b] = (a, held_type)
                    if self.spare[b] > 0:
                        self.spare[b] -= 1
                        node = b
                        while parent[node] is not None:
                            prev, moved = parent[node]
                            self._move(moved, prev, node)
                            node = prev
                        self._move(t, None, node)
                        return True
                    queue.append(b)
        return False


def _effective_specs(inp: DiversificationInput) -> tuple[list[int], np.ndarray]:
    """Column indices and renormalized probabilities of the (at most k) specializations used."""
    probs = inp.spec_probs
    cols = list(range(len(probs)))
    if len(cols) > inp.k:
        cols = sorted(cols, key=lambda j: (-probs[j], j))[: inp.k]
        cols.sort()
        kept = probs[cols]
        return cols, kept / kept.sum()
    return cols, probs


def optselect(inp: DiversificationInput) -> DiversifiedList:
    """Maximum summed overall utility under proportional specialization coverage.

    Every specialization ``q'`` is owed ``floor(k * P(q'|q))`` selected
    documents with positive utility for it, each document paying at most one
    specialization's quota (quotas that cannot all be met are met as far as
    the candidates allow).  The feasible sets are the bases of a matroid, so
    scanning candidates by decreasing overall utility and keeping each one
    that either extends the quota assignment or fits a free slot is exact.
    The scan only needs the top ``k`` candidates overall plus, for each
    specialization, its top ``min(k, sum of quotas)`` useful candidates.
    """
    if not inp.specializations:
        return _by_relevance(inp, "optselect")
    cols, probs = _effective_specs(inp)
    util = inp.utility_array[:, cols]
    m = len(cols)
    u = m * (1.0 - inp.lam) * inp.relevance_array + inp.lam * (util @ probs)
    size = min(inp.k, inp.n)

    quotas = [quota(inp.k, p) for p in probs]
    useful = util > 0.0
    pools = [_top_positions(u, size)]
    cap = min(size, sum(quotas))
    for j in range(m):
        if quotas[j] == 0:
            continue
        idx = np.flatnonzero(useful[:, j])
        pools.append(idx[_top_positions(u[idx], cap)])
    cand = np.unique(np.concatenate(pools))
    cand = cand[np.lexsort((cand, -u[cand]))]
    types = (useful[cand] @ (1 << np.arange(m))).tolist() if m else [0] * len(cand)
    cand = cand.tolist()

    # Largest number of quota slots the candidates can fill.
    matching = _QuotaMatching(quotas)
    blocked: set[int] = {0}
    reachable = 0
    total = sum(quotas)
    for t in types:
        if reachable == total:
            break
        if t in blocked:
            continue
        if matching.add(t):
            reachable += 1
        else:
            blocked.add(t)

    free = size - reachable
    matching = _QuotaMatching(quotas)
    unmatchable = {0}
    blocked = set()
    chosen: list[int] = []
    for i, t in zip(cand, types):
        if len(chosen) == size:
            break
        if t in blocked:
            continue
        if t not in unmatchable and matching.add(t):
            chosen.append(i)
            continue
        # Once a type cannot extend the assignment it never will again.
        unmatchable.add(t)
        if free > 0:
            free -= 1
            chosen.append(i)
        else:
            blocked.add(t)

    ids = inp.doc_ids
    names = inp.spec_names
    sel = np.array(chosen, dtype=np.intp)
    return DiversifiedList(
        selected=tuple(ids[i] for i in chosen),
        objective=math.fsum(u[sel].tolist()),
        coverage={names[c]: int(useful[sel, j].sum()) for j, c in enumerate(cols)},
        scores=tuple(u[sel].tolist()),
        algorithm="optselect",
    )


def _greedy(inp: DiversificationInput, relevance_weight: float, name: str) -> DiversifiedList:
    """Shared loop of the two greedy selectors.

    At every step a candidate scores
    ``relevance_weight * P(d|q) + w * sum_q' P(q'|q) U(d|q') prod_S (1 - U(s|q'))``
    where ``w`` is lambda for xQuAD and 1 for IASelect.
    """
    util = inp.utility_array
    probs = inp.spec_probs
    mix = 1.0 if name == "iaselect" else inp.lam
    base = relevance_weight * inp.relevance_array if relevance_weight else None
    cover = np.ones(len(probs))
    taken: list[int] = []
    gains: list[float] = []
    for _ in range(min(inp.k, inp.n)):
        scores = util @ (probs * cover)
        if mix != 1.0:
            scores *= mix
        if base is not None:
            scores += base
        if taken:
            scores[taken] = -np.inf
        i = int(np.argmax(scores))
        taken.append(i)
        gains.append(float(scores[i]))
        cover *= 1.0 - util[i]
    ids = inp.doc_ids
    names = inp.spec_names
    sel = np.array(taken, dtype=np.intp)
    if name == "iaselect":
        objective = math.fsum((probs * (1.0 - cover)).tolist())
    else:
        objective = math.fsum(gains)
    return DiversifiedList(
        selected=tuple(ids[i] for i in taken),
        objective=objective,
        coverage={q: int((util[sel, j] > 0).sum()) for j, q in enumerate(names)},
        scores=tuple(gains),
        algorithm=name,
    )


def iaselect(inp: DiversificationInput) -> DiversifiedList:
    """Greedy weighted-coverage selection; ``objective`` is the final P(S|q)."""
    if not inp.specializations:
        return _by_relevance(inp, "iaselect")
    return _greedy(inp, 0.0, "iaselect")


def xquad(inp: DiversificationInput) -> DiversifiedList:
    """Greedy relevance/novelty mixture; ``objective`` sums the per-step scores."""
    if not inp.specializations:
        return _by_relevance(inp, "xquad")
    return _greedy(inp, 1.0 - inp.lam, "xquad")


ALGORITHMS: dict[str, Callable[[DiversificationInput], DiversifiedList]] = {
    "optselect": optselect,
    "iaselect": iaselect,
    "xquad": xquad,
}
