"""Document surrogates, cosine distance and the rank-discounted utility.

A candidate document is judged useful for a specialization when it is
similar to the documents that the engine ranks highly for that
specialization.  Similarity is cosine over sparse term-frequency vectors
built from snippets; the raw utility is discounted by rank and normalized
by the harmonic number of the list length so that it lies in [0, 1].
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "InconsistentCorpusError",
    "TokenizerOptions",
    "DocVector",
    "ResultList",
    "UtilityMatrix",
    "vectorize",
    "tfidf_reweight",
    "distance",
    "utility",
    "harmonic",
    "normalized_utility",
    "build_utility_matrix",
    "read_snippets",
]

# A compact English stopword list; enough for snippet surrogates.
ENGLISH_STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing
    down during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more most
    my myself no nor not now of off on once only or other our ours ourselves out
    over own same she should so some such than that the their theirs them
    themselves then there these they this those through to too under until up
    very was we were what when where which while who whom why will with would
    you your yours yourself yourselves
    """.split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class InconsistentCorpusError(KeyError):
    """A result list names a document that has no vector."""


@dataclass(frozen=True)
class TokenizerOptions:
    lowercase: bool = True
    remove_stopwords: bool = False
    stopwords: frozenset[str] = ENGLISH_STOPWORDS
    stemmer: Callable[[str], str] | None = None


@dataclass(frozen=True)
class DocVector:
    """Sparse non-negative term-weight vector with a cached Euclidean norm."""

    entries: Mapping[str, float] = field(default_factory=dict)
    norm: float = field(init=False)

    def __post_init__(self):
        entries = dict(self.entries)
        for term, weight in entries.items():
            if not weight >= 0.0:
                raise ValueError(f"negative weight {weight!r} for term {term!r}")
        entries = {t: float(w) for t, w in entries.items() if w > 0.0}
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "norm", math.hypot(*entries.values()))

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def dot(self, other: DocVector) -> float:
        a, b = self.entries, other.entries
        if len(a) > len(b):
            a, b = b, a
        return math.fsum(w * b[t] for t, w in a.items() if t in b)


@dataclass(frozen=True)
class ResultList:
    """Rank-ordered ``(doc_id, score)`` pairs for one query; ranks start at 1."""

    query_id: str
    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        items = tuple((str(d), float(s)) for d, s in self.items)
        object.__setattr__(self, "items", items)
        positions: dict[str, int] = {}
        prev = math.inf
        for i, (doc_id, score) in enumerate(items):
            if doc_id in positions:
                raise ValueError(f"duplicate doc-id {doc_id!r} in result list {self.query_id!r}")
            if score > prev:
                raise ValueError(
                    f"scores must be non-increasing by rank in {self.query_id!r} "
                    f"(rank {i + 1}: {score} > {prev})"
                )
            positions[doc_id] = i
            prev = score
        object.__setattr__(self, "_positions", positions)
        object.__setattr__(self, "_ids", tuple(d for d, _ in items))

    @classmethod
    def from_ids(cls, query_id: str, doc_ids: Iterable[str]) -> ResultList:
        """Build a list from ids alone; scores descend so the given order is kept."""
        ids = list(doc_ids)
        return cls(query_id, tuple((d, float(len(ids) - i)) for i, d in enumerate(ids)))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.items)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._positions

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.items]

    def rank(self, doc_id: str) -> int:
        return self._positions[doc_id] + 1

    def top(self, k: int) -> ResultList:
        return ResultList(self.query_id, self.items[:k])


@dataclass(frozen=True)
class UtilityMatrix:
    """Thresholded normalized utilities, one row per candidate, one column per specialization."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray
    threshold: float = 0.0

    def __post_init__(self):
        rows = tuple(self.rows)
        cols = tuple(self.cols)
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(len(rows), len(cols))
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("utility values must lie in [0, 1]")
        if values.size and np.any((values > 0.0) & (values < self.threshold)):
            raise ValueError(f"utility values must be 0 or >= threshold {self.threshold}")
        values.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_row_index", {d: i for i, d in enumerate(rows)})
        object.__setattr__(self, "_col_index", {q: j for j, q in enumerate(cols)})
        if len(self._row_index) != len(rows) or len(self._col_index) != len(cols):
            raise ValueError("duplicate row or column label in utility matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def has_row(self, doc_id: str) -> bool:
        return doc_id in self._row_index

    def row_index(self, doc_id: str) -> int:
        return self._row_index[doc_id]

    def col_index(self, spec: str) -> int:
        return self._col_index[spec]

    def get(self, doc_id: str, spec: str) -> float:
        return float(self.values[self._row_index[doc_id], self._col_index[spec]])

    def aligned(self, doc_ids: Sequence[str], specs: Sequence[str]) -> np.ndarray:
        """Sub-matrix with rows and columns in the requested order."""
        ri = [self._row_index[d] for d in doc_ids]
        ci = [self._col_index[q] for q in specs]
        return self.values[np.ix_(ri, ci)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UtilityMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.threshold == other.threshold
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def tokenize(text: str, options: TokenizerOptions = TokenizerOptions()) -> list[str]:
    if options.lowercase:
        text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    if options.remove_stopwords:
        tokens = [t for t in tokens if t not in options.stopwords]
    if options.stemmer is not None:
        tokens = [options.stemmer(t) for t in tokens]
    return tokens


def vectorize(text: str, options: TokenizerOptions = TokenizerOptions()) -> DocVector:
    """Raw term-frequency vector of ``text``."""
    return DocVector(Counter(tokenize(text, options)))


def tfidf_reweight(vectors: Mapping[str, DocVector]) -> dict[str, DocVector]:
    """Reweight tf vectors by ``log(N / df)`` computed over ``vectors`` itself."""
    n = len(vectors)
    df: Counter[str] = Counter()
    for v in vectors.values():
        df.update(v.entries.keys())
    return {
        doc_id: DocVector({t: w * math.log(n / df[t]) for t, w in v.entries.items()})
        for doc_id, v in vectors.items()
    }


def distance(a: DocVector, b: DocVector) -> float:
    """``1 - cosine(a, b)``; 1 when either vector is empty."""
    if not a or not b:
        return 1.0
    if a.entries == b.entries:
        return 0.0
    # scale before multiplying so tiny weights cannot underflow the product
    x, y = a.entries, b.entries
    if len(x) > len(y):
        x, y, a, b = y, x, b, a
    cos = math.fsum((w / a.norm) * (y[t] / b.norm) for t, w in x.items() if t in y)
    return min(1.0, max(0.0, 1.0 - cos))


def _vector_for(doc_id: str, doc_vectors: Mapping[str, DocVector]) -> DocVector:
    try:
        return doc_vectors[doc_id]
    except KeyError:
        raise InconsistentCorpusError(f"no document vector for doc-id {doc_id!r}") from None


def utility(d: DocVector, spec_results: ResultList, doc_vectors: Mapping[str, DocVector]) -> float:
    """Sum of ``(1 - distance(d, d')) / rank(d')`` over the specialization's results."""
    total = 0.0
    for rank, (doc_id, _) in enumerate(spec_results.items, start=1):
        total += (1.0 - distance(d, _vector_for(doc_id, doc_vectors))) / rank
    return total


def harmonic(n: int) -> float:
    """The n-th harmonic number, summed in ascending order of ``i``."""
    if n < 1:
        raise ValueError("harmonic number is undefined for n < 1")
    total = 0.0
    for i in range(1, n + 1):
        total += 1.0 / i
    return total


def normalized_utility(
    d: DocVector,
    spec_results: ResultList,
    doc_vectors: Mapping[str, DocVector],
    c: float = 0.0,
) -> float:
    """Utility scaled into [0, 1]; values below the threshold ``c`` become 0."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"threshold c must lie in [0, 1], got {c}")
    if len(spec_results) == 0:
        raise ValueError("normalized utility is undefined for an empty result list")
    u = min(1.0, utility(d, spec_results, doc_vectors) / harmonic(len(spec_results)))
    return 0.0 if u < c else u


def build_utility_matrix(
    candidates: ResultList,
    spec_lists: Mapping[str, ResultList],
    doc_vectors: Mapping[str, DocVector],
    c: float = 0.0,
) -> UtilityMatrix:
    rows = tuple(candidates.doc_ids)
    cols = tuple(spec_lists)
    values = np.zeros((len(rows), len(cols)))
    for i, doc_id in enumerate(rows):
        vec = _vector_for(doc_id, doc_vectors)
        for j, spec in enumerate(cols):
            values[i, j] = normalized_utility(vec, spec_lists[spec], doc_vectors, c)
    return UtilityMatrix(rows, cols, values, threshold=c)


def read_snippets(
    path: str | Path,
    options: TokenizerOptions = TokenizerOptions(),
) -> dict[str, DocVector]:
    """Load a ``doc-id<TAB>snippet`` file into term vectors."""
    vectors: dict[str, DocVector] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            doc_id, sep, text = line.partition("\t")
            if not sep or not doc_id:
                raise ValueError(f"{path}:{lineno}: expected 'doc-id<TAB>snippet'")
            vectors[doc_id] = vectorize(text, options)
    return vectors
