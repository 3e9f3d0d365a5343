"""Synthetic instances and a timing harness for the three selectors."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from qldiv.corpus import ResultList, UtilityMatrix
from qldiv.diversify import ALGORITHMS, DEFAULT_LAMBDA, DiversificationInput

__all__ = [
    "BenchConfig",
    "TimingRecord",
    "CSV_HEADER",
    "gen_instance",
    "run_grid",
    "write_csv",
    "read_csv",
    "estimate_footprint",
    "ratio",
]

CSV_HEADER = ("algorithm", "n", "k", "reps", "median_us")


@dataclass(frozen=True)
class BenchConfig:
    n_grid: tuple[int, ...] = (1000, 10000, 100000)
    k_grid: tuple[int, ...] = (10, 50, 100, 500, 1000)
    num_specs: int = 3
    seed: int = 0
    repetitions: int = 5
    sparsity: float = 0.5
    lam: float = DEFAULT_LAMBDA
    algorithms: tuple[str, ...] = tuple(ALGORITHMS)

    def __post_init__(self):
        if not self.n_grid or not self.k_grid:
            raise ValueError("empty grid")
        if min(self.n_grid) < 1 or min(self.k_grid) < 1:
            raise ValueError("grid values must be >= 1")
        too_big = [k for k in self.k_grid if k > max(self.n_grid)]
        if too_big:
            raise ValueError(f"k={too_big[0]} exceeds every candidate-set size n in {list(self.n_grid)}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.num_specs < 0:
            raise ValueError("num_specs must be >= 0")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithm(s): {sorted(unknown)}")

    def cells(self) -> list[tuple[int, int]]:
        """(n, k) pairs with k <= n; k == n is allowed."""
        return [(n, k) for n in self.n_grid for k in self.k_grid if k <= n]


@dataclass(frozen=True)
class TimingRecord:
    algorithm: str
    n: int
    k: int
    median_us: float
    repetitions: int


def gen_instance(
    seed: int,
    n: int,
    num_specs: int,
    k: int,
    sparsity: float = 0.5,
    lam: float = DEFAULT_LAMBDA,
) -> DiversificationInput:
    """Random but reproducible diversification input.

    Retrieval scores are sorted descending, specialization probabilities are
    a flat Dirichlet draw, and each utility is zeroed with probability
    ``sparsity`` (otherwise uniform on (0, 1)).
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if num_specs < 0:
        raise ValueError("num_specs must be >= 0")
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    scores = np.sort(rng.uniform(0.0, 1.0, size=n))[::-1]
    scores[0] = max(scores[0], 1e-12)
    ids = [f"d{i}" for i in range(n)]
    probs = rng.dirichlet(np.ones(num_specs)) if num_specs else np.empty(0)
    if num_specs:
        probs = probs / math.fsum(probs)
    util = rng.uniform(0.0, 1.0, size=(n, num_specs))
    util[rng.random((n, num_specs)) < sparsity] = 0.0
    specs = [(f"spec{j}", float(p)) for j, p in enumerate(probs)]
    rel = scores / scores[0]
    return DiversificationInput(
        query="synthetic",
        candidates=ResultList("synthetic", tuple(zip(ids, scores.tolist()))),
        relevance=dict(zip(ids, rel.tolist())),
        specializations=specs,
        utilities=UtilityMatrix(tuple(ids), tuple(q for q, _ in specs), util),
        k=k,
        lam=lam,
    )


def _median_us(fn: Callable, inp: DiversificationInput, reps: int) -> float:
    fn(inp)  # warm-up
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn(inp)
        samples.append(time.perf_counter_ns() - t0)
    return max(statistics.median(samples) / 1000.0, 1e-3)


def run_grid(
    config: BenchConfig,
    progress: Callable[[TimingRecord], None] | None = None,
) -> list[TimingRecord]:
    """Median wall time of every algorithm on every (n, k) cell.

    All algorithms in a cell time the same input object; generating it is
    not timed.  Records come back ordered by (algorithm, n, k).
    """
    records = []
    for n, k in config.cells():
        inp = gen_instance(config.seed, n, config.num_specs, k, config.sparsity, config.lam)
        for name in config.algorithms:
            rec = TimingRecord(name, n, k, _median_us(ALGORITHMS[name], inp, config.repetitions), config.repetitions)
            records.append(rec)
            if progress is not None:
                progress(rec)
    records.sort(key=lambda r: (r.algorithm, r.n, r.k))
    return records


def write_csv(records: Iterable[TimingRecord], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.algorithm, r.n, r.k, r.repetitions, f"{r.median_us:.3f}"])


def read_csv(fh: TextIO) -> list[TimingRecord]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"expected CSV header {','.join(CSV_HEADER)}")
    return [
        TimingRecord(row["algorithm"], int(row["n"]), int(row["k"]), float(row["median_us"]), int(row["reps"]))
        for row in reader
    ]


def estimate_footprint(
    num_queries: int,
    max_specs: int,
    per_spec_results: int,
    avg_doc_bytes: float,
) -> float:
    """Upper bound on bytes needed to keep every specialization's result surrogates."""
    args = (num_queries, max_specs, per_spec_results, avg_doc_bytes)
    if any(a < 0 for a in args):
        raise ValueError("footprint inputs must be non-negative")
    return num_queries * max_specs * per_spec_results * avg_doc_bytes


def ratio(records: Sequence[TimingRecord], num: tuple[str, int, int], den: tuple[str, int, int]) -> float:
    """Time of the ``(algorithm, n, k)`` cell ``num`` over that of ``den``."""
    table = {(r.algorithm, r.n, r.k): r.median_us for r in records}
    return table[num] / table[den]
