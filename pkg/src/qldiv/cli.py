"""Command line entry point: ``qldiv {mine,diversify,eval,bench}``."""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence, TextIO

from qldiv import bench, logmining, trec
from qldiv.corpus import (
    InconsistentCorpusError,
    ResultList,
    TokenizerOptions,
    build_utility_matrix,
    read_snippets,
    tfidf_reweight,
)
from qldiv.diversify import (
    ALGORITHMS,
    DEFAULT_LAMBDA,
    DEFAULT_THRESHOLD,
    DiversificationInput,
    relevance_from_scores,
)
from qldiv.metrics import DEFAULT_ALPHA, DEFAULT_CUTOFFS, alpha_ndcg, ia_precision

log = logging.getLogger("qldiv")

DEFAULT_SPEC_DEPTH = 20


class CliError(Exception):
    """Fatal, user-facing error: message goes to stderr, exit status 1."""


def _cutoffs(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid cutoff list {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive integers")
    return values


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _unit(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 1]")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return value


@contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _readable(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} {path!r} does not exist or is not a file")
    return p


def cmd_mine(args: argparse.Namespace) -> int:
    path = _readable(args.log, "query log")
    stats = logmining.ParseStats()
    records = logmining.parse_log(path, args.format, stats)
    sessions = logmining.segment_sessions(records, args.session_gap)
    model = logmining.build_model(sessions, s=args.s, source=path.name)
    if stats.records == 0:
        log.warning("%s: no usable records; writing an empty model", path)
    logmining.save_model(model, args.out)
    hits = logmining.followup_hits(model, sessions)
    print(f"records\t{stats.records}")
    print(f"skipped_lines\t{stats.skipped}")
    print(f"sessions\t{len(sessions)}")
    print(f"distinct_queries\t{len(logmining.query_frequencies(sessions))}")
    print(f"ambiguous_queries\t{len(model)}")
    print(f"sessions_with_mined_followup\t{hits}")
    return 0


def _spec_lists(
    specs: Sequence[tuple[str, float]],
    spec_runs: dict[str, ResultList],
    depth: int,
) -> tuple[list[tuple[str, float]], dict[str, ResultList]]:
    kept, lists = [], {}
    for q2, p in specs:
        results = spec_runs.get(q2)
        if results is None or len(results) == 0:
            log.warning("no result list for specialization %r; dropping it", q2)
            continue
        kept.append((q2, p))
        lists[q2] = results.top(depth)
    total = sum(p for _, p in kept)
    return [(q2, p / total) for q2, p in kept], lists


def cmd_diversify(args: argparse.Namespace) -> int:
    try:
        runs = trec.read_run(_readable(args.run, "run file"))
        raw = trec.read_run_lines(args.run)
        spec_runs = {
            logmining.normalize_query(q): r for q, r in trec.read_run(_readable(args.spec_runs, "specialization run file")).items()
        }
    except trec.RunFormatError as exc:
        raise CliError(str(exc)) from None
    try:
        model = logmining.load_model(_readable(args.model, "model file"))
    except logmining.ModelFormatError as exc:
        raise CliError(str(exc)) from None
    topics = trec.read_topics(_readable(args.topics, "topics file")) if args.topics else {}
    vectors = read_snippets(
        _readable(args.corpus, "snippet corpus"),
        TokenizerOptions(remove_stopwords=args.stopwords),
    )
    if args.weighting == "tfidf":
        vectors = tfidf_reweight(vectors)
    select = ALGORITHMS[args.algorithm]
    tag = args.tag or f"qldiv-{args.algorithm}"

    out_lines: list[str] = []
    diversified = 0
    for qid, results in runs.items():
        query = logmining.normalize_query(topics.get(qid, qid))
        specs, lists = _spec_lists(model.get(query), spec_runs, args.spec_depth)
        if len(specs) < 2:
            out_lines.extend(raw[qid][: args.k])
            continue
        try:
            matrix = build_utility_matrix(results, lists, vectors, args.c)
        except InconsistentCorpusError as exc:
            raise CliError(f"query {qid}: {exc.args[0]}") from None
        inp = DiversificationInput(
            query=query,
            candidates=results,
            relevance=relevance_from_scores(results),
            specializations=specs,
            utilities=matrix,
            k=args.k,
            lam=args.lam,
        )
        out_lines.extend(trec.format_run(select(inp).to_result_list(qid), tag))
        diversified += 1
    with _output(args.out) as fh:
        for line in out_lines:
            fh.write(line + "\n")
    log.info("diversified %d of %d queries with %s", diversified, len(runs), args.algorithm)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        runs = trec.read_run(_readable(args.run, "run file"))
        qrels = trec.read_qrels(_readable(args.qrels, "qrels file"))
    except trec.RunFormatError as exc:
        raise CliError(str(exc)) from None
    missing = [q for q in runs if q not in qrels]
    for q in missing:
        log.warning("topic %s has no diversity judgments; excluded", q)
    topics = [q for q in runs if q in qrels]
    if not topics:
        raise CliError("no topic of the run has judgments in the qrels")
    cutoffs = args.cutoffs
    header = ["topic"] + [f"alpha-ndcg@{c}" for c in cutoffs] + [f"ia-p@{c}" for c in cutoffs]
    rows = []
    for q in topics:
        ranking = list(runs[q].doc_ids)
        a = alpha_ndcg(ranking, qrels[q], args.alpha, cutoffs)
        p = ia_precision(ranking, qrels[q], cutoffs)
        rows.append([a[c] for c in cutoffs] + [p[c] for c in cutoffs])
    means = [sum(col) / len(rows) for col in zip(*rows)]
    with _output(args.out) as fh:
        fh.write(",".join(header) + "\n")
        for q, row in zip(topics, rows):
            fh.write(",".join([q] + [f"{v:.6f}" for v in row]) + "\n")
        fh.write(",".join(["amean"] + [f"{v:.6f}" for v in means]) + "\n")
    if args.plot:
        from qldiv.plotting import plot_metrics

        nc = len(cutoffs)
        plot_metrics(
            {
                f"alpha-NDCG (alpha={args.alpha})": dict(zip(cutoffs, means[:nc])),
                "IA-P": dict(zip(cutoffs, means[nc:])),
            },
            args.plot,
        )
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        config = bench.BenchConfig(
            n_grid=args.n,
            k_grid=args.k,
            num_specs=args.specs,
            seed=args.seed,
            repetitions=args.reps,
            sparsity=args.sparsity,
            lam=args.lam,
            algorithms=tuple(args.algorithms),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    records = bench.run_grid(
        config,
        progress=lambda r: log.info("%s n=%d k=%d %.1f us", r.algorithm, r.n, r.k, r.median_us),
    )
    with _output(args.out) as fh:
        bench.write_csv(records, fh)
    if args.plot:
        from qldiv.plotting import plot_scaling

        plot_scaling(records, args.plot)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", metavar="FILE", help="key=value defaults; explicit flags win")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="qldiv", description="Query-log driven search result diversification.", allow_abbrev=False
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub_kw = {"parents": [common], "allow_abbrev": False}

    p = sub.add_parser("mine", **sub_kw, help="mine ambiguous queries from a query log")
    p.add_argument("--log", required=True, help="query log file")
    p.add_argument("--format", default="aol-tsv", choices=logmining.LOG_FORMATS)
    p.add_argument("--s", type=_positive, default=logmining.DEFAULT_S, help="popularity divisor (default %(default)s)")
    p.add_argument("--session-gap", type=float, default=logmining.DEFAULT_GAP, help="seconds of inactivity that end a session")
    p.add_argument("--out", required=True, help="model JSON to write")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("diversify", **sub_kw, help="re-rank a TREC run")
    p.add_argument("--run", required=True, help="TREC run to diversify")
    p.add_argument("--model", required=True, help="specialization model JSON")
    p.add_argument("--corpus", required=True, help="doc-id<TAB>snippet file")
    p.add_argument("--spec-runs", required=True, help="run file keyed by specialization query")
    p.add_argument("--topics", help="qid<TAB>query file; without it the qid is the query")
    p.add_argument("--algorithm", default="optselect", choices=sorted(ALGORITHMS))
    p.add_argument("--k", type=_positive, default=1000)
    p.add_argument("--lambda", dest="lam", type=_unit, default=DEFAULT_LAMBDA)
    p.add_argument("--c", type=_unit, default=DEFAULT_THRESHOLD, help="utility threshold")
    p.add_argument("--spec-depth", type=_positive, default=DEFAULT_SPEC_DEPTH, help="results kept per specialization")
    p.add_argument("--weighting", choices=("tf", "tfidf"), default="tf")
    p.add_argument("--stopwords", action="store_true", help="drop English stopwords from snippets")
    p.add_argument("--tag", help="run tag of diversified lines")
    p.add_argument("--out", help="output run file (default stdout)")
    p.set_defaults(func=cmd_diversify)

    p = sub.add_parser("eval", **sub_kw, help="alpha-NDCG and IA-P of a run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True, help="topic subtopic doc judgment")
    p.add_argument("--alpha", type=_unit, default=DEFAULT_ALPHA)
    p.add_argument("--cutoffs", type=_cutoffs, default=DEFAULT_CUTOFFS)
    p.add_argument("--out", help="CSV output (default stdout)")
    p.add_argument("--plot", help="write a figure of the mean metrics to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", **sub_kw, help="time the three algorithms on synthetic input")
    p.add_argument("--n", type=_ints, default=bench.BenchConfig.n_grid, help="comma-separated candidate-set sizes")
    p.add_argument("--k", type=_ints, default=bench.BenchConfig.k_grid, help="comma-separated result sizes")
    p.add_argument("--specs", type=int, default=bench.BenchConfig.num_specs)
    p.add_argument("--reps", type=_positive, default=bench.BenchConfig.repetitions)
    p.add_argument("--seed", type=int, default=bench.BenchConfig.seed)
    p.add_argument("--sparsity", type=_unit, default=bench.BenchConfig.sparsity)
    p.add_argument("--lambda", dest="lam", type=_unit, default=DEFAULT_LAMBDA)
    p.add_argument("--algorithms", type=lambda s: s.split(","), default=list(ALGORITHMS))
    p.add_argument("--out", help="CSV output (default stdout)")
    p.add_argument("--plot", help="write a scaling figure to this path")
    p.set_defaults(func=cmd_bench)
    return parser


def _read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise CliError(f"{path}:{lineno}: expected key=value")
            values[key.strip().lstrip("-")] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    config = _read_config(known.config)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = subparsers.choices.get(command)
    if target is None:
        return
    defaults = {}
    for key, value in config.items():
        action = target._option_string_actions.get(f"--{key}")
        if action is None:
            raise CliError(f"{known.config}: unknown option {key!r} for '{command}'")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[action.dest] = value
        if action.required:
            action.required = False
    target.set_defaults(**defaults)


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        _setup_logging(args.verbose)
        return args.func(args)
    except CliError as exc:
        print(f"qldiv: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"qldiv: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
