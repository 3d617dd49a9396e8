"""Command-line front end: mine, enumerate, evaluate, gen, stats, compare."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, TextIO

from pydantic import ValidationError

from fsminer.errors import FsMinerError
from fsminer.generator import GenParams, generate_database
from fsminer.graph import (
    GraphDatabase,
    build_edge_support_index,
    db_stats,
    parse_database,
    write_database,
)
from fsminer.miner import MineConfig, MineResult, mine, read_result, run_chains, write_result
from fsminer.oracle import (
    DEFAULT_ENUMERATION_CAP,
    compare_scores,
    evaluate,
    ground_truth,
    read_truth,
    write_compare_csv,
    write_counts,
    write_truth,
)
from fsminer.patterns import DEFAULT_CAPACITY
from fsminer.sampler import MhMode, ScoreFn

logger = logging.getLogger(__name__)

SUMMARY_TOP = 10


def _write_atomic(path: Path, write: Callable[[TextIO], None]) -> None:
    """Write via a sibling temp file; `path` only appears once complete."""
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with tmp.open("w", encoding="utf-8", newline="\n") as f:
            write(f)
        os.replace(tmp, path)
        logger.info("Wrote %s", path)
    finally:
        tmp.unlink(missing_ok=True)


def _emit(summary: dict[str, Any]) -> None:
    print(json.dumps(summary, indent=2))


def _load_db(path: Path) -> GraphDatabase:
    with path.open(encoding="utf-8") as f:
        return parse_database(f)


def _counts_path(truth: Path) -> Path:
    return truth.with_name(f"{truth.name}.counts")


def _mine_config(args: argparse.Namespace) -> MineConfig:
    return MineConfig(
        p=args.size,
        k=args.topk,
        max_iter=args.iters,
        score=args.score,
        mh_mode=args.mh_mode,
        queue_capacity=args.queue_cap,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        num_chains=args.chains,
        jaccard_eps=args.jaccard_eps,
    )


def cmd_mine(args: argparse.Namespace) -> int:
    config = _mine_config(args)
    db = _load_db(args.input)
    index = build_edge_support_index(db)
    result: MineResult
    if config.num_chains > 1:
        result = run_chains(db, config, index, progress=args.progress)
    else:
        result = mine(db, config, index)

    _write_atomic(args.output, lambda f: write_result(result, f))
    if args.timings_out is not None:
        _write_atomic(args.timings_out, lambda f: f.write(result.timings.model_dump_json(indent=2)))
    if args.trace_out is not None:

        def write_trace(f: TextIO) -> None:
            f.write("iteration,jaccard\n")
            for point in result.convergence:
                f.write(f"{point.iteration},{point.jaccard:.6f}\n")

        _write_atomic(args.trace_out, write_trace)

    _emit(
        {
            "command": "mine",
            "output": str(args.output),
            "iterations": result.iterations_run,
            "seeds": result.seeds,
            "patterns": len(result.top_k),
            "top": [
                {"rank": r.rank, "code": r.code, "support_a": r.support_a}
                for r in result.top_k[:SUMMARY_TOP]
            ],
            "timings": result.timings.model_dump(),
        }
    )
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    db = _load_db(args.input)
    truth = ground_truth(db, args.size, cap=args.cap, workers=args.workers, progress=args.progress)
    counts = args.counts if args.counts is not None else _counts_path(args.output)
    _write_atomic(args.output, lambda f: write_truth(truth, f))
    _write_atomic(counts, lambda f: write_counts(truth, f))
    _emit(
        {
            "command": "enumerate",
            "output": str(args.output),
            "counts": str(counts),
            "p": truth.p,
            "patterns": len(truth),
            "occurrences": sum(truth.per_graph_counts.values()),
        }
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    with args.mined.open(encoding="utf-8") as f:
        header, records = read_result(f)
    with args.truth.open(encoding="utf-8") as f:
        truth = read_truth(f)
    k = args.topk if args.topk is not None else header.config.k
    report = evaluate([(r.code, float(r.support_a)) for r in records], truth, k)
    if args.output is not None:
        _write_atomic(args.output, lambda f: f.write(report.model_dump_json(indent=2)))
    _emit({"command": "evaluate", **report.model_dump()})
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    params = GenParams(
        n_graphs=args.graphs,
        n_vertices_mean=args.vertices,
        edge_factor=args.edge_factor,
        n_vertex_labels=args.vertex_labels,
        n_edge_labels=args.edge_labels,
        seed=args.seed,
    )
    db = generate_database(params)
    _write_atomic(args.output, lambda f: write_database(db, f))
    _emit({"command": "gen", "output": str(args.output), **db_stats(db).model_dump()})
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    db = _load_db(args.input)
    _emit({"command": "stats", **db_stats(db).model_dump(), "rejected": db.rejected})
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    config = _mine_config(args)
    db = _load_db(args.input)
    with args.truth.open(encoding="utf-8") as f:
        counts = _counts_path(args.truth)
        if counts.exists():
            with counts.open(encoding="utf-8") as c:
                truth = read_truth(f, c)
        else:
            truth = read_truth(f)
    rows = compare_scores(db, config, truth, args.scores)
    _write_atomic(args.output, lambda f: write_compare_csv(rows, f))
    final = {}
    for row in rows:
        final[str(row.score)] = {"precision": row.precision, "tau_b": row.tau_b}
    _emit({"command": "compare", "output": str(args.output), "final": final})
    return 0


def _add_mine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, required=True, help="graph database file")
    p.add_argument("--size", type=int, required=True, help="pattern size p in vertices")
    p.add_argument("--topk", type=int, default=100)
    p.add_argument("--iters", type=int, required=True, help="sampling iterations")
    p.add_argument("--score", type=ScoreFn, choices=list(ScoreFn), default=ScoreFn.S2)
    p.add_argument("--mh-mode", type=MhMode, choices=list(MhMode), default=MhMode.PAPER)
    p.add_argument("--queue-cap", type=int, default=DEFAULT_CAPACITY)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--jaccard-eps", type=float, default=0.05)
    p.add_argument("--checkpoint-every", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsminer",
        description="Sample the top-k frequent induced p-subgraphs of a graph database",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    parser.add_argument("--progress", action="store_true", help="show progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="sample the top-k patterns")
    _add_mine_flags(p)
    p.add_argument("--output", type=Path, required=True, help="JSON-lines result file")
    p.add_argument("--timings-out", type=Path, default=None)
    p.add_argument("--trace-out", type=Path, default=None, help="convergence trace CSV")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("enumerate", help="exact supports by exhaustive enumeration")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--output", type=Path, required=True, help="truth TSV")
    p.add_argument("--counts", type=Path, default=None, help="per-graph counts TSV")
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("evaluate", help="pr@k and Tau-b of a mined result")
    p.add_argument("--mined", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--topk", type=int, default=None, help="defaults to the mined k")
    p.add_argument("--output", type=Path, default=None, help="metrics JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen", help="generate a synthetic database")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--graphs", type=int, default=20)
    p.add_argument("--vertices", type=int, default=30, help="mean vertex count")
    p.add_argument("--edge-factor", type=float, default=1.5)
    p.add_argument("--vertex-labels", type=int, default=4)
    p.add_argument("--edge-labels", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="database statistics")
    p.add_argument("--input", type=Path, required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="score variants against uniform at equal budgets")
    _add_mine_flags(p)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument(
        "--scores",
        type=ScoreFn,
        nargs="+",
        default=[ScoreFn.S1, ScoreFn.S2, ScoreFn.UNIFORM],
    )
    p.add_argument("--output", type=Path, required=True, help="CSV trace")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"fsminer {args.command}: invalid parameters\n{e}", file=sys.stderr)
        return 2
    except (FsMinerError, OSError, ValueError) as e:
        print(f"fsminer {args.command}: {e}", file=sys.stderr)
        return 1
