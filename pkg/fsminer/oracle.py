"""Exhaustive ground truth and rank-quality metrics for mined results.

Ground truth enumerates every connected induced p-subgraph of every graph
with ESU (each vertex set exactly once), canonicalises it and folds it into
a per-code support table as it goes.
"""

from __future__ import annotations

import itertools
import logging
import math
import multiprocessing
import time
from collections.abc import Iterator, Sequence
from typing import TextIO

from pydantic import BaseModel, Field
from scipy.stats import kendalltau
from tqdm import tqdm

from fsminer.canonical import CanonicalCode, min_dfs_code
from fsminer.errors import (
    EnumerationCapError,
    MissingCountsError,
    TruthSizeError,
    UndefinedCorrelationError,
)
from fsminer.graph import (
    EdgeSupportIndex,
    GraphDatabase,
    LabeledGraph,
    build_edge_support_index,
    induced_subgraph,
)
from fsminer.miner import MineConfig, MiningRun, mine
from fsminer.sampler import ScoreFn, is_connected_subset, score, score_s1, score_s2

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 10**8

RankedList = Sequence[tuple[CanonicalCode, float]]


def enumerate_p_subgraphs(g: LabeledGraph, p: int) -> Iterator[tuple[int, ...]]:
    """Yield every connected induced p-vertex subgraph of `g` once, as a sorted tuple."""
    if p < 1 or g.num_vertices < p:
        return
    adj = g.adjacency

    def extend(sub: list[int], around: set[int], ext: set[int], root: int):
        if len(sub) == p:
            yield tuple(sorted(sub))
            return
        ext = set(ext)
        while ext:
            w = min(ext)
            ext.remove(w)
            exclusive = {u for u in adj[w] if u > root and u not in around}
            yield from extend(sub + [w], around | adj[w].keys(), ext | exclusive, root)

    for v in range(g.num_vertices):
        start = {u for u in adj[v] if u > v}
        yield from extend([v], {v} | adj[v].keys(), start, v)


def naive_p_subgraphs(g: LabeledGraph, p: int) -> Iterator[tuple[int, ...]]:
    """All p-subsets of the vertices that induce a connected subgraph."""
    for combo in itertools.combinations(range(g.num_vertices), p):
        if is_connected_subset(g, combo):
            yield combo


def estimate_enumeration(db: GraphDatabase, p: int) -> float:
    """Upper estimate of the number of connected induced p-subgraphs in `db`.

    Per graph: min(C(|V|, p), |V|·(e·Δ)^(p-1)/p) with Δ the maximum degree.
    """
    total = 0.0
    for g in db.graphs:
        if g.num_vertices < p:
            continue
        delta = max((len(a) for a in g.adjacency), default=0)
        bound = g.num_vertices * (math.e * delta) ** (p - 1) / p
        total += min(float(math.comb(g.num_vertices, p)), bound)
    return total


class TruthEntry(BaseModel):
    code: CanonicalCode
    support_set: set[int] = Field(default_factory=set)
    occurrences: dict[int, int] = Field(default_factory=dict)
    example: tuple[int, tuple[int, ...]] | None = None

    @property
    def support(self) -> int:
        return len(self.support_set)


class GroundTruth(BaseModel):
    p: int
    n_graphs: int
    entries: dict[CanonicalCode, TruthEntry] = Field(default_factory=dict)
    per_graph_counts: dict[int, int] = Field(default_factory=dict)

    @property
    def n_eligible(self) -> int:
        """Graphs holding at least one p-subgraph, i.e. those the miner draws from."""
        return sum(1 for x in self.per_graph_counts.values() if x > 0)

    def support(self, code: CanonicalCode) -> int:
        entry = self.entries.get(code)
        return entry.support if entry is not None else 0

    def ranked(self) -> list[TruthEntry]:
        return sorted(self.entries.values(), key=lambda e: (-e.support, e.code))

    def top_codes(self, k: int) -> list[CanonicalCode]:
        return [e.code for e in self.ranked()[:k]]

    def __len__(self) -> int:
        return len(self.entries)


_worker_db: GraphDatabase | None = None


def _init_worker(db: GraphDatabase) -> None:
    global _worker_db
    _worker_db = db


def _graph_patterns(
    db: GraphDatabase, gid: int, p: int
) -> tuple[int, dict[CanonicalCode, tuple[int, tuple[int, ...]]]]:
    g = db[gid]
    found: dict[CanonicalCode, tuple[int, tuple[int, ...]]] = {}
    count = 0
    for vertices in enumerate_p_subgraphs(g, p):
        count += 1
        code = min_dfs_code(induced_subgraph(g, vertices), db)
        seen = found.get(code)
        found[code] = (seen[0] + 1, seen[1]) if seen else (1, vertices)
    return count, found


def _graph_patterns_worker(args: tuple[int, int]):
    gid, p = args
    return gid, _graph_patterns(_worker_db, gid, p)


def ground_truth(
    db: GraphDatabase,
    p: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
    workers: int = 1,
    progress: bool = False,
) -> GroundTruth:
    """Exact support of every connected induced p-subgraph pattern in `db`."""
    estimate = estimate_enumeration(db, p)
    if estimate > cap:
        logger.warning("Refusing enumeration for p=%d: estimate %.3g > cap %d", p, estimate, cap)
        raise EnumerationCapError(estimate, cap)

    truth = GroundTruth(p=p, n_graphs=db.n)
    jobs = [(g.id, p) for g in db.graphs]

    def fold(gid: int, count: int, found) -> None:
        truth.per_graph_counts[gid] = count
        for code, (occ, example) in found.items():
            entry = truth.entries.get(code)
            if entry is None:
                entry = truth.entries[code] = TruthEntry(code=code, example=(gid, example))
            entry.support_set.add(gid)
            entry.occurrences[gid] = occ

    with tqdm(total=len(jobs), disable=not progress, unit="graph") as bar:
        if workers > 1:
            with multiprocessing.Pool(workers, initializer=_init_worker, initargs=(db,)) as pool:
                for gid, (count, found) in pool.imap(_graph_patterns_worker, jobs):
                    fold(gid, count, found)
                    bar.update()
        else:
            for gid, _ in jobs:
                fold(gid, *_graph_patterns(db, gid, p))
                bar.update()
    logger.info(
        "Enumerated %d occurrences of %d patterns (p=%d)",
        sum(truth.per_graph_counts.values()),
        len(truth.entries),
        p,
    )
    return truth


def write_truth(truth: GroundTruth, out: TextIO) -> None:
    for entry in truth.ranked():
        ids = ",".join(str(gid) for gid in sorted(entry.support_set))
        out.write(f"{entry.code}\t{entry.support}\t{ids}\n")


def write_counts(truth: GroundTruth, out: TextIO) -> None:
    for gid in sorted(truth.per_graph_counts):
        out.write(f"{gid}\t{truth.per_graph_counts[gid]}\n")


def pattern_size(code: CanonicalCode) -> int:
    """Number of vertices named by a canonical code."""
    if code.startswith("v:"):
        return 1
    return 1 + max(int(part.strip("()").split(",")[1]) for part in code.split(";"))


def read_truth(truth_stream: TextIO, counts_stream: TextIO | None = None) -> GroundTruth:
    entries: dict[CanonicalCode, TruthEntry] = {}
    for line_no, raw in enumerate(truth_stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        try:
            code, support, ids = line.split("\t")
            support_set = {int(x) for x in ids.split(",") if x}
        except ValueError:
            raise ValueError(f"truth line {line_no}: expected code, support, ids") from None
        if len(support_set) != int(support):
            raise ValueError(f"truth line {line_no}: support disagrees with support-set")
        entries[code] = TruthEntry(code=code, support_set=support_set)
    counts: dict[int, int] = {}
    if counts_stream is not None:
        for raw in counts_stream:
            if raw.strip():
                gid, x = raw.split("\t")
                counts[int(gid)] = int(x)
    p = pattern_size(next(iter(entries))) if entries else 0
    return GroundTruth(p=p, n_graphs=len(counts), entries=entries, per_graph_counts=counts)


def precision_at_k(mined: RankedList, truth: GroundTruth, k: int, ties: bool = False) -> float:
    """Percentage of the true top-k (ties broken by code) present in the mined top-k.

    With `ties`, a mined code counts as a hit when its true support reaches the
    support of the k-th true pattern, so the code order inside the boundary
    tie group does not matter.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if len(truth) < k:
        raise TruthSizeError(f"ground truth holds {len(truth)} patterns, fewer than k={k}")
    mined_top = {code for code, _ in mined[:k]}
    if ties:
        threshold = truth.ranked()[k - 1].support
        return 100.0 * sum(1 for c in mined_top if truth.support(c) >= threshold) / k
    true_top = set(truth.top_codes(k))
    return 100.0 * len(true_top & mined_top) / k


def kendall_tau_b(pairs: Sequence[tuple[float, float]]) -> float:
    """Tie-corrected Kendall rank correlation of (actual, expected) pairs."""
    if len(pairs) < 2:
        raise ValueError("Tau-b needs at least two pairs")
    xs = [a for a, _ in pairs]
    ys = [b for _, b in pairs]
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise UndefinedCorrelationError("Tau-b is undefined when one coordinate is constant")
    return float(kendalltau(xs, ys, variant="b").statistic)


def tau_b_for_run(mined: RankedList, truth: GroundTruth, k: int) -> float:
    """Tau-b between actual and expected support over the true and mined top-k.

    Codes never sampled get expected support 0; actual supports come from the
    full truth table (0 for codes absent from it).
    """
    expected = dict(mined[:k])
    union = sorted(set(truth.top_codes(k)) | set(expected))
    return kendall_tau_b([(truth.support(c), expected.get(c, 0.0)) for c in union])


def expected_support_uniform(
    code: CanonicalCode, t: int, truth: GroundTruth, exact: bool = False
) -> float:
    """Expected support_a of `code` after t uniform draws.

    Linearised form (t/n)·Σ 1/x_z over the graphs z containing the pattern;
    `exact` gives Σ 1-(1-1/x_z)^(t/n) instead.
    """
    entry = truth.entries.get(code)
    if entry is None or not entry.support_set:
        return 0.0
    missing = entry.support_set - truth.per_graph_counts.keys()
    if missing:
        raise MissingCountsError(
            f"no p-subgraph counts for graph(s) {sorted(missing)}; read the truth with its counts"
        )
    n = truth.n_eligible
    xs = [truth.per_graph_counts[z] for z in sorted(entry.support_set)]
    if exact:
        return sum(1.0 - (1.0 - 1.0 / x) ** (t / n) for x in xs)
    if t / (n * min(xs)) > 1:
        logger.warning(
            "t/(n*min x)=%.3g > 1: linearised expected support is only approximate",
            t / (n * min(xs)),
        )
    return t / n * sum(1.0 / x for x in xs)


class ScoreBoundViolation(BaseModel):
    code: CanonicalCode
    support: int
    s1: float
    s2: int


def score_bound_audit(
    db: GraphDatabase, truth: GroundTruth, index: EdgeSupportIndex | None = None
) -> list[ScoreBoundViolation]:
    """Patterns breaking support <= s2 <= s1 (expected: none)."""
    index = index if index is not None else build_edge_support_index(db)
    violations = []
    for entry in truth.entries.values():
        if entry.example is None:
            continue
        gid, vertices = entry.example
        g = db[gid]
        s1, s2 = score_s1(vertices, g, index), score_s2(vertices, g, index)
        if not entry.support <= s2 <= s1:
            violations.append(
                ScoreBoundViolation(code=entry.code, support=entry.support, s1=s1, s2=s2)
            )
    return violations


def score_support_correlation(
    db: GraphDatabase,
    truth: GroundTruth,
    variant: ScoreFn,
    index: EdgeSupportIndex | None = None,
) -> float:
    """Tau-b between actual support and the score over every enumerated pattern."""
    index = index if index is not None else build_edge_support_index(db)
    pairs = []
    for entry in truth.entries.values():
        if entry.example is not None:
            gid, vertices = entry.example
            pairs.append((entry.support, score(variant, vertices, db[gid], index)))
    return kendall_tau_b(pairs)


class EvaluationReport(BaseModel):
    k: int
    precision_at_k: float
    precision_at_k_ties: float
    tau_b: float | None
    n_mined: int
    n_truth: int


def evaluate(mined: RankedList, truth: GroundTruth, k: int) -> EvaluationReport:
    precision = precision_at_k(mined, truth, k)
    try:
        tau = tau_b_for_run(mined, truth, k)
    except UndefinedCorrelationError as e:
        logger.warning("Tau-b undefined: %s", e)
        tau = None
    return EvaluationReport(
        k=k,
        precision_at_k=precision,
        precision_at_k_ties=precision_at_k(mined, truth, k, ties=True),
        tau_b=tau,
        n_mined=len(mined),
        n_truth=len(truth),
    )


class CompareRow(BaseModel):
    score: ScoreFn
    iteration: int
    seconds: float
    precision: float
    tau_b: float | None


def compare_scores(
    db: GraphDatabase,
    config: MineConfig,
    truth: GroundTruth,
    variants: Sequence[ScoreFn] = (ScoreFn.S1, ScoreFn.S2, ScoreFn.UNIFORM),
    index: EdgeSupportIndex | None = None,
) -> list[CompareRow]:
    """pr@k and Tau-b of each score variant at every checkpoint, equal budgets."""
    index = index if index is not None else build_edge_support_index(db)
    rows: list[CompareRow] = []
    for variant in variants:
        start = time.perf_counter()

        def measure(run: MiningRun, variant: ScoreFn = variant, start: float = start) -> None:
            ranked = [(e.code, float(e.support_a)) for e in run.queue.top(config.k)]
            report = evaluate(ranked, truth, config.k)
            rows.append(
                CompareRow(
                    score=variant,
                    iteration=run.iteration,
                    seconds=time.perf_counter() - start,
                    precision=report.precision_at_k,
                    tau_b=report.tau_b,
                )
            )

        mine(db, config.model_copy(update={"score": variant}), index, on_checkpoint=measure)
    return rows


def write_compare_csv(rows: Sequence[CompareRow], out: TextIO) -> None:
    out.write("score,iteration,seconds,precision,tau_b\n")
    for row in rows:
        tau = "" if row.tau_b is None else f"{row.tau_b:.6f}"
        out.write(f"{row.score},{row.iteration},{row.seconds:.6f},{row.precision:.4f},{tau}\n")
