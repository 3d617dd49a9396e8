"""The sampling main loop, multi-chain runs and result files."""

from __future__ import annotations

import asyncio
import functools
import itertools
import json
import logging
import time
from collections.abc import Callable, Sequence
from typing import TextIO

import numpy as np
from pydantic import BaseModel, Field, model_validator
from tqdm import tqdm

from fsminer.canonical import DEFAULT_MAX_VERTICES, CanonicalCode, min_dfs_code
from fsminer.errors import CanonicalCodeError, NoEligibleGraphError
from fsminer.graph import (
    EdgeSupportIndex,
    GraphDatabase,
    build_edge_support_index,
    induced_subgraph,
)
from fsminer.patterns import DEFAULT_CAPACITY, PatternQueue, PatternRecord
from fsminer.sampler import (
    DEFAULT_RETRY_CAP,
    ChainRegistry,
    MhMode,
    ScoreFn,
    SubgraphState,
    init_state,
    mh_step,
)

logger = logging.getLogger(__name__)


class MineConfig(BaseModel):
    p: int = Field(ge=2, description="pattern size in vertices")
    k: int = Field(default=100, ge=1)
    max_iter: int = Field(ge=0)
    score: ScoreFn = ScoreFn.S2
    mh_mode: MhMode = MhMode.PAPER
    queue_capacity: int = Field(default=DEFAULT_CAPACITY, ge=1)
    seed: int = 0
    checkpoint_every: int | None = Field(default=None, ge=1)
    num_chains: int = Field(default=1, ge=1)
    jaccard_eps: float = Field(default=0.05, ge=0.0, le=1.0)
    retry_cap: int = Field(default=DEFAULT_RETRY_CAP, ge=1)
    max_code_vertices: int = Field(default=DEFAULT_MAX_VERTICES, ge=2)
    code_cache_size: int = Field(default=1 << 16, ge=0)

    @model_validator(mode="after")
    def _k_fits_queue(self) -> MineConfig:
        if self.k > self.queue_capacity:
            raise ValueError(f"k={self.k} exceeds queue capacity {self.queue_capacity}")
        return self

    @property
    def checkpoint_interval(self) -> int:
        if self.checkpoint_every is not None:
            return self.checkpoint_every
        return max(1, self.max_iter // 100)


class Timings(BaseModel):
    sampling: float = 0.0
    coding: float = 0.0
    queue: float = 0.0
    total: float = 0.0


class ChainSnapshot(BaseModel):
    chain: int
    iteration: int
    codes: list[CanonicalCode]


class ConvergencePoint(BaseModel):
    iteration: int
    jaccard: float


class MineResult(BaseModel):
    config: MineConfig
    seeds: list[int]
    top_k: list[PatternRecord]
    iterations_run: int
    skipped_graphs: list[int] = Field(default_factory=list)
    timings: Timings = Field(default_factory=Timings)
    snapshots: list[ChainSnapshot] = Field(default_factory=list)
    convergence: list[ConvergencePoint] = Field(default_factory=list)

    def ranked(self) -> list[tuple[CanonicalCode, float]]:
        return [(r.code, float(r.support_a)) for r in self.top_k]


class ResultHeader(BaseModel):
    type: str = "header"
    config: MineConfig
    seeds: list[int]
    iterations: int
    skipped_graphs: list[int] = Field(default_factory=list)
    convergence: list[ConvergencePoint] = Field(default_factory=list)
    timings: Timings | None = None


def eligible_graphs(db: GraphDatabase, p: int) -> tuple[list[int], list[int]]:
    eligible = [g.id for g in db.graphs if g.num_vertices >= p]
    skipped = [g.id for g in db.graphs if g.num_vertices < p]
    return eligible, skipped


class MiningRun:
    """One chain set: a saved state per graph, a pattern queue and a PRNG."""

    def __init__(
        self,
        db: GraphDatabase,
        config: MineConfig,
        seed: int,
        index: EdgeSupportIndex | None = None,
        chain: int = 0,
    ) -> None:
        self.db = db
        self.config = config
        self.seed = seed
        self.chain = chain
        self.index = index if index is not None else build_edge_support_index(db)
        self.eligible, self.skipped = eligible_graphs(db, config.p)
        if not self.eligible:
            raise NoEligibleGraphError(
                f"no eligible graphs: none has at least {config.p} vertices"
            )
        if config.p > config.max_code_vertices:
            raise CanonicalCodeError(
                f"p={config.p} exceeds the canonical code limit of {config.max_code_vertices}"
            )
        if self.skipped:
            logger.warning(
                "Excluding %d graph(s) with fewer than %d vertices", len(self.skipped), config.p
            )
        self.rng = np.random.default_rng(seed)
        self.registry = ChainRegistry()
        self.queue = PatternQueue(config.queue_capacity)
        self.iteration = 0
        self.codes_computed = 0
        self.gated = 0
        self.timings = Timings()
        self._code = functools.lru_cache(maxsize=config.code_cache_size)(self._compute_code)

    def _compute_code(self, gid: int, vertices: tuple[int, ...]) -> CanonicalCode:
        self.codes_computed += 1
        pattern = induced_subgraph(self.db[gid], vertices)
        return min_dfs_code(pattern, self.db, self.config.max_code_vertices)

    def sample(self, gid: int) -> SubgraphState:
        g = self.db[gid]
        cfg = self.config
        state = self.registry.get(gid)
        if state is None:
            state = init_state(g, cfg.p, self.rng, cfg.score, self.index)
        else:
            state = mh_step(g, state, cfg.score, cfg.mh_mode, self.rng, self.index, cfg.retry_cap)
        self.registry.save(state)
        return state

    def step(self) -> None:
        self.iteration += 1
        gid = self.eligible[self.rng.integers(len(self.eligible))]
        t0 = time.perf_counter()
        state = self.sample(gid)
        t1 = time.perf_counter()
        self.timings.sampling += t1 - t0
        if not self.queue.passes_gate(state.score):
            self.gated += 1
            return
        code = self._code(gid, state.vertices)
        t2 = time.perf_counter()
        self.queue.record(code, gid, state.score, self.iteration)
        self.timings.coding += t2 - t1
        self.timings.queue += time.perf_counter() - t2

    def advance(self, n: int) -> None:
        for _ in range(n):
            self.step()

    def top_codes(self) -> list[CanonicalCode]:
        return [e.code for e in self.queue.top(self.config.k)]

    def snapshot(self) -> ChainSnapshot:
        return ChainSnapshot(chain=self.chain, iteration=self.iteration, codes=self.top_codes())


def mine(
    db: GraphDatabase,
    config: MineConfig,
    index: EdgeSupportIndex | None = None,
    on_checkpoint: Callable[[MiningRun], None] | None = None,
) -> MineResult:
    """Run the sampler for `config.max_iter` iterations and return the top-k."""
    run = MiningRun(db, config, config.seed, index)
    start = time.perf_counter()
    snapshots = []
    interval = config.checkpoint_interval
    while run.iteration < config.max_iter:
        run.advance(min(interval, config.max_iter - run.iteration))
        snapshots.append(run.snapshot())
        if on_checkpoint is not None:
            on_checkpoint(run)
    run.timings.total = time.perf_counter() - start
    logger.debug(
        "Mined %d iterations: %d coded, %d gated", run.iteration, run.codes_computed, run.gated
    )
    return MineResult(
        config=config,
        seeds=[config.seed],
        top_k=run.queue.snapshot(config.k),
        iterations_run=run.iteration,
        skipped_graphs=run.skipped,
        timings=run.timings,
        snapshots=snapshots,
    )


def mine_uniform_baseline(
    db: GraphDatabase, config: MineConfig, index: EdgeSupportIndex | None = None
) -> MineResult:
    return mine(db, config.model_copy(update={"score": ScoreFn.UNIFORM}), index)


def jaccard_distance(a: set[CanonicalCode], b: set[CanonicalCode]) -> float:
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def mean_pairwise_jaccard(code_sets: Sequence[set[CanonicalCode]]) -> float:
    pairs = list(itertools.combinations(code_sets, 2))
    if not pairs:
        return 0.0
    return sum(jaccard_distance(a, b) for a, b in pairs) / len(pairs)


def derive_seeds(seed: int, n: int) -> list[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(n)]


async def run_chains_async(
    db: GraphDatabase,
    config: MineConfig,
    index: EdgeSupportIndex | None = None,
    seeds: Sequence[int] | None = None,
    progress: bool = False,
) -> MineResult:
    """Advance independent chains checkpoint by checkpoint on worker threads.

    After each checkpoint the mean pairwise Jaccard distance of the chains'
    top-k code sets is recorded; the run stops once it drops below
    `config.jaccard_eps` or the iteration budget is spent.
    """
    index = index if index is not None else build_edge_support_index(db)
    seeds = list(seeds) if seeds is not None else derive_seeds(config.seed, config.num_chains)
    runs = [MiningRun(db, config, seed, index, chain=i) for i, seed in enumerate(seeds)]
    interval = config.checkpoint_interval
    trace: list[ConvergencePoint] = []
    snapshots: list[ChainSnapshot] = []
    start = time.perf_counter()

    with tqdm(total=config.max_iter, disable=not progress, unit="it") as bar:
        while runs[0].iteration < config.max_iter:
            n = min(interval, config.max_iter - runs[0].iteration)
            await asyncio.gather(*(asyncio.to_thread(run.advance, n) for run in runs))
            bar.update(n)
            snapshots.extend(run.snapshot() for run in runs)
            if len(runs) < 2:
                continue
            distance = mean_pairwise_jaccard([set(run.top_codes()) for run in runs])
            trace.append(ConvergencePoint(iteration=runs[0].iteration, jaccard=distance))
            if distance < config.jaccard_eps:
                logger.info(
                    "Chains agree at iteration %d (Jaccard %.4f)", runs[0].iteration, distance
                )
                break

    merged = PatternQueue.merge((run.queue for run in runs), config.queue_capacity)
    timings = Timings(
        sampling=sum(r.timings.sampling for r in runs) / len(runs),
        coding=sum(r.timings.coding for r in runs) / len(runs),
        queue=sum(r.timings.queue for r in runs) / len(runs),
        total=time.perf_counter() - start,
    )
    return MineResult(
        config=config,
        seeds=seeds,
        top_k=merged.snapshot(config.k),
        iterations_run=runs[0].iteration,
        skipped_graphs=runs[0].skipped,
        timings=timings,
        snapshots=snapshots,
        convergence=trace,
    )


def run_chains(
    db: GraphDatabase,
    config: MineConfig,
    index: EdgeSupportIndex | None = None,
    seeds: Sequence[int] | None = None,
    progress: bool = False,
) -> MineResult:
    return asyncio.run(run_chains_async(db, config, index, seeds, progress))


def write_result(result: MineResult, out: TextIO, include_timings: bool = False) -> None:
    """Header object, then one JSON object per pattern in rank order."""
    header = ResultHeader(
        config=result.config,
        seeds=result.seeds,
        iterations=result.iterations_run,
        skipped_graphs=result.skipped_graphs,
        convergence=result.convergence,
        timings=result.timings if include_timings else None,
    )
    out.write(header.model_dump_json(exclude_none=True))
    out.write("\n")
    for record in result.top_k:
        out.write(record.model_dump_json())
        out.write("\n")


def read_result(stream: TextIO) -> tuple[ResultHeader, list[PatternRecord]]:
    lines = [line for line in (raw.strip() for raw in stream) if line]
    if not lines:
        raise ValueError("empty result file")
    header = ResultHeader.model_validate(json.loads(lines[0]))
    return header, [PatternRecord.model_validate(json.loads(line)) for line in lines[1:]]
