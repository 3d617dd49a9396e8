"""Top-k frequent induced subgraph mining by Metropolis-Hastings sampling."""

from fsminer.canonical import CanonicalCode, code_to_graph, min_dfs_code
from fsminer.errors import FsMinerError
from fsminer.generator import GenParams, generate_database
from fsminer.graph import (
    EdgeSupportIndex,
    GraphDatabase,
    LabeledGraph,
    build_edge_support_index,
    db_stats,
    parse_database,
    write_database,
)
from fsminer.miner import MineConfig, MineResult, mine, run_chains, run_chains_async
from fsminer.oracle import GroundTruth, evaluate, ground_truth, kendall_tau_b, precision_at_k
from fsminer.patterns import PatternQueue
from fsminer.sampler import MhMode, ScoreFn

__all__ = [
    "CanonicalCode",
    "EdgeSupportIndex",
    "FsMinerError",
    "GenParams",
    "GraphDatabase",
    "GroundTruth",
    "LabeledGraph",
    "MhMode",
    "MineConfig",
    "MineResult",
    "PatternQueue",
    "ScoreFn",
    "build_edge_support_index",
    "code_to_graph",
    "db_stats",
    "evaluate",
    "generate_database",
    "ground_truth",
    "kendall_tau_b",
    "min_dfs_code",
    "mine",
    "parse_database",
    "precision_at_k",
    "run_chains",
    "run_chains_async",
    "write_database",
]
