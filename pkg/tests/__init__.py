from itertools import combinations
from pathlib import Path

import networkx as nx
import numpy as np

from fsminer.generator import GenParams, generate_database
from fsminer.graph import GraphDatabase, LabeledGraph, parse_database

ROOT = Path(__file__).parent.parent

DESK_PARAMS = GenParams(
    n_graphs=20, n_vertices_mean=30, edge_factor=1.5, n_vertex_labels=4, n_edge_labels=2, seed=1
)


def load_fixture(name: str) -> GraphDatabase:
    with (ROOT / "fixtures" / name).open(encoding="utf-8") as f:
        return parse_database(f)


def two_graph_db() -> GraphDatabase:
    return load_fixture("two_graphs.g")


def small_hosts() -> GraphDatabase:
    return load_fixture("small_hosts.g")


def desk_db() -> GraphDatabase:
    return generate_database(DESK_PARAMS)


def _random_connected(rng: np.random.Generator, n: int, n_vlabels: int, n_elabels: int):
    pairs = {tuple(sorted((v, int(rng.integers(v))))) for v in range(1, n)}
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in pairs and rng.random() < 0.3:
                pairs.add((u, v))
    vertices = [int(x) for x in rng.integers(n_vlabels, size=n)]
    edges = [(u, v, int(rng.integers(n_elabels))) for u, v in sorted(pairs)]
    return vertices, edges


def random_labeled_graph(
    rng: np.random.Generator, max_vertices: int = 5, n_vlabels: int = 2, n_elabels: int = 2
) -> LabeledGraph:
    """A random connected labeled graph with 1..max_vertices vertices."""
    n = int(rng.integers(1, max_vertices + 1))
    vertices, edges = _random_connected(rng, n, n_vlabels, n_elabels)
    return LabeledGraph.build(0, vertices, edges)


def shuffled(g: LabeledGraph, rng: np.random.Generator) -> LabeledGraph:
    return g.relabeled([int(x) for x in rng.permutation(g.num_vertices)])


def to_networkx(g: LabeledGraph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from((v, {"label": lv}) for v, lv in enumerate(g.vertices))
    h.add_edges_from((u, v, {"label": le}) for u, v, le in g.edges)
    return h


def nx_isomorphic(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    match = nx.algorithms.isomorphism.categorical_node_match("label", None)
    ematch = nx.algorithms.isomorphism.categorical_edge_match("label", None)
    return nx.is_isomorphic(to_networkx(g1), to_networkx(g2), node_match=match, edge_match=ematch)


def nx_connected_subsets(g: LabeledGraph, p: int) -> set[tuple[int, ...]]:
    """Connected induced p-subsets via networkx, independent of fsminer's BFS."""
    h = to_networkx(g)
    return {
        combo
        for combo in combinations(range(g.num_vertices), p)
        if nx.is_connected(h.subgraph(combo))
    }
