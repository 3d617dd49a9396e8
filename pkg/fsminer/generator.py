"""Synthetic databases of simple connected labeled graphs."""

from __future__ import annotations

import logging
import string

import numpy as np
from pydantic import BaseModel, Field

from fsminer.errors import GeneratorParamError
from fsminer.graph import GraphDatabase, LabeledGraph

logger = logging.getLogger(__name__)


class GenParams(BaseModel):
    n_graphs: int = Field(default=20, ge=1)
    n_vertices_mean: int = Field(default=30, ge=2)
    edge_factor: float = Field(default=1.5, ge=0.0)
    n_vertex_labels: int = Field(default=4, ge=1)
    n_edge_labels: int = Field(default=2, ge=1)
    seed: int = 0


def vertex_token(i: int) -> str:
    return string.ascii_uppercase[i] if i < 26 else f"V{i}"


def edge_token(i: int) -> str:
    return str(i + 1)


def _target_edges(n_vertices: int, edge_factor: float) -> int:
    return max(n_vertices - 1, round(edge_factor * n_vertices))


def generate_database(params: GenParams) -> GraphDatabase:
    """Random spanning tree plus uniform extra edges up to edge_factor·|V| edges.

    Vertex counts are Poisson around the mean (at least 2); labels are uniform.
    """
    mean = params.n_vertices_mean
    if _target_edges(mean, params.edge_factor) > mean * (mean - 1) // 2:
        raise GeneratorParamError(
            f"edge_factor {params.edge_factor} asks for more edges than a complete "
            f"graph on {mean} vertices has"
        )
    rng = np.random.default_rng(params.seed)
    db = GraphDatabase()
    # interned in file order, so a written database parses back to the same ids
    vlabel, elabel = db.vertex_labels.intern, db.edge_labels.intern

    for gid in range(params.n_graphs):
        n = max(2, int(rng.poisson(mean)))
        # a small Poisson draw can fall below what the factor needs
        m = min(_target_edges(n, params.edge_factor), n * (n - 1) // 2)

        order = rng.permutation(n)
        pairs = {
            tuple(sorted((int(order[i]), int(order[rng.integers(i)])))) for i in range(1, n)
        }
        extra = m - len(pairs)
        if extra > 0:
            free = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in pairs]
            for j in rng.choice(len(free), size=extra, replace=False):
                pairs.add(free[j])

        vertices = [
            vlabel(vertex_token(int(x))) for x in rng.integers(params.n_vertex_labels, size=n)
        ]
        edges = [
            (u, v, elabel(edge_token(int(rng.integers(params.n_edge_labels)))))
            for u, v in sorted(pairs)
        ]
        db.graphs.append(LabeledGraph.build(gid, vertices, edges))
    logger.debug("Generated %d graphs (seed %d)", params.n_graphs, params.seed)
    return db
