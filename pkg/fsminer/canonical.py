"""Minimum DFS code canonical labeling for small labeled graphs.

The code is built the way gSpan's minimality check builds it: starting from
every occurrence of the smallest labeled edge, the code is extended one edge
at a time with the smallest rightmost extension available to any surviving
embedding, and only the embeddings producing that extension are kept.

Backward edges (from the rightmost vertex to a vertex of the rightmost path)
precede forward edges; among backward edges the smaller target index wins;
among forward edges the one leaving the deeper rightmost-path vertex wins;
labels (edge label, then target vertex label) break the remaining ties.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

from fsminer.errors import CanonicalCodeError
from fsminer.graph import GraphDatabase, LabeledGraph

DEFAULT_MAX_VERTICES = 16
ORACLE_MAX_VERTICES = 8

CanonicalCode = str


class DfsEdge(NamedTuple):
    i: int
    j: int
    li: int
    le: int
    lj: int

    @property
    def is_forward(self) -> bool:
        return self.j > self.i


class _Embedding:
    __slots__ = ("order", "pos", "used")

    def __init__(self, order: list[int], pos: dict[int, int], used: set[tuple[int, int]]):
        self.order = order
        self.pos = pos
        self.used = used


def _ekey(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def min_dfs_edges(
    g: LabeledGraph, max_vertices: int = DEFAULT_MAX_VERTICES
) -> tuple[DfsEdge, ...]:
    """Return the minimum DFS code of `g` as a tuple of `DfsEdge`."""
    n = g.num_vertices
    if n == 0:
        raise CanonicalCodeError("empty graph has no canonical code")
    if n > max_vertices:
        raise CanonicalCodeError(f"graph has {n} vertices, limit is {max_vertices}")
    if not g.is_connected():
        raise CanonicalCodeError("graph is not connected")
    if n == 1:
        return ()

    labels = g.vertices
    adj = g.adjacency
    first = min((labels[u], le, labels[v]) for u in range(n) for v, le in adj[u].items())
    embeddings = [
        _Embedding([u, v], {u: 0, v: 1}, {_ekey(u, v)})
        for u in range(n)
        for v, le in adj[u].items()
        if (labels[u], le, labels[v]) == first
    ]
    code = [DfsEdge(0, 1, *first)]
    rmpath = [0, 1]

    while len(code) < g.num_edges:
        r = rmpath[-1]
        best_back: tuple[int, int] | None = None
        for emb in embeddings:
            vr = emb.order[r]
            for w, le in adj[vr].items():
                j = emb.pos.get(w)
                if j is None or _ekey(vr, w) in emb.used:
                    continue
                cand = (j, le)
                if best_back is None or cand < best_back:
                    best_back = cand

        if best_back is not None:
            j, le = best_back
            survivors = []
            for emb in embeddings:
                vr, vj = emb.order[r], emb.order[j]
                if adj[vr].get(vj) == le and _ekey(vr, vj) not in emb.used:
                    emb.used.add(_ekey(vr, vj))
                    survivors.append(emb)
            embeddings = survivors
            first_order = embeddings[0].order
            code.append(DfsEdge(r, j, labels[first_order[r]], le, labels[first_order[j]]))
            continue

        best_fwd: tuple[int, int, int] | None = None
        for emb in embeddings:
            for k in reversed(rmpath):
                vk = emb.order[k]
                found = False
                for w, le in adj[vk].items():
                    if w in emb.pos:
                        continue
                    found = True
                    cand = (-k, le, labels[w])
                    if best_fwd is None or cand < best_fwd:
                        best_fwd = cand
                if found:
                    break
        if best_fwd is None:
            raise CanonicalCodeError("DFS extension failed on a connected graph")

        neg_k, le, lw = best_fwd
        k, new = -neg_k, len(embeddings[0].order)
        grown = []
        for emb in embeddings:
            vk = emb.order[k]
            for w, wle in adj[vk].items():
                if w in emb.pos or wle != le or labels[w] != lw:
                    continue
                pos = dict(emb.pos)
                pos[w] = new
                used = set(emb.used)
                used.add(_ekey(vk, w))
                grown.append(_Embedding(emb.order + [w], pos, used))
        embeddings = grown
        code.append(DfsEdge(k, new, labels[embeddings[0].order[k]], le, lw))
        rmpath = rmpath[: rmpath.index(k) + 1] + [new]
    return tuple(code)


def render_code(
    edges: tuple[DfsEdge, ...], root_label: int, db: GraphDatabase | None = None
) -> CanonicalCode:
    vtok = db.vertex_labels.token if db is not None else str
    etok = db.edge_labels.token if db is not None else str
    if not edges:
        return f"v:{vtok(root_label)}"
    return ";".join(
        f"({e.i},{e.j},{vtok(e.li)},{etok(e.le)},{vtok(e.lj)})" for e in edges
    )


def min_dfs_code(
    g: LabeledGraph,
    db: GraphDatabase | None = None,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> CanonicalCode:
    """Canonical text key of `g`; label tokens come from `db` when given."""
    edges = min_dfs_edges(g, max_vertices)
    return render_code(edges, g.vertices[0], db)


def code_to_graph(code: CanonicalCode, db: GraphDatabase | None = None) -> LabeledGraph:
    """Decode a canonical code back into the pattern graph it names."""
    vid = db.vertex_labels.ids.__getitem__ if db is not None else int
    eid = db.edge_labels.ids.__getitem__ if db is not None else int
    if code.startswith("v:"):
        return LabeledGraph.build(-1, [vid(code[2:])], [])
    vertices: dict[int, int] = {}
    edges = []
    for part in code.split(";"):
        i, j, li, le, lj = part.strip("()").split(",")
        i, j = int(i), int(j)
        vertices.setdefault(i, vid(li))
        vertices.setdefault(j, vid(lj))
        edges.append((i, j, eid(le)))
    return LabeledGraph.build(-1, [vertices[k] for k in range(len(vertices))], edges)


def is_isomorphic_bruteforce(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    """Label-preserving isomorphism by trying every vertex permutation."""
    n = g1.num_vertices
    if max(n, g2.num_vertices) > ORACLE_MAX_VERTICES:
        raise CanonicalCodeError(
            f"permutation oracle is limited to {ORACLE_MAX_VERTICES} vertices"
        )
    if n != g2.num_vertices or g1.num_edges != g2.num_edges:
        return False
    if sorted(g1.vertices) != sorted(g2.vertices):
        return False
    if sorted(le for *_, le in g1.edges) != sorted(le for *_, le in g2.edges):
        return False
    for perm in itertools.permutations(range(n)):
        if any(g1.vertices[v] != g2.vertices[perm[v]] for v in range(n)):
            continue
        if all(g2.adjacency[perm[u]].get(perm[v]) == le for u, v, le in g1.edges):
            return True
    return False


def codes_equal_iff_isomorphic(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    """Whether code equality agrees with the permutation oracle on this pair."""
    same_code = min_dfs_code(g1) == min_dfs_code(g2)
    return same_code == is_isomorphic_bruteforce(g1, g2)
