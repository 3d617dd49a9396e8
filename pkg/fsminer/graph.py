"""Labeled graph model, transaction-file I/O and the edge-support index."""

from __future__ import annotations

import io
import logging
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

from pydantic import BaseModel

from fsminer.errors import GraphFormatError, InvalidGraphError

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class LabelTable:
    """Interns label tokens to dense ids in order of first appearance."""

    tokens: list[str] = field(default_factory=list)
    ids: dict[str, int] = field(default_factory=dict)

    def intern(self, token: str) -> int:
        lid = self.ids.get(token)
        if lid is None:
            lid = len(self.tokens)
            self.ids[token] = lid
            self.tokens.append(token)
        return lid

    def token(self, lid: int) -> str:
        return self.tokens[lid]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(slots=True)
class LabeledGraph:
    """A simple undirected labeled graph with dense vertex indices.

    `adjacency[u]` maps each neighbor of u to the label id of the edge.
    """

    id: int
    vertices: list[int]
    edges: list[tuple[int, int, int]]
    adjacency: list[dict[int, int]] = field(repr=False)

    @classmethod
    def build(
        cls, gid: int, vertices: Sequence[int], edges: Iterable[tuple[int, int, int]]
    ) -> LabeledGraph:
        """Build a graph, rejecting self-loops and multi-edges."""
        adjacency: list[dict[int, int]] = [{} for _ in vertices]
        kept: list[tuple[int, int, int]] = []
        for u, v, le in edges:
            if not (0 <= u < len(vertices) and 0 <= v < len(vertices)):
                raise InvalidGraphError(f"edge ({u},{v}) references unknown vertex")
            if u == v:
                raise InvalidGraphError(f"self-loop on vertex {u}")
            if v in adjacency[u]:
                raise InvalidGraphError(f"duplicate edge ({u},{v})")
            adjacency[u][v] = le
            adjacency[v][u] = le
            kept.append((u, v, le))
        return cls(id=gid, vertices=list(vertices), edges=kept, adjacency=adjacency)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_label(self, u: int, v: int) -> int | None:
        return self.adjacency[u].get(v)

    def is_connected(self) -> bool:
        if not self.vertices:
            return False
        seen = {0}
        todo = deque([0])
        while todo:
            u = todo.popleft()
            for w in self.adjacency[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == len(self.vertices)

    def relabeled(self, order: Sequence[int], gid: int | None = None) -> LabeledGraph:
        """Return a copy whose vertex i is vertex `order[i]` of this graph."""
        position = {old: new for new, old in enumerate(order)}
        return LabeledGraph.build(
            self.id if gid is None else gid,
            [self.vertices[old] for old in order],
            [(position[u], position[v], le) for u, v, le in self.edges],
        )


def induced_subgraph(
    g: LabeledGraph, vertices: Sequence[int], gid: int = -1
) -> LabeledGraph:
    """The subgraph of `g` induced by `vertices`, renumbered in the given order."""
    position = {v: i for i, v in enumerate(vertices)}
    edges = []
    for u in vertices:
        for w, le in g.adjacency[u].items():
            if w in position and position[u] < position[w]:
                edges.append((position[u], position[w], le))
    return LabeledGraph.build(gid, [g.vertices[v] for v in vertices], edges)


@dataclass(slots=True)
class GraphDatabase:
    graphs: list[LabeledGraph] = field(default_factory=list)
    vertex_labels: LabelTable = field(default_factory=LabelTable)
    edge_labels: LabelTable = field(default_factory=LabelTable)
    rejected: int = field(default=0, compare=False)

    @property
    def n(self) -> int:
        return len(self.graphs)

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, gid: int) -> LabeledGraph:
        return self.graphs[gid]


class EdgeTriple(NamedTuple):
    """An unordered labeled edge in canonical orientation (la <= lb)."""

    la: int
    le: int
    lb: int

    @classmethod
    def of(cls, la: int, le: int, lb: int) -> EdgeTriple:
        return cls(la, le, lb) if la <= lb else cls(lb, le, la)


class EdgeSupportIndex:
    """Edge triple -> support-set, each support-set an int bitset over graph ids."""

    __slots__ = ("n", "_bits")

    def __init__(self, n: int, bits: dict[EdgeTriple, int] | None = None) -> None:
        self.n = n
        self._bits: dict[EdgeTriple, int] = bits or {}

    def bits(self, triple: EdgeTriple) -> int:
        return self._bits.get(triple, 0)

    def support(self, triple: EdgeTriple) -> int:
        return self.bits(triple).bit_count()

    def support_set(self, triple: EdgeTriple) -> list[int]:
        bits = self.bits(triple)
        return [gid for gid in range(self.n) if bits >> gid & 1]

    def triples(self) -> list[EdgeTriple]:
        return sorted(self._bits)

    def __len__(self) -> int:
        return len(self._bits)


def edge_triple(g: LabeledGraph, u: int, v: int, le: int) -> EdgeTriple:
    return EdgeTriple.of(g.vertices[u], le, g.vertices[v])


def build_edge_support_index(db: GraphDatabase) -> EdgeSupportIndex:
    bits: dict[EdgeTriple, int] = {}
    for g in db.graphs:
        mask = 1 << g.id
        for u, v, le in g.edges:
            t = edge_triple(g, u, v, le)
            bits[t] = bits.get(t, 0) | mask
    return EdgeSupportIndex(db.n, bits)


class DbStats(BaseModel):
    n_graphs: int
    avg_vertices: float
    avg_edges: float
    n_vertex_labels: int
    n_edge_labels: int


def db_stats(db: GraphDatabase) -> DbStats:
    if not db.graphs:
        return DbStats(
            n_graphs=0, avg_vertices=0.0, avg_edges=0.0, n_vertex_labels=0, n_edge_labels=0
        )
    vlabels = {lv for g in db.graphs for lv in g.vertices}
    elabels = {le for g in db.graphs for _, _, le in g.edges}
    return DbStats(
        n_graphs=db.n,
        avg_vertices=sum(g.num_vertices for g in db.graphs) / db.n,
        avg_edges=sum(g.num_edges for g in db.graphs) / db.n,
        n_vertex_labels=len(vlabels),
        n_edge_labels=len(elabels),
    )


def _int_field(token: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"expected an integer, got {token!r}", line_no) from None


# reserved by the canonical code text
_RESERVED = frozenset(",;()")


def _label_field(token: str, line_no: int) -> str:
    if _RESERVED.intersection(token):
        raise GraphFormatError(f"label {token!r} contains one of ',;()'", line_no)
    return token


def parse_database(
    stream: TextIO | Iterable[str] | str, strict: bool = False
) -> GraphDatabase:
    """Parse the `t # / v / e` transaction format.

    Malformed lines raise `GraphFormatError`. Transactions that are not simple
    or not connected are skipped with a warning (or raise `InvalidGraphError`
    when `strict`); surviving graphs are numbered 0..n-1 in file order.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    db = GraphDatabase()
    header: str | None = None
    vertices: list[int] = []
    edges: list[tuple[int, int, int]] = []

    def close() -> None:
        if header is None:
            return
        try:
            g = LabeledGraph.build(db.n, vertices, edges)
            if not g.is_connected():
                raise InvalidGraphError("graph is not connected")
        except InvalidGraphError as e:
            if strict:
                raise InvalidGraphError(f"transaction {header}: {e}") from e
            db.rejected += 1
            logger.warning("Skipping transaction %s: %s", header, e)
            return
        db.graphs.append(g)

    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        cols = line.split()
        kind = cols[0]
        if kind == "t":
            close()
            if len(cols) != 3 or cols[1] != "#":
                raise GraphFormatError("expected 't # <gid>'", line_no)
            if cols[2] == "-1":
                header = None
                break
            header, vertices, edges = cols[2], [], []
        elif kind.startswith("#"):
            continue
        elif kind == "v":
            if header is None:
                raise GraphFormatError("vertex outside of a transaction", line_no)
            if len(cols) != 3:
                raise GraphFormatError("expected 'v <vid> <label>'", line_no)
            vid = _int_field(cols[1], line_no)
            if vid != len(vertices):
                raise GraphFormatError(
                    f"vertex id {vid} out of order, expected {len(vertices)}", line_no
                )
            vertices.append(db.vertex_labels.intern(_label_field(cols[2], line_no)))
        elif kind == "e":
            if header is None:
                raise GraphFormatError("edge outside of a transaction", line_no)
            if len(cols) != 4:
                raise GraphFormatError("expected 'e <u> <v> <label>'", line_no)
            u, v = _int_field(cols[1], line_no), _int_field(cols[2], line_no)
            if not (0 <= u < len(vertices) and 0 <= v < len(vertices)):
                raise GraphFormatError(f"edge ({u},{v}) before its vertices", line_no)
            edges.append((u, v, db.edge_labels.intern(_label_field(cols[3], line_no))))
        else:
            raise GraphFormatError(f"unknown record type {kind!r}", line_no)
    close()
    if db.rejected:
        logger.warning("Skipped %d invalid transaction(s)", db.rejected)
    return db


def write_database(db: GraphDatabase, out: TextIO | None = None) -> str:
    """Render `db` in transaction format; also written to `out` if given."""
    lines: list[str] = []
    for g in db.graphs:
        lines.append(f"t # {g.id}")
        lines.extend(
            f"v {i} {db.vertex_labels.token(lv)}" for i, lv in enumerate(g.vertices)
        )
        lines.extend(f"e {u} {v} {db.edge_labels.token(le)}" for u, v, le in g.edges)
    text = "".join(f"{line}\n" for line in lines)
    if out is not None:
        out.write(text)
    return text
