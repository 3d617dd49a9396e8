"""Metropolis-Hastings walk over the connected induced p-subgraphs of one graph."""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import NamedTuple

import numpy as np

from fsminer.errors import GraphTooSmallError
from fsminer.graph import EdgeSupportIndex, EdgeTriple, LabeledGraph

logger = logging.getLogger(__name__)

DEFAULT_RETRY_CAP = 1000


class ScoreFn(StrEnum):
    S1 = "s1"
    S2 = "s2"
    UNIFORM = "uniform"


class MhMode(StrEnum):
    # retry proposals until one is accepted
    PAPER = "paper"
    # one proposal per step, rejection keeps the current state
    STRICT = "strict"


class NeighborMove(NamedTuple):
    v_out: int
    v_in: int


@dataclass(slots=True, frozen=True)
class SubgraphState:
    host: int
    vertices: tuple[int, ...]
    neighbor_count: int
    score: float


class ChainRegistry:
    """The saved chain state of every database graph sampled so far."""

    def __init__(self) -> None:
        self._states: dict[int, SubgraphState] = {}

    def get(self, gid: int) -> SubgraphState | None:
        return self._states.get(gid)

    def save(self, state: SubgraphState) -> None:
        self._states[state.host] = state

    def __contains__(self, gid: int) -> bool:
        return gid in self._states

    def __len__(self) -> int:
        return len(self._states)

    def items(self):
        return self._states.items()


def _components(g: LabeledGraph, vertices: Iterable[int]) -> list[set[int]]:
    remaining = set(vertices)
    comps = []
    while remaining:
        start = remaining.pop()
        comp = {start}
        todo = deque([start])
        while todo:
            u = todo.popleft()
            for w in g.adjacency[u]:
                if w in remaining:
                    remaining.discard(w)
                    comp.add(w)
                    todo.append(w)
        comps.append(comp)
    return comps


def is_connected_subset(g: LabeledGraph, vertices: Iterable[int]) -> bool:
    return len(_components(g, vertices)) == 1


def enumerate_neighbors(g: LabeledGraph, vertices: Sequence[int]) -> list[NeighborMove]:
    """All single-vertex swaps that keep the induced subgraph connected.

    For each outgoing vertex the rest of the set is split into connected
    components; an incoming vertex is valid iff it touches every component.
    """
    members = set(vertices)
    adj = g.adjacency
    moves: list[NeighborMove] = []
    for v_out in vertices:
        rest = members - {v_out}
        comps = _components(g, rest)
        reach = [set().union(*(adj[u].keys() for u in comp)) for comp in comps]
        candidates = set.intersection(*reach) - members
        moves.extend(NeighborMove(v_out, v_in) for v_in in sorted(candidates))
    return moves


def count_neighbors(g: LabeledGraph, vertices: Sequence[int]) -> int:
    return len(enumerate_neighbors(g, vertices))


def apply_move(vertices: Sequence[int], move: NeighborMove) -> tuple[int, ...]:
    return tuple(sorted(move.v_in if v == move.v_out else v for v in vertices))


def induced_triples(g: LabeledGraph, vertices: Iterable[int]) -> Iterator[EdgeTriple]:
    members = set(vertices)
    labels = g.vertices
    for u in members:
        for w, le in g.adjacency[u].items():
            if u < w and w in members:
                yield EdgeTriple.of(labels[u], le, labels[w])


def score_s1(vertices: Iterable[int], g: LabeledGraph, index: EdgeSupportIndex) -> float:
    """Mean support of the induced edges."""
    supports = [index.support(t) for t in induced_triples(g, vertices)]
    return sum(supports) / len(supports)


def score_s2(vertices: Iterable[int], g: LabeledGraph, index: EdgeSupportIndex) -> int:
    """Size of the intersection of the induced edges' support-sets."""
    bits = -1
    for t in induced_triples(g, vertices):
        bits &= index.bits(t)
    return bits.bit_count() if bits >= 0 else 0


def score(
    variant: ScoreFn,
    vertices: Iterable[int],
    g: LabeledGraph,
    index: EdgeSupportIndex | None,
) -> float:
    if variant is ScoreFn.UNIFORM:
        return 1.0
    if index is None:
        raise ValueError(f"score {variant} needs an edge support index")
    if variant is ScoreFn.S1:
        return score_s1(vertices, g, index)
    return float(score_s2(vertices, g, index))


def make_state(
    g: LabeledGraph,
    vertices: Sequence[int],
    variant: ScoreFn,
    index: EdgeSupportIndex | None,
) -> SubgraphState:
    vertices = tuple(sorted(vertices))
    return SubgraphState(
        host=g.id,
        vertices=vertices,
        neighbor_count=count_neighbors(g, vertices),
        score=score(variant, vertices, g, index),
    )


def init_state(
    g: LabeledGraph,
    p: int,
    rng: np.random.Generator,
    variant: ScoreFn = ScoreFn.UNIFORM,
    index: EdgeSupportIndex | None = None,
) -> SubgraphState:
    """Grow a connected p-subgraph from a uniformly chosen edge of `g`."""
    if p < 2:
        raise ValueError(f"pattern size must be at least 2, got {p}")
    if g.num_vertices < p:
        raise GraphTooSmallError(f"graph {g.id} has {g.num_vertices} vertices < p={p}")
    u, v, _ = g.edges[rng.integers(g.num_edges)]
    members = {u, v}
    while len(members) < p:
        frontier = sorted(set().union(*(g.adjacency[x].keys() for x in members)) - members)
        members.add(frontier[rng.integers(len(frontier))])
    return make_state(g, list(members), variant, index)


def acceptance_probability(d_x: int, s_x: float, d_y: int, s_y: float) -> float:
    """min(1, (d_x * s_y) / (d_y * s_x))."""
    denominator = d_y * s_x
    if denominator <= 0:
        raise ValueError(f"acceptance undefined for d_y={d_y}, s_x={s_x}")
    return min(1.0, (d_x * s_y) / denominator)


def mh_step(
    g: LabeledGraph,
    state: SubgraphState,
    variant: ScoreFn,
    mode: MhMode,
    rng: np.random.Generator,
    index: EdgeSupportIndex | None = None,
    retry_cap: int = DEFAULT_RETRY_CAP,
) -> SubgraphState:
    moves = enumerate_neighbors(g, state.vertices)
    d_x = len(moves)
    if d_x == 0:
        logger.debug("State %s of graph %d has no neighbors, reinitialising", state.vertices, g.id)
        return init_state(g, len(state.vertices), rng, variant, index)

    attempts = 1 if mode is MhMode.STRICT else retry_cap
    for _ in range(attempts):
        y = apply_move(state.vertices, moves[rng.integers(d_x)])
        d_y = count_neighbors(g, y)
        s_y = score(variant, y, g, index)
        if rng.random() <= acceptance_probability(d_x, state.score, d_y, s_y):
            return SubgraphState(host=g.id, vertices=y, neighbor_count=d_y, score=s_y)

    if mode is MhMode.PAPER:
        logger.warning(
            "Graph %d: no proposal accepted after %d tries, keeping state", g.id, retry_cap
        )
    if state.neighbor_count != d_x:
        return SubgraphState(g.id, state.vertices, d_x, state.score)
    return state


def transition_matrix(
    g: LabeledGraph,
    states: Sequence[Sequence[int]],
    variant: ScoreFn,
    index: EdgeSupportIndex | None = None,
) -> np.ndarray:
    """Exact one-step kernel of the STRICT walk over an enumerated state space.

    Row x puts (1/d_x)·acceptance(x, y) on every neighbor y and the rejected
    mass on x itself.
    """
    keys = [tuple(sorted(s)) for s in states]
    position = {k: i for i, k in enumerate(keys)}
    scores = [score(variant, k, g, index) for k in keys]
    degrees = [count_neighbors(g, k) for k in keys]
    t = np.zeros((len(keys), len(keys)))
    for x, key in enumerate(keys):
        moves = enumerate_neighbors(g, key)
        for move in moves:
            y = position[apply_move(key, move)]
            acc = acceptance_probability(degrees[x], scores[x], degrees[y], scores[y])
            t[x, y] += acc / len(moves)
        t[x, x] += 1.0 - t[x].sum()
    return t


def target_distribution(
    g: LabeledGraph,
    states: Sequence[Sequence[int]],
    variant: ScoreFn,
    index: EdgeSupportIndex | None = None,
) -> np.ndarray:
    """π(x) ∝ score(x) over the given states."""
    weights = np.array([score(variant, s, g, index) for s in states], dtype=float)
    return weights / weights.sum()
