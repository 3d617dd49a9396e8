"""Capacity-bounded pattern queue with the lower-half eviction gate."""

from __future__ import annotations

import json
from fractions import Fraction
from collections.abc import Iterable, Iterator
from enum import StrEnum
from typing import TextIO

from pydantic import BaseModel, Field
from sortedcontainers import SortedList

from fsminer.canonical import CanonicalCode
from fsminer.errors import EmptyQueueError

DEFAULT_CAPACITY = 100_000

# (-support_a, -score, -last_update_iter, code): ascending order is best-first
OrderKey = tuple[int, float, int, str]


class RecordOutcome(StrEnum):
    UPDATED = "updated"
    INSERTED = "inserted"
    INSERTED_WITH_EVICTION = "inserted_with_eviction"
    UNCHANGED = "unchanged"


class PatternEntry(BaseModel):
    code: CanonicalCode
    idset: set[int] = Field(default_factory=set)
    score: float
    last_update_iter: int = 0

    @property
    def support_a(self) -> int:
        return len(self.idset)

    def order_key(self) -> OrderKey:
        return (-len(self.idset), -self.score, -self.last_update_iter, self.code)


class PatternRecord(BaseModel):
    """One line of a queue snapshot."""

    rank: int
    code: CanonicalCode
    support_a: int
    idset: list[int]
    score: float
    last_update_iter: int


def tail_size(m: int) -> int:
    """Entries in the lower half of an m-entry queue; the middle one of an odd queue is head."""
    return max(1, m // 2) if m else 0


class PatternQueue:
    """Patterns indexed by code and by the composite order.

    The order is support_a desc, score desc, last update desc, code asc.
    `_tail_sum` is the exact (rational) score sum of `_order[_boundary:]`,
    kept equal to the lower half after every mutation.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError(f"queue capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._by_code: dict[CanonicalCode, PatternEntry] = {}
        self._order: SortedList = SortedList()
        self._boundary = 0
        self._tail_sum = Fraction(0)

    def __len__(self) -> int:
        return len(self._by_code)

    def __contains__(self, code: CanonicalCode) -> bool:
        return code in self._by_code

    def get(self, code: CanonicalCode) -> PatternEntry | None:
        return self._by_code.get(code)

    @property
    def full(self) -> bool:
        return len(self._by_code) >= self.capacity

    def _rebalance(self) -> None:
        want = len(self._order) - tail_size(len(self._order))
        while self._boundary < want:
            self._tail_sum += Fraction(self._order[self._boundary][1])
            self._boundary += 1
        while self._boundary > want:
            self._boundary -= 1
            self._tail_sum -= Fraction(self._order[self._boundary][1])

    def _add_key(self, key: OrderKey) -> None:
        self._order.add(key)
        if self._order.bisect_left(key) >= self._boundary:
            self._tail_sum -= Fraction(key[1])
        else:
            self._boundary += 1
        self._rebalance()

    def _remove_key(self, key: OrderKey) -> None:
        pos = self._order.index(key)
        self._order.remove(key)
        if pos >= self._boundary:
            self._tail_sum += Fraction(key[1])
        else:
            self._boundary -= 1
        self._rebalance()

    def _exact_tail_avg(self) -> Fraction:
        m = len(self._order)
        if m == 0:
            raise EmptyQueueError("lower-half average of an empty queue")
        return self._tail_sum / tail_size(m)

    def lower_half_avg_score(self) -> float:
        return float(self._exact_tail_avg())

    def passes_gate(self, score: float) -> bool:
        """True unless the queue is full and `score` does not beat the lower-half average."""
        return not self.full or Fraction(score) > self._exact_tail_avg()

    def evict_last(self) -> PatternEntry:
        if not self._order:
            raise EmptyQueueError("evict from an empty queue")
        key = self._order[-1]
        self._remove_key(key)
        return self._by_code.pop(key[3])

    def record(
        self, code: CanonicalCode, gid: int, score: float, iteration: int
    ) -> RecordOutcome:
        entry = self._by_code.get(code)
        if entry is not None:
            if gid in entry.idset:
                return RecordOutcome.UNCHANGED
            self._remove_key(entry.order_key())
            entry.idset.add(gid)
            entry.last_update_iter = iteration
            self._add_key(entry.order_key())
            return RecordOutcome.UPDATED

        outcome = RecordOutcome.INSERTED
        if self.full:
            self.evict_last()
            outcome = RecordOutcome.INSERTED_WITH_EVICTION
        entry = PatternEntry(code=code, idset={gid}, score=score, last_update_iter=iteration)
        self._by_code[code] = entry
        self._add_key(entry.order_key())
        return outcome

    def iter_ordered(self) -> Iterator[PatternEntry]:
        for key in self._order:
            yield self._by_code[key[3]]

    def top(self, k: int) -> list[PatternEntry]:
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        return [self._by_code[key[3]] for key in self._order.islice(0, k)]

    def snapshot(self, k: int | None = None) -> list[PatternRecord]:
        entries = self.iter_ordered() if k is None else self.top(k)
        return [
            PatternRecord(
                rank=rank,
                code=e.code,
                support_a=e.support_a,
                idset=sorted(e.idset),
                score=e.score,
                last_update_iter=e.last_update_iter,
            )
            for rank, e in enumerate(entries, start=1)
        ]

    def write_jsonl(self, out: TextIO, k: int | None = None) -> None:
        for record in self.snapshot(k):
            out.write(record.model_dump_json())
            out.write("\n")

    def check_invariants(self) -> None:
        """Raise AssertionError if the two indexes or the tail sum disagree."""
        assert len(self._order) == len(self._by_code) <= self.capacity
        keys = list(self._order)
        assert keys == sorted(keys)
        assert {k[3] for k in keys} == set(self._by_code)
        for key in keys:
            assert self._by_code[key[3]].order_key() == key
        tail = keys[len(keys) - tail_size(len(keys)):]
        assert self._tail_sum == sum(Fraction(-k[1]) for k in tail)

    @classmethod
    def merge(cls, queues: Iterable[PatternQueue], capacity: int) -> PatternQueue:
        """Union of several queues: support-lists are unioned, the best `capacity` kept."""
        merged: dict[CanonicalCode, PatternEntry] = {}
        for queue in queues:
            for entry in queue.iter_ordered():
                into = merged.get(entry.code)
                if into is None:
                    merged[entry.code] = entry.model_copy(deep=True)
                else:
                    into.idset |= entry.idset
                    into.last_update_iter = max(into.last_update_iter, entry.last_update_iter)
        out = cls(capacity)
        for entry in sorted(merged.values(), key=PatternEntry.order_key)[:capacity]:
            out._by_code[entry.code] = entry
            out._add_key(entry.order_key())
        return out


def read_jsonl(stream: TextIO) -> list[PatternRecord]:
    records = []
    for line in stream:
        line = line.strip()
        if line:
            records.append(PatternRecord.model_validate(json.loads(line)))
    return records
