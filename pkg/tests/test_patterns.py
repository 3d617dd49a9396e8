import io

import numpy as np
import pytest

from fsminer.errors import EmptyQueueError
from fsminer.patterns import PatternQueue, RecordOutcome, read_jsonl, tail_size


def _queue(*items: tuple[str, int, float], capacity: int = 10) -> PatternQueue:
    q = PatternQueue(capacity)
    for it, (code, gid, score) in enumerate(items, start=1):
        q.record(code, gid, score, it)
    return q


@pytest.mark.parametrize("m,expected", [(0, 0), (1, 1), (2, 1), (3, 1), (4, 2), (5, 2), (10, 5)])
def test_tail_size(m, expected):
    assert tail_size(m) == expected


def test_record_outcomes_and_order():
    q = PatternQueue(3)
    assert q.record("a", 0, 5.0, 1) is RecordOutcome.INSERTED
    assert q.record("b", 0, 3.0, 2) is RecordOutcome.INSERTED
    assert q.record("c", 0, 1.0, 3) is RecordOutcome.INSERTED
    assert q.record("c", 0, 1.0, 4) is RecordOutcome.UNCHANGED
    assert q.record("c", 1, 1.0, 5) is RecordOutcome.UPDATED
    assert [e.code for e in q.iter_ordered()] == ["c", "a", "b"]
    assert q.get("c").support_a == 2
    assert q.get("c").last_update_iter == 5
    q.check_invariants()


def test_full_queue_evicts_last_entry():
    q = _queue(("a", 0, 5.0), ("b", 0, 3.0), ("c", 0, 1.0), capacity=3)
    assert q.record("d", 1, 9.0, 4) is RecordOutcome.INSERTED_WITH_EVICTION
    assert "c" not in q
    assert len(q) == 3
    q.check_invariants()


def test_ties_break_on_recency_then_code():
    q = _queue(("b", 0, 2.0), ("a", 0, 2.0), ("c", 0, 2.0))
    assert [e.code for e in q.iter_ordered()] == ["c", "a", "b"]
    q = PatternQueue()
    q.record("b", 0, 2.0, 7)
    q.record("a", 0, 2.0, 7)
    assert [e.code for e in q.iter_ordered()] == ["a", "b"]


def test_lower_half_average_and_gate():
    q = _queue(("a", 0, 8.0), ("b", 0, 6.0), ("c", 0, 4.0), ("d", 0, 2.0), capacity=4)
    assert q.lower_half_avg_score() == pytest.approx(3.0)
    assert not q.passes_gate(3.0)
    assert q.passes_gate(3.5)
    q.evict_last()
    # three entries: only the last one is the lower half
    assert q.lower_half_avg_score() == pytest.approx(4.0)
    assert q.passes_gate(0.0)


def test_single_entry_queue_gate():
    q = _queue(("a", 0, 2.0), capacity=1)
    assert q.lower_half_avg_score() == 2.0
    assert not q.passes_gate(2.0)
    assert q.passes_gate(2.5)


def test_empty_queue_errors():
    q = PatternQueue(2)
    with pytest.raises(EmptyQueueError):
        q.lower_half_avg_score()
    with pytest.raises(EmptyQueueError):
        q.evict_last()
    assert q.passes_gate(0.0)
    with pytest.raises(ValueError):
        q.top(0)
    with pytest.raises(ValueError):
        PatternQueue(0)


def test_snapshot_and_jsonl_round_trip():
    q = _queue(("a", 3, 5.0), ("a", 1, 5.0), ("b", 2, 1.0))
    out = io.StringIO()
    q.write_jsonl(out)
    records = read_jsonl(io.StringIO(out.getvalue()))
    assert [(r.rank, r.code, r.support_a, r.idset) for r in records] == [
        (1, "a", 2, [1, 3]),
        (2, "b", 1, [2]),
    ]
    assert records == q.snapshot()
    assert len(q.snapshot(1)) == 1


def test_merge_unions_support_lists():
    q1 = _queue(("a", 0, 5.0), ("b", 1, 2.0))
    q2 = _queue(("a", 2, 5.0), ("c", 3, 1.0))
    merged = PatternQueue.merge([q1, q2], capacity=2)
    assert [e.code for e in merged.iter_ordered()] == ["a", "b"]
    assert merged.get("a").idset == {0, 2}
    assert q1.get("a").idset == {0}
    merged.check_invariants()


@pytest.mark.timeout(60)
def test_randomized_operations_keep_contract():
    rng = np.random.default_rng(7)
    q = PatternQueue(100)
    codes = [f"p{i}" for i in range(300)]
    for it in range(1, 100_001):
        code = codes[rng.integers(len(codes))]
        score = float(int(code[1:]) % 17 + 1)
        if q.passes_gate(score):
            q.record(code, int(rng.integers(50)), score, it)
        assert len(q) <= 100
        if it % 1000 == 0:
            q.check_invariants()
            assert len({e.code for e in q.iter_ordered()}) == len(q)


@pytest.mark.parametrize("seed", range(20))
def test_gate_rejects_equal_fractional_score_after_churn(seed):
    rng = np.random.default_rng(seed)
    scores = [0.1, 0.2, 0.7, 1 / 3, 5 / 3, 2.9, 1.3]
    q = PatternQueue(2)
    for it in range(1, 3001):
        code = f"p{rng.integers(40)}"
        entry = q.get(code)
        score = entry.score if entry is not None else scores[rng.integers(len(scores))]
        q.record(code, int(rng.integers(5)), score, it)
    q.check_invariants()
    last = list(q.iter_ordered())[-1]
    assert q.lower_half_avg_score() == last.score
    assert not q.passes_gate(last.score)
