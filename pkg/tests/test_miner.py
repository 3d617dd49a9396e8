import io
import logging
import math
import time
from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError

from fsminer.errors import CanonicalCodeError, NoEligibleGraphError
from fsminer.graph import build_edge_support_index
from fsminer.miner import (
    MineConfig,
    MiningRun,
    derive_seeds,
    jaccard_distance,
    mean_pairwise_jaccard,
    mine,
    mine_uniform_baseline,
    read_result,
    write_result,
)
from fsminer.oracle import ground_truth, precision_at_k
from fsminer.sampler import ScoreFn
from tests import desk_db, small_hosts, two_graph_db

AB = "(0,1,A,1,B)"


def test_config_validation():
    with pytest.raises(ValidationError):
        MineConfig(p=1, max_iter=10)
    with pytest.raises(ValidationError):
        MineConfig(p=3, k=11, queue_capacity=10, max_iter=10)
    with pytest.raises(ValidationError):
        MineConfig(p=3, max_iter=-1)
    config = MineConfig(p=3, max_iter=1000)
    assert config.score is ScoreFn.S2
    assert config.queue_capacity == 100_000
    assert config.checkpoint_interval == 10
    assert MineConfig(p=3, max_iter=5).checkpoint_interval == 1


def test_mine_is_deterministic():
    db = small_hosts()
    config = MineConfig(p=3, k=10, max_iter=500, seed=7)
    a, b = mine(db, config), mine(db, config)
    assert a.top_k == b.top_k
    out_a, out_b = io.StringIO(), io.StringIO()
    write_result(a, out_a)
    write_result(b, out_b)
    assert out_a.getvalue() == out_b.getvalue()
    assert mine(db, config.model_copy(update={"seed": 8})).seeds == [8]


def test_mine_two_graph_patterns():
    result = mine(two_graph_db(), MineConfig(p=2, k=3, max_iter=200, seed=1))
    assert result.iterations_run == 200
    assert {r.code for r in result.top_k} == {AB, "(0,1,B,1,C)", "(0,1,A,1,C)"}
    assert [r.rank for r in result.top_k] == [1, 2, 3]
    by_code = {r.code: r for r in result.top_k}
    assert by_code[AB].idset == [0, 1]
    assert by_code["(0,1,A,1,C)"].idset == [1]
    assert len(result.snapshots) == 100


def test_zero_iterations_gives_empty_result():
    result = mine(two_graph_db(), MineConfig(p=2, max_iter=0))
    assert result.iterations_run == 0
    assert result.top_k == []


def test_small_graphs_are_skipped(caplog):
    with caplog.at_level(logging.WARNING, logger="fsminer.miner"):
        result = mine(small_hosts(), MineConfig(p=6, k=5, max_iter=50))
    assert result.skipped_graphs == [2, 5]
    assert "Excluding 2 graph(s)" in caplog.text


def test_no_eligible_graphs():
    with pytest.raises(NoEligibleGraphError, match="no eligible graphs"):
        mine(two_graph_db(), MineConfig(p=99, max_iter=10))


def test_pattern_size_above_code_limit():
    with pytest.raises(CanonicalCodeError):
        mine(small_hosts(), MineConfig(p=5, max_iter=10, max_code_vertices=4))


def test_gated_samples_are_never_coded():
    db = small_hosts()
    run = MiningRun(db, MineConfig(p=3, k=2, queue_capacity=2, max_iter=0), seed=4)
    calls = []
    coder = run._code

    def counting(gid, vertices):
        calls.append((gid, vertices))
        return coder(gid, vertices)

    run._code = counting
    run.advance(2000)
    assert run.gated > 0
    assert len(calls) == run.iteration - run.gated
    assert run.codes_computed <= len(calls)
    run.queue.check_invariants()


def test_code_cache_avoids_recomputation():
    run = MiningRun(two_graph_db(), MineConfig(p=2, k=3, max_iter=0), seed=0)
    run.advance(500)
    # five distinct vertex sets exist across the two graphs
    assert run.codes_computed <= 5


def test_checkpoint_callback():
    seen = []
    mine(
        small_hosts(),
        MineConfig(p=3, k=5, max_iter=95, checkpoint_every=10),
        on_checkpoint=lambda run: seen.append(run.iteration),
    )
    assert seen == [10, 20, 30, 40, 50, 60, 70, 80, 90, 95]


def test_result_file_round_trip():
    result = mine(small_hosts(), MineConfig(p=3, k=5, max_iter=300, seed=2))
    out = io.StringIO()
    write_result(result, out)
    header_line = out.getvalue().splitlines()[0]
    assert '"type":"header"' in header_line
    assert "timings" not in header_line
    header, records = read_result(io.StringIO(out.getvalue()))
    assert header.config == result.config
    assert header.iterations == 300
    assert records == result.top_k

    out = io.StringIO()
    write_result(result, out, include_timings=True)
    header, _ = read_result(io.StringIO(out.getvalue()))
    assert header.timings is not None


def test_jaccard():
    assert jaccard_distance(set(), set()) == 0.0
    assert jaccard_distance({"a", "b"}, {"b", "c"}) == pytest.approx(2 / 3)
    assert mean_pairwise_jaccard([{"a"}]) == 0.0
    assert mean_pairwise_jaccard([{"a"}, {"a"}, {"b"}]) == pytest.approx(2 / 3)


def test_derive_seeds():
    seeds = derive_seeds(5, 4)
    assert seeds == derive_seeds(5, 4)
    assert len(set(seeds)) == 4


@pytest.mark.timeout(120)
def test_uniform_expected_support_after_one_visit_per_graph():
    db = two_graph_db()
    index = build_edge_support_index(db)
    config = MineConfig(p=2, k=3, queue_capacity=10, max_iter=2, score=ScoreFn.UNIFORM)
    supports = []
    for trial in range(10_000):
        run = MiningRun(db, config, seed=trial, index=index)
        run.advance(2)
        entry = run.queue.get(AB)
        supports.append(0 if entry is None else entry.support_a)
    mean = float(np.mean(supports))
    sigma = float(np.std(supports)) / math.sqrt(len(supports))
    assert abs(mean - 5 / 6) <= 3 * sigma


@pytest.fixture(scope="module")
def desk_truth():
    db = desk_db()
    return db, build_edge_support_index(db), ground_truth(db, 4)


def _pr50(db, index, truth, score, iters, seed, ties=True):
    config = MineConfig(p=4, k=50, max_iter=iters, score=score, seed=seed)
    return precision_at_k(mine(db, config, index).ranked(), truth, 50, ties=ties)


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_end_to_end_quality(desk_truth):
    db, index, truth = desk_truth
    assert _pr50(db, index, truth, ScoreFn.S2, 200_000, 1, ties=False) >= 80
    rising = sum(
        _pr50(db, index, truth, ScoreFn.S2, 50_000, seed)
        >= _pr50(db, index, truth, ScoreFn.S2, 5_000, seed)
        for seed in range(10)
    )
    assert rising >= 8


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_biased_beats_uniform(desk_truth):
    db, index, truth = desk_truth
    wins = sum(
        _pr50(db, index, truth, ScoreFn.S2, 20_000, seed)
        >= _pr50(db, index, truth, ScoreFn.UNIFORM, 20_000, seed)
        for seed in range(10)
    )
    assert wins >= 8


def test_uniform_baseline_overrides_score():
    result = mine_uniform_baseline(two_graph_db(), MineConfig(p=2, k=3, max_iter=10))
    assert result.config.score is ScoreFn.UNIFORM


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_iteration_time_grows_linearly_with_pattern_size():
    db = desk_db()
    index = build_edge_support_index(db)
    sizes = [4, 6, 8, 10]
    per_iter = []
    for p in sizes:
        config = MineConfig(p=p, k=50, max_iter=5_000, seed=0)
        start = time.perf_counter()
        mine(db, config, index)
        per_iter.append((time.perf_counter() - start) / config.max_iter)
    slope, intercept = np.polyfit(sizes, per_iter, 1)
    fitted = np.polyval([slope, intercept], sizes)
    ss_res = float(np.sum((np.array(per_iter) - fitted) ** 2))
    ss_tot = float(np.sum((np.array(per_iter) - np.mean(per_iter)) ** 2))
    assert 1 - ss_res / ss_tot >= 0.9


@pytest.mark.timeout(180)
def test_graphs_are_drawn_uniformly_among_eligible():
    db = small_hosts()
    run = MiningRun(db, MineConfig(p=6, k=5, max_iter=0), seed=21)
    assert run.eligible == [0, 1, 3, 4]
    drawn: Counter[int] = Counter()
    sample = run.sample

    def counting(gid):
        drawn[gid] += 1
        return sample(gid)

    run.sample = counting
    steps = 100_000
    run.advance(steps)
    assert set(drawn) == set(run.eligible)
    share = 1 / len(run.eligible)
    sigma = math.sqrt(steps * share * (1 - share))
    for gid in run.eligible:
        assert abs(drawn[gid] - steps * share) <= 5 * sigma


@pytest.mark.timeout(300)
def test_reported_support_never_exceeds_true_support(desk_truth):
    db, index, truth = desk_truth
    for score in (ScoreFn.S1, ScoreFn.S2, ScoreFn.UNIFORM):
        result = mine(db, MineConfig(p=4, k=50, max_iter=20_000, score=score, seed=4), index)
        assert result.top_k
        for record in result.top_k:
            assert record.code in truth.entries
            assert set(record.idset) <= truth.entries[record.code].support_set
            assert record.support_a <= truth.support(record.code)


@pytest.mark.slow
@pytest.mark.timeout(300)
def test_large_patterns_stay_within_time_budget():
    db = desk_db()
    index = build_edge_support_index(db)
    config = MineConfig(p=8, k=50, max_iter=100_000, seed=0)
    start = time.perf_counter()
    result = mine(db, config, index)
    assert result.iterations_run == 100_000
    assert time.perf_counter() - start < 60
