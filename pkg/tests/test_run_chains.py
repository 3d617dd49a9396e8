import logging

import pytest

from fsminer.miner import MineConfig, derive_seeds, run_chains, run_chains_async
from tests import desk_db, small_hosts, two_graph_db


@pytest.mark.asyncio
async def test_chains_run_full_budget_without_agreement():
    config = MineConfig(p=3, k=5, max_iter=300, checkpoint_every=50, num_chains=3, jaccard_eps=0.0)
    result = await run_chains_async(small_hosts(), config)
    assert result.iterations_run == 300
    assert result.seeds == derive_seeds(0, 3)
    assert [p.iteration for p in result.convergence] == [50, 100, 150, 200, 250, 300]
    assert all(0.0 <= p.jaccard <= 1.0 for p in result.convergence)
    assert len(result.snapshots) == 18
    assert len(result.top_k) == 5


@pytest.mark.asyncio
async def test_chains_stop_once_they_agree(caplog):
    config = MineConfig(p=2, k=3, max_iter=1000, checkpoint_every=200, num_chains=3)
    with caplog.at_level(logging.INFO, logger="fsminer.miner"):
        result = await run_chains_async(two_graph_db(), config)
    assert result.iterations_run == 200
    assert result.convergence[-1].jaccard == 0.0
    assert "Chains agree at iteration 200" in caplog.text


@pytest.mark.asyncio
async def test_merged_support_is_union_over_chains():
    result = await run_chains_async(
        two_graph_db(), MineConfig(p=2, k=3, max_iter=400, num_chains=2), seeds=[11, 12]
    )
    assert result.seeds == [11, 12]
    assert {r.code: r.idset for r in result.top_k}["(0,1,A,1,B)"] == [0, 1]


@pytest.mark.asyncio
async def test_single_chain_has_no_convergence_trace():
    result = await run_chains_async(two_graph_db(), MineConfig(p=2, k=3, max_iter=100))
    assert result.convergence == []
    assert result.iterations_run == 100


def test_run_chains_is_deterministic():
    config = MineConfig(p=3, k=10, max_iter=400, num_chains=4, seed=9, jaccard_eps=0.0)
    db = small_hosts()
    assert run_chains(db, config).top_k == run_chains(db, config).top_k


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_chain_disagreement_shrinks():
    config = MineConfig(
        p=3, k=20, max_iter=20_000, checkpoint_every=1_000, num_chains=10, jaccard_eps=0.0
    )
    result = run_chains(desk_db(), config)
    trace = [p.jaccard for p in result.convergence]
    assert len(trace) == 20
    assert trace[-1] <= trace[0]
    assert min(trace) <= 0.2
