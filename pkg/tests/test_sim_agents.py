import random

import pytest

from tomteam.alignment import cosine_alignment
from tomteam.sim_agents import SimAgent, SimAgentModel, act, build_sim_agents, update_belief
from tomteam.types import ActionVector as V
from tomteam.types import InteractionLog


def model(i, v, rho=0.0, **kw):
    return SimAgentModel(i, V(v), rho=rho, **kw)


def scalar_rounds(vs, rho, rounds):
    """Plain-float replay of the coupling rule for a 1-d, always-full team."""
    hist = [list(vs)]
    for _ in range(rounds - 1):
        prev = hist[-1]
        nxt = []
        for i, v in enumerate(vs):
            peers = [prev[j] for j in range(len(vs)) if j != i]
            nxt.append((1 - rho[i]) * v + rho[i] * sum(peers) / len(peers))
        hist.append(nxt)
    return hist


def full_log(models, rounds, seed=0):
    log = InteractionLog()
    for r in range(1, rounds + 1):
        log = log.append(r, {m.agent_id: act(m, log, seed, r) for m in models})
    return log


def test_rho_zero_plays_latent():
    m = model(0, (0.3, -0.2), rho=0.0)
    log = InteractionLog().append(1, {0: V((5.0, 5.0)), 1: V((-9.0, 1.0))})
    assert act(m, log, 0).values == (0.3, -0.2)


def test_three_agent_example():
    ms = [model(0, (1.0,), 0.5), model(1, (0.0,), 0.5), model(2, (-1.0,), 0.5)]
    log = full_log(ms, 1)
    assert act(ms[0], log, 0).values == (0.25,)
    assert scalar_rounds([1.0, 0.0, -1.0], [0.5] * 3, 2)[1][0] == 0.25


def test_first_round_plays_latent():
    m = model(0, (1.0, 2.0), 0.9)
    assert act(m, InteractionLog(), 0, 1).values == (1.0, 2.0)


def test_noise_is_seeded():
    m = model(0, (1.0, 2.0), 0.0, noise_sd=0.3)
    a, b = act(m, InteractionLog(), 7, 1), act(m, InteractionLog(), 7, 1)
    c = act(m, InteractionLog(), 8, 1)
    assert a == b and a != c


def test_dimension_mismatch():
    m = model(0, (1.0, 2.0), 0.5)
    log = InteractionLog().append(1, {0: V((1.0, 2.0)), 1: V((1.0,))})
    with pytest.raises(ValueError, match="dimension"):
        act(m, log, 0)


def test_defector_alternates():
    m = model(0, (1.0, -2.0), defector=True)
    assert act(m, InteractionLog(), 0, 1).values == (1.0, -2.0)
    assert act(m, InteractionLog(), 0, 2).values == (-1.0, 2.0)
    assert act(m, InteractionLog(), 0, 3).values == (1.0, -2.0)


def test_level0_constant_agent():
    ms = [model(0, (1.0, 0.5)), model(1, (0.2, 0.7))]
    log = full_log(ms, 1)
    b = update_belief(model(1, (0.2, 0.7), tom_level=0), log, 0, [0, 1])
    assert b.predictions[0].values == (1.0, 0.5)
    assert b.nested == {}


def test_level0_is_historical_mean():
    log = InteractionLog().append(1, {0: V((1.0,)), 1: V((0.0,))}).append(2, {0: V((3.0,)), 1: V((0.0,))})
    b = update_belief(model(1, (1.0,), tom_level=0), log, 0, [0, 1])
    assert b.predictions[0].values == (2.0,)


def test_level1_example_prediction():
    ms = [model(0, (1.0,), 0.5), model(1, (0.0,), 0.5, tom_level=1), model(2, (-1.0,), 0.5)]
    rho = {m.agent_id: m.rho for m in ms}
    log = full_log(ms, 1)
    b = update_belief(ms[1], log, 1, [0, 1, 2], rho)
    assert b.predictions[0].values == (0.25,)
    assert act(ms[0], log, 0, 2).values == (0.25,)
    assert b.nested[0].level == 0


@pytest.mark.parametrize("seed", range(20))
def test_level1_exact_for_coupled_peers(seed):
    rng = random.Random(seed)
    n, d = rng.randint(2, 5), rng.randint(1, 4)
    ms = [
        model(i, tuple(rng.uniform(-1, 1) for _ in range(d)), rng.uniform(0, 0.9), tom_level=rng.choice([1, 2]))
        for i in range(n)
    ]
    rho = {m.agent_id: m.rho for m in ms}
    log = full_log(ms, rng.randint(1, 4))
    r = log.last_round + 1
    actual = {m.agent_id: act(m, log, 0, r) for m in ms}
    for m in ms:
        b = update_belief(m, log, m.tom_level, range(n), rho)
        for j, pred in b.predictions.items():
            assert pred.values == pytest.approx(actual[j].values, abs=1e-9)
            assert cosine_alignment(pred, actual[j]) == pytest.approx(1.0, abs=1e-9)


def test_scalar_oracle_matches_multi_round():
    vs, rho = [1.0, 0.0, -1.0, 0.4], [0.5, 0.2, 0.7, 0.0]
    ms = [model(i, (v,), p) for i, (v, p) in enumerate(zip(vs, rho))]
    log = full_log(ms, 4)
    ref = scalar_rounds(vs, rho, 4)
    for r, acts in log.archive:
        for i in range(4):
            assert acts[i].values[0] == pytest.approx(ref[r - 1][i], abs=1e-12)


def test_nesting_depth_equals_level():
    ms = [model(i, (1.0 + i, 0.5), 0.3, tom_level=2) for i in range(3)]
    log = full_log(ms, 2)
    for k in range(3):
        b = update_belief(ms[0], log, k, [0, 1, 2], {m.agent_id: m.rho for m in ms})
        assert b.depth() == k
        assert b.level == k


def test_level0_ignores_nested_input():
    ms = [model(i, (1.0 + i,), 0.3, tom_level=2) for i in range(3)]
    log = full_log(ms, 2)
    a = update_belief(ms[0], log, 0, [0, 1, 2])
    b = update_belief(ms[0], log, 0, [0, 1, 2], {0: 0.9, 1: 0.1, 2: 0.5})
    assert a == b


def test_belief_errors():
    m = model(0, (1.0,), tom_level=1)
    with pytest.raises(ValueError, match="level"):
        update_belief(m, full_log([m, model(1, (1.0,))], 1), 2, [0, 1])
    with pytest.raises(ValueError, match="history"):
        update_belief(m, InteractionLog(), 0, [0, 1])


def test_defector_predicts_reversal():
    ms = [model(0, (1.0, 0.0), defector=True), model(1, (0.0, 1.0))]
    log = full_log(ms, 1)
    b = update_belief(ms[0], log, 1, [0, 1])
    assert b.predictions[1].values == (-0.0, -1.0)


def test_model_validation():
    with pytest.raises(ValueError):
        model(0, (1.0,), rho=1.0)
    with pytest.raises(ValueError):
        model(0, (1.0,), noise_sd=-1)
    with pytest.raises(ValueError):
        model(0, (1.0,), tom_level=3)


def test_sim_agent_wrapper_determinism():
    ms = [model(i, (1.0 + i, -0.5), 0.4, noise_sd=0.1) for i in range(3)]
    agents = build_sim_agents(ms)
    assert all(isinstance(a, SimAgent) for a in agents)
    log = full_log(ms, 2, seed=3)
    assert full_log(ms, 2, seed=3) == log
    assert agents[0].believe(log, [0, 1, 2]) == agents[0].believe(log, [0, 1, 2])
    assert agents[0].score(agents[0].believe(log, [0, 1, 2]), {}) is None
