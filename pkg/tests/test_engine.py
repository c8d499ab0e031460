import dataclasses

import pytest

from conftest import SCENARIOS
from tomteam.engine import AgentFailure, maybe_reform, pool_matrix, run_episode, run_round
from tomteam.metrics import team_stability
from tomteam.scenario import load_scenario, parse_scenario
from tomteam.types import ActionVector, AlignmentMatrix, Belief, EngineState, FormationParams, Team

DEFECTOR = 4


@pytest.fixture(scope="module")
def defector():
    return load_scenario(SCENARIOS / "defector.json")


def aligned_scenario(n=4):
    agents = [{"latent": [1.0 + i, 0.5, -0.2 * i], "rho": 0.3} for i in range(n)]
    return parse_scenario({"name": "aligned", "dimension": 3, "agents": agents})


def test_predictable_agents_never_misalign():
    log = run_episode(aligned_scenario(), FormationParams(), 6, "ours", 0)
    assert [r.misaligned for r in log.records] == [0] * 6
    assert log.reformations == ()
    assert all(r.welfare == pytest.approx(4.0) for r in log.records[1:])


def test_first_round_is_unscored(defector):
    first = run_episode(defector, FormationParams(), 1, "ours", 0).records[0]
    assert first.matrix is None and first.preferences is None and first.misaligned == 0


def test_defector_trace(defector):
    log = run_episode(defector, FormationParams(epsilon=0.2, theta=0.3, tau=1), 5, "ours", 0)
    r2 = log.records[1]
    assert r2.misaligned == 8
    assert r2.ratio == 1.6
    assert sorted(p for p, s in r2.matrix.scores.items() if s < 0.2) == sorted(
        [(i, DEFECTOR) for i in range(4)] + [(DEFECTOR, i) for i in range(4)]
    )
    assert r2.reformed and r2.new_team == Team([0, 1, 2, 3])
    assert [r.round for r in log.reformations] == [2]
    assert log.lifetimes == (2,)
    assert team_stability(log).value == 2.0
    assert str(team_stability(log)) == "2.0/5"
    assert all(DEFECTOR not in r.team for r in log.records[2:])
    assert [r.misaligned for r in log.records[2:]] == [0, 0, 0]


def test_tau_two_delays_one_round(defector):
    log = run_episode(defector, FormationParams(tau=2), 5, "ours", 0)
    assert [r.over_threshold for r in log.records] == [False, True, True, False, False]
    assert [r.round for r in log.reformations] == [3]
    assert log.lifetimes == (3,)


def test_two_pairs_arm_trigger():
    state = EngineState(Team(range(5)), misalign_count=2, round=2)
    m = AlignmentMatrix(0, {(i, j): 1.0 for i in range(5) for j in range(5) if i != j})
    _, _, over = maybe_reform(state, m, FormationParams(tau=2), 5)
    assert 2 / 5 == 0.4 and over


def test_counter_resets_below_threshold():
    m = AlignmentMatrix(0, {(i, j): 1.0 for i in range(5) for j in range(5) if i != j})
    p = FormationParams(tau=2)
    s = EngineState(Team(range(5)), misalign_count=3, round=1)
    s, out, _ = maybe_reform(s, m, p, 5)
    assert s.consecutive_over_threshold == 1 and out is None
    s = dataclasses.replace(s, misalign_count=0, round=2)
    s, _, over = maybe_reform(s, m, p, 5)
    assert not over and s.consecutive_over_threshold == 0
    s = dataclasses.replace(s, misalign_count=3, round=3)
    s, _, _ = maybe_reform(s, m, p, 5)
    assert s.reform_count == 0


def test_reform_resets_and_records():
    m = AlignmentMatrix(0, {(i, j): 1.0 for i in range(5) for j in range(5) if i != j})
    s = EngineState(Team(range(5)), misalign_count=9, consecutive_over_threshold=0, round=4, formed_at=1)
    s, out, _ = maybe_reform(s, m, FormationParams(eta=3), 5)
    assert out is not None and s.current_team == out.team
    assert (s.misalign_count, s.consecutive_over_threshold, s.lifetimes, s.formed_at) == (0, 0, (3,), 4)


def test_unreachable_theta_never_reforms(defector):
    # c / |T| is at most |T| - 1
    log = run_episode(defector, FormationParams(theta=4.0 + 1e-9), 5, "ours", 0)
    assert log.reformations == ()


def test_zero_theta_reforms_after_tau(defector):
    for tau in (1, 2, 3):
        log = run_episode(defector, FormationParams(theta=0.0, tau=tau), 6, "ours", 0)
        assert log.reformations[0].round == 1 + tau


def test_policy_none_keeps_full_team(defector):
    log = run_episode(defector, FormationParams(), 5, "none", 0)
    assert log.reformations == () and log.lifetimes == ()
    assert {r.team for r in log.records} == {Team(range(5))}


def test_random_policy(defector):
    log = run_episode(defector, FormationParams(), 5, "random", 3)
    assert log.records[0].team == Team(range(5))
    assert log.reformations and all(len(r.new_team) == 3 for r in log.reformations)
    assert run_episode(defector, FormationParams(), 5, "random", 3).to_json() == log.to_json()


def test_lifetimes_plus_open_segment(defector):
    for policy in ("ours", "random"):
        for seed in range(10):
            log = run_episode(defector, FormationParams(), 7, policy, seed)
            last = log.reformations[-1].round if log.reformations else 0
            assert sum(log.lifetimes) + (log.total_rounds - last) == log.total_rounds
            assert all(len(r.new_team) >= 3 for r in log.reformations)


def test_deterministic_logs(defector):
    mixed = load_scenario(SCENARIOS / "mixed.json")
    for sc in (defector, mixed):
        assert run_episode(sc, FormationParams(), 5, "ours", 4).to_json() == run_episode(
            sc, FormationParams(), 5, "ours", 4
        ).to_json()


def test_excluded_agent_observes_nothing(defector):
    log = run_episode(defector, FormationParams(), 5, "ours", 0)
    assert all(DEFECTOR not in r.actions for r in log.records[2:])


def test_pool_matrix_fills_unseen_pairs():
    s = EngineState(Team([0, 1]), round=3, known_scores=AlignmentMatrix(2, {(0, 1): 0.5, (1, 0): 0.7}))
    m = pool_matrix(s, 3)
    assert m.scores[(0, 1)] == 0.5 and m.scores[(0, 2)] == 0.0 and len(m.scores) == 6


def test_accumulate_mode(defector):
    log = run_episode(defector, FormationParams(theta=100.0, accumulate_misalignment=True), 4, "ours", 0)
    assert [r.misalign_count for r in log.records] == [0, 8, 16, 24]
    per_round = run_episode(defector, FormationParams(theta=100.0), 4, "ours", 0)
    assert [r.misalign_count for r in per_round.records] == [0, 8, 8, 8]


def test_errors(defector):
    with pytest.raises(ValueError, match="policy"):
        run_episode(defector, FormationParams(), 5, "best", 0)
    with pytest.raises(ValueError, match="rounds"):
        run_episode(defector, FormationParams(), 0, "ours", 0)
    with pytest.raises(ValueError, match="minimum size"):
        run_round(EngineState(Team([0])), defector.build_agents(), FormationParams(), 0)


class Flaky:
    """Self-scoring agent that fails once, in a chosen round."""

    def __init__(self, agent_id, fail_round=None):
        self.agent_id = agent_id
        self.fail_round = fail_round

    def believe(self, log, team):
        if log.last_round + 1 == self.fail_round:
            self.fail_round = None
            raise AgentFailure("endpoint timed out")
        return Belief(self.agent_id, 0)

    def act(self, log, round_index, seed, belief=None):
        return ActionVector((1.0,), text=f"round {round_index}")

    def score(self, belief, actions):
        return {j: 0.9 if j != 2 else 1.4 for j in actions}


def test_agent_failure_aborts_round():
    sc = parse_scenario({"name": "x", "dimension": 1, "agents": [{"latent": [1.0]}] * 3})
    agents = {0: Flaky(0), 1: Flaky(1, fail_round=2), 2: Flaky(2)}
    state, rec = run_round(EngineState(Team(range(3))), agents, FormationParams(), 0)
    state2, rec2 = run_round(state, agents, FormationParams(), 0)
    assert rec2.aborted and "timed out" in rec2.error
    assert state2 is state
    agents[1].fail_round = 2
    log = run_episode(sc, FormationParams(), 3, "ours", 0, agents=agents)
    # the aborted attempt does not consume a round index
    assert [(r.round, r.aborted) for r in log.records] == [(1, False), (2, True), (2, False)]
    assert log.total_rounds == 2


def test_self_reported_scores_are_clamped():
    agents = {i: Flaky(i) for i in range(3)}
    state, _ = run_round(EngineState(Team(range(3))), agents, FormationParams(), 0)
    _, rec = run_round(state, agents, FormationParams(), 0)
    assert rec.matrix.scores[(0, 2)] == 1.0 and rec.matrix.scores[(0, 1)] == 0.9
    assert rec.task_score is None
