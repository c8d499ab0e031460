import itertools
import random

import pytest

from conftest import WORKED_PAIRS, ones
from tomteam.formation import (
    MAX_EXACT_AGENTS,
    find_blocking_coalition,
    greedy_team,
    max_welfare_team,
    optimal_team,
    passes_epsilon,
    preference,
    random_team,
    social_welfare,
    specialized_preference,
    team_preference,
)
from tomteam.oracle import brute_force_optimal
from tomteam.types import AlignmentMatrix, FormationParams, Team

PLAIN = FormationParams(lam=0.0, eta=2)


def test_preference_mean():
    m = AlignmentMatrix(0, {(0, 1): 0.8, (0, 2): 0.4, (1, 0): 0, (1, 2): 0, (2, 0): 0, (2, 1): 0})
    assert team_preference(0, [0, 1, 2], m) == pytest.approx(0.6, abs=1e-15)


def test_preference_cancellation_and_ones():
    m = AlignmentMatrix(0, {(0, 1): 1.0, (0, 2): -1.0})
    assert team_preference(0, [0, 1, 2], m) == 0.0
    assert all(team_preference(i, range(4), ones(4)) == 1.0 for i in range(4))


def test_preference_with_self_term():
    m = AlignmentMatrix(0, {(0, 1): 0.8, (0, 2): 0.4})
    assert team_preference(0, [0, 1, 2], m, include_self=True) == pytest.approx((1.0 + 0.8 + 0.4) / 3)


def test_preference_errors(worked):
    with pytest.raises(ValueError, match="at least two"):
        team_preference(0, [0], worked)
    with pytest.raises(ValueError, match="not a member"):
        team_preference(3, [0, 1], worked)
    with pytest.raises(ValueError, match="no entry"):
        team_preference(0, [0, 1], AlignmentMatrix(0, {(1, 0): 0.5}))


def test_specialized():
    m = AlignmentMatrix(0, {(0, 1): 0.5, (1, 0): 0.5})
    p = FormationParams(lam=1.0, alpha={0: 0.4, 1: 0.8})
    assert specialized_preference(0, [0, 1], m, p) == pytest.approx(1.1, abs=1e-15)
    assert specialized_preference(0, [0, 1], m, FormationParams(lam=0.0, alpha={0: 0.4, 1: 0.8})) == 0.5
    with pytest.raises(ValueError, match="alpha"):
        specialized_preference(0, [0, 1], m, FormationParams(lam=1.0))
    with pytest.raises(ValueError, match="agents \\[1\\]"):
        specialized_preference(0, [0, 1], m, FormationParams(lam=1.0, alpha={0: 0.4}))


def test_engineer_case_alphas():
    # UI engineer strong on frontend, weak on backend; backend engineer the reverse
    m = AlignmentMatrix.from_symmetric({(0, 1): 0.5, (0, 2): 0.5, (1, 2): 0.5})
    frontend = FormationParams(lam=1.0, eta=2, alpha={0: 0.9, 1: 0.2, 2: 0.6})
    backend = FormationParams(lam=1.0, eta=2, alpha={0: 0.3, 1: 0.8, 2: 0.6})
    assert 1 not in optimal_team(3, m, frontend).team
    assert 0 not in optimal_team(3, m, backend).team


def test_welfare_examples(worked):
    assert social_welfare([0, 1, 2], ones(3), PLAIN) == 3.0
    assert social_welfare([0, 1, 3], worked, PLAIN) == pytest.approx(2.0, abs=1e-15)
    assert social_welfare([0, 1], worked, PLAIN) == 1.8


def test_active_preference_without_alpha_is_plain(worked):
    assert preference(0, [0, 1], worked, FormationParams()) == 0.9


def test_passes_epsilon():
    m = AlignmentMatrix.from_symmetric({(0, 1): 0.9, (0, 2): 0.9, (1, 2): 0.9})
    assert passes_epsilon([0, 1, 2], m, 0.2)
    m2 = AlignmentMatrix(0, {**m.scores, (2, 1): 0.1})
    assert not passes_epsilon([0, 1, 2], m2, 0.2)
    m3 = AlignmentMatrix(0, {**m.scores, (2, 1): 0.2})
    assert passes_epsilon([0, 1, 2], m3, 0.2)


def test_blocking(worked):
    assert find_blocking_coalition([0, 1, 3], worked, PLAIN) == Team([0, 1])
    assert find_blocking_coalition([0, 1], worked, PLAIN) is None
    assert find_blocking_coalition(range(5), ones(5), FormationParams(eta=3)) is None


def test_worked_optimum(worked):
    out = optimal_team(4, worked, FormationParams(epsilon=0.2, lam=0.0, eta=2))
    assert out.team == Team([0, 1]) and out.welfare == 1.8
    assert out.stable and not out.epsilon_fallback
    best = max_welfare_team(4, worked, PLAIN)
    assert best.team == Team([0, 1, 3]) and best.welfare == pytest.approx(2.0, abs=1e-15)
    assert not best.stable


def test_worked_survivors(worked):
    # epsilon removes every team holding pair {1,3} or {3,4} (1-based)
    teams = [t for k in range(2, 5) for t in itertools.combinations(range(4), k)]
    assert len(teams) == 11
    survivors = [t for t in teams if passes_epsilon(t, worked, 0.2)]
    assert survivors == [(0, 1), (0, 3), (1, 2), (1, 3), (0, 1, 3)]


def test_ones_picks_full_team():
    out = optimal_team(5, ones(5), FormationParams(eta=3))
    assert out.team == Team(range(5)) and out.welfare == 5.0


def test_optimal_errors(worked):
    with pytest.raises(ValueError, match="eta"):
        optimal_team(4, worked, FormationParams(eta=5))
    with pytest.raises(ValueError, match="cover"):
        optimal_team(4, AlignmentMatrix(0, {(0, 1): 1.0}), FormationParams(eta=2))
    with pytest.raises(ValueError, match="at most"):
        optimal_team(MAX_EXACT_AGENTS + 1, ones(MAX_EXACT_AGENTS + 1), FormationParams())


def test_epsilon_fallback_keeps_stability():
    m = AlignmentMatrix(0, {(i, j): 0.1 for i in range(4) for j in range(4) if i != j})
    out = optimal_team(4, m, FormationParams(eta=2))
    assert out.epsilon_fallback and out.stable
    assert out.team == Team(range(4))


def random_matrix(rng, n):
    return {(i, j): rng.uniform(-1, 1) for i in range(n) for j in range(n) if i != j}


@pytest.mark.parametrize("include_self", [False, True])
def test_matches_oracle_small(include_self):
    rng = random.Random(11)
    for _ in range(40):
        n = rng.randint(3, 7)
        scores = random_matrix(rng, n)
        alpha = {i: rng.random() for i in range(n)} if rng.random() < 0.5 else None
        lam = rng.choice([0.0, 1.0])
        p = FormationParams(epsilon=0.2, lam=lam, eta=(n + 1) // 2, alpha=alpha, include_self=include_self)
        out = optimal_team(n, AlignmentMatrix(0, scores), p)
        ref = brute_force_optimal(n, scores, p.eta, 0.2, lam, alpha, include_self)
        assert out.team.sorted() == ref.team
        assert out.welfare == ref.welfare
        assert (out.stable, out.epsilon_fallback) == (ref.stable, ref.epsilon_fallback)


def test_stability_certificate():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(4, 8)
        m = AlignmentMatrix(0, random_matrix(rng, n))
        p = FormationParams(lam=0.0).resolved(n)
        out = optimal_team(n, m, p)
        if out.stable:
            assert find_blocking_coalition(out.team, m, p) is None
        assert len(out.team) >= p.eta
        assert out.welfare == social_welfare(out.team, m, p)


def test_random_team_determinism_and_size():
    assert random_team(5, 3, 42) == random_team(5, 3, 42)
    assert len(random_team(5, 3, 42)) == 3
    assert random_team(3, 3, 9) == Team([0, 1, 2])
    with pytest.raises(ValueError):
        random_team(2, 3, 0)


def test_random_team_frequency():
    counts = [0] * 5
    for seed in range(10_000):
        for i in random_team(5, 3, seed):
            counts[i] += 1
    for c in counts:
        assert abs(c / 10_000 - 3 / 5) <= 0.02


def test_greedy_is_valid(worked):
    out = greedy_team(4, worked, PLAIN)
    assert len(out.team) >= 2
    assert out.welfare == social_welfare(out.team, worked, PLAIN)
    assert greedy_team(6, ones(6), FormationParams(eta=3)).team == Team(range(6))
