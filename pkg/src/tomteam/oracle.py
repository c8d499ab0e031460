"""Brute-force reference solver, written without any of the main solver's code.

It enumerates teams as sorted tuples, scores every one of them directly
from the raw score dictionary, and checks stability by scanning every
proper sub-team. Slow, but obviously correct; the CLI ``oracle``
subcommand and the equivalence tests diff it against
:func:`tomteam.formation.optimal_team`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping


@dataclass(frozen=True)
class OracleResult:
    team: tuple[int, ...]
    welfare: float
    stable: bool
    epsilon_fallback: bool


def brute_force_optimal(
    n: int,
    scores: Mapping[tuple[int, int], float],
    eta: int,
    epsilon: float,
    lam: float = 0.0,
    alpha: Mapping[int, float] | None = None,
    include_self: bool = False,
) -> OracleResult:
    def pref(i, team):
        # ascending member order, same summation order as the main solver
        vals = []
        for j in team:
            if j == i:
                if include_self:
                    vals.append(1.0)
            else:
                vals.append(scores[(i, j)])
        b = sum(vals) / len(vals)
        if alpha is not None and lam > 0:
            b = b + lam * (sum(alpha[j] for j in team) / len(team))
        return b

    def welfare(team):
        return sum(pref(i, team) for i in team)

    def stable(team):
        mine = [pref(i, team) for i in team]
        for size in range(max(eta, 2), len(team)):
            for sub in combinations(team, size):
                if all(pref(i, sub) > mine[team.index(i)] for i in sub):
                    return False
        return True

    def tolerant(team):
        return all(scores[(i, j)] >= epsilon for i in team for j in team if i != j)

    teams = [t for size in range(eta, n + 1) for t in combinations(range(n), size)]
    w = {t: welfare(t) for t in teams}

    def best_stable(pool):
        for t in sorted(pool, key=lambda t: (-w[t], -len(t), t)):
            if stable(t):
                return t
        return None

    filtered = [t for t in teams if tolerant(t)]
    if filtered:
        t = best_stable(filtered)
        if t is not None:
            return OracleResult(t, w[t], True, False)
    t = best_stable(teams)
    if t is not None:
        return OracleResult(t, w[t], True, True)
    t = min(teams, key=lambda t: (-w[t], -len(t), t))
    return OracleResult(t, w[t], False, not filtered)
