"""Team preferences, welfare, stability and optimal team selection.

Numeric contract: every mean and total is a left-to-right sum over
members in ascending id order. The exhaustive solver reproduces that
order exactly, so its welfare values are bit-identical to
:func:`social_welfare` and to any implementation summing the same way.
"""

from __future__ import annotations

import itertools
import logging
from typing import Iterable

import numpy as np

from .types import AlignmentMatrix, FormationOutcome, FormationParams, Team, ceil_half

logger = logging.getLogger(__name__)

MAX_EXACT_AGENTS = 20


def _members(team: Team | Iterable[int]) -> tuple[int, ...]:
    return team.sorted() if isinstance(team, Team) else tuple(sorted(set(team)))


def _score(i: int, j: int, m: AlignmentMatrix) -> float:
    if i == j:
        return 1.0
    try:
        return m.scores[(i, j)]
    except KeyError:
        raise ValueError(f"alignment matrix has no entry for ({i}, {j})") from None


def team_preference(i: int, team: Team | Iterable[int], m: AlignmentMatrix, include_self: bool = False) -> float:
    """Agent i's mean alignment over its teammates.

    With ``include_self`` the self-pair counts as a perfect 1.0 and the
    mean runs over all of the team, literally as the formula is written.
    """
    members = _members(team)
    if i not in members:
        raise ValueError(f"agent {i} is not a member of {members}")
    if len(members) < 2:
        raise ValueError("preferences need a team of at least two agents")
    vals = [_score(i, j, m) for j in members if include_self or j != i]
    return sum(vals) / len(vals)


def specialized_preference(i: int, team: Team | Iterable[int], m: AlignmentMatrix, params: FormationParams) -> float:
    """Team preference plus ``lam`` times the team's mean specialization score."""
    members = _members(team)
    b = team_preference(i, members, m, params.include_self)
    if params.lam == 0:
        return b
    if params.alpha is None:
        raise ValueError("lambda > 0 needs specialization scores (alpha)")
    missing = [j for j in members if j not in params.alpha]
    if missing:
        raise ValueError(f"no specialization score for agents {missing}")
    return b + params.lam * (sum(params.alpha[j] for j in members) / len(members))


def preference(i: int, team: Team | Iterable[int], m: AlignmentMatrix, params: FormationParams) -> float:
    """The active preference: specialized when alpha is given and lam > 0."""
    if params.specialized:
        return specialized_preference(i, team, m, params)
    return team_preference(i, team, m, params.include_self)


def social_welfare(team: Team | Iterable[int], m: AlignmentMatrix, params: FormationParams) -> float:
    members = _members(team)
    return sum(preference(i, members, m, params) for i in members)


def passes_epsilon(team: Team | Iterable[int], m: AlignmentMatrix, epsilon: float) -> bool:
    members = _members(team)
    return all(m.scores[(i, j)] >= epsilon for i in members for j in members if i != j)


def find_blocking_coalition(team: Team | Iterable[int], m: AlignmentMatrix, params: FormationParams) -> Team | None:
    """Smallest proper subgroup (by size, then member order) whose members all strictly gain by leaving.

    Returns None when the team is stable.
    """
    members = _members(team)
    eta = params.eta if params.eta is not None else ceil_half(len(m.agents))
    current = {i: preference(i, members, m, params) for i in members}
    for size in range(max(eta, 2), len(members)):
        for c in itertools.combinations(members, size):
            if all(preference(i, c, m, params) > current[i] for i in c):
                return Team(c)
    return None


def random_team(n: int, eta: int, seed: int) -> Team:
    """Uniformly random team of exactly ``eta`` agents out of ``n``."""
    if n < eta:
        raise ValueError(f"cannot draw {eta} agents from {n}")
    rng = np.random.default_rng(seed)
    return Team(int(x) for x in rng.choice(n, size=eta, replace=False))


class _Tables:
    """Preference, welfare and tolerance tables for every subset, as bitmasks."""

    def __init__(self, n: int, m: AlignmentMatrix, params: FormationParams):
        if n > MAX_EXACT_AGENTS:
            raise ValueError(f"exhaustive search supports at most {MAX_EXACT_AGENTS} agents, got {n}")
        S = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                S[i, j] = _score(i, j, m) if (i != j or params.include_self) else 0.0
        size = 1 << n
        masks = np.arange(size, dtype=np.int64)
        pc = np.zeros(size, dtype=np.int64)
        rev = np.zeros(size, dtype=np.int64)
        for b in range(n):
            bit = (masks >> b) & 1
            pc += bit
            rev |= bit << (n - 1 - b)

        rowsum = np.zeros((n, size))
        for b in range(n):
            lo = 1 << b
            rowsum[:, lo : 2 * lo] = rowsum[:, :lo] + S[:, b : b + 1]
        denom = (pc if params.include_self else pc - 1).astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            P = rowsum / denom
            if params.specialized:
                alpha = params.alpha or {}
                missing = [j for j in range(n) if j not in alpha]
                if missing:
                    raise ValueError(f"no specialization score for agents {missing}")
                asum = np.zeros(size)
                for b in range(n):
                    lo = 1 << b
                    asum[lo : 2 * lo] = asum[:lo] + alpha[b]
                P = P + params.lam * (asum / pc)

        W = np.zeros(size)
        for i in range(n):
            W = W + np.where((masks >> i) & 1 == 1, P[i], 0.0)

        good = np.zeros(n, dtype=np.int64)
        for b in range(n):
            for j in range(n):
                if j != b and S[b, j] >= params.epsilon and S[j, b] >= params.epsilon:
                    good[b] |= 1 << j
        eps_ok = np.zeros(size, dtype=bool)
        eps_ok[0] = True
        for b in range(n):
            lo = 1 << b
            lower = masks[:lo]
            eps_ok[lo : 2 * lo] = eps_ok[:lo] & ((lower & ~good[b]) == 0)

        self.n, self.P, self.W, self.pc, self.rev, self.eps_ok = n, P, W, pc, rev, eps_ok

    def members(self, mask: int) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if mask >> i & 1)

    def is_stable(self, mask: int, eta: int) -> bool:
        members = self.members(mask)
        subs = np.zeros(1, dtype=np.int64)
        for i in members:
            subs = np.concatenate([subs, subs | (1 << i)])
        subs = subs[(self.pc[subs] >= max(eta, 2)) & (subs != mask)]
        if subs.size == 0:
            return True
        blocks = np.ones(subs.size, dtype=bool)
        for i in members:
            inside = (subs >> i) & 1 == 1
            blocks &= ~inside | (self.P[i, subs] > self.P[i, mask])
        return not bool(blocks.any())

    def ranked(self, candidates: np.ndarray) -> np.ndarray:
        """Candidate masks by welfare desc, size desc, then lexicographic member order."""
        idx = np.flatnonzero(candidates)
        order = np.lexsort((-self.rev[idx], -self.pc[idx], -self.W[idx]))
        return idx[order]

    def outcome(self, mask: int, stable: bool, fallback: bool) -> FormationOutcome:
        members = self.members(mask)
        return FormationOutcome(
            Team(members),
            float(self.W[mask]),
            {i: float(self.P[i, mask]) for i in members},
            stable=stable,
            epsilon_fallback=fallback,
        )


def optimal_team(n: int, m: AlignmentMatrix, params: FormationParams) -> FormationOutcome:
    """Welfare-maximizing stable team of at least eta agents.

    Candidates must pass the epsilon pair filter; if none does, every team
    of admissible size is considered (``epsilon_fallback``). If no
    candidate is stable the plain welfare maximizer is returned with
    ``stable=False``. Ties go to the larger team, then to the
    lexicographically smallest member list.
    """
    eta = params.min_size(n)
    if eta < 2 or n < eta:
        raise ValueError(f"need n >= eta >= 2, got n={n}, eta={eta}")
    if not m.covers(range(n)):
        raise ValueError(f"alignment matrix does not cover all ordered pairs of {n} agents")
    t = _Tables(n, m, params)
    size_ok = t.pc >= eta
    for candidates, fallback in ((size_ok & t.eps_ok, False), (size_ok, True)):
        if not candidates.any():
            continue
        for mask in t.ranked(candidates):
            if t.is_stable(int(mask), eta):
                if fallback:
                    logger.info("no team passes epsilon=%s; falling back to welfare over all teams", params.epsilon)
                return t.outcome(int(mask), True, fallback)
    ranked = t.ranked(size_ok)
    logger.warning("no stable team exists; returning the unconstrained welfare maximizer")
    return t.outcome(int(ranked[0]), False, not (size_ok & t.eps_ok).any())


def max_welfare_team(n: int, m: AlignmentMatrix, params: FormationParams, use_epsilon: bool = True) -> FormationOutcome:
    """Welfare maximizer ignoring stability (for diagnostics and reports)."""
    eta = params.min_size(n)
    t = _Tables(n, m, params)
    size_ok = t.pc >= eta
    candidates = size_ok & t.eps_ok if use_epsilon else size_ok
    fallback = not candidates.any()
    mask = int(t.ranked(size_ok if fallback else candidates)[0])
    return t.outcome(mask, t.is_stable(mask, eta), fallback)


def greedy_team(n: int, m: AlignmentMatrix, params: FormationParams) -> FormationOutcome:
    """Heuristic for pools too large to enumerate. Not guaranteed optimal.

    Starts from the best-welfare pair, grows to eta by best welfare, then
    keeps adding the best agent while welfare rises and the team stays stable.
    """
    eta = params.min_size(n)
    if n < eta:
        raise ValueError(f"need n >= eta, got n={n}, eta={eta}")
    pair = max(itertools.combinations(range(n), 2), key=lambda c: (social_welfare(c, m, params), [-x for x in c]))
    team = list(pair)
    score = social_welfare(team, m, params)
    while len(team) < n:
        rest = [a for a in range(n) if a not in team]
        best = max(rest, key=lambda a: (social_welfare(team + [a], m, params), -a))
        cand = sorted(team + [best])
        cand_score = social_welfare(cand, m, params)
        if len(team) >= eta:
            if cand_score <= score or find_blocking_coalition(cand, m, params.resolved(n)) is not None:
                break
        team, score = cand, cand_score
    stable = find_blocking_coalition(team, m, params.resolved(n)) is None
    return FormationOutcome(
        Team(team),
        score,
        {i: preference(i, team, m, params) for i in sorted(team)},
        stable=stable,
        epsilon_fallback=not passes_epsilon(team, m, params.epsilon),
    )
