"""The belief-update / alignment-check / reformation loop.

Each round every team member updates its belief from what it has seen so
far, then acts; every ordered teammate pair is scored and pairs below
epsilon are counted. When that count divided by the team size exceeds
theta for tau consecutive rounds, the team is re-optimized over the whole
agent pool.

Agents off the team neither act nor observe, so their beliefs stay frozen
until they are picked again. Reformation scores pairs involving them with
the latest value observed for that pair.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Iterable, Mapping, Protocol

import numpy as np

from .alignment import KERNELS, InvalidScoreError, Kernel, ingest_external_scores
from .formation import optimal_team, preference, random_team, team_preference
from .records import EpisodeLog, RoundRecord
from .types import ActionVector, AlignmentMatrix, Belief, EngineState, FormationOutcome, FormationParams, Reformation, Team

logger = logging.getLogger(__name__)

POLICIES = ("ours", "random", "none")


class AgentFailure(RuntimeError):
    """An agent could not produce a belief, action or score this round."""


class Agent(Protocol):
    agent_id: int

    def believe(self, log, team: Iterable[int]) -> Belief: ...

    def act(self, log, round_index: int, seed: int, belief: Belief | None = None) -> ActionVector: ...

    def score(self, belief: Belief, actions: Mapping[int, ActionVector]) -> Mapping[int, float] | None:
        """Self-reported alignment scores, or None to use the vector kernel."""


def _round_seed(seed: int, round_index: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, round_index, stream]).generate_state(1)[0])


def _score_round(
    team: tuple[int, ...],
    beliefs: Mapping[int, Belief],
    actions: Mapping[int, ActionVector],
    agents: Mapping[int, Agent],
    round_index: int,
    kernel: Kernel,
    invalid_policy: str,
) -> tuple[AlignmentMatrix, float | None]:
    scores: dict[tuple[int, int], float] = {}
    errors = []
    for i in team:
        peers = {j: actions[j] for j in team if j != i}
        reported = agents[i].score(beliefs[i], peers)
        if reported is None:
            for j in peers:
                pred = beliefs[i].predictions.get(j)
                if pred is None:
                    raise AgentFailure(f"agent {i} has no prediction for teammate {j}")
                scores[(i, j)] = kernel(pred, actions[j])
                errors.append(float(np.linalg.norm(np.subtract(pred.values, actions[j].values))))
        else:
            missing = [j for j in peers if j not in reported]
            if missing:
                raise AgentFailure(f"agent {i} reported no score for {missing}")
            try:
                row = ingest_external_scores({j: reported[j] for j in peers}, i, policy=invalid_policy)
            except InvalidScoreError as exc:
                raise AgentFailure(str(exc)) from exc
            scores.update({(i, j): s for j, s in row.scores.items()})
    task = -sum(errors) / len(errors) if errors else None
    return AlignmentMatrix(round_index, scores), task


def run_round(
    state: EngineState,
    agents: Mapping[int, Agent],
    params: FormationParams,
    seed: int,
    kernel: Kernel | str = "cosine",
    invalid_policy: str = "neutral",
) -> tuple[EngineState, RoundRecord]:
    """Play one round with the current team and record what happened.

    On :class:`AgentFailure` the round is marked aborted and the state is
    returned unchanged.
    """
    fn = KERNELS[kernel] if isinstance(kernel, str) else kernel
    r = state.round + 1
    team = state.current_team.sorted()
    eta = params.min_size(len(agents))
    if len(team) < min(eta, len(agents)):
        raise ValueError(f"team {team} is smaller than the minimum size {eta}")
    log = state.log
    try:
        beliefs: dict[int, Belief] = {}
        if log.archive:
            beliefs = {i: agents[i].believe(log, team) for i in team}
        actions = {i: agents[i].act(log, r, seed, beliefs.get(i)) for i in team}
        matrix, task = (None, None)
        if beliefs:
            matrix, task = _score_round(team, beliefs, actions, agents, r, fn, invalid_policy)
    except AgentFailure as exc:
        logger.warning("round %d aborted: %s", r, exc)
        return state, RoundRecord(round=r, team=Team(team), aborted=True, error=str(exc))

    misaligned, prefs, welfare = 0, None, None
    if matrix is not None:
        misaligned = sum(1 for s in matrix.scores.values() if s < params.epsilon)
        prefs = {i: team_preference(i, team, matrix, params.include_self) for i in team}
        welfare = sum(preference(i, team, matrix, params) for i in team)
    c = state.misalign_count + misaligned if params.accumulate_misalignment else misaligned
    new_state = dataclasses.replace(
        state,
        round=r,
        misalign_count=c,
        log=log.append(r, actions),
        known_scores=state.known_scores if matrix is None else matrix.merged_over(state.known_scores),
    )
    record = RoundRecord(
        round=r,
        team=Team(team),
        actions=actions,
        matrix=matrix,
        misaligned=misaligned,
        misalign_count=c,
        preferences=prefs,
        welfare=welfare,
        task_score=task,
        ratio=c / len(team),
    )
    return new_state, record


def pool_matrix(state: EngineState, n: int) -> AlignmentMatrix:
    """Latest known score for every ordered pair of the pool; unseen pairs are neutral 0.0."""
    known = dict(state.known_scores.scores) if state.known_scores is not None else {}
    missing = [(i, j) for i in range(n) for j in range(n) if i != j and (i, j) not in known]
    if missing:
        logger.info("no observed score for %d ordered pairs; using neutral 0.0", len(missing))
    for pair in missing:
        known[pair] = 0.0
    return AlignmentMatrix(state.round, known)


def maybe_reform(
    state: EngineState,
    m: AlignmentMatrix,
    params: FormationParams,
    n: int,
    policy: str = "ours",
    seed: int = 0,
) -> tuple[EngineState, FormationOutcome | None, bool]:
    """Apply the theta / tau trigger after a round.

    Returns the new state, the formation outcome (policy "ours" only) and
    whether the round was over threshold.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    size = len(state.current_team)
    over = state.misalign_count / size > params.theta
    consecutive = state.consecutive_over_threshold + 1 if over else 0
    state = dataclasses.replace(state, consecutive_over_threshold=consecutive)
    if policy == "none" or consecutive < params.tau:
        return state, None, over

    outcome = None
    if policy == "ours":
        outcome = optimal_team(n, m, params)
        new_team = outcome.team
    else:
        new_team = random_team(n, params.min_size(n), _round_seed(seed, state.round, 1))
    lifetime = state.round - state.formed_at
    logger.debug("round %d: reforming %s -> %s after %d rounds", state.round, state.current_team, new_team, lifetime)
    state = dataclasses.replace(
        state,
        current_team=new_team,
        misalign_count=0,
        consecutive_over_threshold=0,
        reformations=state.reformations + (Reformation(state.round, state.current_team, new_team),),
        lifetimes=state.lifetimes + (lifetime,),
        formed_at=state.round,
    )
    return state, outcome, over


def run_episode(
    scenario,
    params: FormationParams,
    rounds: int,
    policy: str = "ours",
    seed: int = 0,
    agents: Mapping[int, Agent] | None = None,
    kernel: Kernel | str = "cosine",
    invalid_policy: str = "neutral",
) -> EpisodeLog:
    """Run ``rounds`` rounds of one policy on a scenario and log everything.

    ``ours`` re-optimizes on a trigger, ``random`` draws a random eta-team
    on the same trigger, and ``none`` keeps the full pool throughout. All
    policies start from the full pool.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    n = scenario.n
    if params.alpha is None and scenario.alpha is not None:
        params = dataclasses.replace(params, alpha=scenario.alpha)
    params = params.resolved(n)
    if agents is None:
        agents = scenario.build_agents()

    state = EngineState(current_team=Team(range(n)))
    records = []
    for _ in range(rounds):
        state, record = run_round(state, agents, params, seed, kernel, invalid_policy)
        if not record.aborted:
            before = state.current_team
            state, outcome, over = maybe_reform(state, pool_matrix(state, n), params, n, policy, seed)
            reformed = len(state.reformations) > 0 and state.reformations[-1].round == record.round
            record = dataclasses.replace(
                record,
                over_threshold=over,
                reformed=reformed,
                outcome=outcome,
                new_team=state.current_team if reformed else None,
            )
            if reformed:
                logger.info("round %d: %s -> %s", record.round, before, state.current_team)
        records.append(record)

    return EpisodeLog(
        scenario=scenario.name,
        n=n,
        policy=policy,
        seed=seed,
        rounds_requested=rounds,
        params=params.to_dict(),
        records=tuple(records),
        reformations=state.reformations,
        lifetimes=state.lifetimes,
        final_team=state.current_team,
    )
