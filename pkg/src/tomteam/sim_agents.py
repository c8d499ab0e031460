"""Parametric agents with a known generative model.

An agent's action in round R is ``(1 - rho) * v + rho * p`` plus optional
Gaussian noise, where ``v`` is its latent vector and ``p`` is the mean of
the peer actions it observed in the last round it took part in. In its first
round it plays ``v``. Defectors ignore the rule and alternate ``+v, -v, ...``
so that nobody can predict them, and they predict every peer to reverse its
last move.

Beliefs follow the k-level recursion:

* level 0 predicts a peer's historical mean action;
* level k >= 1 holds an inferred level k-1 belief for each peer and
  predicts the peer by applying the peer's own action rule to an estimate
  of its latent vector and the peer actions it last saw.

Everything is computed from what the observer saw: the rounds it was on
the team. Coupling strengths ``rho`` are treated as public knowledge;
latent vectors are not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .types import ActionVector, Belief, InteractionLog

MAX_TOM_LEVEL = 2


@dataclass(frozen=True)
class SimAgentModel:
    agent_id: int
    latent: ActionVector
    rho: float = 0.0
    noise_sd: float = 0.0
    tom_level: int = 1
    defector: bool = False

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not 0 <= self.tom_level <= MAX_TOM_LEVEL:
            raise ValueError(f"tom_level must be 0, 1 or 2, got {self.tom_level}")

    @property
    def dim(self) -> int:
        return self.latent.dim


def _vec(a: ActionVector, dim: int) -> np.ndarray:
    if a.dim != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, logged action has {a.dim}")
    return np.asarray(a.values, dtype=float)


def _peer_mean(actions: Mapping[int, ActionVector], exclude: int, dim: int) -> np.ndarray | None:
    peers = [_vec(actions[j], dim) for j in sorted(actions) if j != exclude]
    if not peers:
        return None
    return np.mean(peers, axis=0)


def act(model: SimAgentModel, log: InteractionLog, rng_seed: int, round_index: int | None = None) -> ActionVector:
    """The agent's action for ``round_index`` (default: the round after the log)."""
    r = log.last_round + 1 if round_index is None else round_index
    d = model.dim
    v = np.asarray(model.latent.values, dtype=float)
    own = log.history(model.agent_id)
    for entry in own:
        _vec(entry.own_action, d)
        for a in entry.observation.values():
            _vec(a, d)

    if model.defector:
        base = v if r % 2 == 1 else -v
    elif not own:
        base = v
    else:
        last = own[-1]
        p = _peer_mean({**last.observation, model.agent_id: last.own_action}, model.agent_id, d)
        base = v if p is None else (1.0 - model.rho) * v + model.rho * p

    if model.noise_sd > 0:
        rng = np.random.default_rng([rng_seed, model.agent_id, r])
        base = base + rng.normal(0.0, model.noise_sd, size=d)
    return ActionVector(tuple(float(x) for x in base))


def _observed(view: InteractionLog, j: int) -> list[tuple[int, Mapping[int, ActionVector]]]:
    return [(r, acts) for r, acts in view.archive if j in acts]


def _latent_estimate(view: InteractionLog, j: int, rho: float, dim: int) -> np.ndarray:
    """Invert j's action rule on every round where its input is known.

    A round qualifies when it is round 1 (no prior input) or when the
    observer also saw round r-1 with j in it. Falls back to j's mean action.
    """
    rounds = dict(view.archive)
    estimates = []
    for r, acts in _observed(view, j):
        a = _vec(acts[j], dim)
        if r == 1:
            estimates.append(a)
        elif r - 1 in rounds and j in rounds[r - 1]:
            p = _peer_mean(rounds[r - 1], j, dim)
            estimates.append(a if p is None else (a - rho * p) / (1.0 - rho))
    if not estimates:
        estimates = [_vec(acts[j], dim) for _, acts in _observed(view, j)]
    return np.mean(estimates, axis=0)


def _belief(
    owner: int,
    k: int,
    view: InteractionLog,
    team: tuple[int, ...],
    rho: Mapping[int, float],
    dim: int,
    contrarian: bool = False,
) -> Belief:
    peers = [j for j in team if j != owner]
    nested = {} if k == 0 else {j: _belief(j, k - 1, view, team, rho, dim) for j in peers}
    predictions = {}
    for j in peers:
        seen = _observed(view, j)
        if not seen:
            raise ValueError(f"agent {owner}'s history holds no action of agent {j}")
        if contrarian:
            pred = -_vec(seen[-1][1][j], dim)
        elif k == 0:
            pred = np.mean([_vec(acts[j], dim) for _, acts in seen], axis=0)
        else:
            rj = rho.get(j, 0.0)
            v_hat = _latent_estimate(view, j, rj, dim)
            p = _peer_mean(seen[-1][1], j, dim)
            pred = v_hat if p is None else (1.0 - rj) * v_hat + rj * p
        predictions[j] = ActionVector(tuple(float(x) for x in pred))
    return Belief(owner, k, predictions, nested)


def update_belief(
    model: SimAgentModel,
    log: InteractionLog,
    k: int,
    team: Iterable[int],
    peer_rho: Mapping[int, float] | None = None,
) -> Belief:
    """Level-k belief of ``model`` about its teammates, from its own history."""
    if k > model.tom_level:
        raise ValueError(f"agent {model.agent_id} reasons at most to level {model.tom_level}, asked for {k}")
    if k < 0:
        raise ValueError(f"belief level must be >= 0, got {k}")
    view = log.view(model.agent_id)
    if not view.archive:
        raise ValueError(f"agent {model.agent_id} has no completed round in its history")
    members = tuple(sorted(set(team) | {model.agent_id}))
    return _belief(model.agent_id, k, view, members, peer_rho or {}, model.dim, contrarian=model.defector)


class SimAgent:
    """Engine-facing wrapper around a :class:`SimAgentModel`."""

    def __init__(self, model: SimAgentModel, peer_rho: Mapping[int, float] | None = None):
        self.model = model
        self.agent_id = model.agent_id
        self.peer_rho = dict(peer_rho or {})

    def believe(self, log: InteractionLog, team: Iterable[int]) -> Belief:
        return update_belief(self.model, log, self.model.tom_level, team, self.peer_rho)

    def act(self, log: InteractionLog, round_index: int, seed: int, belief: Belief | None = None) -> ActionVector:
        return act(self.model, log, seed, round_index)

    def score(self, belief: Belief, actions: Mapping[int, ActionVector]) -> Mapping[int, float] | None:
        return None  # vector agents are scored with the alignment kernel


def build_sim_agents(models: Iterable[SimAgentModel]) -> list[SimAgent]:
    models = list(models)
    rho = {m.agent_id: m.rho for m in models}
    return [SimAgent(m, rho) for m in models]
