"""Domain vocabulary shared by the simulator, solver and engine.

Every value here is immutable once built and encodes to / decodes from the
plain-JSON documents written by the CLI (``to_dict`` / ``from_dict``).
Agent ids are dense 0-based integers; reports render them 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


def ceil_half(n: int) -> int:
    """Default minimum team size, ceil(n / 2)."""
    return (n + 1) // 2


def display_ids(members: Iterable[int]) -> str:
    """Render agent ids 1-based, e.g. ``{1,2,4}``."""
    return "{" + ",".join(str(i + 1) for i in sorted(members)) + "}"


@dataclass(frozen=True)
class ActionVector:
    """An agent's action: a fixed-length real vector plus optional text.

    The text payload carries LLM output; it never enters the alignment math.
    """

    values: tuple[float, ...]
    text: str | None = None

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"action entries must be finite, got {values}")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.values)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"values": list(self.values)}
        if self.text is not None:
            out["text"] = self.text
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ActionVector:
        return cls(tuple(data["values"]), data.get("text"))


def _actions_to_dict(actions: Mapping[int, ActionVector]) -> dict[str, Any]:
    return {str(k): actions[k].to_dict() for k in sorted(actions)}


def _actions_from_dict(data: Mapping[str, Any]) -> dict[int, ActionVector]:
    return {int(k): ActionVector.from_dict(v) for k, v in data.items()}


@dataclass(frozen=True)
class LogEntry:
    """One round from a single agent's point of view."""

    round: int
    observation: Mapping[int, ActionVector]  # peers' actions that round
    own_action: ActionVector


@dataclass(frozen=True)
class InteractionLog:
    """Archive of every completed round: round index -> {agent: action}.

    Only agents on the team in a round act and observe, so an agent's
    history is the subsequence of rounds in which it appears.
    """

    archive: tuple[tuple[int, Mapping[int, ActionVector]], ...] = ()

    def __post_init__(self):
        rounds = [r for r, _ in self.archive]
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise ValueError(f"rounds must be strictly increasing, got {rounds}")

    @property
    def last_round(self) -> int:
        return self.archive[-1][0] if self.archive else 0

    def append(self, round_index: int, actions: Mapping[int, ActionVector]) -> InteractionLog:
        if round_index <= self.last_round:
            raise ValueError(f"round {round_index} does not follow round {self.last_round}")
        return InteractionLog(self.archive + ((round_index, dict(actions)),))

    def actions_at(self, round_index: int) -> Mapping[int, ActionVector] | None:
        for r, acts in self.archive:
            if r == round_index:
                return acts
        return None

    def view(self, agent: int) -> InteractionLog:
        """The sub-archive of rounds ``agent`` took part in (what it observed)."""
        return InteractionLog(tuple((r, a) for r, a in self.archive if agent in a))

    def history(self, agent: int) -> list[LogEntry]:
        return [
            LogEntry(r, {j: v for j, v in acts.items() if j != agent}, acts[agent])
            for r, acts in self.archive
            if agent in acts
        ]

    def to_dict(self) -> dict[str, Any]:
        return {"archive": [{"round": r, "actions": _actions_to_dict(a)} for r, a in self.archive]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> InteractionLog:
        return cls(tuple((int(e["round"]), _actions_from_dict(e["actions"])) for e in data["archive"]))


@dataclass(frozen=True)
class ToMStage:
    """One level of a text-form ToM response (belief, explanation, action)."""

    level: int
    belief: str
    action: str
    explanation: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "belief": self.belief,
            "action": self.action,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ToMStage:
        return cls(int(data["level"]), data["belief"], data["action"], data.get("explanation"))


@dataclass(frozen=True)
class Belief:
    """A level-k mental model held by ``owner``.

    ``predictions`` maps each teammate to the owner's predicted next action;
    ``nested`` holds the owner's inference of each teammate's level k-1
    belief. Text-form beliefs (LLM agents) carry ``stages`` instead and may
    leave both maps empty.
    """

    owner: int
    level: int
    predictions: Mapping[int, ActionVector] = field(default_factory=dict)
    nested: Mapping[int, Belief] = field(default_factory=dict)
    stages: tuple[ToMStage, ...] = ()

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"belief level must be >= 0, got {self.level}")
        if self.level == 0 and self.nested:
            raise ValueError("a level-0 belief has no nested beliefs")
        if self.level > 0 and not self.nested and not self.stages and self.predictions:
            raise ValueError(f"a level-{self.level} belief needs nested level-{self.level - 1} beliefs")
        for j, b in self.nested.items():
            if b.level != self.level - 1:
                raise ValueError(f"nested belief about {j} has level {b.level}, expected {self.level - 1}")

    @property
    def text(self) -> str | None:
        return self.stages[-1].belief if self.stages else None

    @property
    def action_text(self) -> str | None:
        return self.stages[-1].action if self.stages else None

    def depth(self) -> int:
        if not self.nested:
            return 0
        return 1 + max(b.depth() for b in self.nested.values())

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "owner": self.owner,
            "level": self.level,
            "predictions": _actions_to_dict(self.predictions),
            "nested": {str(k): self.nested[k].to_dict() for k in sorted(self.nested)},
        }
        if self.stages:
            out["stages"] = [s.to_dict() for s in self.stages]
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Belief:
        return cls(
            owner=int(data["owner"]),
            level=int(data["level"]),
            predictions=_actions_from_dict(data.get("predictions", {})),
            nested={int(k): Belief.from_dict(v) for k, v in data.get("nested", {}).items()},
            stages=tuple(ToMStage.from_dict(s) for s in data.get("stages", [])),
        )


@dataclass(frozen=True)
class AlignmentMatrix:
    """Ordered-pair alignment scores (observer, subject) -> [-1, 1] for one round."""

    round: int
    scores: Mapping[tuple[int, int], float]

    def __post_init__(self):
        clean = {}
        for (i, j), s in self.scores.items():
            if i == j:
                raise ValueError(f"self-pair ({i}, {j}) is not allowed")
            s = float(s)
            if not -1.0 <= s <= 1.0:
                raise ValueError(f"score for ({i}, {j}) is {s}, outside [-1, 1]")
            clean[(int(i), int(j))] = s
        object.__setattr__(self, "scores", clean)

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return self.scores[pair]

    def __contains__(self, pair: object) -> bool:
        return pair in self.scores

    @property
    def agents(self) -> tuple[int, ...]:
        return tuple(sorted({i for pair in self.scores for i in pair}))

    def covers(self, members: Iterable[int]) -> bool:
        ms = list(members)
        return all((i, j) in self.scores for i in ms for j in ms if i != j)

    def merged_over(self, older: AlignmentMatrix | None) -> AlignmentMatrix:
        """This round's scores layered over an older matrix's."""
        if older is None:
            return self
        return AlignmentMatrix(self.round, {**older.scores, **self.scores})

    def to_dict(self) -> dict[str, Any]:
        return {"round": self.round, "scores": [[i, j, s] for (i, j), s in sorted(self.scores.items())]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AlignmentMatrix:
        return cls(int(data["round"]), {(int(i), int(j)): float(s) for i, j, s in data["scores"]})

    @classmethod
    def from_symmetric(cls, pairs: Mapping[tuple[int, int], float], round: int = 0) -> AlignmentMatrix:
        scores = {}
        for (i, j), s in pairs.items():
            scores[(i, j)] = s
            scores[(j, i)] = s
        return cls(round, scores)


@dataclass(frozen=True)
class Team:
    members: frozenset[int]

    def __init__(self, members: Iterable[int]):
        object.__setattr__(self, "members", frozenset(int(m) for m in members))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    def __contains__(self, agent: object) -> bool:
        return agent in self.members

    def sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))

    def __str__(self) -> str:
        return display_ids(self.members)

    def to_dict(self) -> list[int]:
        return list(self.sorted())

    @classmethod
    def from_dict(cls, data: Iterable[int]) -> Team:
        return cls(data)


@dataclass(frozen=True)
class FormationParams:
    """Tuning knobs for team formation and reformation.

    ``eta=None`` means ceil(n/2), resolved against the agent count with
    :meth:`resolved`. ``alpha=None`` disables the specialization term.
    """

    epsilon: float = 0.2
    theta: float = 0.3
    tau: int = 1
    lam: float = 1.0
    eta: int | None = None
    alpha: Mapping[int, float] | None = None
    include_self: bool = False
    accumulate_misalignment: bool = False

    def __post_init__(self):
        if not -1.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [-1, 1], got {self.epsilon}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.eta is not None and self.eta < 1:
            raise ValueError(f"eta must be a positive integer, got {self.eta}")
        if self.alpha is not None:
            alpha = {int(k): float(v) for k, v in self.alpha.items()}
            for k, v in alpha.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"alpha[{k}] must lie in [0, 1], got {v}")
            object.__setattr__(self, "alpha", alpha)

    def min_size(self, n: int) -> int:
        return ceil_half(n) if self.eta is None else self.eta

    def resolved(self, n: int) -> FormationParams:
        return FormationParams(
            epsilon=self.epsilon,
            theta=self.theta,
            tau=self.tau,
            lam=self.lam,
            eta=self.min_size(n),
            alpha=self.alpha,
            include_self=self.include_self,
            accumulate_misalignment=self.accumulate_misalignment,
        )

    @property
    def specialized(self) -> bool:
        return self.lam > 0 and self.alpha is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "theta": self.theta,
            "tau": self.tau,
            "lambda": self.lam,
            "eta": self.eta,
            "alpha": None if self.alpha is None else {str(k): self.alpha[k] for k in sorted(self.alpha)},
            "include_self": self.include_self,
            "accumulate_misalignment": self.accumulate_misalignment,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FormationParams:
        alpha = data.get("alpha")
        return cls(
            epsilon=data.get("epsilon", 0.2),
            theta=data.get("theta", 0.3),
            tau=data.get("tau", 1),
            lam=data.get("lambda", 1.0),
            eta=data.get("eta"),
            alpha=None if alpha is None else {int(k): v for k, v in alpha.items()},
            include_self=data.get("include_self", False),
            accumulate_misalignment=data.get("accumulate_misalignment", False),
        )


@dataclass(frozen=True)
class FormationOutcome:
    """A selected team with its per-member preferences and certificates.

    ``epsilon_fallback`` marks that no team passed the pairwise tolerance
    filter; ``stable`` is False only when no stable team existed at all.
    """

    team: Team
    welfare: float
    preferences: Mapping[int, float]
    stable: bool = True
    epsilon_fallback: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "team": self.team.to_dict(),
            "welfare": self.welfare,
            "preferences": {str(k): self.preferences[k] for k in sorted(self.preferences)},
            "stable": self.stable,
            "epsilon_fallback": self.epsilon_fallback,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FormationOutcome:
        return cls(
            Team(data["team"]),
            float(data["welfare"]),
            {int(k): float(v) for k, v in data["preferences"].items()},
            bool(data["stable"]),
            bool(data["epsilon_fallback"]),
        )


@dataclass(frozen=True)
class Reformation:
    round: int
    old_team: Team
    new_team: Team

    def to_dict(self) -> dict[str, Any]:
        return {"round": self.round, "old_team": self.old_team.to_dict(), "new_team": self.new_team.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Reformation:
        return cls(int(data["round"]), Team(data["old_team"]), Team(data["new_team"]))


@dataclass(frozen=True)
class EngineState:
    """Runtime of the reformation loop.

    ``misalign_count`` is the misaligned-pair count c of the latest round
    (or the running total in accumulate mode); ``formed_at`` is the round
    after which the current team was formed (0 for the initial team).
    ``known_scores`` keeps the latest score seen for every ordered pair so
    reformation can rank agents currently off the team.
    """

    current_team: Team
    misalign_count: int = 0
    consecutive_over_threshold: int = 0
    round: int = 0
    reformations: tuple[Reformation, ...] = ()
    lifetimes: tuple[int, ...] = ()
    formed_at: int = 0
    log: InteractionLog = field(default_factory=InteractionLog)
    known_scores: AlignmentMatrix | None = None

    def __post_init__(self):
        if any(l < 1 for l in self.lifetimes):
            raise ValueError(f"lifetimes must be >= 1, got {self.lifetimes}")
        if len(self.lifetimes) != len(self.reformations):
            raise ValueError("one lifetime is recorded per reformation")

    @property
    def reform_count(self) -> int:
        return len(self.reformations)

    def to_dict(self) -> dict[str, Any]:
        return {
            "current_team": self.current_team.to_dict(),
            "misalign_count": self.misalign_count,
            "consecutive_over_threshold": self.consecutive_over_threshold,
            "round": self.round,
            "reformations": [r.to_dict() for r in self.reformations],
            "lifetimes": list(self.lifetimes),
            "reform_count": self.reform_count,
            "formed_at": self.formed_at,
            "log": self.log.to_dict(),
            "known_scores": None if self.known_scores is None else self.known_scores.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EngineState:
        ks = data.get("known_scores")
        return cls(
            current_team=Team(data["current_team"]),
            misalign_count=int(data["misalign_count"]),
            consecutive_over_threshold=int(data["consecutive_over_threshold"]),
            round=int(data["round"]),
            reformations=tuple(Reformation.from_dict(r) for r in data["reformations"]),
            lifetimes=tuple(int(x) for x in data["lifetimes"]),
            formed_at=int(data.get("formed_at", 0)),
            log=InteractionLog.from_dict(data["log"]),
            known_scores=None if ks is None else AlignmentMatrix.from_dict(ks),
        )
