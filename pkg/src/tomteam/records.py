"""Round and episode records, plus their JSON encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .types import ActionVector, AlignmentMatrix, FormationOutcome, Reformation, Team


@dataclass(frozen=True)
class RoundRecord:
    """Everything observed in one round.

    ``preferences`` are the plain alignment preferences B_i of the team the
    round was played with; ``welfare`` uses the active (possibly
    specialized) preference. Both are None in the first round, when no
    agent has a history to predict from.
    """

    round: int
    team: Team
    actions: Mapping[int, ActionVector] = field(default_factory=dict)
    matrix: AlignmentMatrix | None = None
    misaligned: int = 0
    misalign_count: int = 0
    preferences: Mapping[int, float] | None = None
    welfare: float | None = None
    task_score: float | None = None
    ratio: float = 0.0
    over_threshold: bool = False
    reformed: bool = False
    outcome: FormationOutcome | None = None
    new_team: Team | None = None
    aborted: bool = False
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "team": self.team.to_dict(),
            "actions": {str(k): self.actions[k].to_dict() for k in sorted(self.actions)},
            "matrix": None if self.matrix is None else self.matrix.to_dict(),
            "misaligned": self.misaligned,
            "misalign_count": self.misalign_count,
            "preferences": None
            if self.preferences is None
            else {str(k): self.preferences[k] for k in sorted(self.preferences)},
            "welfare": self.welfare,
            "task_score": self.task_score,
            "ratio": self.ratio,
            "over_threshold": self.over_threshold,
            "reformed": self.reformed,
            "outcome": None if self.outcome is None else self.outcome.to_dict(),
            "new_team": None if self.new_team is None else self.new_team.to_dict(),
            "aborted": self.aborted,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RoundRecord:
        prefs = data.get("preferences")
        return cls(
            round=int(data["round"]),
            team=Team(data["team"]),
            actions={int(k): ActionVector.from_dict(v) for k, v in data.get("actions", {}).items()},
            matrix=None if data.get("matrix") is None else AlignmentMatrix.from_dict(data["matrix"]),
            misaligned=int(data.get("misaligned", 0)),
            misalign_count=int(data.get("misalign_count", 0)),
            preferences=None if prefs is None else {int(k): float(v) for k, v in prefs.items()},
            welfare=data.get("welfare"),
            task_score=data.get("task_score"),
            ratio=float(data.get("ratio", 0.0)),
            over_threshold=bool(data.get("over_threshold", False)),
            reformed=bool(data.get("reformed", False)),
            outcome=None if data.get("outcome") is None else FormationOutcome.from_dict(data["outcome"]),
            new_team=None if data.get("new_team") is None else Team(data["new_team"]),
            aborted=bool(data.get("aborted", False)),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class EpisodeLog:
    scenario: str
    n: int
    policy: str
    seed: int
    rounds_requested: int
    params: Mapping[str, Any]
    records: tuple[RoundRecord, ...]
    reformations: tuple[Reformation, ...] = ()
    lifetimes: tuple[int, ...] = ()
    final_team: Team | None = None

    @property
    def completed(self) -> tuple[RoundRecord, ...]:
        return tuple(r for r in self.records if not r.aborted)

    @property
    def total_rounds(self) -> int:
        return len(self.completed)

    def to_dict(self) -> dict[str, Any]:
        from .metrics import episode_metrics

        return {
            "scenario": self.scenario,
            "n": self.n,
            "policy": self.policy,
            "seed": self.seed,
            "rounds_requested": self.rounds_requested,
            "params": dict(self.params),
            "records": [r.to_dict() for r in self.records],
            "reformations": [r.to_dict() for r in self.reformations],
            "lifetimes": list(self.lifetimes),
            "final_team": None if self.final_team is None else self.final_team.to_dict(),
            "metrics": episode_metrics(self),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EpisodeLog:
        return cls(
            scenario=data["scenario"],
            n=int(data["n"]),
            policy=data["policy"],
            seed=int(data["seed"]),
            rounds_requested=int(data["rounds_requested"]),
            params=data["params"],
            records=tuple(RoundRecord.from_dict(r) for r in data["records"]),
            reformations=tuple(Reformation.from_dict(r) for r in data.get("reformations", [])),
            lifetimes=tuple(int(x) for x in data.get("lifetimes", [])),
            final_team=None if data.get("final_team") is None else Team(data["final_team"]),
        )

    @classmethod
    def from_json(cls, text: str) -> EpisodeLog:
        return cls.from_dict(json.loads(text))
