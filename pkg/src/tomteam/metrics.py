"""Evaluation metrics over episode logs, and cross-seed aggregation."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .records import EpisodeLog, RoundRecord

METRICS = ("bas_final", "bas_mean", "stability", "reformations", "task_score")
ROUND_COLUMNS = ("policy", "seed", "round", "bas", "c", "team", "welfare")


def team_bas(record: RoundRecord) -> float:
    """Mean of the members' plain alignment preferences for one round."""
    if len(record.team) == 0:
        raise ValueError("team_bas of an empty team")
    if record.preferences is None:
        raise ValueError(f"round {record.round} has no alignment preferences")
    prefs = [record.preferences[i] for i in record.team.sorted()]
    return sum(prefs) / len(prefs)


@dataclass(frozen=True)
class StabilityScore:
    value: float
    total_rounds: int
    never_reformed: bool

    def __str__(self) -> str:
        return f"{self.value:.1f}/{self.total_rounds}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "total_rounds": self.total_rounds,
            "never_reformed": self.never_reformed,
            "display": str(self),
        }


def team_stability(log: EpisodeLog) -> StabilityScore:
    """Mean team lifetime; a team that never broke scores the full episode length."""
    total = log.total_rounds
    if not log.lifetimes:
        return StabilityScore(float(total), total, True)
    return StabilityScore(sum(log.lifetimes) / len(log.lifetimes), total, False)


def _scored(log: EpisodeLog) -> list[RoundRecord]:
    return [r for r in log.completed if r.preferences is not None]


def bas_series(log: EpisodeLog) -> dict[int, float]:
    return {r.round: team_bas(r) for r in _scored(log)}


def episode_metrics(log: EpisodeLog) -> dict[str, Any]:
    scored = _scored(log)
    bas = [team_bas(r) for r in scored]
    tasks = [r.task_score for r in scored if r.task_score is not None]
    return {
        "bas_by_round": {str(k): v for k, v in bas_series(log).items()},
        "bas_final": bas[-1] if bas else None,
        "bas_mean": sum(bas) / len(bas) if bas else None,
        "stability": team_stability(log).to_dict(),
        "reformations": len(log.reformations),
        "task_score": sum(tasks) / len(tasks) if tasks else None,
        "task_score_synthetic": True,
        "aborted_rounds": sum(1 for r in log.records if r.aborted),
    }


def _flat(log: EpisodeLog) -> dict[str, float | None]:
    m = episode_metrics(log)
    return {
        "bas_final": m["bas_final"],
        "bas_mean": m["bas_mean"],
        "stability": m["stability"]["value"],
        "reformations": float(m["reformations"]),
        "task_score": m["task_score"],
    }


@dataclass(frozen=True)
class MetricStats:
    mean: float | None
    std: float | None
    count: int

    @classmethod
    def of(cls, values: Sequence[float | None]) -> MetricStats:
        vals = [v for v in values if v is not None]
        if not vals:
            return cls(None, None, 0)
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        return cls(math.fsum(vals) / len(vals), std, len(vals))

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "std": self.std, "count": self.count}


@dataclass(frozen=True)
class PairedComparison:
    """Seed-matched differences ``a - b`` of one metric."""

    a: str
    b: str
    metric: str
    seeds: tuple[int, ...]
    mean_a: float
    mean_b: float
    mean_diff: float
    relative_gain: float | None
    t_statistic: float | None
    p_value: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "metric": self.metric,
            "n_pairs": len(self.seeds),
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "mean_diff": self.mean_diff,
            "relative_gain": self.relative_gain,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
        }


def paired_comparison(logs: Iterable[EpisodeLog], a: str, b: str, metric: str = "bas_final") -> PairedComparison:
    """One-sided paired t-test that policy ``a`` beats ``b`` on ``metric``."""
    from scipy import stats

    by_policy: dict[str, dict[int, float]] = {a: {}, b: {}}
    for log in logs:
        if log.policy in by_policy:
            value = _flat(log)[metric]
            if value is not None:
                by_policy[log.policy][log.seed] = value
    seeds = tuple(sorted(set(by_policy[a]) & set(by_policy[b])))
    if not seeds:
        raise ValueError(f"no seed has a {metric!r} value under both {a!r} and {b!r}")
    xa = [by_policy[a][s] for s in seeds]
    xb = [by_policy[b][s] for s in seeds]
    mean_a, mean_b = math.fsum(xa) / len(xa), math.fsum(xb) / len(xb)
    diffs = [x - y for x, y in zip(xa, xb)]
    t = p = None
    if len(seeds) > 1 and statistics.pstdev(diffs) > 0:
        res = stats.ttest_rel(xa, xb, alternative="greater")
        t, p = float(res.statistic), float(res.pvalue)
    rel = (mean_a - mean_b) / abs(mean_b) if mean_b != 0 else None
    return PairedComparison(a, b, metric, seeds, mean_a, mean_b, math.fsum(diffs) / len(diffs), rel, t, p)


@dataclass(frozen=True)
class SummaryReport:
    scenario: str
    n: int
    rounds: int
    policies: dict[str, dict[str, MetricStats]]
    bas_by_round: dict[str, dict[int, MetricStats]]
    comparisons: tuple[PairedComparison, ...] = field(default=())

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "rounds": self.rounds,
            "policies": {p: {k: s.to_dict() for k, s in m.items()} for p, m in sorted(self.policies.items())},
            "bas_by_round": {
                p: {str(r): s.to_dict() for r, s in sorted(m.items())} for p, m in sorted(self.bas_by_round.items())
            },
            "comparisons": [c.to_dict() for c in self.comparisons],
            "task_score_note": "synthetic: negative mean prediction error",
        }


def aggregate(logs: Iterable[EpisodeLog]) -> SummaryReport:
    """Per-policy statistics plus the seed-matched ``ours - random`` comparison when both ran."""
    logs = sorted(logs, key=lambda log: (log.policy, log.seed))
    if not logs:
        raise ValueError("aggregate needs at least one episode log")
    shapes = {(log.scenario, log.n, log.rounds_requested) for log in logs}
    if len(shapes) > 1:
        raise ValueError(f"logs mix scenario shapes {sorted(shapes)}")
    scenario, n, rounds = shapes.pop()

    policies: dict[str, dict[str, MetricStats]] = {}
    by_round: dict[str, dict[int, MetricStats]] = {}
    for policy in sorted({log.policy for log in logs}):
        group = [log for log in logs if log.policy == policy]
        flats = [_flat(log) for log in group]
        policies[policy] = {k: MetricStats.of([f[k] for f in flats]) for k in METRICS}
        series = [bas_series(log) for log in group]
        rounds_seen = sorted({r for s in series for r in s})
        by_round[policy] = {r: MetricStats.of([s.get(r) for s in series]) for r in rounds_seen}

    comparisons = []
    if "ours" in policies and "random" in policies:
        comparisons.append(paired_comparison(logs, "ours", "random"))
    return SummaryReport(scenario, n, rounds, policies, by_round, tuple(comparisons))


def summary_csv(report: SummaryReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("policy", "metric", "mean", "std", "count"))
    for policy in sorted(report.policies):
        for metric in METRICS:
            s = report.policies[policy][metric]
            w.writerow((policy, metric, _cell(s.mean), _cell(s.std), s.count))
    return buf.getvalue()


def rounds_csv(logs: Iterable[EpisodeLog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROUND_COLUMNS)
    for log in sorted(logs, key=lambda log: (log.policy, log.seed)):
        for r in log.records:
            bas = team_bas(r) if r.preferences is not None else None
            w.writerow((log.policy, log.seed, r.round, _cell(bas), r.misalign_count, str(r.team), _cell(r.welfare)))
    return buf.getvalue()


def _cell(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def metrics_from_dicts(docs: Iterable[Mapping[str, Any]]) -> SummaryReport:
    return aggregate(EpisodeLog.from_dict(d) for d in docs)
