"""Command-line entry point: ``tomteam run | validate | oracle | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .engine import POLICIES, run_episode
from .formation import optimal_team
from .metrics import aggregate, rounds_csv, summary_csv
from .oracle import brute_force_optimal
from .records import EpisodeLog
from .scenario import Scenario, ScenarioError, load_scenario
from .types import AlignmentMatrix, FormationParams, ceil_half

log = logging.getLogger("tomteam")


class UsageError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _params(args: argparse.Namespace) -> FormationParams:
    try:
        return FormationParams(
            epsilon=args.epsilon,
            theta=args.theta,
            tau=args.tau,
            lam=args.lam,
            eta=args.eta,
            include_self=getattr(args, "include_self", False),
            accumulate_misalignment=getattr(args, "accumulate_misalignment", False),
        )
    except ValueError as exc:
        raise UsageError(f"invalid parameter: {exc}") from exc


def _episode(job: tuple[dict, dict, int, str, int, str]) -> str:
    scenario_doc, params_doc, rounds, policy, seed, kernel = job
    from .scenario import parse_scenario

    scenario = parse_scenario(scenario_doc)
    return run_episode(scenario, FormationParams.from_dict(params_doc), rounds, policy, seed, kernel=kernel).to_json()


def _write_outputs(out: Path, logs: list[EpisodeLog], texts: list[str]) -> dict[str, Any]:
    (out / "logs").mkdir(parents=True, exist_ok=True)
    for episode, text in zip(logs, texts):
        (out / "logs" / f"{episode.policy}_seed{episode.seed:03d}.json").write_text(text)
    report = aggregate(logs)
    (out / "rounds.csv").write_text(rounds_csv(logs))
    (out / "summary.json").write_text(_dump(report.to_dict()))
    (out / "summary.csv").write_text(summary_csv(report))
    return report.to_dict()


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    params = _params(args)
    n = scenario.n
    eta = params.min_size(n)
    if not 2 <= eta <= n:
        raise UsageError(f"invalid parameter: eta must lie in [2, {n}] for {n} agents, got {eta}")
    if args.rounds < 1:
        raise UsageError(f"invalid parameter: rounds must be >= 1, got {args.rounds}")
    if args.seeds < 1:
        raise UsageError(f"invalid parameter: seeds must be >= 1, got {args.seeds}")
    policies = list(dict.fromkeys(args.policy or ["ours"]))
    out = Path(args.output_dir or f"runs/{scenario.name}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(_dump(scenario.to_dict()))
    run_params = {
        **params.to_dict(),
        "eta_resolved": eta,
        "rounds": args.rounds,
        "seeds": list(range(args.seed_start, args.seed_start + args.seeds)),
        "policies": policies,
        "kernel": args.kernel,
    }
    (out / "params.json").write_text(_dump(run_params))

    jobs = [
        (scenario.to_dict(), params.to_dict(), args.rounds, p, s, args.kernel)
        for p in policies
        for s in range(args.seed_start, args.seed_start + args.seeds)
    ]
    if args.workers > 1 and not any(a.kind == "llm" for a in scenario.agents):
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            texts = list(pool.map(_episode, jobs, chunksize=max(1, len(jobs) // (4 * args.workers))))
    else:
        texts = [_episode(j) for j in jobs]
    logs = [EpisodeLog.from_json(t) for t in texts]
    report = _write_outputs(out, logs, texts)
    _print_summary(report)
    print(f"wrote {len(logs)} episode logs to {out}")
    return 0


def _print_summary(report: dict[str, Any]) -> None:
    for policy, stats in report["policies"].items():
        bas = stats["bas_final"]
        stab = stats["stability"]
        bas_txt = "n/a" if bas["mean"] is None else f"{bas['mean']:.4f} +/- {bas['std']:.4f}"
        stab_txt = "n/a" if stab["mean"] is None else f"{stab['mean']:.1f}/{report['rounds']}"
        print(f"{policy:>7}: final BAS {bas_txt}  stability {stab_txt}  reformations {stats['reformations']['mean']:.2f}")
    for c in report["comparisons"]:
        gain = "n/a" if c["relative_gain"] is None else f"{100 * c['relative_gain']:+.1f}%"
        print(f"{c['a']} - {c['b']} ({c['metric']}, {c['n_pairs']} paired seeds): {c['mean_diff']:+.4f} ({gain}), p={c['p_value']}")


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    kinds = sorted({a.kind for a in scenario.agents})
    print(f"ok: {scenario.name}: {scenario.n} agents, dimension {scenario.dimension}, kinds {kinds}")
    return 0


def load_matrix(path: str | Path) -> tuple[int, AlignmentMatrix, dict[int, float] | None]:
    """Read ``{"n": .., "scores": [[i, j, s], ...], "index_base": 0|1, "alpha": {..}}``."""
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise UsageError(f"{p}: cannot read matrix file ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        base = int(data.get("index_base", 0))
        n = int(data["n"])
        scores = {}
        for k, entry in enumerate(data["scores"]):
            if len(entry) != 3:
                raise UsageError(f"scores[{k}]: expected [i, j, score]")
            i, j, s = entry
            scores[(int(i) - base, int(j) - base)] = float(s)
        alpha = data.get("alpha")
        alpha = None if alpha is None else {int(k) - base: float(v) for k, v in alpha.items()}
        return n, AlignmentMatrix(0, scores), alpha
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"{p}: malformed matrix document ({exc})") from exc


def cmd_oracle(args: argparse.Namespace) -> int:
    n, m, alpha = load_matrix(args.matrix)
    eta = args.eta if args.eta is not None else ceil_half(n)
    lam = args.lam if alpha is not None else 0.0
    if not m.covers(range(n)):
        raise UsageError(f"{args.matrix}: scores do not cover every ordered pair of {n} agents")
    res = brute_force_optimal(n, m.scores, eta, args.epsilon, lam, alpha, args.include_self)
    doc: dict[str, Any] = {
        "team": [i + 1 for i in res.team],
        "welfare": res.welfare,
        "stable": res.stable,
        "epsilon_fallback": res.epsilon_fallback,
        "eta": eta,
    }
    code = 0
    if args.compare:
        params = FormationParams(epsilon=args.epsilon, lam=lam, eta=eta, alpha=alpha, include_self=args.include_self)
        out = optimal_team(n, m, params)
        solver = {
            "team": [i + 1 for i in out.team.sorted()],
            "welfare": out.welfare,
            "stable": out.stable,
            "epsilon_fallback": out.epsilon_fallback,
        }
        match = all(solver[k] == doc[k] for k in solver)
        doc["solver"] = solver
        doc["match"] = match
        code = 0 if match else 1
    print(_dump(doc), end="")
    return code


def cmd_report(args: argparse.Namespace) -> int:
    src = Path(args.input_dir)
    files = sorted((src / "logs").glob("*.json")) if (src / "logs").is_dir() else sorted(src.glob("*.json"))
    if not files:
        raise UsageError(f"{src}: no episode logs found")
    logs = [EpisodeLog.from_json(f.read_text()) for f in files]
    try:
        report = aggregate(logs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.output_dir) if args.output_dir else src
    out.mkdir(parents=True, exist_ok=True)
    (out / "rounds.csv").write_text(rounds_csv(logs))
    (out / "summary.json").write_text(_dump(report.to_dict()))
    (out / "summary.csv").write_text(summary_csv(report))
    _print_summary(report.to_dict())
    return 0


def _formation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.2, help="alignment tolerance (default 0.2)")
    p.add_argument("--eta", type=int, default=None, help="minimum team size (default ceil(n/2))")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="specialization weight (default 1)")
    p.add_argument("--include-self", action="store_true", help="count the self-pair as 1.0 in preferences")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomteam", description="Belief-aligned stable team formation simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run episodes for every policy x seed")
    run.add_argument("--scenario", required=True)
    run.add_argument("--policy", action="append", choices=POLICIES, help="repeatable; default: ours")
    run.add_argument("--seeds", type=int, default=1, help="number of seeds, counted from --seed-start")
    run.add_argument("--seed-start", type=int, default=0)
    run.add_argument("--rounds", type=int, default=5)
    _formation_flags(run)
    run.add_argument("--theta", type=float, default=0.3, help="stability threshold (default 0.3)")
    run.add_argument("--tau", type=int, default=1, help="consecutive over-threshold rounds (default 1)")
    run.add_argument("--accumulate-misalignment", action="store_true", help="never reset c between rounds")
    run.add_argument("--kernel", default="cosine", choices=("cosine", "distance"))
    run.add_argument("--output-dir")
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=cmd_validate)

    orc = sub.add_parser("oracle", help="brute-force optimal team for a matrix file")
    orc.add_argument("--matrix", required=True)
    _formation_flags(orc)
    orc.add_argument("--compare", action="store_true", help="also run the main solver and diff")
    orc.set_defaults(func=cmd_oracle)

    rep = sub.add_parser("report", help="re-aggregate existing episode logs")
    rep.add_argument("--input-dir", required=True)
    rep.add_argument("--output-dir")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
