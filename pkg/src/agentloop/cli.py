"""Operator entry points: pipeline runs, game play, datasets, and evaluation."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import AgentLoopError, ConfigError
from .experience import parse_dataset
from .games import (
    GAME_PRESETS,
    MatchRecord,
    make_policy,
    run_match,
    run_tournament,
    scores_to_csv,
)
from .train import (
    ModelRegistry,
    RunConfig,
    build_runtime,
    evaluate_registry,
    run_pipeline,
)

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentloop",
        description="Self-improving multi-agent pipelines and negotiation games.",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument(
        "--format", choices=("table", "csv", "records"), default="table", dest="out_format"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run-pipeline", help="run the fine-tuning iteration loop")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)

    play = sub.add_parser("play-match", help="play one negotiation match")
    play.add_argument("--game", required=True, choices=sorted(GAME_PRESETS))
    play.add_argument("--policy-a", default="scripted:propose-accept")
    play.add_argument("--policy-b", default="scripted:accept2")
    play.add_argument("--out", default=None)

    tour = sub.add_parser("tournament", help="run repeated matches and emit a score table")
    tour.add_argument("--game", required=True, choices=sorted(GAME_PRESETS))
    tour.add_argument("--matches", type=int, default=10)
    tour.add_argument("--policy-a", default="scripted:propose-accept")
    tour.add_argument("--policy-b", default="scripted:accept2")
    tour.add_argument("--out", default=None)

    export = sub.add_parser("export-dataset", help="re-export one agent dataset from a run")
    export.add_argument("--run", required=True)
    export.add_argument("--iteration", type=int, required=True)
    export.add_argument("--agent", required=True)
    export.add_argument("--out", required=True)

    stats = sub.add_parser("stats", help="library statistics for one iteration")
    stats.add_argument("--run", required=True)
    stats.add_argument("--iteration", type=int, required=True)
    stats.add_argument("--agent", default=None)

    ev = sub.add_parser("eval", help="score a model registry on a task file")
    ev.add_argument("--config", required=True)
    ev.add_argument("--tasks", default=None)
    ev.add_argument("--run", default=None)
    ev.add_argument("--iteration", type=int, default=None)

    return parser


def _print_match(record: MatchRecord, out_format: str) -> None:
    if out_format == "records":
        for turn in record.turns:
            print(json.dumps(turn.to_record(), ensure_ascii=False))
    else:
        for turn in record.turns:
            status = "ok" if turn.error is None else f"invalid ({turn.error})"
            print(f"--- {turn.player} [{status}] ---")
            print(turn.raw)
    result = record.result
    print(
        f"outcome={result.outcome.value} winner={result.winner or 'tie'} "
        f"rounds={result.rounds_used} utilities="
        + " ".join(f"{p}:{u:g}" for p, u in result.utilities.items())
    )


def _cmd_run_pipeline(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.workers:
        cfg.workers = args.workers
    reports = run_pipeline(cfg, args.out)
    for report in reports:
        print(json.dumps(report.to_record(), ensure_ascii=False))
    return 0


def _cmd_play_match(args) -> int:
    cfg = GAME_PRESETS[args.game]()
    policy_a = make_policy(args.policy_a, cfg, "RED")
    policy_b = make_policy(args.policy_b, cfg, "BLUE")
    record = run_match(cfg, policy_a, policy_b, seed=args.seed)
    _print_match(record, args.out_format)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "match.jsonl").open("w", encoding="utf-8") as fh:
            for turn in record.turns:
                fh.write(json.dumps(turn.to_record(), ensure_ascii=False) + "\n")
    return 0


def _cmd_tournament(args) -> int:
    cfg = GAME_PRESETS[args.game]()
    pairing = f"{args.policy_a} vs {args.policy_b}"
    row, _records = run_tournament(
        cfg,
        lambda: make_policy(args.policy_a, cfg, "RED"),
        lambda: make_policy(args.policy_b, cfg, "BLUE"),
        n_matches=args.matches,
        seed=args.seed,
        pairing=pairing,
    )
    csv_text = scores_to_csv([row])
    if args.out_format == "records":
        print(
            json.dumps(
                {
                    "pairing": row.pairing,
                    "matches": row.matches,
                    "decisive_games": row.decisive_games,
                    "win_rate_p1": row.win_rate_p1,
                    "win_rate_p2": row.win_rate_p2,
                    "mean_payoff_p1": row.mean_payoff_p1,
                    "mean_payoff_p2": row.mean_payoff_p2,
                }
            )
        )
    else:
        print(csv_text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scores.csv").write_text(csv_text, encoding="utf-8")
    return 0


def _dataset_path(run_dir: str, iteration: int, agent: str) -> Path:
    return Path(run_dir) / f"iter_{iteration:03d}" / "datasets" / f"{agent}.jsonl"


def _cmd_export_dataset(args) -> int:
    source = _dataset_path(args.run, args.iteration, args.agent)
    if not source.exists():
        raise ConfigError(f"no dataset at {source}")
    triples = parse_dataset(source)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(source.read_text(encoding="utf-8"), encoding="utf-8")
    print(f"{len(triples)} records -> {out}")
    return 0


def _cmd_stats(args) -> int:
    manifest_path = Path(args.run) / f"iter_{args.iteration:03d}" / "datasets" / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    agents = manifest.get("agents", {})
    selected = {args.agent: agents[args.agent]} if args.agent else agents
    if args.agent and args.agent not in agents:
        raise ConfigError(f"agent {args.agent!r} not in manifest")
    for agent_id, info in sorted(selected.items()):
        direct, augmented = info["direct"], info["augmented"]
        ratio = f"{100.0 * augmented / direct:.2f}%" if direct else "n/a"
        if args.out_format == "records":
            print(
                json.dumps(
                    {
                        "agent": agent_id,
                        "direct": direct,
                        "augmented": augmented,
                        "augmentation_ratio": (100.0 * augmented / direct) if direct else None,
                    }
                )
            )
        else:
            print(f"{agent_id}: direct={direct} augmented={augmented} ratio={ratio}")
    return 0


def _cmd_eval(args) -> int:
    cfg = RunConfig.from_file(args.config)
    runtime = build_runtime(cfg)
    if args.run:
        registry = ModelRegistry.load(Path(args.run) / "registry.json")
        if not registry.has_iteration(0):
            raise ConfigError(f"no registry in {args.run}")
    else:
        from .core import ModelRef
        from .topology import build_preset
        from .train import _backend_kind

        registry = ModelRegistry()
        preset = build_preset(cfg.topology)
        registry.set_iteration(
            0,
            {
                agent_id: ModelRef(_backend_kind(cfg), cfg.models.get(agent_id, "base"), cfg.decoding)
                for agent_id in preset.agents
            },
        )
    iteration = args.iteration
    if iteration is None:
        iteration = max(t for t in range(0, cfg.iterations + 1) if registry.has_iteration(t))
    result = evaluate_registry(cfg, registry, iteration, runtime, tasks_path=args.tasks)
    if result.tp_accuracy is not None:
        print(f"TP {result.tp_accuracy:.1f}, Overall {result.accuracy:.1f}")
    else:
        print(f"Accuracy {result.accuracy:.1f} ({result.correct}/{result.problems})")
    if args.out_format == "records":
        print(
            json.dumps(
                {
                    "problems": result.problems,
                    "correct": result.correct,
                    "accuracy": result.accuracy,
                    "tp_accuracy": result.tp_accuracy,
                }
            )
        )
    return 0


_COMMANDS = {
    "run-pipeline": _cmd_run_pipeline,
    "play-match": _cmd_play_match,
    "tournament": _cmd_tournament,
    "export-dataset": _cmd_export_dataset,
    "stats": _cmd_stats,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AgentLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
