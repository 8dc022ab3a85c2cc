"""Command-line entry point: train / plan / run / bench / ingest / serve.

Exit codes: 0 success, 2 validation or parse failure, 3 runtime failure.
All randomness flows from the scenario seed (optionally overridden with
--seed). Set QPATH_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .errors import ParseError, QPathError, ValidationError
from .mapio import ingest_map_image, load_image
from .metrics import load_suite, run_batch, render_table, write_report
from .planner import Mission, MissionEngine, PlannerConfig, hybrid_plan_fn, plan_astar, plan_hybrid
from .qrl import TrainConfig, load_tables, save_tables, train
from .qsim import CircuitParams
from .scenario import (
    Hyperparams,
    ScenarioSpec,
    build_world,
    load_scenario,
    scenario_to_json,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

log = logging.getLogger("qpath")


def _setup_logging() -> None:
    level = os.environ.get("QPATH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _apply_overrides(spec: ScenarioSpec, args: argparse.Namespace) -> ScenarioSpec:
    hp = spec.hyperparams
    updates = {}
    for name in ("q_weight", "epsilon", "episodes", "max_ticks"):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if updates:
        hp = replace(hp, **updates)  # re-runs range validation
        spec = replace(spec, hyperparams=hp)
    if getattr(args, "seed", None) is not None:
        spec = replace(spec, seed=args.seed)
    return spec


def _train_tables(spec: ScenarioSpec):
    world = build_world(spec)
    hp = spec.hyperparams
    config = TrainConfig.from_hyperparams(hp, spec.seed)
    params = CircuitParams(layers=hp.layers, seed=hp.circuit_seed)
    return world, train(world, spec.destination, config, params)


def cmd_train(args: argparse.Namespace) -> int:
    spec = _apply_overrides(load_scenario(args.scenario), args)
    t0 = time.perf_counter()
    _, tables = _train_tables(spec)
    elapsed = time.perf_counter() - t0
    save_tables(tables, args.out)
    print(f"trained {int(tables.free.sum())} states toward {tuple(tables.goal)} "
          f"in {elapsed:.3f}s -> {args.out}")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    spec = _apply_overrides(load_scenario(args.scenario), args)
    world = build_world(spec)
    if args.tables:
        tables = load_tables(args.tables)
        path = plan_hybrid(
            world, tables, spec.source, spec.destination,
            PlannerConfig.from_hyperparams(spec.hyperparams),
        )
        label = "hybrid"
    else:
        path = plan_astar(world, spec.source, spec.destination)
        label = "astar"
    print(f"{label} path: {len(path.cells)} cells, cost {path.cost:.4f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps({"cells": [[c.x, c.y] for c in path.cells], "cost": path.cost}),
            encoding="utf-8",
        )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    spec = _apply_overrides(load_scenario(args.scenario), args)
    world = build_world(spec)
    hp = spec.hyperparams
    tables = None
    if args.tables:
        tables = load_tables(args.tables)
        if tables.goal != spec.destination:
            log.warning(
                "tables trained toward %s but scenario destination is %s; retraining",
                tuple(tables.goal), tuple(spec.destination),
            )
            tables = None
    if tables is None:
        _, tables = _train_tables(spec)
    engine = MissionEngine(
        world,
        Mission.from_scenario(spec),
        hybrid_plan_fn(tables, PlannerConfig.from_hyperparams(hp)),
    )
    mission_log = engine.run()
    if args.out:
        mission_log.save(args.out)
    print(
        f"outcome={mission_log.outcome} ticks={mission_log.ticks} "
        f"distance={mission_log.distance:.4f} turns={mission_log.turn_count} "
        f"replans={mission_log.replan_count}"
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    suite = load_suite(args.suite)
    for path, reason in suite.skipped:
        log.warning("skipping scenario %s: %s", path, reason)
        print(f"warning: skipped scenario {path}: {reason}", file=sys.stderr)
    rows = run_batch(
        suite.scenarios,
        suite.planners,
        parallelism=args.parallelism,
        collect_timings=args.timings,
    )
    write_report(rows, args.out)
    print(render_table(rows), end="")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    try:
        width, height = (int(v) for v in args.dims.lower().split("x"))
    except ValueError:
        raise ValidationError(f"--dims expects WxH, got {args.dims!r}")
    mask = ingest_map_image(load_image(args.image), args.threshold, (width, height))
    doc = {
        "version": 1,
        "grid": {
            "image": {
                "path": str(args.image),
                "threshold": args.threshold,
                "dims": [width, height],
            }
        },
        "obstacles": [],
        "source": None,
        "destination": None,
        "survivors": [],
        "safety_radius": 3.0,
        "seed": args.seed if args.seed is not None else 0,
        "hyperparams": Hyperparams().to_json(),
    }
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    free = int((~mask).sum())
    print(
        f"ingested {width}x{height} grid ({free} free / {mask.size} cells) -> {args.out}; "
        "fill in source/destination before use"
    )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve  # deferred: pulls in the ASGI stack

    spec = _apply_overrides(load_scenario(args.scenario), args)
    if args.tick_ms is not None:
        spec = replace(spec, hyperparams=replace(spec.hyperparams, tick_ms=args.tick_ms))
    return serve(spec, host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpath",
        description="Hybrid quantum-classical grid path planning toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, seed: bool = True) -> None:
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        if seed:
            p.add_argument("--seed", type=int, help="override the scenario seed")

    p_train = sub.add_parser("train", help="train Q tables for a scenario")
    add_common(p_train)
    p_train.add_argument("--out", required=True, help="tables artifact path")
    p_train.add_argument("--epsilon", type=float, help="override exploration rate")
    p_train.add_argument("--episodes", type=int, help="override training episodes")
    p_train.set_defaults(func=cmd_train)

    p_plan = sub.add_parser("plan", help="plan a single path (hybrid with --tables, else A*)")
    add_common(p_plan)
    p_plan.add_argument("--tables", help="trained tables artifact")
    p_plan.add_argument("--out", help="write the path as JSON")
    p_plan.add_argument("--q-weight", dest="q_weight", type=float, help="override QWEIGHT")
    p_plan.set_defaults(func=cmd_plan)

    p_run = sub.add_parser("run", help="execute a mission and write its log")
    add_common(p_run)
    p_run.add_argument("--tables", help="trained tables artifact (retrains on goal mismatch)")
    p_run.add_argument("--out", help="mission log path (JSON lines)")
    p_run.add_argument("--q-weight", dest="q_weight", type=float, help="override QWEIGHT")
    p_run.add_argument("--max-ticks", dest="max_ticks", type=int, help="override tick budget")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="run a benchmark suite and write reports")
    p_bench.add_argument("--suite", required=True, help="suite JSON file")
    p_bench.add_argument("--out", required=True, help="CSV report path (.txt twin alongside)")
    p_bench.add_argument("--parallelism", type=int, default=1)
    p_bench.add_argument(
        "--timings",
        action="store_true",
        help="measure wall-clock training time (report bytes then vary run to run)",
    )
    p_bench.set_defaults(func=cmd_bench)

    p_ingest = sub.add_parser("ingest", help="turn a map image into a scenario skeleton")
    p_ingest.add_argument("--image", required=True, help="PGM or grayscale PNG")
    p_ingest.add_argument("--threshold", type=int, default=128)
    p_ingest.add_argument("--dims", required=True, help="target grid as WxH, e.g. 400x400")
    p_ingest.add_argument("--out", required=True, help="scenario skeleton path")
    p_ingest.add_argument("--seed", type=int, help="seed to embed in the skeleton")
    p_ingest.set_defaults(func=cmd_ingest)

    p_serve = sub.add_parser("serve", help="serve a live steering session")
    add_common(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.add_argument("--tick-ms", dest="tick_ms", type=int, help="tick period in ms")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QPathError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
