"""Headless entry point: validate scenarios, run missions to report files,
synthesize behavior trees, and launch the operator service."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from importlib.resources import files
from pathlib import Path

from .mission import (Mission, ScenarioError, events_to_ndjson, load_scenario, report_text)
from .synthesis import LibraryError, generate_behavior_tree, load_library_file
from .bt import render
from .world import GridError

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("SUBTERRA_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def shipped_scenario(name: str) -> Path:
    return Path(str(files("subterra").joinpath(f"data/scenarios/{name}.json")))


def _write_atomic(path: Path, text: str, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario, seed_override=args.seed)
    except (ScenarioError, GridError, OSError) as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return 1
    mission = Mission(scenario)
    report = mission.run()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "report.json", json.dumps(report.to_dict(), indent=2) + "\n", args.force)
    _write_atomic(out / "events.ndjson", events_to_ndjson(mission.events), args.force)
    _write_atomic(out / "report.txt", report_text(report), args.force)
    print(report_text(report), end="")
    print(f"wrote report.json, events.ndjson, report.txt to {out}")
    return 0 if report.complete else 2


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario, seed_override=args.seed)
    except (ScenarioError, GridError, OSError) as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return 1
    counts = scenario.grid.state_counts()
    print(f"scenario '{scenario.name}' ok: {len(scenario.agents)} agents, "
          f"{len(scenario.tasks)} tasks, {len(scenario.injections)} injections, "
          f"grid {scenario.grid.dims} ({counts['free']} free / {counts['occupied']} occupied)")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    try:
        scenario = load_scenario(args.scenario, seed_override=args.seed)
    except (ScenarioError, GridError, OSError) as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return 1
    print(f"serving '{scenario.name}' on http://{args.host}:{args.port} "
          f"(time scale {args.time_scale}x); POST /control {{\"action\": \"start\"}} to begin")
    serve(scenario, host=args.host, port=args.port, time_scale=args.time_scale,
          autostart=args.autostart, ui_dir=args.ui)
    return 0


def cmd_synth_bt(args) -> int:
    path = args.library or str(files("subterra").joinpath("data/action_library.json"))
    try:
        lib = load_library_file(path)
        tree = generate_behavior_tree(lib, args.goal)
    except (LibraryError, OSError) as e:
        print(f"synthesis failed: {e}", file=sys.stderr)
        return 1
    print(render(tree))
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="subterra", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a mission headless and write report files")
    p_run.add_argument("--scenario", required=True, help="scenario JSON path")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser("validate", help="check a scenario without running it")
    p_val.add_argument("--scenario", required=True)
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(fn=cmd_validate)

    p_srv = sub.add_parser("serve", help="serve the mission API for the operator UI")
    p_srv.add_argument("--scenario", required=True)
    p_srv.add_argument("--seed", type=int, default=None)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--time-scale", type=float, default=1.0,
                       help="simulated seconds per wall second (0 = unpaced)")
    p_srv.add_argument("--autostart", action="store_true", help="start the mission immediately")
    p_srv.add_argument("--ui", default=None, help="serve a built operator UI from this directory")
    p_srv.set_defaults(fn=cmd_serve)

    p_bt = sub.add_parser("synth-bt", help="synthesize and print a behavior tree")
    p_bt.add_argument("--library", default=None, help="action library JSON (default: shipped)")
    p_bt.add_argument("--goal", default="At goal point", help="goal condition name")
    p_bt.set_defaults(fn=cmd_synth_bt)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
