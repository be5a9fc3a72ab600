"""Command-line front door: run scenarios, replay recorded gaze, compare
methods, sweep alignment robustness, and serve live sessions.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from gazeintent.harness import METHODS, Metrics, compare_methods, replay_gaze, run_scenario
from gazeintent.intent import GazeSample
from gazeintent.geometry import Point2
from gazeintent.traceio import (
    ValidationError,
    dump_trace,
    load_params,
    load_scenario,
    read_trace,
    rows_to_csv,
    write_csv,
    write_trace,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors (exit 1)
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gazeintent", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    run_p = sub.add_parser("run", help="run one scenario, write metrics and trace")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--method", default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--params", default=None)
    run_p.add_argument("--out", default=".", help="output directory")

    rep_p = sub.add_parser("replay", help="replay a recorded gaze file through a method")
    rep_p.add_argument("--scenario", required=True)
    rep_p.add_argument("--gaze", required=True, help="recorded gaze .jsonl")
    rep_p.add_argument("--method", default=None)
    rep_p.add_argument("--params", default=None)
    rep_p.add_argument("--out", default=None, help="trace output path (.jsonl)")

    cmp_p = sub.add_parser("compare", help="aggregate methods over a scenario directory")
    cmp_p.add_argument("--scenarios", required=True, help="directory of .scn files")
    cmp_p.add_argument("--methods", nargs="*", default=list(METHODS))
    cmp_p.add_argument("--seeds", type=int, default=10, help="seeds 0..N-1 per scenario")
    cmp_p.add_argument("--params", default=None)
    cmp_p.add_argument("--out", default=None, help="CSV output path")

    swp_p = sub.add_parser("sweep-alignment", help="distance x angle alignment accuracy table")
    swp_p.add_argument("--trials", type=int, default=30)
    swp_p.add_argument("--seed", type=int, default=0)
    swp_p.add_argument("--out", default=None, help="CSV output path")

    srv_p = sub.add_parser("serve", help="serve live sessions over TCP")
    srv_p.add_argument("--scenario", required=True)
    srv_p.add_argument("--port", type=int, default=7721)
    srv_p.add_argument("--params", default=None)
    return parser


def _check_method(method):
    if method is not None and method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")


def _metrics_dict(metrics: Metrics) -> dict:
    return {
        "tracking_rate": metrics.tracking_rate,
        "selection_accuracy": metrics.selection_accuracy,
        "min_samples": metrics.min_samples,
        "command_duration": metrics.command_duration,
        "task_duration": metrics.task_duration,
        "remaining_distance_at_command": metrics.remaining_distance_at_command,
    }


def cmd_run(args) -> int:
    _check_method(args.method)
    scenario = load_scenario(args.scenario)
    params = load_params(args.params)
    result = run_scenario(
        scenario,
        method=args.method,
        seed=args.seed,
        params=params.intent_params(),
        control_params=params.control_params(),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.scenario}_{result.method}_{result.seed}"
    write_trace(result.trace, str(out / f"{stem}.trace.jsonl"))
    metrics = _metrics_dict(result.metrics)
    (out / f"{stem}.metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    print(json.dumps({"scenario": result.scenario, "method": result.method,
                      "seed": result.seed, **metrics}))
    return 0


def cmd_replay(args) -> int:
    _check_method(args.method)
    scenario = load_scenario(args.scenario)
    params = load_params(args.params)
    samples = [
        GazeSample(r["t"], Point2(r["x"], r["y"])) for r in read_trace(args.gaze, kind="gaze")
    ]
    trace = replay_gaze(scenario, samples, method=args.method, params=params.intent_params())
    text = dump_trace(trace)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_compare(args) -> int:
    for method in args.methods:
        _check_method(method)
    directory = Path(args.scenarios)
    if not directory.is_dir():
        raise ValidationError(f"{args.scenarios} is not a directory")
    scenarios = [load_scenario(str(p)) for p in sorted(directory.glob("*.scn"))]
    rows = compare_methods(scenarios, methods=args.methods, seeds=tuple(range(args.seeds)))
    if args.out:
        write_csv(rows, args.out)
    print(rows_to_csv(rows), end="")
    return 0


def cmd_sweep_alignment(args) -> int:
    from gazeintent.alignment import sweep_alignment

    rows = sweep_alignment(trials=args.trials, seed=args.seed)
    if args.out:
        write_csv(rows, args.out)
    print(rows_to_csv(rows), end="")
    return 0


def cmd_serve(args) -> int:
    from gazeintent.bridge import SessionServer

    scenario = load_scenario(args.scenario)
    params = load_params(args.params)
    server = SessionServer(scenario, params, port=args.port)
    server.start()
    print(f"serving on port {server.port}", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "run": cmd_run,
            "replay": cmd_replay,
            "compare": cmd_compare,
            "sweep-alignment": cmd_sweep_alignment,
            "serve": cmd_serve,
        }[args.cmd]
        return handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
