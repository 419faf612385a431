"""Command-line entry point.

Exit codes: 0 success, 1 domain or validation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io, num_threads
from .bench import bench, format_bench
from .errors import ArtifactError, NavExitError
from .executor import FixedExit, batch_run, parse_strategy, run
from .profiler import profile_tasks
from .simulator import LatencyModel, over_inference_analysis, simulate
from .synth import TableSpec, generate_synthetic, generate_table, spec_from_dict
from .validate import validate_artifact


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_synthetic(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{args.spec}: invalid JSON: {exc.msg}", offset=exc.pos) from None
    spec = spec_from_dict(raw)
    model, samples = generate_table(spec) if isinstance(spec, TableSpec) else generate_synthetic(spec)
    mfp = io.write_model(model, args.out_model)
    dfp = io.write_dataset(samples, args.out_data)
    print(f"model   {args.out_model}  {mfp}")
    print(f"dataset {args.out_data}  {dfp}  ({len(samples)} samples)")
    return 0


def cmd_profile(args) -> int:
    model = io.read_model(args.model)
    samples = io.read_dataset(args.dataset)
    result = profile_tasks(model, samples, parallel=args.parallel or num_threads())
    result.model_fingerprint = io.fingerprint(args.model)
    result.dataset_fingerprint = io.fingerprint(args.dataset)
    io.write_profile(result, args.out)
    for task, sel in result.selections.items():
        print(f"{task}\texit_layer={sel.exit_layer}\tacc={sel.acc_at_exit:.4f}\tstrict={sel.satisfied_strictly}")
    return 0


def cmd_select(args) -> int:
    result = io.read_profile(args.profile)
    tasks = [args.task] if args.task else sorted(result.selections)
    for task in tasks:
        if task not in result.selections:
            raise NavExitError(f"task {task!r} is not in {args.profile}")
        sel = result.selections[task]
        prof = result.profiles[task]
        print(f"{task}\t{sel.exit_layer}\t{prof.num_layers}\t{sel.acc_at_exit:.6f}\t{prof.full_accuracy:.6f}"
              f"\t{'strict' if sel.satisfied_strictly else 'fallback'}")
    return 0


def cmd_run(args) -> int:
    model = io.read_model(args.model)
    samples = io.read_dataset(args.dataset)
    if args.strategy == "profile":
        if not args.profile:
            raise NavExitError("--strategy profile needs --profile")
        result = io.read_profile(args.profile)
        io.check_fingerprint(result, args.model)
        layers = result.exit_layers
        missing = sorted({s.task_id for s in samples} - set(layers))
        if missing:
            raise NavExitError(f"profile has no exit layer for tasks {missing}")
        records, correct, executed = [], 0, 0
        for s in samples:
            r = run(model, s, FixedExit(layers[s.task_id]), trace=args.trace)
            records.append(io.result_record(s, r))
            correct += r.predicted_label == s.label
            executed += r.layers_executed
        acc, mean_layers = correct / len(samples), executed / len(samples)
    else:
        if args.profile:
            io.check_fingerprint(io.read_profile(args.profile), args.model)
        batch = batch_run(model, samples, parse_strategy(args.strategy), trace=args.trace)
        records = [io.result_record(s, r) for s, r in zip(samples, batch.results)]
        acc, mean_layers = batch.accuracy, batch.mean_layers_executed
    _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), args.out)
    print(f"accuracy={acc:.6f} mean_layers_executed={mean_layers:.4f} n={len(samples)}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    model = io.read_model(args.model)
    samples = io.read_dataset(args.dataset)
    trace = io.decode_trace(sys.stdin.read()) if args.trace == "-" else io.read_trace(args.trace)
    table, _ = io.config_from_files(args.config, args.profile, args.model)
    lm = io.read_latency_model(args.latency) if args.latency else LatencyModel.uniform(model.num_layers)
    compare = [parse_strategy(s) for s in args.compare.split(",") if s] if args.compare else []
    report = simulate(trace, samples, model, table, lm, compare)
    Path(args.out).write_text(io.encode_report(report, include_wall_time=args.wall_time,
                                               include_requests=args.requests))
    sys.stdout.write(io.report_text(report))
    if args.over_inference:
        for task, info in over_inference_analysis(model, samples).items():
            print(f"over-inference {task}: {info.count}/{info.sample_count}")
    return 0


def cmd_report(args) -> int:
    report = io.read_report(args.input)
    _emit(io.report_csv(report) if args.format == "csv" else io.report_text(report), args.out)
    return 0


def cmd_bench(args, parser) -> int:
    if args.reps < 1:
        parser.error("--reps must be >= 1")
    if args.warmup < 0:
        parser.error("--warmup must be >= 0")
    model = io.read_model(args.model)
    samples = io.read_dataset(args.dataset)
    strategies = [parse_strategy(s) for s in args.strategies.split(",") if s]
    rows = bench(model, samples, strategies, reps=args.reps, warmup=args.warmup)
    _emit(format_bench(rows) + "\n", args.out)
    return 0


def cmd_validate(args) -> int:
    report = validate_artifact(args.path, args.model, args.dataset)
    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="navexit", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synthetic", help="generate a model + dataset fixture from a JSON spec")
    g.add_argument("--spec", required=True, help="generator spec (JSON, kind synthetic|table)")
    g.add_argument("--out-model", required=True, help="model container to write")
    g.add_argument("--out-data", required=True, help="dataset (JSONL) to write")

    g = sub.add_parser("profile", help="layer-wise accuracy per task and earliest valid exit layer")
    g.add_argument("--model", required=True, help="model container")
    g.add_argument("--dataset", required=True, help="labeled dataset (JSONL) with task ids")
    g.add_argument("--out", required=True, help="profile artifact to write (JSON)")
    g.add_argument("--parallel", type=int, default=None,
                   help="worker threads over samples (default: NAVEXIT_NUM_THREADS or 1)")

    g = sub.add_parser("select", help="print selected exit layers from a profile")
    g.add_argument("--profile", required=True, help="profile artifact")
    g.add_argument("--task", help="only this task")

    g = sub.add_parser("run", help="run inference under one exit strategy; writes a JSONL result stream")
    g.add_argument("--model", required=True, help="model container")
    g.add_argument("--dataset", required=True, help="dataset (JSONL)")
    g.add_argument("--strategy", required=True,
                   help="full | fixed:L | conf:T[:min] | stable:K[:min] | frac:R | profile (per-task exit from --profile)")
    g.add_argument("--profile", help="profile artifact; checked against the model fingerprint")
    g.add_argument("--trace", action="store_true", help="include the per-layer trace in each record")
    g.add_argument("--out", help="result stream path (default: stdout)")

    g = sub.add_parser("simulate", help="replay a drive trace through the router and executor")
    g.add_argument("--model", required=True, help="model container")
    g.add_argument("--dataset", required=True, help="dataset (JSONL) the trace's sample ids refer to")
    g.add_argument("--trace", required=True, help="trace (JSONL); '-' reads stdin")
    g.add_argument("--config", required=True, help="scene map (JSON): scenes -> tasks, default strategy, profile")
    g.add_argument("--profile", help="profile artifact (overrides the one named in --config)")
    g.add_argument("--latency", help="latency model (JSON); default uniform 1 ms per layer, no overhead")
    g.add_argument("--out", required=True, help="report to write (JSON)")
    g.add_argument("--compare", default="full,frac:0.5", help="comma-separated comparison strategies")
    g.add_argument("--wall-time", action="store_true", help="record wall time (makes the report non-reproducible)")
    g.add_argument("--requests", action="store_true", help="include every simulated request in the report")
    g.add_argument("--over-inference", action="store_true", help="also print over-inference counts per task")

    g = sub.add_parser("report", help="render a simulation report")
    g.add_argument("--in", dest="input", required=True, help="report (JSON)")
    g.add_argument("--format", choices=["csv", "text"], default="text", help="output format")
    g.add_argument("--out", help="output path (default: stdout)")

    g = sub.add_parser("bench", help="median wall-clock per inference per strategy")
    g.add_argument("--model", required=True, help="synthetic model container")
    g.add_argument("--dataset", required=True, help="dataset (JSONL)")
    g.add_argument("--strategies", required=True, help="comma-separated strategies")
    g.add_argument("--reps", type=int, default=200, help="timed repetitions per strategy (>= 1)")
    g.add_argument("--warmup", type=int, default=20, help="untimed warmup repetitions")
    g.add_argument("--out", help="output path (default: stdout)")

    g = sub.add_parser("validate", help="check an artifact; exit 1 on any violation")
    g.add_argument("path", help="artifact to check")
    g.add_argument("--model", help="model container to cross-check fingerprints against")
    g.add_argument("--dataset", help="dataset to cross-check fingerprints / sample ids against")
    return p


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "profile": cmd_profile,
    "select": cmd_select,
    "run": cmd_run,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            return cmd_bench(args, parser)
        return COMMANDS[args.command](args)
    except (NavExitError, OSError, ValueError) as exc:
        print(f"navexit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
