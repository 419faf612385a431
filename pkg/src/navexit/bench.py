"""Wall-clock benchmark: median per-inference time per strategy, relative to full inference."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from .errors import EmptyInputError, UnsupportedBackendError
from .executor import ExitStrategy, Full, run, validate_strategy
from .model import LayeredModel, Sample, SyntheticTransformer


@dataclass(frozen=True)
class BenchRow:
    strategy: str
    median_ms: float
    ratio_to_full: float
    reps: int


def bench(model: LayeredModel, samples: list[Sample], strategies: list[ExitStrategy],
          reps: int = 200, warmup: int = 20) -> list[BenchRow]:
    """Strategies are timed round-robin so drift in machine load hits all of them alike."""
    if not isinstance(model, SyntheticTransformer):
        raise UnsupportedBackendError("bench needs the synthetic transformer backend; a table has no compute")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    if not samples:
        raise EmptyInputError("no samples to benchmark")
    # the baseline is timed on its own, so a requested Full measures harness noise
    plan = [Full(), *strategies]
    for s in plan:
        validate_strategy(s, model.num_layers)

    times: dict[int, list[int]] = {i: [] for i in range(len(plan))}
    for rep in range(warmup + reps):
        sample = samples[rep % len(samples)]
        for i, strategy in enumerate(plan):
            t0 = time.perf_counter_ns()
            run(model, sample, strategy)
            elapsed = time.perf_counter_ns() - t0
            if rep >= warmup:
                times[i].append(elapsed)
    medians = [statistics.median(times[i]) / 1e6 for i in range(len(plan))]
    return [BenchRow(str(s), m, m / medians[0], reps) for s, m in zip(plan[1:], medians[1:])]


def format_bench(rows: list[BenchRow]) -> str:
    lines = [f"{'strategy':<14} {'median_ms':>12} {'ratio_to_full':>14} {'reps':>6}"]
    lines += [f"{r.strategy:<14} {r.median_ms:>12.4f} {r.ratio_to_full:>14.3f} {r.reps:>6}" for r in rows]
    return "\n".join(lines)
