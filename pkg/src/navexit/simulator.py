"""Drive-trace replay through the router and executor, with a modeled latency."""

from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import accumulate, groupby
from typing import Iterable, Mapping

from .errors import EmptyInputError, LabelDomainError, LayerIndexError, OrderingError, ReportShapeError, TraceBindingError
from .executor import ExitStrategy, Full, InferenceResult, run, validate_strategy
from .model import LayeredModel, Sample, layer_trace
from .router import ExitConfigTable, NavEvent, NavRouter, resolve

NAV = "nav"


@dataclass(frozen=True)
class LatencyModel:
    overhead_ms: float
    per_layer_ms: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_layer_ms", tuple(float(v) for v in self.per_layer_ms))
        if self.overhead_ms < 0:
            raise ValueError("overhead_ms must be >= 0")
        if not self.per_layer_ms or any(v <= 0 for v in self.per_layer_ms):
            raise ValueError("per_layer_ms must be a nonempty list of positive values")
        cumulative = list(accumulate(self.per_layer_ms, initial=float(self.overhead_ms)))
        if any(b <= a for a, b in zip(cumulative, cumulative[1:])):
            raise ValueError("latency must be strictly increasing in the exit layer")
        object.__setattr__(self, "_cumulative", tuple(cumulative))

    @classmethod
    def uniform(cls, num_layers: int, per_layer_ms: float = 1.0, overhead_ms: float = 0.0) -> "LatencyModel":
        return cls(overhead_ms, (per_layer_ms,) * num_layers)

    @property
    def num_layers(self) -> int:
        return len(self.per_layer_ms)


def latency(lm: LatencyModel, l: int) -> float:
    """overhead + sum of the first ``l`` per-layer costs (ms)."""
    if not isinstance(l, int) or not 0 <= l <= lm.num_layers:
        raise LayerIndexError(f"layer index {l!r} outside [0, {lm.num_layers}]")
    return lm._cumulative[l]


def reduction_pct(base_ms: float, new_ms: float) -> float:
    """Relative reduction in percent, to one decimal."""
    if base_ms <= 0:
        raise ValueError(f"base latency must be positive, got {base_ms}")
    return round(100.0 * (base_ms - new_ms) / base_ms, 1)


# -- traces


@dataclass(frozen=True)
class FrameArrival:
    timestamp: float
    sample_id: str
    active_tasks: tuple[str, ...] = ()


TraceStep = NavEvent | FrameArrival


def check_order(steps: list[TraceStep]) -> None:
    for i in range(1, len(steps)):
        if steps[i].timestamp < steps[i - 1].timestamp:
            raise OrderingError(
                f"trace step {i} (t={steps[i].timestamp} ms) precedes step {i - 1} (t={steps[i - 1].timestamp} ms)"
            )


def bind(steps: list[TraceStep], samples: Mapping[str, Sample]) -> None:
    for i, step in enumerate(steps):
        if isinstance(step, FrameArrival) and step.sample_id not in samples:
            raise TraceBindingError(f"trace step {i}: sample {step.sample_id!r} is not in the dataset")


# -- report


@dataclass(frozen=True)
class Request:
    timestamp: float
    sample_id: str
    task_id: str
    strategy: str  # report label, e.g. "nav" or "frac:0.5"
    resolved: str  # the concrete strategy that ran
    scene: str | None
    exit_layer: int
    latency_ms: float
    correct: bool
    over_inference: bool


@dataclass(frozen=True)
class StrategyTaskStats:
    strategy: str
    task_id: str
    accuracy: float
    mean_latency_ms: float
    mean_layers: float
    latency_reduction_pct: float
    over_inference_count: int
    sample_count: int


@dataclass
class SimReport:
    strategies: list[str]
    rows: list[StrategyTaskStats]
    switch_count: int = 0
    wall_time_s: float | None = None
    requests: list[Request] = field(default_factory=list)

    def get(self, strategy: str, task_id: str) -> StrategyTaskStats:
        for row in self.rows:
            if row.strategy == strategy and row.task_id == task_id:
                return row
        raise KeyError((strategy, task_id))

    @property
    def tasks(self) -> list[str]:
        return sorted({r.task_id for r in self.rows})


def _over_inference(result: InferenceResult, truth: str) -> bool:
    if result.predicted_label == truth or result.per_layer_trace is None:
        return False
    return any(e.label == truth for e in result.per_layer_trace[:-1])


def _aggregate(requests: list[Request], labels: list[str]) -> list[StrategyTaskStats]:
    groups: dict[tuple[str, str], list[Request]] = defaultdict(list)
    for r in requests:
        groups[(r.strategy, r.task_id)].append(r)
    order = {label: i for i, label in enumerate(labels)}
    rows = []
    for (label, task) in sorted(groups, key=lambda k: (order[k[0]], k[1])):
        reqs = groups[(label, task)]
        n = len(reqs)
        mean_lat = math.fsum(r.latency_ms for r in reqs) / n
        full = groups.get(("full", task))
        base = math.fsum(r.latency_ms for r in full) / len(full)
        rows.append(StrategyTaskStats(
            strategy=label,
            task_id=task,
            accuracy=sum(r.correct for r in reqs) / n,
            mean_latency_ms=mean_lat,
            mean_layers=sum(r.exit_layer for r in reqs) / n,
            latency_reduction_pct=100.0 * (base - mean_lat) / base,
            over_inference_count=sum(r.over_inference for r in reqs),
            sample_count=n,
        ))
    return rows


def simulate(trace: list[TraceStep], samples: Mapping[str, Sample] | list[Sample], model: LayeredModel,
             table: ExitConfigTable, latency_model: LatencyModel,
             compare: Iterable[ExitStrategy] = ()) -> SimReport:
    """Replay ``trace``; every frame runs each active task under the routed strategy and every comparison.

    Steps sharing a timestamp apply navigation events before frames, so a frame
    stamped t always sees the latest event with timestamp <= t.
    """
    if not isinstance(samples, Mapping):
        samples = {s.sample_id: s for s in samples}
    steps = list(trace)
    check_order(steps)
    bind(steps, samples)
    if latency_model.num_layers != model.num_layers:
        raise ValueError(f"latency model covers {latency_model.num_layers} layers, model has {model.num_layers}")
    table.validate(model.num_layers)

    baselines: dict[str, ExitStrategy] = {"full": Full()}
    for s in compare:
        validate_strategy(s, model.num_layers)
        baselines.setdefault(str(s), s)
    labels = [NAV, *baselines]
    router = NavRouter(table)
    labels_known = set(model.label_set)
    requests: list[Request] = []

    start = time.perf_counter()
    for _, group in groupby(steps, key=lambda s: s.timestamp):
        group = list(group)
        for step in group:
            if isinstance(step, NavEvent):
                router.apply(step)
        for step in group:
            if not isinstance(step, FrameArrival):
                continue
            sample = samples[step.sample_id]
            if sample.label not in labels_known:
                raise LabelDomainError(f"sample {sample.sample_id!r} has label {sample.label!r} outside the label set")
            state = router.state  # one snapshot per frame
            for task in step.active_tasks or (sample.task_id,):
                plan = [(NAV, resolve(state, task)), *baselines.items()]
                for label, strategy in plan:
                    result = run(model, sample, strategy, trace=True)
                    requests.append(Request(
                        timestamp=step.timestamp,
                        sample_id=sample.sample_id,
                        task_id=task,
                        strategy=label,
                        resolved=str(strategy),
                        scene=state.current_scene,
                        exit_layer=result.layers_executed,
                        latency_ms=latency(latency_model, result.layers_executed),
                        correct=result.predicted_label == sample.label,
                        over_inference=_over_inference(result, sample.label),
                    ))
    wall = time.perf_counter() - start
    return SimReport(labels, _aggregate(requests, labels), router.state.switch_count, wall, requests)


# -- analysis


@dataclass
class OverInference:
    task_id: str
    sample_count: int
    sample_ids: list[str]
    earliest_correct: dict[str, int]

    @property
    def count(self) -> int:
        return len(self.sample_ids)

    @property
    def fraction(self) -> float:
        return self.count / self.sample_count


def over_inference_analysis(model: LayeredModel, samples: list[Sample]) -> dict[str, OverInference]:
    """Samples that some layer l < L classifies correctly while layer L does not, per task."""
    if not samples:
        raise EmptyInputError("no samples to analyse")
    labels = set(model.label_set)
    out: dict[str, OverInference] = {}
    for s in samples:
        if s.label not in labels:
            raise LabelDomainError(f"task {s.task_id!r}: sample {s.sample_id!r} has label {s.label!r} outside the label set")
        entry = out.setdefault(s.task_id, OverInference(s.task_id, 0, [], {}))
        entry.sample_count += 1
        preds = layer_trace(model, s)
        if preds[-1] == s.label:
            continue
        earliest = next((l for l, p in enumerate(preds[:-1], start=1) if p == s.label), None)
        if earliest is not None:
            entry.sample_ids.append(s.sample_id)
            entry.earliest_correct[s.sample_id] = earliest
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class ComparisonRow:
    task_id: str
    strategy: str
    accuracy: float
    mean_latency_ms: float
    best_accuracy: bool
    best_latency: bool
    best: bool


def compare_strategies(report: SimReport, strategies: list[str] | None = None) -> list[ComparisonRow]:
    """Per task, one row per strategy; the best value in each column is flagged, ties jointly.

    ``best`` marks the overall winner: highest accuracy, then lowest latency.
    """
    wanted = list(strategies) if strategies is not None else list(report.strategies)
    missing = [s for s in wanted if s not in report.strategies]
    if missing:
        raise ReportShapeError(f"report has no results for strategies {missing}")
    out = []
    for task in report.tasks:
        rows = []
        for s in wanted:
            try:
                rows.append(report.get(s, task))
            except KeyError:
                raise ReportShapeError(f"report has no row for strategy {s!r}, task {task!r}") from None
        top_acc = max(r.accuracy for r in rows)
        top_lat = min(r.mean_latency_ms for r in rows)
        best_lat_among_acc = min(r.mean_latency_ms for r in rows if r.accuracy == top_acc)
        for r in rows:
            out.append(ComparisonRow(
                task, r.strategy, r.accuracy, r.mean_latency_ms,
                best_accuracy=r.accuracy == top_acc,
                best_latency=r.mean_latency_ms == top_lat,
                best=r.accuracy == top_acc and r.mean_latency_ms == best_lat_among_acc,
            ))
    return out


def format_comparison(rows: list[ComparisonRow]) -> str:
    lines = [f"{'task':<16} {'strategy':<14} {'accuracy':>10} {'latency_ms':>12}  best"]
    for r in rows:
        acc = f"{r.accuracy:.4f}" + ("*" if r.best_accuracy else " ")
        lat = f"{r.mean_latency_ms:.4f}" + ("*" if r.best_latency else " ")
        lines.append(f"{r.task_id:<16} {r.strategy:<14} {acc:>10} {lat:>12}  {'yes' if r.best else ''}")
    return "\n".join(lines)
