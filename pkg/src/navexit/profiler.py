"""Layer-wise accuracy profiling and earliest-valid exit selection."""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, LabelDomainError
from .model import LayeredModel, Sample, layer_trace


@dataclass(frozen=True)
class AccuracyProfile:
    task_id: str
    sample_count: int
    correct_counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "correct_counts", tuple(int(c) for c in self.correct_counts))
        if self.sample_count < 1:
            raise EmptyInputError(f"profile for task {self.task_id!r} has no samples")
        if not self.correct_counts:
            raise ValueError("profile needs at least one layer")
        if any(c < 0 or c > self.sample_count for c in self.correct_counts):
            raise ValueError(f"correct counts for task {self.task_id!r} must lie in [0, {self.sample_count}]")

    @property
    def num_layers(self) -> int:
        return len(self.correct_counts)

    @property
    def acc_by_layer(self) -> tuple[float, ...]:
        return tuple(c / self.sample_count for c in self.correct_counts)

    @property
    def full_accuracy(self) -> float:
        return self.correct_counts[-1] / self.sample_count

    def accuracy(self, l: int) -> float:
        """Acc(l), 1-based."""
        return self.correct_counts[l - 1] / self.sample_count


@dataclass(frozen=True)
class ExitSelection:
    task_id: str
    exit_layer: int
    satisfied_strictly: bool
    acc_at_exit: float


def count_correct(model: LayeredModel, samples: list[Sample], parallel: int = 1) -> np.ndarray:
    """c_l for l = 1..L, one incremental pass per sample."""
    labels = set(model.label_set)

    def chunk_counts(chunk):
        counts = np.zeros(model.num_layers, dtype=np.int64)
        for s in chunk:
            if s.label not in labels:
                raise LabelDomainError(f"sample {s.sample_id!r} has label {s.label!r} outside the model's label set")
            counts += np.array([p == s.label for p in layer_trace(model, s)], dtype=np.int64)
        return counts

    if parallel <= 1 or len(samples) < 2:
        return chunk_counts(samples)
    chunks = [samples[i::parallel] for i in range(parallel)]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        # integer sums are order independent
        return sum(pool.map(chunk_counts, chunks), np.zeros(model.num_layers, dtype=np.int64))


def layerwise_accuracy(model: LayeredModel, samples: list[Sample], task_id: str, parallel: int = 1) -> AccuracyProfile:
    if not samples:
        raise EmptyInputError(f"no samples for task {task_id!r}")
    strays = [s.sample_id for s in samples if s.task_id != task_id]
    if strays:
        raise ValueError(f"samples {strays[:3]} are not tagged with task {task_id!r}")
    try:
        counts = count_correct(model, samples, parallel)
    except LabelDomainError as exc:
        raise LabelDomainError(f"task {task_id!r}: {exc}") from exc
    return AccuracyProfile(task_id, len(samples), tuple(int(c) for c in counts))


def select_exit_layer(profile: AccuracyProfile) -> ExitSelection:
    """Earliest layer whose accuracy reaches the full-depth accuracy.

    Later dips below Acc(L) are deliberately ignored. Comparison is on integer
    counts so equality with Acc(L) is exact.
    """
    target = profile.correct_counts[-1]
    exit_layer = next(l for l, c in enumerate(profile.correct_counts, start=1) if c >= target)
    return ExitSelection(
        profile.task_id,
        exit_layer,
        exit_layer < profile.num_layers,
        profile.accuracy(exit_layer),
    )


def layer_savings(selection: ExitSelection, num_layers: int) -> float:
    """Fraction of layers skipped by exiting at the selected layer."""
    return (num_layers - selection.exit_layer) / num_layers


def split_by_task(samples: list[Sample]) -> dict[str, list[Sample]]:
    groups: dict[str, list[Sample]] = defaultdict(list)
    for s in samples:
        groups[s.task_id].append(s)
    return dict(groups)


@dataclass
class ProfileResult:
    profiles: dict[str, AccuracyProfile]
    selections: dict[str, ExitSelection]
    model_fingerprint: str | None = None
    dataset_fingerprint: str | None = None

    @property
    def exit_layers(self) -> dict[str, int]:
        return {t: s.exit_layer for t, s in self.selections.items()}


def profile_tasks(model: LayeredModel, samples: list[Sample] | dict[str, list[Sample]],
                  parallel: int = 1) -> ProfileResult:
    groups = split_by_task(samples) if isinstance(samples, list) else dict(samples)
    if not groups:
        raise EmptyInputError("dataset is empty")
    profiles, selections = {}, {}
    for task in sorted(groups):
        prof = layerwise_accuracy(model, groups[task], task, parallel)
        profiles[task] = prof
        selections[task] = select_exit_layer(prof)
    return ProfileResult(profiles, selections)
