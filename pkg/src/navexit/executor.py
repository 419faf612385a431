"""Inference under an exit strategy.

Two adaptive exit rules are shipped because the exit criterion is left
abstract: a max-softmax threshold and a k-stable prediction rule. Both are
interpretations, not a canonical definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import EmptyInputError, StrategyConfigError
from .model import LayerCounter, LayeredModel, Sample


@dataclass(frozen=True)
class Full:
    def exit_layer(self, num_layers: int) -> int:
        return num_layers

    def __str__(self):
        return "full"


@dataclass(frozen=True)
class FixedExit:
    layer: int

    def exit_layer(self, num_layers: int) -> int:
        return self.layer

    def __str__(self):
        return f"fixed:{self.layer}"


@dataclass(frozen=True)
class ConfidenceThreshold:
    threshold: float
    min_layer: int = 1

    def __str__(self):
        return f"conf:{self.threshold}" + (f":{self.min_layer}" if self.min_layer != 1 else "")


@dataclass(frozen=True)
class StablePrediction:
    k: int
    min_layer: int = 1

    def __str__(self):
        return f"stable:{self.k}" + (f":{self.min_layer}" if self.min_layer != 1 else "")


@dataclass(frozen=True)
class FixedFraction:
    fraction: float

    def exit_layer(self, num_layers: int) -> int:
        # rounds up; the float product is nudged down so e.g. 0.3 * 10 stays 3
        return min(num_layers, max(1, math.ceil(self.fraction * num_layers - 1e-9)))

    def __str__(self):
        return f"frac:{self.fraction}"


ExitStrategy = Union[Full, FixedExit, ConfidenceThreshold, StablePrediction, FixedFraction]


def validate_strategy(strategy: ExitStrategy, num_layers: int) -> None:
    def bad(msg):
        raise StrategyConfigError(f"{strategy}: {msg}")

    if isinstance(strategy, Full):
        return
    if isinstance(strategy, FixedExit):
        if not isinstance(strategy.layer, int) or not 1 <= strategy.layer <= num_layers:
            bad(f"exit layer must lie in [1, {num_layers}]")
    elif isinstance(strategy, ConfidenceThreshold):
        if not 0.0 <= strategy.threshold <= 1.0:
            bad("threshold must lie in [0, 1]")
    elif isinstance(strategy, StablePrediction):
        if not isinstance(strategy.k, int) or strategy.k < 2:
            bad("k must be an integer >= 2")
    elif isinstance(strategy, FixedFraction):
        if not 0.0 < strategy.fraction <= 1.0:
            bad("fraction must lie in (0, 1]")
    else:
        raise StrategyConfigError(f"unknown strategy {strategy!r}")
    if isinstance(strategy, (ConfidenceThreshold, StablePrediction)):
        if not isinstance(strategy.min_layer, int) or not 1 <= strategy.min_layer <= num_layers:
            bad(f"min_layer must lie in [1, {num_layers}]")


def parse_strategy(text: str) -> ExitStrategy:
    """Parse ``full``, ``fixed:9``, ``conf:0.9[:min]``, ``stable:3[:min]`` or ``frac:0.5``."""
    name, _, rest = text.strip().partition(":")
    args = rest.split(":") if rest else []
    try:
        if name == "full" and not args:
            return Full()
        if name == "fixed" and len(args) == 1:
            return FixedExit(int(args[0]))
        if name == "conf" and len(args) in (1, 2):
            return ConfidenceThreshold(float(args[0]), int(args[1]) if len(args) == 2 else 1)
        if name == "stable" and len(args) in (1, 2):
            return StablePrediction(int(args[0]), int(args[1]) if len(args) == 2 else 1)
        if name == "frac" and len(args) == 1:
            return FixedFraction(float(args[0]))
    except ValueError:
        pass
    raise StrategyConfigError(f"cannot parse strategy {text!r}")


@dataclass(frozen=True)
class TraceEntry:
    layer: int
    label: str
    confidence: float


@dataclass(frozen=True)
class InferenceResult:
    predicted_label: str
    exit_layer_used: int
    layers_executed: int
    strategy_used: ExitStrategy
    per_layer_trace: tuple[TraceEntry, ...] | None = None


def run(model: LayeredModel, x, strategy: ExitStrategy, trace: bool = False,
        counter: LayerCounter | None = None) -> InferenceResult:
    L = model.num_layers
    validate_strategy(strategy, L)
    fixed = strategy.exit_layer(L) if hasattr(strategy, "exit_layer") else None
    needs_head = trace or fixed is None

    state = model.embed(x)
    entries: list[TraceEntry] = []
    recent: list[str] = []
    label = None
    executed = 0
    for l in range(1, L + 1):
        state = model.step(state)
        executed += 1
        if counter is not None:
            counter.count += 1
        if needs_head or l == fixed:
            label, conf = model.confidence_at(state)
            if trace:
                entries.append(TraceEntry(l, label, conf))
        if fixed is not None:
            if l == fixed:
                break
            continue
        if isinstance(strategy, ConfidenceThreshold):
            if l >= strategy.min_layer and conf >= strategy.threshold:
                break
        else:
            recent.append(label)
            if l >= strategy.min_layer and len(recent) >= strategy.k and len(set(recent[-strategy.k:])) == 1:
                break
    return InferenceResult(label, l, executed, strategy, tuple(entries) if trace else None)


@dataclass
class BatchResult:
    results: list[InferenceResult]
    accuracy: float
    mean_layers_executed: float


def batch_run(model: LayeredModel, samples: list[Sample], strategy: ExitStrategy, trace: bool = False) -> BatchResult:
    if not samples:
        raise EmptyInputError("no samples to run")
    results = [run(model, s, strategy, trace) for s in samples]
    correct = sum(r.predicted_label == s.label for r, s in zip(results, samples))
    return BatchResult(
        results,
        correct / len(samples),
        sum(r.layers_executed for r in results) / len(results),
    )
