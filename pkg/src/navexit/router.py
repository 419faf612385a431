"""Scene-context routing: navigation events select the exit configuration applied to each task."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .errors import ConfigValidationError, OrderingError, StrategyConfigError
from .executor import ExitStrategy, FixedExit, Full, validate_strategy


@dataclass(frozen=True)
class NavEvent:
    timestamp: float  # milliseconds
    scene: str

    def __post_init__(self):
        if not self.scene:
            raise ConfigValidationError("scene id must be nonempty")


@dataclass(frozen=True)
class ExitConfigTable:
    entries: Mapping[str, Mapping[str, int]]
    default_strategy: ExitStrategy = field(default_factory=Full)

    def __post_init__(self):
        frozen = {s: MappingProxyType(dict(tasks)) for s, tasks in self.entries.items()}
        object.__setattr__(self, "entries", MappingProxyType(frozen))

    @property
    def scenes(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def validate(self, num_layers: int) -> None:
        for scene, tasks in self.entries.items():
            for task, layer in tasks.items():
                if not isinstance(layer, int) or not 1 <= layer <= num_layers:
                    raise ConfigValidationError(
                        f"scene {scene!r}, task {task!r}: exit layer {layer!r} outside [1, {num_layers}]"
                    )
        try:
            validate_strategy(self.default_strategy, num_layers)
        except StrategyConfigError as exc:
            raise ConfigValidationError(f"default strategy: {exc}") from exc

    def to_plain(self) -> dict:
        return {s: dict(t) for s, t in self.entries.items()}

    def __eq__(self, other):
        if not isinstance(other, ExitConfigTable):
            return NotImplemented
        return self.to_plain() == other.to_plain() and self.default_strategy == other.default_strategy

    __hash__ = None


@dataclass(frozen=True)
class RouterState:
    config_table: ExitConfigTable
    current_scene: str | None = None
    last_event_time: float = float("-inf")
    switch_count: int = 0


def apply_event(state: RouterState, event: NavEvent) -> RouterState:
    if event.timestamp < state.last_event_time:
        raise OrderingError(
            f"event at t={event.timestamp} ms precedes the last applied event at t={state.last_event_time} ms"
        )
    # the first announcement after a cold start is not a switch
    changed = state.current_scene is not None and event.scene != state.current_scene
    return replace(
        state,
        current_scene=event.scene,
        last_event_time=event.timestamp,
        switch_count=state.switch_count + int(changed),
    )


def resolve(state: RouterState, task_id: str) -> ExitStrategy:
    table = state.config_table
    layer = table.entries.get(state.current_scene, {}).get(task_id) if state.current_scene else None
    return FixedExit(layer) if layer is not None else table.default_strategy


def load_config(profile_exit_layers: Mapping[str, int], scene_task_map: Mapping[str, list[str]],
                default_strategy: ExitStrategy | None = None, num_layers: Mapping[str, int] | int | None = None
                ) -> ExitConfigTable:
    """Build the scene -> task -> exit-layer table from profiled exit layers.

    ``num_layers`` (one depth, or per task) bounds the exit layers when given.
    """
    entries: dict[str, dict[str, int]] = {}
    for scene, tasks in scene_task_map.items():
        if not scene:
            raise ConfigValidationError("scene ids must be nonempty")
        entries[scene] = {}
        for task in tasks:
            if task not in profile_exit_layers:
                raise ConfigValidationError(f"scene {scene!r} references task {task!r}, which was not profiled")
            layer = profile_exit_layers[task]
            depth = num_layers.get(task) if isinstance(num_layers, Mapping) else num_layers
            if depth is not None and not 1 <= layer <= depth:
                raise ConfigValidationError(f"scene {scene!r}, task {task!r}: exit layer {layer} outside [1, {depth}]")
            entries[scene][task] = layer
    return ExitConfigTable(entries, default_strategy if default_strategy is not None else Full())


class NavRouter:
    """Single writer, many readers. Readers always see a complete state snapshot."""

    def __init__(self, table: ExitConfigTable):
        self._state = RouterState(table)
        self._lock = threading.Lock()

    @property
    def state(self) -> RouterState:
        return self._state

    def apply(self, event: NavEvent) -> RouterState:
        with self._lock:
            # the old state survives a rejected event untouched
            self._state = apply_event(self._state, event)
            return self._state

    def resolve(self, task_id: str) -> ExitStrategy:
        return resolve(self._state, task_id)
