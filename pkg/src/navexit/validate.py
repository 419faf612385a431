"""Artifact validation: schema version, embedded invariants, fingerprint cross-checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArtifactError, NavExitError
from . import io
from .model import SyntheticTransformer
from .simulator import FrameArrival, check_order


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    task: str | None = None
    offset: int | None = None


@dataclass
class ValidationReport:
    path: str
    kind: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"path": self.path, "kind": self.kind, "ok": self.ok,
                "violations": [v.__dict__ for v in self.violations]}


def _sniff(data: bytes) -> str:
    if data.startswith(io.MAGIC[:4]):
        return "model"
    first = data.lstrip()[:1]
    if first != b"{":
        return "unknown"
    line = data.lstrip().split(b"\n", 1)[0]
    try:
        head = json.loads(line)
    except json.JSONDecodeError:
        head = None
    if isinstance(head, dict):
        if head.get("artifact") in ("dataset", "trace"):
            return head["artifact"]
        # headerless record streams
        if "timestamp_ms" in head:
            return "trace"
        if "ground_truth_label" in head:
            return "dataset"
    try:
        return json.loads(data).get("artifact", "unknown")
    except (json.JSONDecodeError, UnicodeDecodeError, AttributeError):
        # a single JSON document cut short; report it as whatever it claims to be
        return "json"


def _check_profile(result, report: ValidationReport) -> None:
    for task, prof in result.profiles.items():
        sel = result.selections[task]
        L = prof.num_layers
        if not 1 <= sel.exit_layer <= L:
            report.violations.append(Violation("exit-layer-range", f"exit layer {sel.exit_layer} outside [1, {L}]", task))
            continue
        expected = next(l for l, c in enumerate(prof.correct_counts, start=1) if c >= prof.correct_counts[-1])
        if sel.exit_layer != expected:
            report.violations.append(Violation(
                "exit-layer-rule", f"exit layer {sel.exit_layer} is not the earliest valid layer {expected}", task))
        if sel.satisfied_strictly != (sel.exit_layer < L):
            report.violations.append(Violation("strictness-flag", "satisfied_strictly disagrees with exit layer", task))


def _check_profile_fields(obj: dict, report: ValidationReport) -> None:
    for task, t in obj.get("tasks", {}).items():
        counts, n, L = t.get("correct_counts", []), t.get("N", 0), t.get("L")
        if len(counts) != L:
            report.violations.append(Violation("counts-length", f"{len(counts)} counts for L={L}", task))
            continue
        acc = t.get("acc_by_layer", [])
        if len(acc) != L or any(abs(a - c / n) > 1e-12 for a, c in zip(acc, counts)):
            report.violations.append(Violation("accuracy-mismatch", "acc_by_layer != correct_counts / N", task))
        if acc and abs(t.get("full_accuracy", -1) - acc[-1]) > 1e-12:
            report.violations.append(Violation("full-accuracy", "full_accuracy != acc_by_layer[L]", task))


def validate_artifact(path, model_path=None, dataset_path=None) -> ValidationReport:
    path = Path(path)
    data = path.read_bytes()
    kind = _sniff(data)
    report = ValidationReport(str(path), kind)
    try:
        if kind == "model":
            model = io.decode_model(data)
            if isinstance(model, SyntheticTransformer):
                fresh = SyntheticTransformer.generate(model.spec)
                drift = [k for k in model.weights if not np.array_equal(model.weights[k], fresh.weights[k])]
                if drift:
                    report.violations.append(Violation(
                        "weights-drift", f"{len(drift)} weight arrays differ from their generator spec, e.g. {drift[0]}"))
        elif kind == "profile":
            result = io.decode_profile(data)
            _check_profile_fields(json.loads(data), report)
            _check_profile(result, report)
            if model_path is not None and result.model_fingerprint != io.fingerprint(model_path):
                report.violations.append(Violation("fingerprint", f"profile does not match model {model_path}"))
            if dataset_path is not None and result.dataset_fingerprint != io.fingerprint(dataset_path):
                report.violations.append(Violation("fingerprint", f"profile does not match dataset {dataset_path}"))
        elif kind == "dataset":
            io.decode_dataset(data.decode())
        elif kind == "trace":
            steps = io.decode_trace(data.decode())
            check_order(steps)
            if dataset_path is not None:
                ids = {s.sample_id for s in io.read_dataset(dataset_path)}
                for i, step in enumerate(steps):
                    if isinstance(step, FrameArrival) and step.sample_id not in ids:
                        report.violations.append(Violation("binding", f"step {i}: unknown sample {step.sample_id!r}"))
        elif kind == "scene-map":
            io.decode_scene_map(data)
        elif kind == "latency-model":
            io.decode_latency_model(data)
        elif kind == "sim-report":
            io.decode_report(data)
        elif kind == "json":
            io._load_json(data, "profile")  # raises with the byte offset of the parse failure
        else:
            report.violations.append(Violation("unknown-kind", "unrecognized artifact"))
    except ArtifactError as exc:
        report.violations.append(Violation("parse", str(exc), offset=exc.offset))
    except (NavExitError, KeyError, TypeError, ValueError) as exc:
        report.violations.append(Violation("invariant", f"{type(exc).__name__}: {exc}"))
    return report
