"""File formats.

Model container (binary, little-endian)::

    b"NAVXMODL"  magic, 8 bytes
    uint32       container version (1)
    uint64       header length H
    H bytes      UTF-8 JSON header, keys sorted
    ...          raw array bytes, in header order

The header holds ``schema_version``, ``backend`` and either the generator
spec plus an ``arrays`` index (synthetic) or the prediction rows (table).

Every other artifact is JSON (``artifact`` + ``schema_version`` keys) or
newline-delimited JSON whose optional first line is such a header record.
Fingerprints are ``"sha256:" + hexdigest`` of the raw file bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _io
import json
import struct
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .errors import ArtifactError, FingerprintMismatchError
from .executor import ExitStrategy, Full, InferenceResult, parse_strategy
from .model import LayeredModel, PredictionTable, Sample, SyntheticSpec, SyntheticTransformer, TableRow
from .profiler import AccuracyProfile, ExitSelection, ProfileResult
from .router import ExitConfigTable, NavEvent, load_config
from .simulator import FrameArrival, LatencyModel, Request, SimReport, StrategyTaskStats, TraceStep

SCHEMA_VERSION = 1
MAGIC = b"NAVXMODL"
_PREFIX = struct.Struct("<8sIQ")

REPORT_COLUMNS = ["strategy", "task", "accuracy", "mean_latency_ms", "reduction_pct", "mean_layers",
                  "over_inference_count", "n"]


def fingerprint_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def fingerprint(path) -> str:
    return fingerprint_bytes(Path(path).read_bytes())


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _check_header(obj: dict, artifact: str, where: str = "") -> None:
    if not isinstance(obj, dict) or obj.get("artifact") != artifact:
        raise ArtifactError(f"{where}expected a {artifact!r} artifact")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ArtifactError(f"{where}unsupported schema_version {version!r} (this build reads {SCHEMA_VERSION})")


def _load_json(data: bytes | str, artifact: str) -> dict:
    text = data.decode() if isinstance(data, bytes) else data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"invalid JSON: {exc.msg}", offset=len(text[: exc.pos].encode())) from None
    _check_header(obj, artifact)
    return obj


# -- models


def encode_model(model: LayeredModel) -> bytes:
    if isinstance(model, SyntheticTransformer):
        header = {"schema_version": SCHEMA_VERSION, "backend": "synthetic",
                  "spec": dataclasses.asdict(model.spec), "arrays": []}
        blobs, offset = [], 0
        for name in sorted(model.weights):
            arr = np.ascontiguousarray(model.weights[name], dtype="<f4")
            raw = arr.tobytes()
            header["arrays"].append({"name": name, "dtype": "<f4", "shape": list(arr.shape),
                                     "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
    elif isinstance(model, PredictionTable):
        header = {"schema_version": SCHEMA_VERSION, "backend": "table", "label_set": list(model.label_set),
                  "rows": [{"id": rid, "truth": r.truth, "predictions": list(r.predictions)}
                           for rid, r in model.rows.items()]}
        blobs = []
    else:
        raise TypeError(f"cannot encode {type(model).__name__}")
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return _PREFIX.pack(MAGIC, 1, len(head)) + head + b"".join(blobs)


def decode_model(data: bytes) -> LayeredModel:
    if len(data) < _PREFIX.size:
        raise ArtifactError("truncated model file: incomplete prefix", offset=len(data))
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ArtifactError("not a model container (bad magic)", offset=0)
    if version != 1:
        raise ArtifactError(f"unsupported container version {version}", offset=8)
    body = _PREFIX.size + hlen
    if len(data) < body:
        raise ArtifactError("truncated model file: header cut short", offset=len(data))
    try:
        header = json.loads(data[_PREFIX.size:body])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        pos = _PREFIX.size + getattr(exc, "pos", getattr(exc, "start", 0))
        raise ArtifactError("corrupt model header", offset=pos) from None
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ArtifactError(f"unsupported schema_version {header.get('schema_version')!r}", offset=_PREFIX.size)
    backend = header.get("backend")
    if backend == "table":
        if len(data) != body:
            raise ArtifactError("trailing bytes after table model", offset=body)
        rows = {r["id"]: TableRow(r["truth"], tuple(r["predictions"])) for r in header["rows"]}
        return PredictionTable(tuple(header["label_set"]), rows)
    if backend != "synthetic":
        raise ArtifactError(f"unknown backend {backend!r}", offset=_PREFIX.size)
    weights = {}
    end = body
    for entry in header["arrays"]:
        start = body + entry["offset"]
        stop = start + entry["nbytes"]
        if stop > len(data):
            raise ArtifactError(f"truncated model file: array {entry['name']!r} cut short", offset=len(data))
        weights[entry["name"]] = np.frombuffer(data[start:stop], dtype=entry["dtype"]).reshape(entry["shape"]).copy()
        end = max(end, stop)
    if end != len(data):
        raise ArtifactError("trailing bytes after last array", offset=end)
    return SyntheticTransformer(SyntheticSpec(**header["spec"]), weights)


def write_model(model: LayeredModel, path) -> str:
    data = encode_model(model)
    Path(path).write_bytes(data)
    return fingerprint_bytes(data)


def read_model(path) -> LayeredModel:
    return decode_model(Path(path).read_bytes())


# -- newline-delimited records


def _read_records(text: str, artifact: str) -> list[dict]:
    records, offset = [], 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        stripped = line.strip()
        if stripped:
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ArtifactError(f"line {lineno}: invalid JSON: {exc.msg}",
                                    offset=offset + len(line[: exc.pos].encode())) from None
            if not isinstance(obj, dict):
                raise ArtifactError(f"line {lineno}: expected an object", offset=offset)
            if "artifact" in obj:
                _check_header(obj, artifact, f"line {lineno}: ")
            else:
                records.append(obj)
        offset += len(line.encode())
    return records


def _write_records(records: Iterable[dict], artifact: str) -> str:
    lines = [json.dumps({"artifact": artifact, "schema_version": SCHEMA_VERSION}, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True, allow_nan=False) for r in records]
    return "\n".join(lines) + "\n"


def encode_dataset(samples: list[Sample]) -> str:
    def record(s: Sample):
        r = {"sample_id": s.sample_id, "task_id": s.task_id, "ground_truth_label": s.label}
        if s.features is not None:
            r["features"] = [float(v) for v in s.features]
        if s.row is not None:
            r["row"] = s.row
        return r

    return _write_records(map(record, samples), "dataset")


def decode_dataset(text: str) -> list[Sample]:
    out = []
    for r in _read_records(text, "dataset"):
        try:
            features = np.asarray(r["features"], dtype=np.float64) if "features" in r else None
            out.append(Sample(str(r["sample_id"]), str(r["task_id"]), str(r["ground_truth_label"]), features,
                              str(r["row"]) if "row" in r else None))
        except KeyError as exc:
            raise ArtifactError(f"dataset record missing field {exc.args[0]!r}") from None
    ids = [s.sample_id for s in out]
    if len(set(ids)) != len(ids):
        raise ArtifactError("dataset has duplicate sample ids")
    return out


def write_dataset(samples: list[Sample], path) -> str:
    data = encode_dataset(samples).encode()
    Path(path).write_bytes(data)
    return fingerprint_bytes(data)


def read_dataset(path) -> list[Sample]:
    return decode_dataset(Path(path).read_text())


# -- traces and nav event streams


def encode_trace(steps: list[TraceStep]) -> str:
    def record(step):
        if isinstance(step, NavEvent):
            return {"timestamp_ms": step.timestamp, "kind": "nav", "scene_id": step.scene}
        r = {"timestamp_ms": step.timestamp, "kind": "frame", "sample_id": step.sample_id}
        if step.active_tasks:
            r["active_tasks"] = list(step.active_tasks)
        return r

    return _write_records(map(record, steps), "trace")


def _step(r: dict, i: int) -> TraceStep:
    try:
        kind = r.get("kind", "nav" if "scene_id" in r else "frame")
        if kind == "nav":
            return NavEvent(r["timestamp_ms"], str(r["scene_id"]))
        if kind == "frame":
            return FrameArrival(r["timestamp_ms"], str(r["sample_id"]), tuple(r.get("active_tasks", ())))
    except KeyError as exc:
        raise ArtifactError(f"trace record {i} missing field {exc.args[0]!r}") from None
    raise ArtifactError(f"trace record {i} has unknown kind {kind!r}")


def decode_trace(text: str) -> list[TraceStep]:
    return [_step(r, i) for i, r in enumerate(_read_records(text, "trace"))]


def read_trace(path) -> list[TraceStep]:
    return decode_trace(Path(path).read_text())


def iter_nav_events(stream: TextIO):
    """Yield NavEvents from ``{timestamp_ms, scene_id}`` lines, e.g. a pipe on stdin."""
    for i, line in enumerate(stream):
        line = line.strip()
        if not line:
            continue
        r = json.loads(line)
        if "artifact" in r:
            continue
        yield NavEvent(r["timestamp_ms"], str(r["scene_id"]))


# -- profiles


def encode_profile(result: ProfileResult) -> str:
    tasks = {}
    for task, prof in result.profiles.items():
        sel = result.selections[task]
        tasks[task] = {
            "L": prof.num_layers,
            "N": prof.sample_count,
            "correct_counts": list(prof.correct_counts),
            "acc_by_layer": list(prof.acc_by_layer),
            "full_accuracy": prof.full_accuracy,
            "exit_layer": sel.exit_layer,
            "satisfied_strictly": sel.satisfied_strictly,
        }
    return dumps({"artifact": "profile", "schema_version": SCHEMA_VERSION,
                  "model_fingerprint": result.model_fingerprint,
                  "dataset_fingerprint": result.dataset_fingerprint, "tasks": tasks})


def decode_profile(text: str | bytes) -> ProfileResult:
    obj = _load_json(text, "profile")
    profiles, selections = {}, {}
    for task, t in obj["tasks"].items():
        prof = AccuracyProfile(task, t["N"], tuple(t["correct_counts"]))
        profiles[task] = prof
        exit_layer = t["exit_layer"]
        acc = prof.accuracy(exit_layer) if 1 <= exit_layer <= prof.num_layers else float("nan")
        # the stored selection is read as-is; validate_artifact cross-checks it against the counts
        selections[task] = ExitSelection(task, exit_layer, t["satisfied_strictly"], acc)
    return ProfileResult(profiles, selections, obj.get("model_fingerprint"), obj.get("dataset_fingerprint"))


def write_profile(result: ProfileResult, path) -> None:
    Path(path).write_text(encode_profile(result))


def read_profile(path) -> ProfileResult:
    return decode_profile(Path(path).read_bytes())


def check_fingerprint(result: ProfileResult, model_path) -> None:
    actual = fingerprint(model_path)
    if result.model_fingerprint != actual:
        raise FingerprintMismatchError(
            f"profile was computed for model {result.model_fingerprint}, but {model_path} is {actual}; re-run profile"
        )


# -- scene map / config


@dataclasses.dataclass
class SceneMap:
    scenes: dict[str, list[str]]
    default_strategy: ExitStrategy = dataclasses.field(default_factory=Full)
    profile: str | None = None  # path, relative to the scene-map file


def encode_scene_map(m: SceneMap) -> str:
    obj = {"artifact": "scene-map", "schema_version": SCHEMA_VERSION, "scenes": m.scenes,
           "default_strategy": str(m.default_strategy)}
    if m.profile is not None:
        obj["profile"] = m.profile
    return dumps(obj)


def decode_scene_map(text: str | bytes) -> SceneMap:
    obj = _load_json(text, "scene-map")
    scenes = {str(k): [str(t) for t in v] for k, v in obj.get("scenes", {}).items()}
    return SceneMap(scenes, parse_strategy(obj.get("default_strategy", "full")), obj.get("profile"))


def read_scene_map(path) -> SceneMap:
    return decode_scene_map(Path(path).read_bytes())


def config_from_files(scene_map_path, profile_path=None, model_path=None) -> tuple[ExitConfigTable, ProfileResult]:
    """Scene map + profile -> config table, refusing a profile computed for a different model file."""
    scene_map = read_scene_map(scene_map_path)
    if profile_path is None:
        if scene_map.profile is None:
            raise ArtifactError(f"{scene_map_path}: no profile given and the scene map names none")
        profile_path = Path(scene_map_path).parent / scene_map.profile
    result = read_profile(profile_path)
    if model_path is not None:
        check_fingerprint(result, model_path)
    depths = {t: p.num_layers for t, p in result.profiles.items()}
    table = load_config(result.exit_layers, scene_map.scenes, scene_map.default_strategy, depths)
    return table, result


# -- latency models


def encode_latency_model(lm: LatencyModel) -> str:
    return dumps({"artifact": "latency-model", "schema_version": SCHEMA_VERSION,
                  "overhead_ms": lm.overhead_ms, "per_layer_ms": list(lm.per_layer_ms)})


def decode_latency_model(text: str | bytes) -> LatencyModel:
    obj = _load_json(text, "latency-model")
    try:
        return LatencyModel(float(obj["overhead_ms"]), tuple(obj["per_layer_ms"]))
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"invalid latency model: {exc}") from None


def read_latency_model(path) -> LatencyModel:
    return decode_latency_model(Path(path).read_bytes())


# -- simulation reports


def encode_report(report: SimReport, include_wall_time: bool = False, include_requests: bool = False) -> str:
    obj = {
        "artifact": "sim-report",
        "schema_version": SCHEMA_VERSION,
        "strategies": report.strategies,
        "rows": [dataclasses.asdict(r) for r in report.rows],
        "switch_count": report.switch_count,
    }
    if include_wall_time:
        obj["wall_time_s"] = report.wall_time_s
    if include_requests:
        obj["requests"] = [dataclasses.asdict(r) for r in report.requests]
    return dumps(obj)


def decode_report(text: str | bytes) -> SimReport:
    obj = _load_json(text, "sim-report")
    return SimReport(
        list(obj["strategies"]),
        [StrategyTaskStats(**r) for r in obj["rows"]],
        obj["switch_count"],
        obj.get("wall_time_s"),
        [Request(**r) for r in obj.get("requests", [])],
    )


def read_report(path) -> SimReport:
    return decode_report(Path(path).read_bytes())


def report_csv(report: SimReport) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in report.rows:
        writer.writerow([r.strategy, r.task_id, f"{r.accuracy:.6f}", f"{r.mean_latency_ms:.6f}",
                         f"{r.latency_reduction_pct:.1f}", f"{r.mean_layers:.4f}", r.over_inference_count,
                         r.sample_count])
    return buf.getvalue()


def report_text(report: SimReport) -> str:
    from .simulator import compare_strategies, format_comparison

    header = f"switch_count: {report.switch_count}"
    if not report.rows:
        return header + "\n(no requests)\n"
    table = [line.split(",") for line in report_csv(report).splitlines()]
    widths = [max(len(row[i]) for row in table) + 2 for i in range(len(REPORT_COLUMNS))]
    lines = [header] + ["".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
                        for row in table]
    lines += ["", format_comparison(compare_strategies(report))]
    return "\n".join(lines) + "\n"


# -- inference results


def result_record(sample: Sample, result: InferenceResult) -> dict:
    r = {"sample_id": sample.sample_id, "task_id": sample.task_id, "predicted_label": result.predicted_label,
         "ground_truth_label": sample.label, "exit_layer_used": result.exit_layer_used,
         "layers_executed": result.layers_executed, "strategy": str(result.strategy_used)}
    if result.per_layer_trace is not None:
        r["per_layer_trace"] = [[e.layer, e.label, e.confidence] for e in result.per_layer_trace]
    return r
