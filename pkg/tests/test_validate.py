import json

import pytest

from navexit import io
from navexit.model import SyntheticSpec, SyntheticTransformer
from navexit.profiler import profile_tasks
from navexit.validate import validate_artifact


@pytest.fixture
def profiled(tmp_path, worked_table):
    model, samples = worked_table
    io.write_model(model, tmp_path / "m.bin")
    io.write_dataset(samples, tmp_path / "d.jsonl")
    result = profile_tasks(model, samples)
    result.model_fingerprint = io.fingerprint(tmp_path / "m.bin")
    result.dataset_fingerprint = io.fingerprint(tmp_path / "d.jsonl")
    io.write_profile(result, tmp_path / "p.json")
    return tmp_path


def test_fresh_profile_is_clean(profiled):
    rep = validate_artifact(profiled / "p.json", profiled / "m.bin", profiled / "d.jsonl")
    assert rep.kind == "profile" and rep.ok, rep.violations


def _edit_profile(path, **changes):
    obj = json.loads(path.read_text())
    obj["tasks"]["vehicle"].update(changes)
    path.write_text(json.dumps(obj))


def test_exit_layer_beyond_depth_names_task(profiled):
    _edit_profile(profiled / "p.json", exit_layer=13)
    rep = validate_artifact(profiled / "p.json")
    assert [(v.code, v.task) for v in rep.violations] == [("exit-layer-range", "vehicle")]


def test_non_minimal_exit_layer(profiled):
    _edit_profile(profiled / "p.json", exit_layer=11)
    assert [v.code for v in validate_artifact(profiled / "p.json").violations] == ["exit-layer-rule"]


def test_tampered_accuracy(profiled):
    obj = json.loads((profiled / "p.json").read_text())
    obj["tasks"]["vehicle"]["acc_by_layer"][0] = 0.99
    (profiled / "p.json").write_text(json.dumps(obj))
    assert "accuracy-mismatch" in {v.code for v in validate_artifact(profiled / "p.json").violations}


def test_fingerprint_cross_check(profiled):
    (profiled / "d.jsonl").write_text((profiled / "d.jsonl").read_text() + "\n")
    rep = validate_artifact(profiled / "p.json", profiled / "m.bin", profiled / "d.jsonl")
    assert [v.code for v in rep.violations] == ["fingerprint"]


@pytest.mark.parametrize("name", ["p.json", "m.bin", "d.jsonl"])
def test_truncated_file_reports_offset(profiled, name):
    data = (profiled / name).read_bytes()
    (profiled / name).write_bytes(data[: len(data) // 2])
    rep = validate_artifact(profiled / name)
    assert rep.violations[0].code == "parse"
    assert rep.violations[0].offset is not None


def test_synthetic_weight_drift(tmp_path):
    model = SyntheticTransformer.generate(SyntheticSpec(hidden_dim=32, num_layers=3, num_classes=3))
    io.write_model(model, tmp_path / "m.bin")
    assert validate_artifact(tmp_path / "m.bin").ok
    model.weights["layer2.w1"][0, 0] += 1.0
    io.write_model(model, tmp_path / "m.bin")
    assert [v.code for v in validate_artifact(tmp_path / "m.bin").violations] == ["weights-drift"]


def test_trace_order_and_binding(tmp_path, worked_table):
    _, samples = worked_table
    io.write_dataset(samples, tmp_path / "d.jsonl")
    (tmp_path / "t.jsonl").write_text(
        '{"timestamp_ms": 0, "kind": "nav", "scene_id": "x"}\n'
        '{"timestamp_ms": 5, "kind": "frame", "sample_id": "ghost"}\n')
    rep = validate_artifact(tmp_path / "t.jsonl", dataset_path=tmp_path / "d.jsonl")
    assert [v.code for v in rep.violations] == ["binding"]
    (tmp_path / "t.jsonl").write_text(
        '{"timestamp_ms": 9, "kind": "nav", "scene_id": "x"}\n{"timestamp_ms": 5, "kind": "nav", "scene_id": "y"}\n')
    rep = validate_artifact(tmp_path / "t.jsonl")
    assert "step 1" in rep.violations[0].message


def test_unknown_file(tmp_path):
    (tmp_path / "x").write_bytes(b"hello")
    assert validate_artifact(tmp_path / "x").violations[0].code == "unknown-kind"
