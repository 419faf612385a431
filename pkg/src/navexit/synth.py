"""Deterministic fixture generation: synthetic transformers with planted depths, and prediction tables."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import SpecValidationError
from .model import ChannelLayout, PredictionTable, Sample, SyntheticSpec, SyntheticTransformer, TableRow
from .rng import SplitMix64, derive_key


@dataclass
class TableSpec:
    """Explicit prediction rows: each row is {sample_id, task_id, truth, predictions}."""

    label_set: list[str]
    rows: list[dict]

    def validate(self) -> None:
        bad = {}
        if not self.label_set:
            bad["label_set"] = "must be nonempty"
        if not self.rows:
            bad["rows"] = "must be nonempty"
        else:
            lengths = {len(r.get("predictions", [])) for r in self.rows}
            if len(lengths) != 1 or 0 in lengths:
                bad["rows.predictions"] = "every row needs the same nonzero number of predictions"
            labels = set(self.label_set)
            for r in self.rows:
                if r.get("truth") not in labels or not set(r.get("predictions", [])) <= labels:
                    bad["rows.labels"] = f"row {r.get('sample_id')!r} uses labels outside label_set"
                    break
            ids = [str(r.get("sample_id")) for r in self.rows]
            if len(set(ids)) != len(ids):
                bad["rows.sample_id"] = "sample ids must be unique"
        if bad:
            raise SpecValidationError(bad)


def synthetic_dataset(spec: SyntheticSpec) -> list[Sample]:
    """Labeled samples for every planted task, ``samples_per_task`` each.

    Per sample the generator draws a true class, a decoy class (what the model
    predicts before the planted depth) and a wrong class (what it flips to at
    the over-thinking layer, for the ``overthink_rate`` fraction so marked).
    """
    spec.validate()
    layout = ChannelLayout(spec.num_classes, tuple(spec.tasks()), spec.noise_features)
    K = spec.num_classes
    out: list[Sample] = []
    for task in layout.tasks:
        rng = SplitMix64(derive_key(spec.seed, "data", task))
        n = spec.samples_per_task
        truth = rng.integers(n, K)
        decoy = (truth + 1 + rng.integers(n, K - 1)) % K
        wrong = (truth + 1 + rng.integers(n, K - 1)) % K
        flips = rng.uniform(n) < spec.overthink_rate
        noise = rng.uniform(n * spec.noise_features, -1.0, 1.0).reshape(n, spec.noise_features)
        for i in range(n):
            x = layout.encode(task, int(truth[i]), int(decoy[i]), int(wrong[i]), bool(flips[i]), noise[i])
            out.append(Sample(f"{task}-{i:05d}", task, f"c{int(truth[i])}", features=x))
    return out


def generate_synthetic(spec: SyntheticSpec) -> tuple[SyntheticTransformer, list[Sample]]:
    return SyntheticTransformer.generate(spec), synthetic_dataset(spec)


def generate_table(spec: TableSpec) -> tuple[PredictionTable, list[Sample]]:
    spec.validate()
    rows = {str(r["sample_id"]): TableRow(r["truth"], tuple(r["predictions"])) for r in spec.rows}
    model = PredictionTable(tuple(spec.label_set), rows)
    samples = [
        Sample(str(r["sample_id"]), str(r.get("task_id", "task0")), r["truth"], row=str(r["sample_id"]))
        for r in spec.rows
    ]
    return model, samples


def spec_from_dict(d: dict) -> SyntheticSpec | TableSpec:
    kind = d.get("kind", "synthetic")
    body = {k: v for k, v in d.items() if k not in ("kind", "schema_version")}
    if kind == "table":
        missing = {k: "required" for k in ("label_set", "rows") if k not in body}
        if missing:
            raise SpecValidationError(missing)
        return TableSpec(list(body["label_set"]), list(body["rows"]))
    if kind != "synthetic":
        raise SpecValidationError({"kind": f"unknown generator kind {kind!r}"})
    known = {f.name for f in fields(SyntheticSpec)}
    unknown = set(body) - known
    if unknown:
        raise SpecValidationError({k: "unknown field" for k in unknown})
    spec = SyntheticSpec(**body)
    spec.validate()
    return spec


def random_table(rng: np.random.Generator, num_layers: int, num_samples: int, num_labels: int = 3,
                 task_id: str = "task0") -> tuple[PredictionTable, list[Sample]]:
    """Random prediction table for property tests."""
    labels = [f"l{k}" for k in range(num_labels)]
    rows = []
    for i in range(num_samples):
        truth = labels[rng.integers(num_labels)]
        preds = [labels[j] for j in rng.integers(num_labels, size=num_layers)]
        rows.append({"sample_id": f"r{i}", "task_id": task_id, "truth": truth, "predictions": preds})
    return generate_table(TableSpec(labels, rows))
