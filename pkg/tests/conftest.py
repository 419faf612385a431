import pytest

from navexit.model import SyntheticSpec
from navexit.profiler import AccuracyProfile
from navexit.synth import TableSpec, generate_synthetic, generate_table

# 12-layer profile, N=100: Acc(6)=0.70, Acc(8)=0.83, Acc(9)=0.85=Acc(12), Acc(10..11)=0.84.
# Layers 1-5 and 7 are not given in the worked example; any values below 0.85 do.
WORKED_COUNTS = (40, 48, 55, 60, 65, 70, 77, 83, 85, 84, 84, 85)


def worked_example_rows(task_id="vehicle"):
    rows = []
    for i in range(100):
        preds = ["car" if i < c else "truck" for c in WORKED_COUNTS]
        rows.append({"sample_id": f"w{i:03d}", "task_id": task_id, "truth": "car", "predictions": preds})
    return rows


@pytest.fixture
def worked_profile():
    return AccuracyProfile("vehicle", 100, WORKED_COUNTS)


@pytest.fixture
def worked_table():
    return generate_table(TableSpec(["car", "truck"], worked_example_rows()))


@pytest.fixture(scope="session")
def small_synthetic():
    spec = SyntheticSpec(hidden_dim=48, num_layers=8, num_classes=3, seed=7,
                         planted_depths={"a": 2, "b": 6}, overthink_rate=0.0, samples_per_task=30)
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def overthinking_synthetic():
    spec = SyntheticSpec(hidden_dim=48, num_layers=10, num_classes=4, seed=21,
                         planted_depths={"a": 3}, overthink_rate=0.3, samples_per_task=80)
    return generate_synthetic(spec)
