"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (visible even under
pytest's output capture) before asserting.
"""

import json
import time

import numpy as np
import pytest

from navexit import io
from navexit.bench import bench
from navexit.executor import FixedExit, FixedFraction, Full, batch_run
from navexit.model import ParamModel, SyntheticSpec, activated_params
from navexit.profiler import layer_savings, layerwise_accuracy, profile_tasks, select_exit_layer
from navexit.router import NavEvent, load_config
from navexit.simulator import FrameArrival, LatencyModel, SimReport, StrategyTaskStats, Request
from navexit.simulator import over_inference_analysis, reduction_pct, simulate
from navexit.synth import TableSpec, generate_synthetic, generate_table, random_table
from oracles import brute_force

from conftest import WORKED_COUNTS, worked_example_rows


@pytest.fixture
def verdict(capsys):
    start = time.perf_counter()

    def emit(n, title, ok, budget_s, detail=""):
        elapsed = time.perf_counter() - start
        ok = ok and elapsed < budget_s
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.2f}s / {budget_s:g}s) {detail}")
        assert ok, f"criterion {n} failed: {detail}"

    return emit


def test_01_worked_example(verdict):
    from navexit.profiler import AccuracyProfile
    prof = AccuracyProfile("vehicle", 100, WORKED_COUNTS)
    sel = select_exit_layer(prof)
    savings = layer_savings(sel, 12)
    ok = (prof.accuracy(6), prof.accuracy(8), prof.accuracy(9), prof.full_accuracy) == (0.70, 0.83, 0.85, 0.85)
    ok = ok and sel.exit_layer == 9 and round(100 * savings, 1) == 25.0
    verdict(1, "worked example l*=9, savings 25.0%", ok, 1, f"l*={sel.exit_layer} savings={100 * savings:.1f}%")


# (L, full size B) and the seven (exit layer, activated params B) rows, in table order
PUBLISHED_PARAMS = {
    "tiny": (12, 1.0, [(10, 0.90), (10, 0.90), (10, 0.90), (10, 0.90), (10, 0.90), (9, 0.85), (11, 0.95)]),
    "small": (27, 2.8, [(24, 2.53), (25, 2.62), (20, 2.18), (21, 2.27), (25, 2.62), (20, 2.18), (22, 2.36)]),
    "llava": (32, 7.0, [(18, 4.07), (18, 4.07), (14, 3.24), (14, 3.24), (17, 3.86), (14, 3.24), (25, 5.54)]),
}


def test_02_param_accounting(verdict):
    worst, n = 0.0, 0
    for L, full, rows in PUBLISHED_PARAMS.values():
        anchor_l, anchor_b = rows[2]  # the CODA vehicle row
        pm = ParamModel.fit(L, full, anchor_l, anchor_b)
        for l, b in rows:
            worst = max(worst, abs(activated_params(pm, l) - b))
            n += 1
    verdict(2, "published activated-parameter figures", n == 21 and worst <= 0.015 + 1e-9, 1,
            f"{n} pairs, max |err|={worst:.4f}B")


# full-layer latency, Nav-EE latency, printed reduction; one tuple per task (s)
PUBLISHED_LATENCY = {
    "llava": ([.027, .036, .034, .029, .038, .030], [.015, .013, .013, .013, .015, .025],
              [44.4, 63.9, 61.8, 55.2, 60.5, 16.7], 51.6),
    "ds-tiny": ([.096, .093, .095, .100, .094, .098], [.077, .078, .080, .078, .070, .084],
                [19.8, 16.1, 15.8, 22.0, 25.5, 14.3], 18.9),
    "ds-small": ([.251, .240, .247, .258, .257, .248], [.216, .182, .186, .244, .185, .186],
                 [13.9, 24.2, 24.7, 5.4, 28.0, 25.0], 20.1),
}


def test_03_reduction_arithmetic(verdict):
    worst, n = 0.0, 0
    for full, nav, printed, avg in PUBLISHED_LATENCY.values():
        for b, e, p in zip(full, nav, printed):
            worst = max(worst, abs(reduction_pct(b, e) - p))
            n += 1
        # the Avg column is computed from the unrounded per-task means
        worst = max(worst, abs(reduction_pct(np.mean(full), np.mean(nav)) - avg))
        n += 1
    ok = reduction_pct(0.036, 0.013) == 63.9 and worst <= 0.1 + 1e-9
    verdict(3, "published latency reductions", ok, 1, f"{n} values, max |err|={worst:.2f} pp")


def test_04_oracle_equivalence(verdict):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        L, N = int(rng.integers(1, 17)), int(rng.integers(1, 65))
        table, samples = random_table(rng, L, N, num_labels=int(rng.integers(2, 5)))
        prof = layerwise_accuracy(table, samples, "task0")
        acc, l_star = brute_force(table, samples)
        same = [c * acc[i].denominator == acc[i].numerator * N for i, c in enumerate(prof.correct_counts)]
        mismatches += not (all(same) and select_exit_layer(prof).exit_layer == l_star)
    verdict(4, "profiler matches brute-force oracle on 1000 instances", mismatches == 0, 30,
            f"mismatches={mismatches}")


def test_05_planted_depth_recovery(verdict, tmp_path):
    from navexit.cli import main
    found = []
    for seed in range(10):
        spec = {"kind": "synthetic", "hidden_dim": 32, "num_layers": 10, "num_classes": 4, "seed": 1000 + seed,
                "planted_depths": {"taskA": 3, "taskB": 7}, "overthink_rate": 0.0, "samples_per_task": 200}
        (tmp_path / "s.json").write_text(json.dumps(spec))
        main(["gen-synthetic", "--spec", str(tmp_path / "s.json"),
              "--out-model", str(tmp_path / "m.bin"), "--out-data", str(tmp_path / "d.jsonl")])
        result = profile_tasks(io.read_model(tmp_path / "m.bin"), io.read_dataset(tmp_path / "d.jsonl"))
        found.append(result.exit_layers)
    ok = all(f == {"taskA": 3, "taskB": 7} for f in found)
    verdict(5, "planted depths 3/7 recovered over 10 seeds", ok, 120, f"{found if not ok else ''}")


def test_06_overthinking(verdict):
    model, samples = generate_synthetic(SyntheticSpec(
        hidden_dim=48, num_layers=12, num_classes=4, seed=6, planted_depths={"task": 5},
        overthink_rate=0.2, samples_per_task=500))
    frac = over_inference_analysis(model, samples)["task"].fraction
    l_star = profile_tasks(model, samples).exit_layers["task"]
    early = batch_run(model, samples, FixedExit(l_star)).accuracy
    full = batch_run(model, samples, Full()).accuracy
    ok = 0.10 <= frac <= 0.30 and early > full
    verdict(6, "over-thinking: flagged fraction and early exit beats full", ok, 120,
            f"flagged={frac:.3f} l*={l_star} acc(l*)={early:.3f} acc(L)={full:.3f}")


SCENES = {"urban": ["a", "b"], "highway": ["b", "c"], "school": ["a", "c"]}


def test_07_switching_contract(verdict):
    spec = SyntheticSpec(hidden_dim=48, num_layers=10, num_classes=3, seed=77, overthink_rate=0.1,
                         planted_depths={"a": 2, "b": 5, "c": 8}, samples_per_task=60)
    model, samples = generate_synthetic(spec)
    samples_by_id = {s.sample_id: s for s in samples}
    prof = profile_tasks(model, samples)
    table = load_config(prof.exit_layers, SCENES, num_layers=10)

    # replay the profiling set; each frame arrives under a scene that covers its task
    rng = np.random.default_rng(3)
    trace, scene, t, expected_switches = [], None, 0, 0
    for i in rng.permutation(len(samples)):
        s = samples[i]
        options = sorted(k for k, v in SCENES.items() if s.task_id in v)
        if scene not in options or rng.random() < 0.3:
            new = options[int(rng.integers(len(options)))]
            expected_switches += scene is not None and new != scene
            scene = new
            trace.append(NavEvent(t, scene))
        trace.append(FrameArrival(t, s.sample_id))
        t += 33

    rep = simulate(trace, samples, model, table, LatencyModel.uniform(10))
    # expected strategy per frame, from an independent walk over the trace
    latest, expected = None, {}
    for step in trace:
        if isinstance(step, NavEvent):
            latest = step.scene
        else:
            expected[step.sample_id] = str(FixedExit(prof.exit_layers[samples_by_id[step.sample_id].task_id]))
            assert samples_by_id[step.sample_id].task_id in SCENES[latest]
    wrong_strategy = sum(r.resolved != expected[r.sample_id] for r in rep.requests if r.strategy == "nav")
    acc_ok = all(rep.get("nav", task).accuracy == prof.profiles[task].accuracy(sel.exit_layer)
                 for task, sel in prof.selections.items())
    ok = wrong_strategy == 0 and rep.switch_count == expected_switches and acc_ok
    verdict(7, "three-scene switching contract", ok, 60,
            f"switches={rep.switch_count}/{expected_switches} wrong_strategy={wrong_strategy} acc_match={acc_ok}")


def test_08_ablation_shape(verdict):
    spec = SyntheticSpec(hidden_dim=48, num_layers=12, num_classes=4, seed=8,
                         planted_depths={"shallow": 4, "deep": 11}, samples_per_task=150)
    model, samples = generate_synthetic(spec)
    prof = profile_tasks(model, samples)
    table = load_config(prof.exit_layers, {"mixed": ["shallow", "deep"]}, num_layers=12)
    trace = [NavEvent(0, "mixed")] + [FrameArrival(i, s.sample_id) for i, s in enumerate(samples)]
    rep = simulate(trace, samples, model, table, LatencyModel.uniform(12), compare=[FixedFraction(0.5)])
    frac = FixedFraction(0.5)
    nav = {t: rep.get("nav", t) for t in ("shallow", "deep")}
    full = {t: rep.get("full", t) for t in ("shallow", "deep")}
    general = rep.get(str(frac), "deep")
    ok = (frac.exit_layer(12) == 6 and general.accuracy < nav["deep"].accuracy
          and all(nav[t].accuracy == full[t].accuracy and nav[t].mean_layers < full[t].mean_layers for t in nav))
    verdict(8, "General-EE vs Nav-EE ablation", ok, 120,
            f"deep: frac0.5={general.accuracy:.3f} nav={nav['deep'].accuracy:.3f} full={full['deep'].accuracy:.3f}; "
            f"layers nav={nav['shallow'].mean_layers:g}/{nav['deep'].mean_layers:g}")


def test_09_wall_clock(verdict):
    model, samples = generate_synthetic(SyntheticSpec(hidden_dim=128, num_layers=16, num_classes=4, seed=9,
                                                      samples_per_task=16))
    (row,) = bench(model, samples, [FixedExit(8)], reps=300, warmup=30)
    verdict(9, "bench FixedExit(L/2) / Full", 0.35 <= row.ratio_to_full <= 0.75, 180,
            f"ratio={row.ratio_to_full:.3f}")


def test_10_determinism_and_round_trip(verdict, tmp_path):
    problems = []
    # regeneration
    spec = SyntheticSpec(hidden_dim=40, num_layers=6, num_classes=3, seed=10, planted_depths={"x": 2, "y": 5},
                         overthink_rate=0.2, samples_per_task=50)
    for gen in (lambda: generate_synthetic(spec),
                lambda: generate_table(TableSpec(["car", "truck"], worked_example_rows()))):
        (m1, d1), (m2, d2) = gen(), gen()
        if io.encode_model(m1) != io.encode_model(m2) or io.encode_dataset(d1) != io.encode_dataset(d2):
            problems.append("regeneration")
    model, samples = generate_synthetic(spec)
    if io.decode_model(io.encode_model(model)) != model or io.decode_dataset(io.encode_dataset(samples)) != samples:
        problems.append("model/dataset codec")

    # randomized codec round trips
    rng = np.random.default_rng(10)
    for _ in range(100):
        table, rows = random_table(rng, int(rng.integers(1, 9)), int(rng.integers(1, 20)))
        if io.decode_model(io.encode_model(table)).rows != table.rows:
            problems.append("table codec")
        result = profile_tasks(table, rows)
        back = io.decode_profile(io.encode_profile(result))
        if (back.profiles, back.selections) != (result.profiles, result.selections):
            problems.append("profile codec")
        steps = [NavEvent(int(t), f"s{rng.integers(3)}") if rng.random() < 0.3 else
                 FrameArrival(int(t), f"r{rng.integers(9)}") for t in np.sort(rng.integers(0, 1000, 12))]
        if io.decode_trace(io.encode_trace(steps)) != steps:
            problems.append("trace codec")
        lm = LatencyModel(float(rng.random()), tuple(rng.random(5) + 0.01))
        if io.decode_latency_model(io.encode_latency_model(lm)) != lm:
            problems.append("latency codec")
        m = io.SceneMap({"a": ["t"], "b": []}, FixedFraction(float(rng.random()) * 0.9 + 0.05), "p.json")
        if io.decode_scene_map(io.encode_scene_map(m)) != m:
            problems.append("scene-map codec")
        rep = SimReport(["nav", "full"],
                        [StrategyTaskStats("nav", "t", *map(float, rng.random(4)), 1, 3)], int(rng.integers(9)),
                        None, [Request(1.0, "r", "t", "nav", "fixed:2", None, 2, float(rng.random()), True, False)])
        if io.decode_report(io.encode_report(rep, include_requests=True)) != rep:
            problems.append("report codec")

    # replayed simulations
    prof = profile_tasks(model, samples)
    table = load_config(prof.exit_layers, {"s": ["x"], "t": ["y"]}, num_layers=6)
    trace = [NavEvent(0, "s")] + [FrameArrival(i, s.sample_id) for i, s in enumerate(samples[:50])]
    trace += [NavEvent(50, "t")] + [FrameArrival(50 + i, s.sample_id) for i, s in enumerate(samples[50:])]
    a, b = (io.encode_report(simulate(trace, samples, model, table, LatencyModel.uniform(6), [FixedFraction(0.5)]),
                             include_requests=True) for _ in range(2))
    if a != b:
        problems.append("simulation replay")
    verdict(10, "determinism and codec round trips", not problems, 60, f"{sorted(set(problems))}")
