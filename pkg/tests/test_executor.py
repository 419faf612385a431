import pytest
from hypothesis import given, settings, strategies as st

from navexit.errors import EmptyInputError, StrategyConfigError
from navexit.executor import (
    ConfidenceThreshold,
    FixedExit,
    FixedFraction,
    Full,
    StablePrediction,
    batch_run,
    parse_strategy,
    run,
)
from navexit.model import LayerCounter, PredictionTable, predict_at
from navexit.profiler import layerwise_accuracy, select_exit_layer


def test_fixed_exit_on_worked_example(worked_table):
    model, samples = worked_table
    r = run(model, samples[0], FixedExit(9))
    assert r.layers_executed == r.exit_layer_used == 9
    assert 1 - r.layers_executed / model.num_layers == 0.25


def test_zero_threshold_exits_at_min_layer(small_synthetic):
    model, samples = small_synthetic
    for s in samples[:5]:
        assert run(model, s, ConfidenceThreshold(0.0)).exit_layer_used == 1
        assert run(model, s, ConfidenceThreshold(0.0, min_layer=3)).exit_layer_used == 3


def test_stable_prediction_by_hand():
    table = PredictionTable.from_lists({"s": ("b", ["a", "b", "b", "b", "c"])})
    r = run(table, "s", StablePrediction(2))
    assert (r.exit_layer_used, r.predicted_label) == (3, "b")


def test_stable_prediction_falls_through_to_last_layer():
    table = PredictionTable.from_lists({"s": ("b", ["a", "b", "a", "b", "c"])})
    assert run(table, "s", StablePrediction(2)).exit_layer_used == 5


def test_full_and_fraction():
    table = PredictionTable.from_lists({"s": ("x", ["x"] * 32)})
    assert run(table, "s", Full()).exit_layer_used == 32
    assert run(table, "s", FixedFraction(0.5)).exit_layer_used == 16
    assert run(table, "s", FixedFraction(0.01)).exit_layer_used == 1
    assert run(table, "s", FixedFraction(1.0)).exit_layer_used == 32


def test_fraction_rounds_up():
    assert FixedFraction(0.5).exit_layer(12) == 6
    assert FixedFraction(0.5).exit_layer(11) == 6
    assert FixedFraction(0.3).exit_layer(10) == 3


def test_prefix_purity():
    table = PredictionTable.from_lists({"s": ("x", ["x"] * 12)})
    for l in range(1, 13):
        counter = LayerCounter()
        run(table, "s", FixedExit(l), counter=counter)
        assert counter.count == l


def test_full_equivalence(small_synthetic):
    model, samples = small_synthetic
    for s in samples[::7]:
        assert run(model, s, Full()).predicted_label == predict_at(model, s, model.num_layers)


def test_trace_consistency(small_synthetic):
    model, samples = small_synthetic
    for strategy in (Full(), FixedExit(3), ConfidenceThreshold(0.9), StablePrediction(3)):
        r = run(model, samples[1], strategy, trace=True)
        assert len(r.per_layer_trace) == r.exit_layer_used
        assert r.per_layer_trace[-1].layer == r.exit_layer_used
        assert r.per_layer_trace[-1].label == r.predicted_label


@settings(max_examples=30, deadline=None)
@given(i=st.integers(0, 59), t1=st.floats(0, 1), t2=st.floats(0, 1))
def test_threshold_monotonicity(small_synthetic, i, t1, t2):
    model, samples = small_synthetic
    lo, hi = sorted((t1, t2))
    assert run(model, samples[i], ConfidenceThreshold(lo)).exit_layer_used <= \
        run(model, samples[i], ConfidenceThreshold(hi)).exit_layer_used


@pytest.mark.parametrize("strategy", [
    FixedExit(0), FixedExit(13), ConfidenceThreshold(1.5), ConfidenceThreshold(0.5, min_layer=0),
    StablePrediction(1), FixedFraction(0.0), FixedFraction(1.2),
])
def test_invalid_strategy(strategy):
    table = PredictionTable.from_lists({"s": ("x", ["x"] * 12)})
    with pytest.raises(StrategyConfigError):
        run(table, "s", strategy)


@pytest.mark.parametrize("text, expected", [
    ("full", Full()), ("fixed:9", FixedExit(9)), ("conf:0.9", ConfidenceThreshold(0.9)),
    ("conf:0.8:3", ConfidenceThreshold(0.8, 3)), ("stable:3", StablePrediction(3)),
    ("frac:0.5", FixedFraction(0.5)),
])
def test_parse_strategy_round_trip(text, expected):
    assert parse_strategy(text) == expected
    assert parse_strategy(str(expected)) == expected


@pytest.mark.parametrize("text", ["", "fast", "fixed", "fixed:x", "conf:0.9:1:2", "full:1"])
def test_parse_strategy_rejects(text):
    with pytest.raises(StrategyConfigError):
        parse_strategy(text)


def test_batch_run_agrees_with_profile(worked_table):
    model, samples = worked_table
    prof = layerwise_accuracy(model, samples, "vehicle")
    full = batch_run(model, samples, FixedExit(model.num_layers))
    assert full.accuracy == prof.acc_by_layer[-1]
    early = batch_run(model, samples, FixedExit(select_exit_layer(prof).exit_layer))
    assert early.accuracy >= full.accuracy
    assert [r.exit_layer_used for r in early.results] == [9] * len(samples)


def test_batch_run_mean_layers():
    table = PredictionTable.from_lists({str(i): ("x", ["x"] * 32) for i in range(3)})
    res = batch_run(table, table.samples(), FixedFraction(0.5))
    assert res.mean_layers_executed == 16


def test_batch_run_empty():
    table = PredictionTable.from_lists({"s": ("x", ["x"] * 4)})
    with pytest.raises(EmptyInputError):
        batch_run(table, [], Full())


def test_overthinking_fixture_has_early_correct_full_wrong(overthinking_synthetic):
    model, samples = overthinking_synthetic
    early = batch_run(model, samples, FixedExit(3)).results
    full = batch_run(model, samples, Full()).results
    rescued = sum(e.predicted_label == s.label and f.predicted_label != s.label
                  for e, f, s in zip(early, full, samples))
    assert rescued > 0
