"""Synthetic collection generator: determinism, calibration, error structure."""

import warnings

import numpy as np
import pytest

from modelpick import synth
from modelpick.data import accuracies
from modelpick.errors import ConfigError


def make_spec(**overrides):
    kwargs = dict(
        n=400,
        m=3,
        num_classes=4,
        accuracy_targets=[0.55, 0.7, 0.9],
        correlation=0.0,
    )
    kwargs.update(overrides)
    return synth.SyntheticSpec(**kwargs)


# ------------------------------------------------------------- validation


def test_spec_rejects_bad_shapes_and_ranges():
    with pytest.raises(ConfigError, match="n must be"):
        make_spec(n=0)
    with pytest.raises(ConfigError, match="m >= 2"):
        make_spec(m=1, accuracy_targets=[0.5])
    with pytest.raises(ConfigError, match="num_classes"):
        make_spec(num_classes=1)
    with pytest.raises(ConfigError, match="accuracy targets"):
        make_spec(accuracy_targets=[0.5, 0.6])
    with pytest.raises(ConfigError, match="outside"):
        make_spec(accuracy_targets=[0.5, 0.6, 1.2])
    with pytest.raises(ConfigError, match="correlation"):
        make_spec(correlation=1.5)
    with pytest.raises(ConfigError, match="model names"):
        make_spec(model_names=["a", "b"])


def test_below_chance_targets_warn_but_generate():
    with pytest.warns(UserWarning, match="below chance level"):
        spec = make_spec(accuracy_targets=[0.1, 0.7, 0.9])
    matrix, labels = synth.generate(spec, seed=0)
    assert matrix.n == 400


def test_default_names_and_example_ids():
    matrix, _ = synth.generate(make_spec(), seed=0)
    assert matrix.model_names == ["model_0", "model_1", "model_2"]
    assert matrix.example_ids[0] == "x0"
    assert matrix.example_ids[-1] == "x399"


# ------------------------------------------------------------ determinism


def test_generate_is_deterministic_in_seed():
    a_m, a_l = synth.generate(make_spec(), seed=5)
    b_m, b_l = synth.generate(make_spec(), seed=5)
    c_m, _ = synth.generate(make_spec(), seed=6)
    np.testing.assert_array_equal(a_m.preds, b_m.preds)
    np.testing.assert_array_equal(a_l.labels, b_l.labels)
    assert not np.array_equal(a_m.preds, c_m.preds)


# ------------------------------------------------------------- calibration


def test_empirical_accuracies_match_targets_within_three_sigma():
    spec = make_spec(n=4000)
    matrix, labels = synth.generate(spec, seed=11)
    emp = accuracies(matrix, labels)
    for target, got in zip(spec.accuracy_targets, emp):
        sigma = np.sqrt(target * (1 - target) / spec.n)
        assert abs(got - target) <= 3 * sigma


def test_full_correlation_makes_wrong_models_agree():
    spec = make_spec(n=300, m=5, accuracy_targets=[0.6] * 5, correlation=1.0)
    matrix, labels = synth.generate(spec, seed=3)
    for i in range(matrix.n):
        wrong = matrix.preds[i][matrix.preds[i] != labels.labels[i]]
        assert len(set(wrong.tolist())) <= 1


def test_zero_correlation_spreads_wrong_classes():
    spec = make_spec(n=300, m=12, num_classes=8, accuracy_targets=[0.3] * 12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        matrix, labels = synth.generate(spec, seed=3)
    multi = 0
    for i in range(matrix.n):
        wrong = matrix.preds[i][matrix.preds[i] != labels.labels[i]]
        if len(set(wrong.tolist())) > 1:
            multi += 1
    assert multi > matrix.n // 2


def test_wrong_predictions_never_equal_the_true_label():
    matrix, labels = synth.generate(make_spec(correlation=0.5), seed=9)
    correct = matrix.preds == labels.labels[:, None]
    assert (matrix.preds[~correct] != np.repeat(labels.labels[:, None], 3, axis=1)[~correct]).all()


# ---------------------------------------------------------- drift fixture


def test_chance_level_spec_sits_exactly_at_chance():
    spec = synth.chance_level_spec(100, 4, 5)
    assert spec.accuracy_targets == [0.2] * 4
    assert spec.correlation == 0.0


def test_drift_collection_models_hover_at_chance():
    matrix, labels = synth.drift_collection(3000, 6, 4, seed=2)
    emp = accuracies(matrix, labels)
    sigma = np.sqrt(0.25 * 0.75 / 3000)
    assert np.all(np.abs(emp - 0.25) <= 4 * sigma)
    assert matrix.num_classes == 4
