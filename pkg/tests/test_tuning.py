"""Error-rate tuning: surrogate labels, grid search, tie rules."""

import numpy as np
import pytest

from modelpick import synth, tuning
from modelpick.data import LabelVector, PredictionMatrix
from modelpick.errors import ConfigError
from modelpick.evaluation import ExperimentConfig
from modelpick.policies import PolicySpec


def tiny_collection(seed=0, n=60, m=5, k=3):
    spec = synth.SyntheticSpec(
        n=n,
        m=m,
        num_classes=k,
        accuracy_targets=list(np.linspace(0.5, 0.9, m)),
        correlation=0.2,
    )
    return synth.generate(spec, seed=seed)


def tiny_cfg(**overrides):
    kwargs = dict(
        policies=[PolicySpec("model_selector", epsilon=0.45)],
        realizations=2,
        pool_size=16,
        max_budget=8,
        master_seed=3,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


# -------------------------------------------------------------- grid rules


def test_grid_must_be_ascending_and_inside_half_interval():
    assert tuning.validate_grid([0.35, 0.4, 0.5]) == [0.35, 0.4, 0.5]
    with pytest.raises(ConfigError, match="empty"):
        tuning.validate_grid([])
    with pytest.raises(ConfigError, match="ascending"):
        tuning.validate_grid([0.4, 0.35])
    with pytest.raises(ConfigError, match="ascending"):
        tuning.validate_grid([0.4, 0.4])
    with pytest.raises(ConfigError, match="0, 0.5"):
        tuning.validate_grid([0.4, 0.6])
    with pytest.raises(ConfigError, match="0, 0.5"):
        tuning.validate_grid([0.0, 0.4])


def test_refine_grid_centers_and_clips():
    assert tuning._refine_grid(0.40) == [round(0.36 + 0.01 * i, 2) for i in range(9)]
    assert tuning._refine_grid(0.50)[-1] == 0.50  # clipped at the top
    assert max(tuning._refine_grid(0.50)) == 0.50
    assert min(tuning._refine_grid(0.03)) > 0.0  # clipped at the bottom


def test_exact_score_ties_prefer_larger_epsilon():
    assert tuning._pick_best({0.35: 0.5, 0.45: 0.5, 0.40: 0.4}) == 0.45
    assert tuning._pick_best({0.35: 0.6, 0.45: 0.5}) == 0.35


# ---------------------------------------------------------- noisy oracles


def test_noisy_config_validation():
    with pytest.raises(ConfigError, match="label mode"):
        tuning.NoisyOracleConfig(mode="vote")
    with pytest.raises(ConfigError, match="auto_threshold"):
        tuning.NoisyOracleConfig(auto_threshold=1)
    assert tuning.NoisyOracleConfig(mode="auto").resolve_mode(10) == "majority"
    assert tuning.NoisyOracleConfig(mode="auto").resolve_mode(11) == "sampled"
    assert tuning.NoisyOracleConfig(mode="sampled").resolve_mode(2) == "sampled"


def test_majority_votes_break_ties_toward_smaller_class():
    preds = np.array([[0, 0, 1, 1], [2, 2, 2, 0], [1, 2, 1, 2]])
    matrix = PredictionMatrix(preds=preds, num_classes=3, model_names=list("abcd"))
    out = tuning.noisy_labels(matrix, mode="majority")
    np.testing.assert_array_equal(out.labels, [0, 2, 1])


def test_sampled_labels_follow_vote_shares():
    preds = np.tile(np.array([[0, 0, 1, 2]]), (4000, 1))
    matrix = PredictionMatrix(preds=preds, num_classes=3, model_names=list("abcd"))
    out = tuning.noisy_labels(matrix, mode="sampled", seed=1)
    freq = np.bincount(out.labels, minlength=3) / 4000
    np.testing.assert_allclose(freq, [0.5, 0.25, 0.25], atol=0.03)


def test_sampled_labels_are_deterministic_in_seed():
    matrix, _ = tiny_collection()
    a = tuning.noisy_labels(matrix, mode="sampled", seed=4)
    b = tuning.noisy_labels(matrix, mode="sampled", seed=4)
    c = tuning.noisy_labels(matrix, mode="sampled", seed=5)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.labels, c.labels)


def test_auto_mode_switches_on_class_count():
    matrix, _ = tiny_collection(k=3)
    cfg = tuning.NoisyOracleConfig(mode="auto", auto_threshold=2)
    majority = tuning.build_noisy_oracle(matrix, tuning.NoisyOracleConfig(mode="majority"))
    sampled = tuning.build_noisy_oracle(matrix, tuning.NoisyOracleConfig(mode="sampled"))
    auto = tuning.build_noisy_oracle(matrix, cfg)
    np.testing.assert_array_equal(auto.labels, sampled.labels)
    assert not np.array_equal(majority.labels, sampled.labels)


def test_best_model_accuracy_gap_hand_case():
    # model a matches truth everywhere; model b matches the noisy labels
    preds = np.array([[0, 1], [1, 0], [0, 1], [1, 0]])
    matrix = PredictionMatrix(preds=preds, num_classes=2, model_names=["a", "b"])
    truth = LabelVector(labels=np.array([0, 1, 0, 1]), num_classes=2)
    noisy = LabelVector(labels=np.array([1, 0, 1, 0]), num_classes=2)
    gap = tuning.best_model_accuracy_gap(matrix, truth, noisy)
    assert gap == 1.0
    assert tuning.best_model_accuracy_gap(matrix, truth, truth) == 0.0


# ------------------------------------------------------------- grid search


def test_explicit_grid_records_single_stage():
    matrix, _ = tiny_collection()
    rep = tuning.tune_epsilon(matrix, tiny_cfg(), grid=[0.35, 0.45])
    assert [s["stage"] for s in rep.stages] == ["explicit"]
    assert set(rep.score_per_epsilon) == {"0.35", "0.45"}
    assert rep.chosen_epsilon in (0.35, 0.45)
    assert rep.label_mode == "majority"
    assert len(rep.curves["0.35"]) == 8
    assert len(rep.config_hash) == 64


def test_two_stage_search_refines_around_coarse_winner():
    matrix, _ = tiny_collection()
    rep = tuning.tune_epsilon(matrix, tiny_cfg())
    assert [s["stage"] for s in rep.stages] == ["coarse", "refine"]
    coarse = {float(k) for k in rep.stages[0]["scores"]}
    assert coarse == set(tuning.COARSE_GRID)
    winner = tuning._pick_best({float(k): v for k, v in rep.stages[0]["scores"].items()})
    refined = sorted(float(k) for k in rep.stages[1]["scores"])
    assert all(abs(v - winner) <= tuning.REFINE_RADIUS + 1e-9 for v in refined)
    assert all(0.0 < v <= 0.5 for v in refined)
    # coarse winner is re-used from the cache, not re-run
    assert f"{winner:.2f}" in rep.stages[1]["scores"]
    assert rep.stages[1]["scores"][f"{winner:.2f}"] == rep.stages[0]["scores"][f"{winner:.2f}"]


def test_tune_against_provided_labels_reports_mode():
    matrix, labels = tiny_collection()
    rep = tuning.tune_epsilon_against(matrix, labels, tiny_cfg(), grid=[0.4, 0.45])
    assert rep.label_mode == "provided"


def test_epsilon_grid_search_uses_requested_oracle_mode():
    matrix, _ = tiny_collection()
    rep = tuning.epsilon_grid_search(
        matrix, [0.4, 0.45], tiny_cfg(), tuning.NoisyOracleConfig(mode="sampled", seed=2)
    )
    assert rep.label_mode == "sampled"


def test_pool_size_must_fit_collection():
    matrix, _ = tiny_collection(n=10)
    with pytest.raises(ConfigError, match="exceeds"):
        tuning.tune_epsilon(matrix, tiny_cfg(), grid=[0.45])


def test_identical_labels_give_identical_tunes():
    """When the surrogate equals the truth the two searches coincide."""
    spec = synth.SyntheticSpec(
        n=80,
        m=15,
        num_classes=3,
        accuracy_targets=list(np.linspace(0.65, 0.9, 15)),
        correlation=0.1,
    )
    matrix, labels = synth.generate(spec, seed=1)
    surro = tuning.noisy_labels(matrix, mode="majority")
    assert np.array_equal(surro.labels, labels.labels)
    a = tuning.tune_epsilon(matrix, tiny_cfg(), grid=[0.4, 0.45, 0.5])
    b = tuning.tune_epsilon_against(matrix, labels, tiny_cfg(), grid=[0.4, 0.45, 0.5])
    assert a.chosen_epsilon == b.chosen_epsilon
    assert a.score_per_epsilon == b.score_per_epsilon
