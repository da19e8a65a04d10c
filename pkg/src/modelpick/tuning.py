"""Self-supervised tuning of the likelihood error rate.

Ground truth is replaced by labels manufactured from the predictions
themselves: either the per-example majority vote or a draw from the
per-example vote distribution.  Each candidate error rate is then scored by
running the greedy selector against those surrogate labels through the full
evaluation protocol; the score is the mean identification probability over
every budget up to the horizon, which rewards settings that find the
(surrogate) best model early and keep it.  Ties prefer the larger, more
conservative error rate.

Surrogate labels are good enough to rank error rates but not to pick a
model: the model that best matches the majority vote is usually not the
truly best one.  best_model_accuracy_gap quantifies that difference.

The default search is two-stage: a coarse grid followed by a fine sweep of
0.01 steps within 0.04 of the coarse winner.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import evaluation as ev
from .data import LabelVector, PredictionMatrix, accuracies
from .errors import ConfigError
from .policies import PolicySpec

COARSE_GRID = (0.35, 0.40, 0.45, 0.49, 0.50)
REFINE_RADIUS = 0.04
REFINE_STEP = 0.01

LABEL_MODES = ("majority", "sampled", "auto")


@dataclass
class NoisyOracleConfig:
    """How surrogate labels are built from the prediction matrix.

    auto mode votes by majority while the class count stays at or below
    auto_threshold, and switches to sampling beyond it, where the vote
    histogram is too flat for argmax to carry signal.
    """

    mode: str = "auto"
    auto_threshold: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in LABEL_MODES:
            raise ConfigError(f"label mode must be one of {LABEL_MODES}, got {self.mode!r}")
        if self.auto_threshold < 2:
            raise ConfigError(f"auto_threshold must be >= 2, got {self.auto_threshold}")

    def resolve_mode(self, num_classes: int) -> str:
        if self.mode != "auto":
            return self.mode
        return "majority" if num_classes <= self.auto_threshold else "sampled"


def validate_grid(values) -> list[float]:
    """Error-rate grid: nonempty, strictly ascending, each in (0, 0.5]."""
    grid = [float(v) for v in values]
    if not grid:
        raise ConfigError("epsilon grid must not be empty")
    if any(not (0.0 < v <= 0.5) for v in grid):
        raise ConfigError(f"grid values must lie in (0, 0.5], got {grid}")
    if grid != sorted(set(grid)):
        raise ConfigError(f"grid values must be strictly ascending, got {grid}")
    return grid


def build_noisy_oracle(matrix: PredictionMatrix, cfg: NoisyOracleConfig) -> LabelVector:
    """Surrogate labels built from the prediction matrix alone."""
    mode = cfg.resolve_mode(matrix.num_classes)
    n, m = matrix.preds.shape
    counts = np.zeros((n, matrix.num_classes), dtype=np.int64)
    rows = np.repeat(np.arange(n), m)
    np.add.at(counts, (rows, matrix.preds.ravel()), 1)

    if mode == "majority":
        # argmax resolves vote ties toward the smaller class id
        labels = counts.argmax(axis=1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, 2)))
        cum = np.cumsum(counts / m, axis=1)
        u = rng.random(n)
        labels = np.minimum((u[:, None] > cum).sum(axis=1), matrix.num_classes - 1)
    return LabelVector(labels=labels.astype(np.int64), num_classes=matrix.num_classes)


def noisy_labels(
    matrix: PredictionMatrix,
    mode: str = "auto",
    seed: int = 0,
    auto_threshold: int = 10,
) -> LabelVector:
    """Convenience wrapper over build_noisy_oracle."""
    return build_noisy_oracle(
        matrix, NoisyOracleConfig(mode=mode, auto_threshold=auto_threshold, seed=seed)
    )


def best_model_accuracy_gap(
    matrix: PredictionMatrix,
    labels: LabelVector,
    noisy: LabelVector,
) -> float:
    """True-accuracy shortfall of the model the surrogate labels would pick.

    Positive values demonstrate why surrogate labels can tune the error rate
    but cannot substitute for real labels when selecting the model itself.
    """
    true_acc = accuracies(matrix, labels)
    noisy_counts = (matrix.preds == noisy.labels[:, None]).sum(axis=0)
    noisy_best = int(np.argmax(noisy_counts))
    return float(true_acc.max() - true_acc[noisy_best])


@dataclass
class TuningReport:
    chosen_epsilon: float
    label_mode: str
    stages: list[dict]
    score_per_epsilon: dict[str, float]
    curves: dict[str, list[float]]
    config: dict
    config_hash: str

    def to_dict(self) -> dict:
        return {
            "chosen_epsilon": self.chosen_epsilon,
            "label_mode": self.label_mode,
            "stages": self.stages,
            "score_per_epsilon": self.score_per_epsilon,
            "curves": self.curves,
            "config": self.config,
            "config_hash": self.config_hash,
        }


def _selector_template(eval_cfg: ev.ExperimentConfig) -> PolicySpec:
    for spec in eval_cfg.policies:
        if spec.name == "model_selector":
            return spec
    return PolicySpec("model_selector", epsilon=0.45)


def _score_config(eval_cfg: ev.ExperimentConfig, eps: float) -> ev.ExperimentConfig:
    template = _selector_template(eval_cfg)
    policy = PolicySpec(
        "model_selector",
        epsilon=eps,
        class_mode=template.class_mode,
        display_epsilon=template.display_epsilon,
    )
    return replace(eval_cfg, policies=[policy], budgets_to_report=None)


def score_epsilon(
    matrix: PredictionMatrix,
    labels: LabelVector,
    eval_cfg: ev.ExperimentConfig,
    eps: float,
) -> tuple[float, list[float]]:
    """Mean identification probability over budgets 1..max_budget, plus curve."""
    succ, _ = ev.run_trajectories(matrix, labels, _score_config(eval_cfg, eps))
    curve = succ[:, 0, :].mean(axis=0)
    return float(curve.mean()), [float(v) for v in curve]


def _refine_grid(center: float) -> list[float]:
    steps = int(round(REFINE_RADIUS / REFINE_STEP))
    vals = [round(center + k * REFINE_STEP, 2) for k in range(-steps, steps + 1)]
    return [v for v in vals if 0.0 < v <= 0.5]


def _pick_best(scores: dict[float, float]) -> float:
    best_eps, best_score = None, -1.0
    for eps in sorted(scores):
        # >= so exact ties move to the larger epsilon
        if scores[eps] >= best_score:
            best_eps, best_score = eps, scores[eps]
    assert best_eps is not None
    return best_eps


def _grid_search(
    matrix: PredictionMatrix,
    labels: LabelVector,
    eval_cfg: ev.ExperimentConfig,
    grid: list[float] | None,
    label_mode: str,
) -> TuningReport:
    if eval_cfg.pool_size > matrix.n:
        raise ConfigError(f"pool_size {eval_cfg.pool_size} exceeds collection size {matrix.n}")
    scores: dict[float, float] = {}
    curves: dict[str, list[float]] = {}
    stages: list[dict] = []

    def run_stage(stage_grid: list[float], stage_name: str) -> None:
        stage_scores = {}
        for eps in stage_grid:
            if eps not in scores:
                scores[eps], curves[f"{eps:.2f}"] = score_epsilon(matrix, labels, eval_cfg, eps)
            stage_scores[f"{eps:.2f}"] = scores[eps]
        stages.append({"stage": stage_name, "scores": stage_scores})

    if grid is not None:
        run_stage(validate_grid(grid), "explicit")
    else:
        run_stage(list(COARSE_GRID), "coarse")
        run_stage(_refine_grid(_pick_best(scores)), "refine")

    best = _pick_best(scores)
    cfg_dict = {
        "eval": ev.config_to_dict(_score_config(eval_cfg, best)),
        "grid": grid,
        "label_mode": label_mode,
    }
    return TuningReport(
        chosen_epsilon=best,
        label_mode=label_mode,
        stages=stages,
        score_per_epsilon={f"{e:.2f}": s for e, s in sorted(scores.items())},
        curves=curves,
        config=cfg_dict,
        config_hash=ev.config_hash(cfg_dict),
    )


def epsilon_grid_search(
    matrix: PredictionMatrix,
    grid,
    eval_cfg: ev.ExperimentConfig,
    noisy_cfg: NoisyOracleConfig,
) -> TuningReport:
    """Score every grid value against surrogate labels; larger epsilon wins ties."""
    labels = build_noisy_oracle(matrix, noisy_cfg)
    return _grid_search(
        matrix, labels, eval_cfg, validate_grid(grid), noisy_cfg.resolve_mode(matrix.num_classes)
    )


def tune_epsilon(
    matrix: PredictionMatrix,
    eval_cfg: ev.ExperimentConfig,
    noisy_cfg: NoisyOracleConfig | None = None,
    grid=None,
) -> TuningReport:
    """Label-free tuning; two-stage coarse-then-refine search when no grid given."""
    noisy_cfg = noisy_cfg or NoisyOracleConfig()
    labels = build_noisy_oracle(matrix, noisy_cfg)
    return _grid_search(
        matrix,
        labels,
        eval_cfg,
        validate_grid(grid) if grid is not None else None,
        noisy_cfg.resolve_mode(matrix.num_classes),
    )


def tune_epsilon_against(
    matrix: PredictionMatrix,
    labels: LabelVector,
    eval_cfg: ev.ExperimentConfig,
    grid=None,
) -> TuningReport:
    """Same search, scored against caller-provided labels (for fidelity checks)."""
    return _grid_search(
        matrix,
        labels,
        eval_cfg,
        validate_grid(grid) if grid is not None else None,
        "provided",
    )
