"""Synthetic prediction collections with controllable difficulty.

Each model hits its accuracy target independently per example.  Errors can
be correlated across models: with probability `correlation` a wrong model
copies a per-example consensus wrong class, otherwise it picks its own
uniformly random wrong class.  correlation=0 gives independent errors,
correlation=1 makes all wrong models agree.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import LabelVector, PredictionMatrix
from .errors import ConfigError


@dataclass
class SyntheticSpec:
    n: int
    m: int
    num_classes: int
    accuracy_targets: list[float]
    correlation: float = 0.0
    model_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.m < 2:
            raise ConfigError(f"m >= 2 required, got {self.m}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if len(self.accuracy_targets) != self.m:
            raise ConfigError(
                f"{len(self.accuracy_targets)} accuracy targets for m={self.m} models"
            )
        for j, t in enumerate(self.accuracy_targets):
            if not (0.0 <= t <= 1.0):
                raise ConfigError(f"accuracy target {t} for model {j} outside [0, 1]")
        chance = 1.0 / self.num_classes
        low = [t for t in self.accuracy_targets if t < chance]
        if low:
            warnings.warn(
                f"{len(low)} accuracy target(s) below chance level {chance:.4f};"
                " generating anyway",
                stacklevel=2,
            )
        if not (0.0 <= self.correlation <= 1.0):
            raise ConfigError(f"correlation must be in [0, 1], got {self.correlation}")
        if not self.model_names:
            self.model_names = [f"model_{j}" for j in range(self.m)]
        if len(self.model_names) != self.m:
            raise ConfigError(f"{len(self.model_names)} model names for m={self.m} models")


def generate(spec: SyntheticSpec, seed: int) -> tuple[PredictionMatrix, LabelVector]:
    """Deterministically generate a collection from the spec and seed."""
    rng = np.random.default_rng(seed)
    n, m, k = spec.n, spec.m, spec.num_classes
    targets = np.asarray(spec.accuracy_targets, dtype=np.float64)

    labels = rng.integers(k, size=n)
    correct = rng.random((n, m)) < targets[None, :]
    # Consensus wrong class per example, uniform over the K-1 non-true ids.
    shared_wrong = (labels + 1 + rng.integers(k - 1, size=n)) % k
    copy_shared = rng.random((n, m)) < spec.correlation
    own_wrong = (labels[:, None] + 1 + rng.integers(k - 1, size=(n, m))) % k

    preds = np.where(correct, labels[:, None], np.where(copy_shared, shared_wrong[:, None], own_wrong))
    matrix = PredictionMatrix(
        preds=preds,
        num_classes=k,
        model_names=list(spec.model_names),
        example_ids=[f"x{i}" for i in range(n)],
    )
    return matrix, LabelVector(labels=labels, num_classes=k)


def chance_level_spec(n: int, m: int, num_classes: int) -> SyntheticSpec:
    """Collection where every model is at chance and errors are independent.

    With targets all equal to 1/K and correlation 0 every model's prediction
    is marginally uniform over the classes, so no error-rate setting can be
    beaten by exploiting prediction structure.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SyntheticSpec(
            n=n,
            m=m,
            num_classes=num_classes,
            accuracy_targets=[1.0 / num_classes] * m,
            correlation=0.0,
        )


def drift_collection(n: int, m: int, num_classes: int, seed: int) -> tuple[PredictionMatrix, LabelVector]:
    """Shift-stressed fixture: chance-level models with independent errors.

    Predictions carry no usable structure, so selective sampling has no
    edge over uniform sampling and error-rate tuning should settle on 0.50.
    """
    return generate(chance_level_spec(n, m, num_classes), seed)
