import numpy as np
import pytest

from modelpick import data

# Tiny worked collection used across the suite: 4 examples, 3 models, 2
# classes.  h2 is perfect, h3 gets 3 of 4, h1 gets 2 of 4.
T1_PREDS = np.array(
    [
        [0, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
        [1, 0, 0],
    ],
    dtype=np.int64,
)
T1_LABELS = np.array([0, 1, 1, 0], dtype=np.int64)
T1_MODEL_NAMES = ["h1", "h2", "h3"]
T1_EXAMPLE_IDS = ["x0", "x1", "x2", "x3"]


def make_t1_matrix() -> data.PredictionMatrix:
    return data.PredictionMatrix(
        preds=T1_PREDS.copy(),
        num_classes=2,
        model_names=list(T1_MODEL_NAMES),
        example_ids=list(T1_EXAMPLE_IDS),
    )


def make_t1_labels() -> data.LabelVector:
    return data.LabelVector(labels=T1_LABELS.copy(), num_classes=2)


@pytest.fixture
def t1_matrix() -> data.PredictionMatrix:
    return make_t1_matrix()


@pytest.fixture
def t1_labels() -> data.LabelVector:
    return make_t1_labels()


def random_instance(rng: np.random.Generator, n=None, m=None, k=None):
    """Random prediction matrix + posterior for oracle cross-checks."""
    n = n or int(rng.integers(1, 12))
    m = m or int(rng.integers(2, 8))
    k = k or int(rng.integers(2, 6))
    preds = rng.integers(k, size=(n, m))
    raw = rng.dirichlet(np.ones(m) * rng.uniform(0.3, 3.0))
    raw = np.clip(raw, 1e-12, None)
    log_probs = np.log(raw / raw.sum())
    return preds, log_probs, k
