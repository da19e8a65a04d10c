"""Query policies and the shared selection state.

A selection state tracks which pool examples are labeled, the evidence so
far, a posterior over models, and the policy's private bookkeeping.  All
policies expose the same three entry points: init_state, next_query, and
record_label, plus final_selection once labeling stops.

Policy catalogue:
  model_selector  greedy minimizer of expected posterior entropy
  random          uniform over the remaining pool
  uncertainty     fixed descending order of prediction-vote entropy
  margin          fixed order of top-two vote margin (ascending by default)
  amc             sample proportional to the number of disagreeing model pairs
  vma             sample proportional to a variance proxy of model losses
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .data import PredictionMatrix
from .errors import ConfigError, ModelPickError

POLICY_NAMES = ("model_selector", "random", "uncertainty", "margin", "amc", "vma")

# Baselines do not define their own likelihood parameter; their bookkeeping
# posterior (leaderboard display, final tie-breaks) uses this default.
DEFAULT_DISPLAY_EPSILON = 0.45


@dataclass
class PolicySpec:
    name: str
    epsilon: float | None = None
    # "posterior" scores candidates with the noise model's own label
    # predictive, which guarantees expected entropy never rises; "frequency"
    # composes raw vote shares and can stall once the posterior concentrates.
    class_mode: str = "posterior"
    margin_direction: str = "ascending"
    display_epsilon: float = DEFAULT_DISPLAY_EPSILON

    def __post_init__(self) -> None:
        if self.name not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.name!r}, expected one of {POLICY_NAMES}")
        if self.name == "model_selector":
            if self.epsilon is None:
                raise ConfigError("model_selector requires an epsilon")
            self.epsilon = engine.validate_epsilon(self.epsilon)
            if self.class_mode not in engine.CLASS_MODES:
                raise ConfigError(
                    f"class mode must be one of {engine.CLASS_MODES}, got {self.class_mode!r}"
                )
        if self.name == "margin" and self.margin_direction not in ("ascending", "descending"):
            raise ConfigError(
                f"margin direction must be 'ascending' or 'descending',"
                f" got {self.margin_direction!r}"
            )
        self.display_epsilon = engine.validate_epsilon(self.display_epsilon)

    @property
    def update_epsilon(self) -> float:
        """Epsilon used for posterior updates under this policy."""
        if self.name == "model_selector":
            assert self.epsilon is not None
            return self.epsilon
        return self.display_epsilon

    def label(self) -> str:
        if self.name == "model_selector":
            return f"model_selector(eps={self.epsilon:.2f})"
        return self.name


@dataclass
class EvidenceStep:
    example_index: int
    label: int
    correct: np.ndarray


@dataclass
class SelectionState:
    pool: PredictionMatrix
    spec: PolicySpec
    rng: np.random.Generator
    log_probs: np.ndarray
    unlabeled: np.ndarray
    evidence: list[EvidenceStep] = field(default_factory=list)
    correct_counts: np.ndarray = field(default=None)  # type: ignore[assignment]
    # Policy internals, filled by init_state.
    scorer: engine.PoolScorer | None = None
    visit_order: np.ndarray | None = None
    visit_pos: int = 0
    sample_weights: np.ndarray | None = None

    @property
    def step(self) -> int:
        return len(self.evidence)

    @property
    def num_unlabeled(self) -> int:
        return int(self.unlabeled.sum())


def _vote_stats(pool: PredictionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-example vote counts, entropy, and top-two margin."""
    n, m = pool.preds.shape
    counts = np.zeros((n, pool.num_classes), dtype=np.int64)
    rows = np.repeat(np.arange(n), m)
    np.add.at(counts, (rows, pool.preds.ravel()), 1)
    freq = counts / m
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(freq > 0, freq * np.log(freq), 0.0), axis=1)
    top2 = np.sort(counts, axis=1)[:, -2:]
    margin = (top2[:, 1] - top2[:, 0]) / m
    return counts, ent, margin


def _tie_shuffled_order(keys: np.ndarray, rng: np.random.Generator, descending: bool) -> np.ndarray:
    """Stable order by key with ties broken by a one-off random shuffle."""
    jitter = rng.permutation(keys.size)
    primary = -keys if descending else keys
    # lexsort: last key is primary, jitter decides inside equal-key runs
    return np.lexsort((jitter, primary))


def init_state(pool: PredictionMatrix, spec: PolicySpec, seed) -> SelectionState:
    """Build a fresh state; seed may be an int or a numpy SeedSequence."""
    rng = np.random.default_rng(seed)
    state = SelectionState(
        pool=pool,
        spec=spec,
        rng=rng,
        log_probs=engine.uniform_log_posterior(pool.m),
        unlabeled=np.ones(pool.n, dtype=bool),
        correct_counts=np.zeros(pool.m, dtype=np.int64),
    )
    if spec.name == "model_selector":
        state.scorer = engine.PoolScorer(pool.preds, pool.num_classes)
    elif spec.name == "uncertainty":
        _, ent, _ = _vote_stats(pool)
        state.visit_order = _tie_shuffled_order(ent, rng, descending=True)
    elif spec.name == "margin":
        _, _, margin = _vote_stats(pool)
        descending = spec.margin_direction == "descending"
        state.visit_order = _tie_shuffled_order(margin, rng, descending=descending)
    elif spec.name == "amc":
        counts, _, _ = _vote_stats(pool)
        pairs_total = pool.m * (pool.m - 1) // 2
        agreeing = (counts * (counts - 1) // 2).sum(axis=1)
        state.sample_weights = (pairs_total - agreeing).astype(np.float64)
    elif spec.name == "vma":
        counts, _, _ = _vote_stats(pool)
        freq = counts / pool.m
        # loss proxy per model: 1 - vote share of its own prediction
        loss = 1.0 - np.take_along_axis(freq, pool.preds, axis=1)
        state.sample_weights = np.sqrt((loss * (1.0 - loss)).sum(axis=1))
    return state


def next_query(state: SelectionState) -> int:
    """Pick the next pool example to label; raises once the pool is empty."""
    candidates = np.flatnonzero(state.unlabeled)
    if candidates.size == 0:
        raise ModelPickError("budget exceeds pool: no unlabeled examples remain")
    spec = state.spec

    if spec.name == "model_selector":
        assert state.scorer is not None
        scores = state.scorer.expected_entropies(
            state.log_probs, spec.epsilon, mode=spec.class_mode
        )
        cand_scores = scores[candidates]
        ties = candidates[cand_scores <= cand_scores.min() + engine.TIE_TOL]
        return int(ties[state.rng.integers(ties.size)])

    if spec.name == "random":
        return int(candidates[state.rng.integers(candidates.size)])

    if spec.name in ("uncertainty", "margin"):
        order = state.visit_order
        assert order is not None
        while state.visit_pos < order.size:
            idx = int(order[state.visit_pos])
            if state.unlabeled[idx]:
                return idx
            state.visit_pos += 1
        raise ModelPickError("budget exceeds pool: no unlabeled examples remain")

    # amc / vma: weighted sampling without replacement over the remainder
    assert state.sample_weights is not None
    w = state.sample_weights[candidates]
    total = w.sum()
    if total <= 0.0:
        return int(candidates[state.rng.integers(candidates.size)])
    return int(state.rng.choice(candidates, p=w / total))


def record_label(state: SelectionState, example_index: int, label: int) -> SelectionState:
    """Fold one observed label into the evidence and the posterior.

    Mutates the state in place and returns it.  The posterior moves by the
    same update under every policy; only model_selector uses it to choose
    queries, the rest carry it for display and final tie-breaks.
    """
    idx = int(example_index)
    if not (0 <= idx < state.pool.n):
        raise ModelPickError(f"example index {idx} outside pool of size {state.pool.n}")
    if not state.unlabeled[idx]:
        raise ModelPickError(f"example {idx} is already labeled")
    if not (0 <= int(label) < state.pool.num_classes):
        raise ModelPickError(
            f"label {label} outside [0, {state.pool.num_classes}) for example {idx}"
        )
    correct = state.pool.preds[idx] == int(label)
    state.log_probs = engine.update_posterior(state.log_probs, correct, state.spec.update_epsilon)
    state.unlabeled[idx] = False
    state.correct_counts += correct
    state.evidence.append(EvidenceStep(example_index=idx, label=int(label), correct=correct))
    return state


@dataclass
class FinalSelection:
    model_index: int
    model_name: str
    labeled_accuracy: float
    posterior_mass: float
    correct_counts: np.ndarray
    posterior: np.ndarray


def final_selection(state: SelectionState) -> FinalSelection:
    """Report the model with the best labeled accuracy.

    Ties on the (exact, integer) correct count go to the model with more
    posterior mass; remaining ties go to the smaller index.  The tie-break
    masses are recomputed from the counts (the batch form of the update),
    which is order-free: sequentially renormalized log weights pick up
    rounding noise that would otherwise order mathematically equal masses
    arbitrarily.
    """
    if state.step == 0:
        raise ModelPickError("cannot select a model before any label is observed")
    counts = state.correct_counts
    tied = np.flatnonzero(counts == counts.max())
    probs = engine.posterior_probs(state.log_probs)
    if tied.size == 1:
        winner = int(tied[0])
    else:
        tie_probs = engine.posterior_probs(
            engine.posterior_from_counts(counts, state.step, state.spec.update_epsilon)
        )
        winner = int(tied[np.argmax(tie_probs[tied])])
    return FinalSelection(
        model_index=winner,
        model_name=state.pool.model_names[winner],
        labeled_accuracy=float(counts[winner] / state.step),
        posterior_mass=float(probs[winner]),
        correct_counts=counts.copy(),
        posterior=probs,
    )
