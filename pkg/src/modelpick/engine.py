"""Posterior engine over candidate models.

The belief state is a categorical posterior over "model j is the best one",
kept in log space.  Observing a label multiplies the weight of each model by
(1 - eps) if it predicted that label and by eps otherwise, then renormalizes.
Candidate examples are scored by the expected posterior entropy after an
imagined label, drawn by default from the vote frequencies of the models
("posterior" mode instead draws it from the predictive distribution the
noise model itself assigns to the label, which carries a guarantee the
vote measure lacks).

Scoring every unlabeled example one update at a time is O(n * m * K) python
calls per step, which is far too slow for pools in the thousands.  PoolScorer
instead precomputes, per example, the groups of models that agree on a class,
and evaluates a closed form of the post-update entropy from group sums alone.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, ModelPickError

# Max tolerated |log sum(probs)| after any normalizing op.
LOG_NORM_TOL = 1e-9

# Candidates whose expected-entropy score is within this absolute slack of
# the minimum count as tied and are broken uniformly at random.
TIE_TOL = 1e-12

CLASS_MODES = ("frequency", "posterior")


def validate_epsilon(eps: float) -> float:
    """Error rate of the label likelihood, open interval (0, 1).

    Values above 0.5 invert the update (wrong predictions gain mass); they
    are allowed for experimentation but flagged, and grid search never goes
    there.
    """
    eps = float(eps)
    if not np.isfinite(eps) or not (0.0 < eps < 1.0):
        raise ConfigError(f"epsilon must be in the open interval (0, 1), got {eps}")
    if eps > 0.5:
        warnings.warn(f"epsilon {eps} > 0.5 rewards disagreement with labels", stacklevel=2)
    return eps


def uniform_log_posterior(m: int) -> np.ndarray:
    if m < 2:
        raise ConfigError(f"posterior needs m >= 2 models, got {m}")
    return np.full(m, -np.log(m))


def normalize_log_probs(log_probs: np.ndarray) -> np.ndarray:
    log_probs = np.asarray(log_probs, dtype=np.float64)
    total = logsumexp(log_probs)
    if not np.isfinite(total):
        raise ModelPickError("posterior weights collapsed to zero mass")
    out = log_probs - total
    check = logsumexp(out)
    if abs(check) > LOG_NORM_TOL:
        raise ModelPickError(f"posterior normalization off by {check:.3e}")
    return out


def posterior_probs(log_probs: np.ndarray) -> np.ndarray:
    return np.exp(np.asarray(log_probs, dtype=np.float64))


def posterior_entropy(log_probs: np.ndarray) -> float:
    """Shannon entropy in nats; zero-probability entries contribute zero."""
    lp = np.asarray(log_probs, dtype=np.float64)
    p = np.exp(lp)
    return float(-np.sum(np.where(p > 0.0, p * lp, 0.0)))


def update_posterior(log_probs: np.ndarray, correct: np.ndarray, eps: float) -> np.ndarray:
    """One sequential belief update from a single labeled example.

    correct[j] says whether model j predicted the observed label.  Models
    that got it right gain log(1 - eps), the rest gain log(eps), and the
    result is renormalized.
    """
    correct = np.asarray(correct, dtype=bool)
    lp = np.asarray(log_probs, dtype=np.float64)
    if correct.shape != lp.shape:
        raise ModelPickError(f"correctness shape {correct.shape} != posterior shape {lp.shape}")
    return _update_many(lp[None, :], correct[None, :], eps)[0]


def _update_many(log_probs: np.ndarray, correct: np.ndarray, eps: float) -> np.ndarray:
    """Vectorized form of update_posterior over stacked states (rows)."""
    eps = validate_epsilon(eps)
    step = np.where(correct, np.log1p(-eps), np.log(eps))
    out = log_probs + step
    total = logsumexp(out, axis=1, keepdims=True)
    if not np.all(np.isfinite(total)):
        raise ModelPickError("posterior weights collapsed to zero mass")
    return out - total


def posterior_from_counts(correct_counts: np.ndarray, t: int, eps: float) -> np.ndarray:
    """Batch posterior from per-model correct counts after t labels.

    Equivalent to t sequential updates: each model's weight is
    (1 - eps)^correct * eps^(t - correct) up to normalization.
    """
    eps = validate_epsilon(eps)
    counts = np.asarray(correct_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size < 2:
        raise ModelPickError(f"counts must be a vector over >= 2 models, got shape {counts.shape}")
    if t < 0 or np.any(counts < 0) or np.any(counts > t):
        raise ModelPickError(f"correct counts must lie in [0, {t}]")
    lw = counts * np.log1p(-eps) + (t - counts) * np.log(eps)
    return normalize_log_probs(lw)


def class_distribution(
    preds_row: np.ndarray,
    num_classes: int,
    mode: str = "frequency",
    probs: np.ndarray | None = None,
) -> np.ndarray:
    """Distribution over the label of one example, induced by predictions.

    frequency: each model casts one vote.  posterior: votes are weighted by
    the current posterior mass of the model.
    """
    if mode not in CLASS_MODES:
        raise ConfigError(f"class mode must be one of {CLASS_MODES}, got {mode!r}")
    preds_row = np.asarray(preds_row)
    if mode == "frequency":
        q = np.bincount(preds_row, minlength=num_classes).astype(np.float64)
        return q / preds_row.size
    if probs is None:
        raise ModelPickError("posterior mode requires model probabilities")
    return np.bincount(preds_row, weights=probs, minlength=num_classes)


class PoolScorer:
    """Expected post-update posterior entropy for every example of a fixed pool.

    The default expectation measure ("frequency") weighs each hypothetical
    label by the share of models voting for it: one vote per model, absent
    classes carry zero weight.  It is the cheaper measure and the one the
    greedy policy runs on, but it is an approximation: once the posterior
    concentrates it can rate an example above the current entropy (observing
    a class that contradicts the leader spreads belief, and raw vote shares
    overweight that branch).

    The "posterior" measure instead uses the label predictive of the noise
    model itself: model j emits its predicted class with probability
    (1 - eps) / s and every other class with probability
    eps / s, where s = 1 + (K - 2) * eps keeps rows normalized.  Averaging
    the per-model emissions under the current posterior gives class weights

        w_c = ((1 - 2 * eps) * s_c + eps) / s

    with s_c the posterior mass of the models predicting c.  Classes nobody
    predicts leave the posterior untouched, so their total weight multiplies
    the current entropy in closed form and is never iterated.  Because this
    measure matches the update rule, conditioning never raises expected
    entropy, for any eps in (0, 1); it is the measure of choice when that
    guarantee matters more than matching the voting behavior.

    Groups of models that agree on a class are precomputed once.  Per step,
    the score of an example reduces to sums of posterior mass (and of
    p*log(p)) over its groups:

        with r = (1 - eps) / eps and s_c as above,
            Z_c = 1 + (r - 1) * s_c
            H_c = log Z_c - (r * (A_c + s_c * log r) + (A - A_c)) / Z_c
        where A = sum_j p_j log p_j and A_c restricts the sum to the group.
        The score is sum_c q_c * H_c over the example's class weights q.

    Examples where all models agree cannot move the posterior, so their
    score is pinned to the current entropy exactly, as is every score at
    eps = 0.5 (flat likelihood).
    """

    def __init__(self, preds: np.ndarray, num_classes: int):
        preds = np.asarray(preds)
        if preds.ndim != 2 or preds.shape[1] < 2:
            raise ModelPickError(f"scorer needs an (n, m>=2) prediction array, got {preds.shape}")
        n, m = preds.shape
        self.n = n
        self.m = m
        self.num_classes = num_classes

        codes = (np.arange(n, dtype=np.int64)[:, None] * num_classes + preds).ravel()
        order = np.argsort(codes, kind="stable")
        sorted_codes = codes[order]
        # Slot h in sorted order belongs to model slot_model[h] of its row.
        self.slot_model = (order % m).astype(np.int64)
        is_start = np.empty(n * m, dtype=bool)
        is_start[0] = True
        np.not_equal(sorted_codes[1:], sorted_codes[:-1], out=is_start[1:])
        self.group_starts = np.flatnonzero(is_start)
        group_codes = sorted_codes[self.group_starts]
        self.group_row = group_codes // num_classes
        group_sizes = np.diff(np.append(self.group_starts, n * m))
        # Voting share of each group under the frequency class distribution.
        self.group_freq = group_sizes / m

        row_is_start = np.empty(self.group_row.size, dtype=bool)
        row_is_start[0] = True
        np.not_equal(self.group_row[1:], self.group_row[:-1], out=row_is_start[1:])
        self.row_starts = np.flatnonzero(row_is_start)
        self.groups_per_row = np.diff(np.append(self.row_starts, self.group_row.size))
        self.unanimous_rows = np.flatnonzero(self.groups_per_row == 1)

    def expected_entropies(self, log_probs: np.ndarray, eps: float, mode: str = "frequency") -> np.ndarray:
        """Scores for all n pool rows under the current posterior."""
        eps = validate_epsilon(eps)
        if mode not in CLASS_MODES:
            raise ConfigError(f"class mode must be one of {CLASS_MODES}, got {mode!r}")
        lp = np.asarray(log_probs, dtype=np.float64)
        if lp.shape != (self.m,):
            raise ModelPickError(f"posterior shape {lp.shape} does not match m={self.m}")
        p = np.exp(lp)
        plogp = np.where(p > 0.0, p * lp, 0.0)
        a_total = float(plogp.sum())
        if eps == 0.5:
            # Flat likelihood: no observation can move the posterior.
            return np.full(self.n, -a_total)

        s = np.add.reduceat(p[self.slot_model], self.group_starts)
        a = np.add.reduceat(plogp[self.slot_model], self.group_starts)

        r = (1.0 - eps) / eps
        log_r = np.log(r)
        z = 1.0 + (r - 1.0) * s
        h = np.log(z) - (r * (a + s * log_r) + (a_total - a)) / z

        if mode == "frequency":
            scores = np.add.reduceat(self.group_freq * h, self.row_starts)
        else:
            norm = 1.0 + (self.num_classes - 2.0) * eps
            w = ((1.0 - 2.0 * eps) * s + eps) / norm
            scores = np.add.reduceat(w * h, self.row_starts)
            # Classes nobody predicts keep the posterior as-is.
            absent = self.num_classes - self.groups_per_row
            scores += absent * (eps / norm) * -a_total
        if self.unanimous_rows.size:
            scores[self.unanimous_rows] = -a_total
        return scores


def expected_posterior_entropy(
    preds_row: np.ndarray,
    log_probs: np.ndarray,
    eps: float,
    mode: str = "frequency",
    num_classes: int | None = None,
) -> float:
    """Score for a single candidate row; same arithmetic as PoolScorer.

    num_classes matters in posterior mode (absent classes carry predictive
    weight); when omitted it is inferred from the row itself.
    """
    preds_row = np.asarray(preds_row)
    if num_classes is None:
        num_classes = int(preds_row.max()) + 1
    scorer = PoolScorer(preds_row[None, :], num_classes)
    return float(scorer.expected_entropies(log_probs, eps, mode=mode)[0])
