"""Evaluation protocol: repeated pool realizations and summary metrics.

Each realization samples a fixed-size pool (without replacement) from the
source collection, runs every configured policy to the maximum budget while
answering queries from the ground-truth labels, and records at each reported
budget whether the currently selected model belongs to the true best set and
how far its pool accuracy falls short of the best one.

Reported metrics per policy:
  identification probability  fraction of realizations selecting a best model
  gap percentile              nearest-rank percentile of the accuracy gap
  label efficiency            smallest reported budget from which every
                              realization stays within delta for the rest of
                              the run
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import policies as pol
from .data import LabelVector, PredictionMatrix
from .errors import ConfigError


@dataclass
class ExperimentConfig:
    policies: list[pol.PolicySpec]
    realizations: int
    pool_size: int
    max_budget: int
    budgets_to_report: list[int] | None = None
    percentile_q: float = 95.0
    deltas: list[float] = field(default_factory=lambda: [0.0])
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.policies:
            raise ConfigError("at least one policy is required")
        labels = [s.label() for s in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policy labels must be distinct, got {labels}")
        if self.realizations < 1:
            raise ConfigError(f"realizations must be >= 1, got {self.realizations}")
        if self.pool_size < 1:
            raise ConfigError(f"pool_size must be >= 1, got {self.pool_size}")
        if not (1 <= self.max_budget <= self.pool_size):
            raise ConfigError(
                f"max_budget must lie in [1, pool_size={self.pool_size}], got {self.max_budget}"
            )
        if self.budgets_to_report is not None:
            bs = list(self.budgets_to_report)
            if not bs or bs != sorted(set(bs)):
                raise ConfigError("budgets_to_report must be strictly increasing and non-empty")
            if bs[0] < 1 or bs[-1] > self.max_budget:
                raise ConfigError(
                    f"reported budgets must lie in [1, {self.max_budget}], got {bs[0]}..{bs[-1]}"
                )
            self.budgets_to_report = bs
        if not (0.0 < self.percentile_q <= 100.0):
            raise ConfigError(f"percentile_q must be in (0, 100], got {self.percentile_q}")
        for d in self.deltas:
            if d < 0.0:
                raise ConfigError(f"delta must be >= 0, got {d}")
        if self.workers < 0:
            raise ConfigError(f"workers must be >= 0, got {self.workers}")

    def report_budgets(self) -> list[int]:
        if self.budgets_to_report is None:
            return list(range(1, self.max_budget + 1))
        return list(self.budgets_to_report)


def policy_spec_to_dict(spec: pol.PolicySpec) -> dict:
    d = {
        "name": spec.name,
        "class_mode": spec.class_mode,
        "margin_direction": spec.margin_direction,
        "display_epsilon": spec.display_epsilon,
    }
    if spec.epsilon is not None:
        d["epsilon"] = spec.epsilon
    return d


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "policies": [policy_spec_to_dict(s) for s in cfg.policies],
        "realizations": cfg.realizations,
        "pool_size": cfg.pool_size,
        "max_budget": cfg.max_budget,
        "budgets_to_report": cfg.report_budgets(),
        "percentile_q": cfg.percentile_q,
        "deltas": list(cfg.deltas),
        "master_seed": cfg.master_seed,
    }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def pool_seed(master_seed: int, realization: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(realization, 0))


def policy_seed(master_seed: int, realization: int) -> np.random.SeedSequence:
    # One query stream per realization, shared by all policies, so that two
    # policies making identical choices also consume identical randomness.
    return np.random.SeedSequence(master_seed, spawn_key=(realization, 1))


def sample_pool(matrix: PredictionMatrix, pool_size: int, seed) -> np.ndarray:
    """Uniform sample of pool_size distinct row indices, deterministic in seed."""
    if pool_size > matrix.n:
        raise ConfigError(f"pool_size {pool_size} exceeds collection size {matrix.n}")
    rng = np.random.default_rng(seed)
    return rng.choice(matrix.n, size=pool_size, replace=False)


@dataclass
class RealizationResult:
    """Outcome of one protocol repetition: pool, truth, per-policy selections."""

    realization_id: int
    pool_rows: np.ndarray
    true_best_set: np.ndarray
    selected: np.ndarray  # (policies, reported budgets) model indices
    success: np.ndarray  # (policies, reported budgets) 0/1
    gaps: np.ndarray  # (policies, reported budgets) accuracy gaps


def run_realization(
    matrix: PredictionMatrix,
    labels: LabelVector,
    cfg: ExperimentConfig,
    rid: int,
) -> RealizationResult:
    """Sample one pool and run every policy over it to the budget.

    True best and accuracy gaps are measured against the sampled pool's own
    full labeling; success means the selected model ties the best pool
    count exactly, which is the same event as a zero gap.
    """
    budgets = cfg.report_budgets()
    rows = sample_pool(matrix, cfg.pool_size, pool_seed(cfg.master_seed, rid))
    pool = matrix.subset(rows)
    pool_labels = labels.labels[rows]

    pool_counts = (pool.preds == pool_labels[:, None]).sum(axis=0)
    best_count = pool_counts.max()
    pool_acc = pool_counts / cfg.pool_size
    best_acc = best_count / cfg.pool_size

    n_pol = len(cfg.policies)
    selected = np.zeros((n_pol, len(budgets)), dtype=np.int64)
    succ = np.zeros((n_pol, len(budgets)), dtype=np.uint8)
    gaps = np.zeros((n_pol, len(budgets)), dtype=np.float64)
    for pi, spec in enumerate(cfg.policies):
        state = pol.init_state(pool, spec, policy_seed(cfg.master_seed, rid))
        bi = 0
        for t in range(1, cfg.max_budget + 1):
            idx = pol.next_query(state)
            pol.record_label(state, idx, int(pool_labels[idx]))
            if bi < len(budgets) and budgets[bi] == t:
                fs = pol.final_selection(state)
                selected[pi, bi] = fs.model_index
                succ[pi, bi] = pool_counts[fs.model_index] == best_count
                gaps[pi, bi] = best_acc - pool_acc[fs.model_index]
                bi += 1
    return RealizationResult(
        realization_id=rid,
        pool_rows=rows,
        true_best_set=np.flatnonzero(pool_counts == best_count),
        selected=selected,
        success=succ,
        gaps=gaps,
    )


def _run_batch(args) -> tuple[np.ndarray, np.ndarray]:
    matrix, labels, cfg, rids, budgets = args
    succ = np.zeros((len(rids), len(cfg.policies), len(budgets)), dtype=np.uint8)
    gaps = np.zeros((len(rids), len(cfg.policies), len(budgets)), dtype=np.float64)
    for k, rid in enumerate(rids):
        res = run_realization(matrix, labels, cfg, rid)
        succ[k], gaps[k] = res.success, res.gaps
    return succ, gaps


def run_trajectories(
    matrix: PredictionMatrix,
    labels: LabelVector,
    cfg: ExperimentConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw per-realization outcomes, shapes (R, policies, reported budgets).

    Results are ordered by realization id and do not depend on the worker
    count, only on the config and master seed.
    """
    if labels.n != matrix.n:
        raise ConfigError(f"label count {labels.n} does not match pool size {matrix.n}")
    if cfg.pool_size > matrix.n:
        raise ConfigError(f"pool_size {cfg.pool_size} exceeds collection size {matrix.n}")
    budgets = cfg.report_budgets()
    rids = list(range(cfg.realizations))
    workers = cfg.workers if cfg.workers > 0 else 1

    if workers == 1 or cfg.realizations == 1:
        succ, gaps = _run_batch((matrix, labels, cfg, rids, budgets))
        return succ, gaps

    chunks = [list(c) for c in np.array_split(rids, min(workers, len(rids))) if len(c)]
    tasks = [(matrix, labels, cfg, chunk, budgets) for chunk in chunks]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool_exec:
        parts = list(pool_exec.map(_run_batch, tasks))
    succ = np.concatenate([p[0] for p in parts], axis=0)
    gaps = np.concatenate([p[1] for p in parts], axis=0)
    return succ, gaps


def identification_curve(success: np.ndarray) -> np.ndarray:
    """Mean success over realizations; input shape (R, B)."""
    return success.mean(axis=0)


def percentile_gap_curve(gaps: np.ndarray, q: float) -> np.ndarray:
    """Nearest-rank percentile of the gap per budget; input shape (R, B)."""
    if not (0.0 < q <= 100.0):
        raise ConfigError(f"percentile must be in (0, 100], got {q}")
    r = gaps.shape[0]
    rank = int(np.ceil(q / 100.0 * r))
    rank = max(rank, 1)
    ordered = np.sort(gaps, axis=0)
    return ordered[rank - 1]


def label_efficiency(gaps: np.ndarray, budgets: list[int], delta: float) -> int | None:
    """Smallest reported budget after which every realization stays within delta.

    Returns None when even the largest reported budget still shows an
    excursion beyond delta in some realization.
    """
    ok = np.all(gaps <= delta, axis=0)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return int(budgets[0])
    first = int(bad[-1]) + 1
    if first >= len(budgets):
        return None
    return int(budgets[first])


def reduction_percent(b_policy: int | None, b_reference: int | None) -> float | None:
    """Relative label saving of a policy against a reference, in percent."""
    if b_policy is None or b_reference is None:
        return None
    return 100.0 * (b_reference - b_policy) / b_reference


@dataclass
class ExperimentReport:
    config: dict
    config_hash: str
    budgets: list[int]
    policy_labels: list[str]
    identification: dict[str, list[float]]
    gap_percentile: dict[str, list[float]]
    efficiency: dict[str, dict[str, int | None]]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "config_hash": self.config_hash,
            "budgets": self.budgets,
            "policy_labels": self.policy_labels,
            "identification": self.identification,
            "gap_percentile": self.gap_percentile,
            "label_efficiency": self.efficiency,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @staticmethod
    def from_dict(d: dict) -> "ExperimentReport":
        return ExperimentReport(
            config=d["config"],
            config_hash=d["config_hash"],
            budgets=list(d["budgets"]),
            policy_labels=list(d["policy_labels"]),
            identification=d["identification"],
            gap_percentile=d["gap_percentile"],
            efficiency=d["label_efficiency"],
        )


def run_experiment(
    matrix: PredictionMatrix,
    labels: LabelVector,
    cfg: ExperimentConfig,
) -> ExperimentReport:
    succ, gaps = run_trajectories(matrix, labels, cfg)
    budgets = cfg.report_budgets()
    cfg_dict = config_to_dict(cfg)

    ident: dict[str, list[float]] = {}
    gap_pct: dict[str, list[float]] = {}
    eff: dict[str, dict[str, int | None]] = {}
    for pi, spec in enumerate(cfg.policies):
        label = spec.label()
        ident[label] = [float(v) for v in identification_curve(succ[:, pi, :])]
        gap_pct[label] = [float(v) for v in percentile_gap_curve(gaps[:, pi, :], cfg.percentile_q)]
        eff[label] = {
            repr(float(d)): label_efficiency(gaps[:, pi, :], budgets, d) for d in cfg.deltas
        }
    return ExperimentReport(
        config=cfg_dict,
        config_hash=config_hash(cfg_dict),
        budgets=budgets,
        policy_labels=[s.label() for s in cfg.policies],
        identification=ident,
        gap_percentile=gap_pct,
        efficiency=eff,
    )
