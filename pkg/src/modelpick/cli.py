"""Command-line entry points: tune, run, synth, serve, report.

Every command reads a single JSON config file; flags override config keys
one for one.  Outputs embed the config hash and master seed so a run can
be reproduced from its artifacts alone.

Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data
from . import evaluation as ev
from . import policies as pol
from . import synth
from . import tuning
from .errors import ConfigError, DataError, ModelPickError


def _load_json(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"missing config file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _require_file(path: str, what: str) -> str:
    if not path:
        raise ConfigError(f"config key {what!r} is required")
    if not os.path.exists(path):
        raise ConfigError(f"missing {what} file: {path}")
    return path


def _resolve(base_dir: str, path) -> str:
    # paths in a config file resolve relative to the file itself
    if path is None:
        return ""
    path = os.fspath(path)
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


_POLICY_KEYS = ("name", "epsilon", "class_mode", "margin_direction", "display_epsilon")


def policy_from_dict(d: dict) -> pol.PolicySpec:
    if not isinstance(d, dict) or "name" not in d:
        raise ConfigError(f"policy entries need at least a 'name', got {d!r}")
    unknown = set(d) - set(_POLICY_KEYS)
    if unknown:
        raise ConfigError(f"unknown policy keys {sorted(unknown)}")
    return pol.PolicySpec(**d)


_EXPERIMENT_KEYS = (
    "policies",
    "realizations",
    "pool_size",
    "max_budget",
    "budgets_to_report",
    "percentile_q",
    "deltas",
    "master_seed",
    "workers",
)


def experiment_from_dict(d: dict, args: argparse.Namespace) -> ev.ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config key 'experiment' must be an object")
    unknown = set(d) - set(_EXPERIMENT_KEYS)
    if unknown:
        raise ConfigError(f"unknown experiment keys {sorted(unknown)}")
    d = dict(d)
    d["policies"] = [policy_from_dict(p) for p in d.get("policies", [])]
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.workers is not None:
        d["workers"] = args.workers
    elif "workers" not in d:
        d["workers"] = os.cpu_count() or 1
    try:
        return ev.ExperimentConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc


def noisy_from_dict(d: dict | None) -> tuning.NoisyOracleConfig:
    d = d or {}
    unknown = set(d) - {"mode", "auto_threshold", "seed"}
    if unknown:
        raise ConfigError(f"unknown noisy_oracle keys {sorted(unknown)}")
    return tuning.NoisyOracleConfig(**d)


def _out_dir(args: argparse.Namespace, cfg: dict) -> str:
    out = args.out or cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ev.canonical_json(payload))
        fh.write("\n")


def _write_curve_csv(path: str, budgets: list[int], curves: dict[str, list[float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("budget,policy,value\n")
        for label in sorted(curves):
            for b, v in zip(budgets, curves[label]):
                fh.write(f"{b},{label},{v!r}\n")


def cmd_tune(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    matrix = data.load_predictions(
        _require_file(_resolve(base, cfg.get("predictions")), "predictions")
    )
    eval_cfg = experiment_from_dict(cfg.get("experiment", {}), args)
    noisy_cfg = noisy_from_dict(cfg.get("noisy_oracle"))
    report = tuning.tune_epsilon(matrix, eval_cfg, noisy_cfg, grid=cfg.get("grid"))
    out = _out_dir(args, cfg)
    path = os.path.join(out, "tuning_report.json")
    _write_json(path, report.to_dict())
    print(f"chosen_epsilon={report.chosen_epsilon}")
    print(f"label_mode={report.label_mode}")
    print(f"master_seed={eval_cfg.master_seed}")
    print(f"config_hash={report.config_hash}")
    print(f"wrote {path}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    matrix = data.load_predictions(
        _require_file(_resolve(base, cfg.get("predictions")), "predictions")
    )
    labels = data.load_labels(
        _require_file(_resolve(base, cfg.get("labels")), "labels"), matrix
    )
    eval_cfg = experiment_from_dict(cfg.get("experiment", {}), args)
    report = ev.run_experiment(matrix, labels, eval_cfg)
    out = _out_dir(args, cfg)
    path = os.path.join(out, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    _write_curve_csv(os.path.join(out, "identification.csv"), report.budgets, report.identification)
    _write_curve_csv(os.path.join(out, "gap_percentile.csv"), report.budgets, report.gap_percentile)
    with open(os.path.join(out, "label_efficiency.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("policy,delta,budget\n")
        for label in sorted(report.efficiency):
            for delta, budget in sorted(report.efficiency[label].items()):
                fh.write(f"{label},{delta},{'' if budget is None else budget}\n")
    print(f"master_seed={eval_cfg.master_seed}")
    print(f"config_hash={report.config_hash}")
    print(f"wrote {path}")
    return 0


_SYNTH_KEYS = ("n", "num_models", "num_classes", "accuracy_targets", "correlation", "model_names")


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    unknown = set(cfg) - set(_SYNTH_KEYS) - {"seed", "out"}
    if unknown:
        raise ConfigError(f"unknown synth keys {sorted(unknown)}")
    targets = cfg.get("accuracy_targets")
    if targets is None:
        raise ConfigError("config key 'accuracy_targets' is required")
    if "num_models" in cfg and len(targets) != cfg["num_models"]:
        raise ConfigError(
            f"num_models={cfg['num_models']} disagrees with {len(targets)} accuracy targets"
        )
    try:
        spec = synth.SyntheticSpec(
            n=cfg.get("n", 0),
            m=len(targets),
            num_classes=cfg.get("num_classes", 0),
            accuracy_targets=list(targets),
            correlation=cfg.get("correlation", 0.0),
            model_names=cfg.get("model_names"),
        )
    except TypeError as exc:
        raise ConfigError(f"bad synth config: {exc}") from exc
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    matrix, labels = synth.generate(spec, seed=seed)
    out = _out_dir(args, cfg)
    preds_path = os.path.join(out, "predictions.csv")
    labels_path = os.path.join(out, "labels.csv")
    data.write_predictions(preds_path, matrix)
    data.write_labels(labels_path, matrix, labels)
    meta = {
        "n": spec.n,
        "num_models": spec.m,
        "num_classes": spec.num_classes,
        "accuracy_targets": list(spec.accuracy_targets),
        "correlation": spec.correlation,
        "model_names": list(spec.model_names),
        "seed": seed,
    }
    meta["config_hash"] = ev.config_hash(meta)
    _write_json(os.path.join(out, "synth_meta.json"), meta)
    print(f"seed={seed}")
    print(f"config_hash={meta['config_hash']}")
    print(f"wrote {preds_path} and {labels_path}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    # imported lazily so data-only workflows never pay the web stack import
    import uvicorn

    from . import service

    cfg = _load_json(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    svc_cfg = service.load_service_config(cfg, base_dir=base, out_override=args.out)
    app = service.create_app(svc_cfg)
    host = args.host or cfg.get("host", "127.0.0.1")
    port = args.port if args.port is not None else int(cfg.get("port", 8000))
    print(f"serving {sorted(svc_cfg.collections)} on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def _replay_transcript(args: argparse.Namespace) -> int:
    if not os.path.exists(args.replay):
        raise ConfigError(f"missing transcript file: {args.replay}")
    with open(args.replay, encoding="utf-8") as fh:
        transcript = json.load(fh)
    matrix = data.load_predictions(_require_file(args.predictions, "predictions"))
    names = transcript.get("model_names")
    if names is not None and list(names) != list(matrix.model_names):
        raise DataError("transcript model names do not match the prediction file")
    spec = policy_from_dict(transcript.get("policy", {}))
    state = pol.init_state(matrix, spec, int(transcript.get("seed", 0)))
    for step in transcript.get("steps", []):
        pol.record_label(state, int(step["example_index"]), int(step["label"]))
    fs = pol.final_selection(state)
    replayed = {
        "model_index": fs.model_index,
        "model_name": fs.model_name,
        "labeled_accuracy": fs.labeled_accuracy,
        "posterior_mass": fs.posterior_mass,
        "posterior": [float(v) for v in fs.posterior],
        "correct_counts": [int(v) for v in fs.correct_counts],
    }
    print(json.dumps(replayed, indent=2, sort_keys=True))
    recorded = transcript.get("final_selection")
    if recorded is not None:
        same = recorded.get("model_index") == replayed["model_index"] and np.allclose(
            recorded.get("posterior", []), replayed["posterior"]
        )
        print(f"replay_matches_recorded={same}")
        if not same:
            raise ModelPickError("replayed selection differs from the recorded one")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.replay:
        return _replay_transcript(args)
    if not args.report:
        raise ConfigError("report needs --report <report.json> or --replay <transcript.json>")
    if not os.path.exists(args.report):
        raise ConfigError(f"missing report file: {args.report}")
    with open(args.report, encoding="utf-8") as fh:
        report = ev.ExperimentReport.from_dict(json.load(fh))
    print(f"config_hash={report.config_hash}")
    print(f"master_seed={report.config.get('master_seed')}")
    final_b = report.budgets[-1]
    print(f"{'policy':<28} {'ident@' + str(final_b):>12} {'B(delta)':>20}")
    for label in report.policy_labels:
        ident = report.identification[label][-1]
        eff = ", ".join(
            f"{d}:{'-' if b is None else b}" for d, b in sorted(report.efficiency[label].items())
        )
        print(f"{label:<28} {ident:>12.4f} {eff:>20}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelpick",
        description="Label-efficient model selection: tune, evaluate, generate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--workers", type=int, help="worker processes (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.set_defaults(func=func)
        return p

    for name, func, help_text in (
        ("tune", cmd_tune, "grid-search the update error rate without true labels"),
        ("run", cmd_run, "run policies over pool realizations and write metric curves"),
        ("synth", cmd_synth, "generate a synthetic prediction collection"),
    ):
        add(name, func, help_text)

    p_serve = add("serve", cmd_serve, "start the labeling session service")
    p_serve.add_argument("--host", help="bind address")
    p_serve.add_argument("--port", type=int, help="bind port")

    p_report = add("report", cmd_report, "summarize a report or replay a session transcript")
    p_report.add_argument("--report", help="report.json produced by 'run'")
    p_report.add_argument("--replay", help="session transcript JSON to replay offline")
    p_report.add_argument("--predictions", help="prediction CSV the transcript refers to")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("tune", "run", "synth", "serve") and not args.config:
        print("config error: --config is required", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ModelPickError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
