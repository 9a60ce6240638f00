"""Command-line benchmark harness.

Subcommands: ``run`` (one optimizer over seeds), ``compare`` (several
optimizers, plus a comparison CSV), ``train`` (REINFORCE on the MLP eviction
policy), ``evaluate`` (learned checkpoint vs FIFO on held-out tasks).

Settings resolve in precedence order: explicit flags > --config JSON file >
--preset defaults > built-in defaults.  The config file holds a flat JSON
object whose keys mirror the long flag names with underscores (for example
{"objective": "quadratic", "seeds": "0:50", "iters": 60, "orth": "on"}).
The dataset directory for IDX files comes from --data-dir or the
SUBSPACEOPT_DATA environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    PRESETS,
    ExperimentSpec,
    classifier_spec_from_data,
    evaluate_policy,
    run_comparison,
    run_suite,
)
from .engine import EngineConfig
from .training import TaskDistribution, TrainConfig, train

__all__ = ["main"]


def _parse_seeds(text) -> list[int]:
    if isinstance(text, list):
        return [int(s) for s in text]
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(s) for s in text.split(",") if s != ""]


def _parse_onoff(value, flag: str) -> bool:
    if isinstance(value, bool):
        return value
    if value in ("on", "true", "1"):
        return True
    if value in ("off", "false", "0"):
        return False
    raise SystemExit(f"{flag} expects on|off, got {value!r}")


def _effective(args: argparse.Namespace, command: str, defaults: dict) -> dict:
    """Merge default < preset < config-file < explicit-flag settings."""
    merged = dict(defaults)
    preset_name = getattr(args, "preset", None)
    if preset_name:
        if preset_name not in PRESETS:
            raise SystemExit(
                f"unknown preset {preset_name!r}; available: {', '.join(sorted(PRESETS))}"
            )
        preset = dict(PRESETS[preset_name])
        if preset.pop("command") != command:
            raise SystemExit(f"preset {preset_name!r} belongs to another subcommand")
        merged.update(preset)
    config_path = getattr(args, "config", None)
    if config_path:
        merged.update(json.loads(Path(config_path).read_text()))
    for key, value in vars(args).items():
        if key in ("command", "preset", "config") or value is None:
            continue
        merged[key] = value
    return merged


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
    p.add_argument("--config", help="JSON file with flag values")
    p.add_argument("--objective", dest="family",
                   help="quadratic | rosenbrock | robust-regression | classifier")
    p.add_argument("--d", type=int, dest="d", help="subspace dimension")
    p.add_argument("--h", type=int, dest="h", help="step-size history depth")
    p.add_argument("--dim", type=int, help="problem dimension")
    p.add_argument("--cond", type=float, dest="condition_number",
                   help="quadratic condition number")
    p.add_argument("--data-dir", dest="data_dir", help="IDX dataset directory")
    p.add_argument("--out", help="output directory")


def _add_suite_flags(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--seeds", help="range lo:hi or comma list")
    p.add_argument("--iters", type=int, help="outer iteration budget")
    p.add_argument("--orth", help="extra anchor/weighted-gradient directions: on|off")
    p.add_argument("--normalize", help="unit-normalize subspace columns: on|off")
    p.add_argument("--checkpoint", help="policy checkpoint for learned optimizers")


_SUITE_DEFAULTS = {
    "family": "quadratic",
    "seeds": "0:10",
    "iters": 100,
    "d": 10,
    "h": 5,
    "orth": "on",
    "normalize": "on",
    "dim": 100,
    "condition_number": 1e3,
    "out": "bench_out",
    "data_dir": None,
    "checkpoint": None,
    "digits": (0, 1, 2, 3, 4),
    "n_images": 1000,
    "hidden_units": 10,
    "batch_size": 256,
}


def _build_spec(settings: dict, optimizer: str) -> ExperimentSpec:
    family = settings["family"]
    classifier_spec = None
    if family == "classifier":
        classifier_spec = classifier_spec_from_data(
            tuple(settings["digits"]),
            settings["n_images"],
            settings["hidden_units"],
            settings["batch_size"],
            data_dir=settings.get("data_dir"),
        )
    optimizer_id = optimizer
    if optimizer in ("learned", "learned-greedy") and settings.get("checkpoint"):
        optimizer_id = f"{optimizer}:{settings['checkpoint']}"
    return ExperimentSpec(
        family=family,
        optimizer=optimizer_id,
        seeds=tuple(_parse_seeds(settings["seeds"])),
        iters=int(settings["iters"]),
        d=int(settings["d"]),
        h=int(settings["h"]),
        use_orth=_parse_onoff(settings["orth"], "--orth"),
        normalize=_parse_onoff(settings["normalize"], "--normalize"),
        dim=int(settings["dim"]),
        condition_number=float(settings["condition_number"]),
        classifier_spec=classifier_spec,
    )


def _cmd_run(args) -> int:
    settings = _effective(args, "run", {**_SUITE_DEFAULTS, "optimizer": "fifo"})
    spec = _build_spec(settings, settings["optimizer"])
    run_suite(spec, settings["out"])
    print(f"wrote traces for {spec.optimizer} to {settings['out']}")
    return 0


def _cmd_compare(args) -> int:
    settings = _effective(args, "compare", {**_SUITE_DEFAULTS, "optimizers": ["fifo", "rb"]})
    optimizers = settings["optimizers"]
    if isinstance(optimizers, str):
        optimizers = [o for o in optimizers.split(",") if o]
    specs = [_build_spec(settings, opt) for opt in optimizers]
    run_comparison(specs, settings["out"])
    print(f"wrote comparison for {', '.join(optimizers)} to {settings['out']}")
    return 0


_TRAIN_DEFAULTS = {
    "family": "robust-regression",
    "episodes": 200,
    "steps": 100,
    "batch": 1,
    "lr": 5e-3,
    "gamma": 1.0,
    "ema_decay": 0.95,
    "seed": 0,
    "n_train_tasks": 10,
    "d": 10,
    "h": 5,
    "dim": 100,
    "condition_number": 1e3,
    "out": "train_out",
    "data_dir": None,
    "digits": (0, 1),
    "n_images": 1000,
    "hidden_units": 10,
    "batch_size": 256,
    "epochs": None,
    "resume": None,
    "checkpoint_every": 0,
}


def _cmd_train(args) -> int:
    settings = _effective(args, "train", _TRAIN_DEFAULTS)
    family = settings["family"]
    classifier_spec = None
    steps = int(settings["steps"])
    if family == "classifier":
        classifier_spec = classifier_spec_from_data(
            tuple(settings["digits"]),
            settings["n_images"],
            settings["hidden_units"],
            settings["batch_size"],
            data_dir=settings.get("data_dir"),
        )
        if settings.get("epochs"):
            batches = -(-int(settings["n_images"]) // int(settings["batch_size"]))
            steps = int(settings["epochs"]) * batches
    task_dist = TaskDistribution(
        family=family,
        seed=int(settings.get("family_seed", 0)),
        dim=int(settings["dim"]),
        condition_number=float(settings["condition_number"]),
        classifier_spec=classifier_spec,
    )
    cfg = TrainConfig(
        episodes=int(settings["episodes"]),
        steps_per_episode=steps,
        batch_size=int(settings["batch"]),
        gamma=float(settings["gamma"]),
        lr=float(settings["lr"]),
        ema_decay=float(settings["ema_decay"]),
        seed=int(settings["seed"]),
        checkpoint_every=int(settings["checkpoint_every"]),
    )
    engine_cfg = EngineConfig(d=int(settings["d"]), h=int(settings["h"]))
    result = train(
        task_dist,
        cfg,
        engine_cfg=engine_cfg,
        n_train_tasks=int(settings["n_train_tasks"]),
        out_dir=settings["out"],
        resume_from=settings.get("resume"),
    )
    last = result.curve[-1] if result.curve else {}
    print(
        f"trained {cfg.episodes} episodes; final mean_return "
        f"{last.get('mean_return', float('nan')):.6g}; policy saved under {settings['out']}"
    )
    return 0


_EVAL_DEFAULTS = {
    "family": "robust-regression",
    "n_tasks": 100,
    "budget": 100,
    "seed": 0,
    "task_offset": 0,
    "d": 10,
    "h": 5,
    "dim": 100,
    "condition_number": 1e3,
    "out": "eval_out",
    "data_dir": None,
    "checkpoint": None,
    "digits": (0, 1),
    "n_images": 1000,
    "hidden_units": 10,
    "batch_size": 256,
}


def _cmd_evaluate(args) -> int:
    settings = _effective(args, "evaluate", _EVAL_DEFAULTS)
    if not settings.get("checkpoint"):
        raise SystemExit("evaluate needs --checkpoint")
    classifier_spec = None
    if settings["family"] == "classifier":
        classifier_spec = classifier_spec_from_data(
            tuple(settings["digits"]),
            settings["n_images"],
            settings["hidden_units"],
            settings["batch_size"],
            data_dir=settings.get("data_dir"),
        )
    task_dist = TaskDistribution(
        family=settings["family"],
        seed=int(settings.get("family_seed", 0)),
        dim=int(settings["dim"]),
        condition_number=float(settings["condition_number"]),
        classifier_spec=classifier_spec,
    )
    rows = evaluate_policy(
        settings["checkpoint"],
        task_dist,
        n_tasks=int(settings["n_tasks"]),
        budget=int(settings["budget"]),
        engine_cfg=EngineConfig(d=int(settings["d"]), h=int(settings["h"])),
        out_dir=settings["out"],
        seed=int(settings["seed"]),
        task_offset=int(settings["task_offset"]),
    )
    import numpy as np

    mean_learned = np.mean([r["final_f_learned"] for r in rows])
    mean_fifo = np.mean([r["final_f_fifo"] for r in rows])
    print(
        f"evaluated {len(rows)} tasks: mean final f learned={mean_learned:.6g} "
        f"fifo={mean_fifo:.6g}; summary under {settings['out']}"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="subspaceopt",
        description="subspace optimization benchmarks, policy training, and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one optimizer over a seed sweep")
    _add_suite_flags(p_run)
    p_run.add_argument("--optimizer", help="fifo | rb | delta-<i> | learned:<ckpt> | "
                                           "learned-greedy:<ckpt> | cg | orth-only | gd | adam")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="several optimizers plus a comparison CSV")
    _add_suite_flags(p_cmp)
    p_cmp.add_argument("--optimizers", help="comma-separated optimizer ids")
    p_cmp.set_defaults(func=_cmd_compare)

    p_train = sub.add_parser("train", help="REINFORCE training of the MLP policy")
    _add_common(p_train)
    p_train.add_argument("--episodes", type=int)
    p_train.add_argument("--steps", type=int, help="outer iterations per episode")
    p_train.add_argument("--batch", type=int, help="trajectories per update")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--gamma", type=float)
    p_train.add_argument("--ema-decay", dest="ema_decay", type=float)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--n-train-tasks", dest="n_train_tasks", type=int)
    p_train.add_argument("--epochs", type=int, help="classifier: epochs per episode")
    p_train.add_argument("--resume", help="trainer state .npz to resume from")
    p_train.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("evaluate", help="learned checkpoint vs FIFO on held-out tasks")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint")
    p_eval.add_argument("--n-tasks", dest="n_tasks", type=int)
    p_eval.add_argument("--budget", type=int)
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--task-offset", dest="task_offset", type=int)
    p_eval.set_defaults(func=_cmd_evaluate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
