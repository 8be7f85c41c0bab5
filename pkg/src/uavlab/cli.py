"""Command line entry points.

Subcommands: ``map`` (build and save a radio map), ``train`` (one training
run), ``transfer`` (transfer-vs-scratch study), ``compare`` (DQN vs DDQN),
``eval`` (greedy rollouts of saved weights). Results land in ``--out``;
a one-object JSON summary goes to stdout. Failures print a JSON error to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Dict, List, Optional

from .agent import Hyperparams, scratch_hyperparams, train, transfer_hyperparams
from .cityworld import PROFILES, RewardConstants, UavEnv, generate_city, \
    make_env, mission_spec
from .harness import (evaluate_policy, run_algo_comparison, run_transfer_study,
                      save_run)
from .neural import load_weights
from .radiomap import PropagationParams, build_radio_map, save_radio_map


def _parse_seeds(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}: {exc}")


def _load_config(path: Optional[str]) -> Dict[str, dict]:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must be a JSON object")
    allowed = {"propagation", "hyperparams", "rewards"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"config {path} has unknown sections {sorted(unknown)}; "
                         f"expected a subset of {sorted(allowed)}")
    return doc


def _propagation(cfg: Dict[str, dict]) -> PropagationParams:
    return dataclasses.replace(PropagationParams(), **cfg.get("propagation", {}))


def _hyperparams(base: Hyperparams, cfg: Dict[str, dict]) -> Hyperparams:
    return dataclasses.replace(base, **cfg.get("hyperparams", {}))


def _rewards(cfg: Dict[str, dict]) -> RewardConstants:
    return dataclasses.replace(RewardConstants(), **cfg.get("rewards", {}))


def _build_env(args, cfg: Dict[str, dict], env_id: Optional[str] = None,
               emergency: Optional[bool] = None) -> UavEnv:
    env = make_env(env_id or args.env, args.profile,
                   emergency=bool(getattr(args, "emergency", False)
                                  if emergency is None else emergency),
                   params=_propagation(cfg))
    if "rewards" in cfg:
        env = UavEnv(env.city, env.mission, env.rmap, rewards=_rewards(cfg),
                     name=env.name)
    return env


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_map(args) -> int:
    cfg = _load_config(args.config)
    params = _propagation(cfg)
    city = generate_city(args.env, args.profile)
    mission = mission_spec(args.env, args.profile)
    cell = args.cell_size or PROFILES[args.profile].cell_size
    rmap = build_radio_map(city, params, altitude=mission.uav_altitude,
                           cell_size=cell)
    save_radio_map(rmap, args.out)
    _emit({"env": city.name, "cells": list(rmap.dims), "cell_size": cell,
           "altitude": rmap.altitude, "outage_fraction": rmap.outage_fraction(),
           "out": args.out})
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    env = _build_env(args, cfg)
    base = (transfer_hyperparams(args.profile, args.algo) if args.mode == "transfer"
            else scratch_hyperparams(args.profile, args.algo))
    hp = _hyperparams(base, cfg)
    initial = None
    if args.mode == "transfer":
        if not args.weights:
            raise ValueError("--mode transfer requires --weights with the source "
                             "network")
        initial = load_weights(args.weights)
    result = train(env, hp, seed=args.seed, initial_net=initial)
    paths = save_run(result, args.out, include_timing=not args.deterministic)
    _emit({"env": env.name, "algo": hp.algo, "mode": args.mode, "seed": args.seed,
           "episodes_run": result.episodes_run,
           "converged_at": result.converged_at, "artifacts": paths})
    return 0


def cmd_transfer(args) -> int:
    cfg = _load_config(args.config)
    source = _build_env(args, cfg, env_id=args.source, emergency=False)
    target = _build_env(args, cfg, env_id=args.target,
                        emergency=args.emergency)
    report, runs = run_transfer_study(source, target, args.seeds, algo=args.algo,
                                      profile=args.profile,
                                      hp_overrides=cfg.get("hyperparams"))
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "transfer_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for arm, by_seed in runs.items():
        for seed, res in by_seed.items():
            save_run(res, os.path.join(args.out, f"{arm}-seed{seed}"),
                     include_timing=not args.deterministic)
    _emit({**report.to_dict(), "report": report_path})
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    env = _build_env(args, cfg)
    report, runs = run_algo_comparison(env, args.seeds, profile=args.profile,
                                       hp_overrides=cfg.get("hyperparams"))
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "algo_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for algo, by_seed in runs.items():
        for seed, res in by_seed.items():
            save_run(res, os.path.join(args.out, f"{algo}-seed{seed}"),
                     include_timing=not args.deterministic)
    _emit({**report.to_dict(), "report": report_path})
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    env = _build_env(args, cfg)
    net = load_weights(args.weights)
    report = evaluate_policy(net, env, episodes=args.episodes, seed=args.seed)
    _emit(report.to_dict())
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavlab",
        description="Communication-aware UAV trajectory experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_out: bool = True) -> None:
        p.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                       help="study scale (default: desk)")
        p.add_argument("--config", help="JSON file with propagation/hyperparams/"
                                        "rewards overrides")
        p.add_argument("--deterministic", action="store_true",
                       help="omit wall-clock timing from manifests so reruns "
                            "are byte-identical")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory or file")

    p = sub.add_parser("map", help="build a radio map and save it as JSON")
    p.add_argument("--env", required=True, help="environment id (env1..env3)")
    p.add_argument("--cell-size", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("train", help="one training run, artifacts to --out")
    p.add_argument("--env", required=True)
    p.add_argument("--algo", choices=("dqn", "ddqn"), default="ddqn")
    p.add_argument("--mode", choices=("scratch", "transfer"), default="scratch")
    p.add_argument("--weights", help="source network for --mode transfer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emergency", action="store_true",
                   help="disable the base station nearest the target")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="transfer-vs-scratch study across seeds")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--algo", choices=("dqn", "ddqn"), default="ddqn")
    p.add_argument("--seeds", type=_parse_seeds, default=[0, 1, 2, 3, 4])
    p.add_argument("--emergency", action="store_true",
                   help="apply the emergency outage to the target environment")
    common(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("compare", help="DQN vs DDQN on one environment")
    p.add_argument("--env", required=True)
    p.add_argument("--seeds", type=_parse_seeds, default=[0, 1, 2, 3, 4])
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eval", help="greedy rollouts of saved weights")
    p.add_argument("--env", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emergency", action="store_true")
    common(p, needs_out=False)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, TypeError, OSError, KeyError) as exc:
        json.dump({"error": str(exc), "command": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
