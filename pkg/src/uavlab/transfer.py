"""Continuous transfer learning across environment sequences.

A plan is an ordered list of stages, each an environment plus a training
mode. Scratch stages initialize a fresh network; transfer stages copy
the previous stage's weights into both the online and target networks,
then fine-tune with the transfer hyperparameters (lower learning rate,
milder exploration reset, empty replay buffer, fresh optimizer).

Per-stage RNGs are spawned from one base seed, so a whole chain is
reproducible from a single integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent import Hyperparams, TrainResult, scratch_hyperparams, train, \
    transfer_hyperparams
from .cityworld import RewardConstants, UavEnv, make_env
from .neural import NetworkParams
from .radiomap import PropagationParams


@dataclass(frozen=True)
class StageSpec:
    """One link of a transfer chain."""

    name: str
    env_id: str
    profile: str = "desk"
    emergency: bool = False
    mode: str = "transfer"          # "scratch" or "transfer"
    algo: str = "ddqn"
    hyperparams: Optional[Hyperparams] = None   # None picks the mode default

    def __post_init__(self) -> None:
        if self.mode not in ("scratch", "transfer"):
            raise ValueError(f"mode must be 'scratch' or 'transfer', got {self.mode!r}")

    def resolved_hyperparams(self) -> Hyperparams:
        if self.hyperparams is not None:
            return self.hyperparams
        if self.mode == "scratch":
            return scratch_hyperparams(self.profile, self.algo)
        return transfer_hyperparams(self.profile, self.algo)


@dataclass(frozen=True)
class TransferPlan:
    """Ordered stages plus the base seed they all derive from."""

    stages: Tuple[StageSpec, ...]
    base_seed: int = 0

    def __post_init__(self) -> None:
        if not self.stages:
            raise ValueError("a plan needs at least one stage")
        if self.stages[0].mode != "scratch":
            raise ValueError("the first stage has no source weights and must be "
                             "mode='scratch'")


@dataclass
class StageResult:
    """Training outcome of one stage."""

    spec: StageSpec
    result: TrainResult
    episodes_to_convergence: Optional[int]


EnvFactory = Callable[[StageSpec], UavEnv]


def default_env_factory(params: Optional[PropagationParams] = None) -> EnvFactory:
    """Builds each stage environment on demand, caching identical layouts."""
    cache: Dict[Tuple[str, str, bool], UavEnv] = {}

    def factory(spec: StageSpec) -> UavEnv:
        key = (spec.env_id, spec.profile, spec.emergency)
        if key not in cache:
            cache[key] = make_env(spec.env_id, spec.profile,
                                  emergency=spec.emergency, params=params)
        return cache[key]

    return factory


def stage_rngs(base_seed: int, n: int) -> List[np.random.Generator]:
    """Independent per-stage generators spawned from one seed."""
    return [np.random.default_rng(ss)
            for ss in np.random.SeedSequence(base_seed).spawn(n)]


def run_stage(env: UavEnv, spec: StageSpec, rng: np.random.Generator,
              source_net: Optional[NetworkParams] = None) -> StageResult:
    """Train one stage; transfer stages require source weights."""
    if spec.mode == "transfer" and source_net is None:
        raise ValueError(f"stage {spec.name!r} is mode='transfer' but no source "
                         "weights were given")
    hp = spec.resolved_hyperparams()
    initial = source_net if spec.mode == "transfer" else None
    result = train(env, hp, rng=rng, initial_net=initial)
    return StageResult(spec=spec, result=result,
                       episodes_to_convergence=result.converged_at)


def run_ctl(plan: TransferPlan, env_factory: Optional[EnvFactory] = None
            ) -> List[StageResult]:
    """Execute a chain, threading weights from each stage into the next.

    Every stage after the first fine-tunes the previous stage's final
    network when its mode is "transfer", or restarts from scratch when
    its mode is "scratch".
    """
    factory = env_factory or default_env_factory()
    rngs = stage_rngs(plan.base_seed, len(plan.stages))
    results: List[StageResult] = []
    carried: Optional[NetworkParams] = None
    for spec, rng in zip(plan.stages, rngs):
        env = factory(spec)
        source = carried if spec.mode == "transfer" else None
        stage = run_stage(env, spec, rng, source_net=source)
        results.append(stage)
        carried = stage.result.net
    return results


def with_rewards(env: UavEnv, rewards: RewardConstants) -> UavEnv:
    """Same environment with a different reward weighting."""
    return UavEnv(env.city, env.mission, env.rmap, rewards=rewards, name=env.name)


def convergence_speedup(scratch_episodes: int, transfer_episodes: int) -> float:
    """Fractional reduction in episodes-to-convergence thanks to transfer."""
    if scratch_episodes <= 0:
        raise ValueError("scratch episode count must be positive")
    return (scratch_episodes - transfer_episodes) / scratch_episodes
