"""Deterministic gridworld engines for the three memory tasks."""

from .base import (DOWN, LEFT, MOVES, N_ACTIONS, RIGHT, STAY, UP, GridEnv,
                   StepResult, make_random_policy, oracle_policy,
                   record_episode, run_episode)
from .cued_catch import CuedCatch, CuedCatchConfig
from .sequence_recall import SeqRecallConfig, SequenceRecall
from .tmaze import TMaze, TMazeConfig

TASKS = {
    "cued_catch": (CuedCatch, CuedCatchConfig),
    "tmaze": (TMaze, TMazeConfig),
    "sequence_recall": (SequenceRecall, SeqRecallConfig),
}


def make_env(task: str, seed: int = 0, **overrides) -> GridEnv:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {sorted(TASKS)}")
    env_cls, cfg_cls = TASKS[task]
    return env_cls(cfg_cls(**overrides), seed)
