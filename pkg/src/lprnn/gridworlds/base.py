"""Shared machinery for the deterministic gridworld engines."""

from dataclasses import dataclass

import numpy as np

from ..seeding import rng_from

UP, DOWN, LEFT, RIGHT, STAY = range(5)
N_ACTIONS = 5
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1), STAY: (0, 0)}


@dataclass
class StepResult:
    observation: np.ndarray   # (rows, cols, features) binary
    reward: float
    done: bool


class GridEnv:
    """Deterministic state machine: trajectory = f(config, seed, actions)."""

    name = "grid"

    def __init__(self, config, seed):
        self.config = config
        self._rng = rng_from(seed)
        self._seed = seed
        self.done = True

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    def reset(self) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: int) -> StepResult:
        raise NotImplementedError

    def oracle_action(self) -> int:
        raise NotImplementedError

    def _require_live(self, action: int) -> None:
        if self.done:
            raise RuntimeError("step() called after the episode finished")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action must be in [0, {N_ACTIONS}), got {action}")


def run_episode(env: GridEnv, policy, max_steps: int | None = None):
    """Roll one episode; policy(env, obs) -> action. Returns (return, steps)."""
    obs = env.reset()
    total = 0.0
    steps = 0
    while True:
        res = env.step(policy(env, obs))
        total += res.reward
        steps += 1
        obs = res.observation
        if res.done or (max_steps is not None and steps >= max_steps):
            return total, steps


def oracle_policy(env: GridEnv, obs) -> int:
    return env.oracle_action()


def make_random_policy(seed):
    rng = rng_from(seed)

    def policy(env, obs):
        return int(rng.integers(N_ACTIONS))

    return policy


def record_episode(path, env: GridEnv, policy) -> float:
    """Run one episode and write the step record CSV."""
    obs = env.reset()
    rows = []
    total = 0.0
    while True:
        action = policy(env, obs)
        res = env.step(action)
        total += res.reward
        rows.append((action, res.reward, res.done))
        obs = res.observation
        if res.done:
            break
    with open(path, "w") as f:
        f.write(f"# lprnn-csv v1 episode task={env.name} seed={env._seed} "
                f"config={env.config}\n")
        f.write("step,action,reward,done\n")
        for i, (a, r, d) in enumerate(rows):
            f.write(f"{i},{a},{float(r)!r},{int(d)}\n")
    return total
