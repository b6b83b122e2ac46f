"""Cued Catch: interpret a visual cue to catch the right moving block.

An episode is a teaching phase (the four cue symbols shown one by one under
two bars whose block associations never change) followed by catching trials.
Each trial lasts seven steps: two blocks spawn six columns away and close in
one column per step; on the final step the agent scores if it sits on the
correct block's row. The cue-to-block mapping is redrawn every episode, and
rewards can be withheld for the first trials to force long retention.
"""

from dataclasses import dataclass

import numpy as np

from .base import DOWN, STAY, UP, GridEnv, StepResult

BOARD = 11
AGENT_COL = 1
UP_ROW, DOWN_ROW = 4, 6
SPAWN_COL = 7
CUE_CELL = (9, 5)
BAR_CELLS = {0: [(1, c) for c in (2, 3, 4)],   # bar 0 is tied to block 0 (cyan)
             1: [(1, c) for c in (6, 7, 8)]}
TEACH_CUE_CELL = {0: (2, 3), 1: (2, 7)}
FLANK_CELLS = [(r, 0) for r in range(3, 8)] + [(r, 2) for r in range(3, 8)]
BLOCK_ROW = {0: UP_ROW, 1: DOWN_ROW}

# feature planes
P_WALL, P_AGENT = 0, 1
P_CUE = 2            # planes 2..5, one per cue symbol
P_BLOCK = 6          # 6 cyan, 7 yellow
P_BAR = 8            # 8 cyan bar, 9 yellow bar
P_FLANK = 10
N_PLANES = 11


@dataclass
class CuedCatchConfig:
    trials: int = 100
    reward_free: int = 40
    trial_len: int = 7
    teach_len: int = 10
    catch_reward: float = 1.0


class CuedCatch(GridEnv):
    name = "cued_catch"

    def __init__(self, config: CuedCatchConfig | None = None, seed: int = 0):
        super().__init__(config or CuedCatchConfig(), seed)

    @property
    def obs_shape(self):
        return (BOARD, BOARD, N_PLANES)

    @property
    def episode_len(self) -> int:
        cfg = self.config
        return 4 * cfg.teach_len + cfg.trials * cfg.trial_len

    def reset(self) -> np.ndarray:
        cfg = self.config
        # which two cue symbols mean "cyan" this episode
        perm = self._rng.permutation(4)
        self.cue_block = np.empty(4, dtype=np.int64)
        self.cue_block[perm[:2]] = 0
        self.cue_block[perm[2:]] = 1
        self.teach_order = self._rng.permutation(4)
        self.trial_block = self._rng.integers(0, 2, size=cfg.trials)
        # the cue shown each trial is one of the two tied to the trial's block
        pick = self._rng.integers(0, 2, size=cfg.trials)
        self.trial_cue = np.empty(cfg.trials, dtype=np.int64)
        for i in range(cfg.trials):
            options = np.flatnonzero(self.cue_block == self.trial_block[i])
            self.trial_cue[i] = options[pick[i]]
        self.t = 0
        self.agent_row = UP_ROW
        self.done = False
        return self.render()

    def _phase(self):
        """(phase, index, substep) for the current step counter."""
        cfg = self.config
        teach_total = 4 * cfg.teach_len
        if self.t < teach_total:
            return "teach", self.t // cfg.teach_len, self.t % cfg.teach_len
        t = self.t - teach_total
        return "trial", t // cfg.trial_len, t % cfg.trial_len

    def step(self, action: int) -> StepResult:
        self._require_live(action)
        cfg = self.config
        if action == UP:
            self.agent_row = UP_ROW
        elif action == DOWN:
            self.agent_row = DOWN_ROW
        reward = 0.0
        phase, idx, sub = self._phase()
        if phase == "trial" and sub == cfg.trial_len - 1:
            caught = self.agent_row == BLOCK_ROW[self.trial_block[idx]]
            if caught and idx >= cfg.reward_free:
                reward = cfg.catch_reward
        self.t += 1
        self.done = self.t >= self.episode_len
        return StepResult(self.render(), reward, self.done)

    def oracle_action(self) -> int:
        phase, idx, _ = self._phase()
        if phase != "trial":
            return STAY
        target = BLOCK_ROW[self.trial_block[idx]]
        if self.agent_row == target:
            return STAY
        return UP if target == UP_ROW else DOWN

    def render(self) -> np.ndarray:
        obs = np.zeros(self.obs_shape)
        obs[0, :, P_WALL] = obs[-1, :, P_WALL] = 1.0
        obs[:, 0, P_WALL] = obs[:, -1, P_WALL] = 1.0
        obs[self.agent_row, AGENT_COL, P_AGENT] = 1.0
        if self.done:
            return obs
        phase, idx, sub = self._phase()
        if phase == "teach":
            cue = self.teach_order[idx]
            bar = self.cue_block[cue]
            for r, c in BAR_CELLS[0]:
                obs[r, c, P_BAR + 0] = 1.0
            for r, c in BAR_CELLS[1]:
                obs[r, c, P_BAR + 1] = 1.0
            r, c = TEACH_CUE_CELL[bar]
            obs[r, c, P_CUE + cue] = 1.0
            for r, c in FLANK_CELLS:
                obs[r, c, P_FLANK] = 1.0
        else:
            obs[CUE_CELL[0], CUE_CELL[1], P_CUE + self.trial_cue[idx]] = 1.0
            col = SPAWN_COL - sub
            obs[UP_ROW, col, P_BLOCK + 0] = 1.0
            obs[DOWN_ROW, col, P_BLOCK + 1] = 1.0
        return obs

    def render_ascii(self) -> str:
        obs = self.render()
        chars = [" "] * (BOARD * BOARD)
        symbols = {P_WALL: "#", P_AGENT: "A", P_CUE: "1", P_CUE + 1: "2",
                   P_CUE + 2: "3", P_CUE + 3: "4", P_BLOCK: "C",
                   P_BLOCK + 1: "Y", P_BAR: "=", P_BAR + 1: "~", P_FLANK: "|"}
        for p, ch in symbols.items():
            for r, c in np.argwhere(obs[:, :, p] > 0):
                chars[r * BOARD + c] = ch
        return "\n".join("".join(chars[r * BOARD:(r + 1) * BOARD]) for r in range(BOARD))
