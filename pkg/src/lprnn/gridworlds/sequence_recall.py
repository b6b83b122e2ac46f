"""Sequence Recall: watch four light flashes, then walk the lights in order.

The agent sits immobilised in a pen while a random sequence of four flashes
plays on four disk-shaped lights (drawn with replacement). Once free, the
n-th disk it walks through pays +1 if it matches the n-th flash; matching a
repeated light requires leaving the disk and re-entering. The episode ends
after four traversals or on timeout, with a per-step penalty throughout.
"""

from dataclasses import dataclass

import numpy as np

from .base import DOWN, LEFT, MOVES, RIGHT, STAY, UP, GridEnv, StepResult

P_WALL, P_AGENT, P_DISK, P_GLOW = range(4)
N_PLANES = 4


@dataclass
class SeqRecallConfig:
    flashes: int = 4
    flash_len: int = 60
    gap_len: int = 30
    step_penalty: float = 0.005
    match_reward: float = 1.0
    pen: int = 21                  # odd interior size
    light_inset: int = 3           # light centre distance from the walls
    max_steps: int = 1000

    @property
    def flash_phase_len(self) -> int:
        return self.flashes * self.flash_len + (self.flashes - 1) * self.gap_len


class SequenceRecall(GridEnv):
    name = "sequence_recall"

    def __init__(self, config: SeqRecallConfig | None = None, seed: int = 0):
        cfg = config or SeqRecallConfig()
        if cfg.pen % 2 != 1 or cfg.pen < 9:
            raise ValueError("pen must be odd and at least 9")
        if not 2 <= cfg.light_inset <= cfg.pen // 2 - 2:
            raise ValueError("light inset leaves no room to walk around disks")
        super().__init__(cfg, seed)
        n = cfg.pen + 2
        c = n // 2
        inset = cfg.light_inset
        self.size = n
        self.center = (c, c)
        self.light_centers = [(inset, c), (n - 1 - inset, c),
                              (c, inset), (c, n - 1 - inset)]  # N S W E
        self.disk_cells = []
        for (r, col) in self.light_centers:
            self.disk_cells.append({(r, col), (r - 1, col), (r + 1, col),
                                    (r, col - 1), (r, col + 1)})

    @property
    def obs_shape(self):
        return (self.size, self.size, N_PLANES)

    def _disk_at(self, pos):
        for i, cells in enumerate(self.disk_cells):
            if pos in cells:
                return i
        return None

    def reset(self) -> np.ndarray:
        cfg = self.config
        self.sequence = self._rng.integers(0, 4, size=cfg.flashes)
        self.t = 0
        self.pos = self.center
        self.inside = None          # disk the agent currently occupies
        self.n_traversed = 0
        self.done = False
        return self.render()

    def _flashing_light(self):
        """Index of the light currently lit, or None (gaps / free phase)."""
        cfg = self.config
        if self.t >= cfg.flash_phase_len:
            return None
        period = cfg.flash_len + cfg.gap_len
        k, off = divmod(self.t, period)
        if off < cfg.flash_len:
            return int(self.sequence[k])
        return None

    def step(self, action: int) -> StepResult:
        self._require_live(action)
        cfg = self.config
        reward = -cfg.step_penalty
        if self.t >= cfg.flash_phase_len:
            walls = np.zeros((self.size, self.size), dtype=bool)
            walls[0, :] = walls[-1, :] = walls[:, 0] = walls[:, -1] = True
            dr, dc = MOVES[action]
            cand = (self.pos[0] + dr, self.pos[1] + dc)
            if not walls[cand]:
                self.pos = cand
            disk = self._disk_at(self.pos)
            if disk is not None and self.inside is None:
                # a fresh traversal; repeats need an exit and re-entry
                if disk == self.sequence[self.n_traversed]:
                    reward += cfg.match_reward
                self.n_traversed += 1
                if self.n_traversed >= cfg.flashes:
                    self.done = True
            self.inside = disk
        self.t += 1
        if self.t >= cfg.max_steps:
            self.done = True
        return StepResult(self.render(), reward, self.done)

    # -- oracle --------------------------------------------------------------

    def oracle_action(self) -> int:
        cfg = self.config
        if self.t < cfg.flash_phase_len or self.done:
            return STAY
        target = int(self.sequence[self.n_traversed])
        if self.inside is not None:
            # step off the disk first; own-disk cells stay legal on the way out
            return self._toward(self.center, avoid=self.inside)
        return self._toward(self.light_centers[target], avoid=target)

    def _toward(self, goal, avoid) -> int:
        """Greedy step toward goal; never clip through a disk that is not
        the target (stray traversals would corrupt the score)."""
        options = []
        for action in (UP, DOWN, LEFT, RIGHT, STAY):
            dr, dc = MOVES[action]
            cand = (self.pos[0] + dr, self.pos[1] + dc)
            if not (1 <= cand[0] <= self.size - 2 and 1 <= cand[1] <= self.size - 2):
                continue
            hit = self._disk_at(cand)
            if hit is not None and hit != avoid:
                continue
            dist = abs(cand[0] - goal[0]) + abs(cand[1] - goal[1])
            moved = 0 if action == STAY else 1
            options.append((dist, -moved, action))
        options.sort()
        return options[0][2]

    # -- rendering -----------------------------------------------------------

    def render(self) -> np.ndarray:
        obs = np.zeros(self.obs_shape)
        obs[0, :, P_WALL] = obs[-1, :, P_WALL] = 1.0
        obs[:, 0, P_WALL] = obs[:, -1, P_WALL] = 1.0
        obs[self.pos[0], self.pos[1], P_AGENT] = 1.0
        for cells in self.disk_cells:
            for r, c in cells:
                obs[r, c, P_DISK] = 1.0
        lit = self._flashing_light()
        if lit is not None:
            for r, c in self.disk_cells[lit]:
                obs[r, c, P_GLOW] = 1.0
        return obs

    def render_ascii(self) -> str:
        obs = self.render()
        grid = [["."] * self.size for _ in range(self.size)]
        for p, ch in ((P_WALL, "#"), (P_DISK, "o"), (P_GLOW, "O"), (P_AGENT, "A")):
            for r, c in np.argwhere(obs[:, :, p] > 0):
                grid[r][c] = ch
        return "\n".join("".join(row) for row in grid)
