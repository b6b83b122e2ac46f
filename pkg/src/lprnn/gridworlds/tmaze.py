"""T-maze with a forced retention interval.

The agent sees a left/right cue in a small room, must step onto a teleporter
that only activates after the room phase, is then frozen in a featureless
limbo for a configurable number of steps, and finally wakes at the centre of
a top corridor with goal arms at both ends. Only the remembered cue tells it
which arm pays +1. A per-step penalty makes dithering and timeouts costly.

Observations are an egocentric window, so corridor positions away from the
ends are indistinguishable; the cue bit can survive only in the agent's
memory once the room phase ends.
"""

from dataclasses import dataclass

import numpy as np

from .base import DOWN, LEFT, MOVES, RIGHT, STAY, UP, GridEnv, StepResult

ROOM = 7            # room grid with walls; interior 5x5
ROOM_START = (3, 3)
TELEPORTER = (1, 3)
CUE_ROWS = (2, 3, 4)

P_WALL, P_AGENT, P_CUE, P_TELE, P_GOAL = range(5)
N_PLANES = 5


@dataclass
class TMazeConfig:
    room_steps: int = 50
    limbo: int = 280
    step_penalty: float = 0.001
    goal_reward: float = 1.0
    corridor_half: int = 20
    arm: int = 3
    view: int = 9                   # odd window; 9 keeps the cue visible room-wide
    max_steps: int | None = None    # default: room + limbo + 300

    @property
    def timeout(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return self.room_steps + self.limbo + 300


class TMaze(GridEnv):
    name = "tmaze"

    def __init__(self, config: TMazeConfig | None = None, seed: int = 0):
        cfg = config or TMazeConfig()
        if cfg.view % 2 != 1:
            raise ValueError("view window must be odd")
        if cfg.corridor_half < 2 or cfg.arm < 1:
            raise ValueError("corridor geometry too small")
        super().__init__(cfg, seed)

    @property
    def obs_shape(self):
        return (self.config.view, self.config.view, N_PLANES)

    def reset(self) -> np.ndarray:
        self.goal_side = int(self._rng.integers(0, 2))  # 0 left, 1 right
        self.phase = "room"
        self.pos = ROOM_START
        self.t = 0
        self.limbo_left = 0
        self.done = False
        return self.render()

    # -- grids ---------------------------------------------------------------

    def _room_walls(self) -> np.ndarray:
        walls = np.zeros((ROOM, ROOM), dtype=bool)
        walls[0, :] = walls[-1, :] = True
        walls[:, 0] = walls[:, -1] = True
        return walls

    def _corridor_walls(self) -> np.ndarray:
        cfg = self.config
        rows = cfg.arm + 3
        cols = 2 * cfg.corridor_half + 3
        walls = np.ones((rows, cols), dtype=bool)
        walls[1, 1:cols - 1] = False
        walls[2:cfg.arm + 2, 1] = False
        walls[2:cfg.arm + 2, cols - 2] = False
        return walls

    def _corridor_center(self):
        return (1, self.config.corridor_half + 1)

    def _goal_cells(self):
        cfg = self.config
        cols = 2 * cfg.corridor_half + 3
        return [(cfg.arm + 1, 1), (cfg.arm + 1, cols - 2)]

    # -- dynamics ------------------------------------------------------------

    def step(self, action: int) -> StepResult:
        self._require_live(action)
        cfg = self.config
        reward = -cfg.step_penalty
        if self.phase == "room":
            walls = self._room_walls()
            dr, dc = MOVES[action]
            cand = (self.pos[0] + dr, self.pos[1] + dc)
            if not walls[cand]:
                self.pos = cand
            self.t += 1
            if self.t > cfg.room_steps and self.pos == TELEPORTER:
                self.phase = "limbo"
                self.limbo_left = cfg.limbo
        elif self.phase == "limbo":
            self.t += 1
            self.limbo_left -= 1
            if self.limbo_left <= 0:
                self.phase = "corridor"
                self.pos = self._corridor_center()
        else:
            walls = self._corridor_walls()
            dr, dc = MOVES[action]
            cand = (self.pos[0] + dr, self.pos[1] + dc)
            if not walls[cand]:
                self.pos = cand
            self.t += 1
            goals = self._goal_cells()
            if self.pos in goals:
                side = goals.index(self.pos)
                reward += cfg.goal_reward if side == self.goal_side else -cfg.goal_reward
                self.done = True
        if self.t >= cfg.timeout:
            self.done = True
        return StepResult(self.render(), reward, self.done)

    def oracle_action(self) -> int:
        cfg = self.config
        if self.phase == "room":
            # park next to the teleporter, step on once it activates
            if self.pos != TELEPORTER and self.pos[1] == TELEPORTER[1]:
                if self.t >= cfg.room_steps or self.pos[0] > TELEPORTER[0] + 1:
                    return UP
                return STAY
            if self.pos[1] < TELEPORTER[1]:
                return RIGHT
            if self.pos[1] > TELEPORTER[1]:
                return LEFT
            return STAY
        if self.phase == "limbo":
            return STAY
        goal = self._goal_cells()[self.goal_side]
        if self.pos[1] > goal[1]:
            return LEFT
        if self.pos[1] < goal[1]:
            return RIGHT
        return DOWN if self.pos[0] < goal[0] else STAY

    # -- rendering -----------------------------------------------------------

    def render(self) -> np.ndarray:
        cfg = self.config
        view = cfg.view
        half = view // 2
        obs = np.zeros((view, view, N_PLANES))
        obs[half, half, P_AGENT] = 1.0
        if self.phase == "limbo":
            obs[:, :, P_WALL] = 1.0
            obs[half, half, P_WALL] = 0.0
            return obs
        if self.phase == "room":
            walls = self._room_walls()
            cue_col = 0 if self.goal_side == 0 else ROOM - 1
            extras = {}
            for r in CUE_ROWS:
                extras[(r, cue_col)] = P_CUE
            if self.t >= cfg.room_steps:
                extras[TELEPORTER] = P_TELE
        else:
            walls = self._corridor_walls()
            extras = {cell: P_GOAL for cell in self._goal_cells()}
        rows, cols = walls.shape
        r0, c0 = self.pos[0] - half, self.pos[1] - half
        for i in range(view):
            for j in range(view):
                r, c = r0 + i, c0 + j
                if not (0 <= r < rows and 0 <= c < cols):
                    obs[i, j, P_WALL] = 1.0
                    continue
                if walls[r, c]:
                    obs[i, j, P_WALL] = 1.0
                if (r, c) in extras:
                    obs[i, j, extras[(r, c)]] = 1.0
        return obs

    def render_ascii(self) -> str:
        obs = self.render()
        view = self.config.view
        grid = [["."] * view for _ in range(view)]
        for p, ch in ((P_WALL, "#"), (P_GOAL, "G"), (P_TELE, "T"), (P_CUE, "c"),
                      (P_AGENT, "A")):
            for r, c in np.argwhere(obs[:, :, p] > 0):
                grid[r][c] = ch
        return "\n".join("".join(row) for row in grid)
