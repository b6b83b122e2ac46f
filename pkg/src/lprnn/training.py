"""Trainers: truncated-backprop supervised classification and a desk-scale
advantage actor-critic, plus metric smoothing and hyperparameter sampling.

Truncation semantics: the recurrent state entering a chunk is a plain leaf
of a fresh graph, so gradients stop at chunk boundaries by construction.
Inside an actor-critic rollout, the state is additionally severed every
`block` steps through stop-gradient nodes.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .gridworlds import make_env
from .memory import NetworkSpec, build_network
from .seeding import as_seed_sequence, rng_from
from .tasks import ALPHABET_SIZE, make_task_spec, stream

CSV_SCHEMA = "lprnn-csv v1"


class TrainingDiverged(RuntimeError):
    """A non-finite value aborted the run; .log carries metrics so far."""

    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


def smoothed_metric(values, factor: float = 0.98) -> float:
    """Final value of s <- factor*s + (1-factor)*x over the stream, s0 = 0."""
    s = 0.0
    for x in values:
        s = factor * s + (1.0 - factor) * float(x)
    return s


@dataclass
class MetricsLog:
    columns = ("update", "steps_seen", "loss", "metric", "smoothed_metric")
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, update, steps_seen, loss, metric, smoothed):
        self.rows.append((int(update), int(steps_seen), float(loss),
                          float(metric), float(smoothed)))

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(f"# {CSV_SCHEMA} metrics\n")
            f.write(",".join(self.columns) + "\n")
            for row in self.rows:
                f.write(f"{row[0]},{row[1]},{row[2]!r},{row[3]!r},{row[4]!r}\n")

    def write_summary(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.summary, f, indent=2, sort_keys=True, default=str)
            f.write("\n")


# ---------------------------------------------------------------------------
# supervised
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    arch: str = "chain"            # chain | parallel | lstm
    task: str = "two_marker"
    batch: int = 16
    trunc: int = 8
    budget: int = 4_000_000        # total input symbols = batch*trunc*updates
    alpha: float = 1e-3
    eps: float = 1e-6
    seed: int = 0
    k: int = 8
    width: int = 16
    base: float = 2.0
    viewport: int = 8
    hidden: int = 32
    embed: int = 0
    grad_pass_depth: int = 1
    clip_norm: float | None = None
    log_every: int = 200

    def n_updates(self) -> int:
        return self.budget // (self.batch * self.trunc)

    def network_spec(self) -> NetworkSpec:
        task_spec = make_task_spec(self.task)
        embed = self.embed
        if self.arch == "parallel" and embed == 0:
            embed = self.width
        return NetworkSpec(memory=self.arch, head="classifier",
                           in_dim=ALPHABET_SIZE, n_out=task_spec.n_classes,
                           k=self.k, width=self.width, base=self.base,
                           viewport=self.viewport, hidden=self.hidden,
                           embed=embed, grad_pass_depth=self.grad_pass_depth)


def train_classifier(cfg: TrainConfig) -> MetricsLog:
    """Truncated-backprop training on the symbol stream.

    Per chunk: forward `trunc` steps carrying recurrent state, cross-entropy
    on sequence-final steps only (mean over them), one Adam update. Chunks
    with no labeled step are counted but skip the update. The smoothed
    accuracy consumes per-label outcomes in (time, lane) order.
    """
    root = as_seed_sequence(cfg.seed)
    init_seed, stream_seed = root.spawn(2)
    task_spec = make_task_spec(cfg.task)
    net = build_network(cfg.network_spec(), init_seed)
    opt = ad.AdamState(alpha=cfg.alpha, eps=cfg.eps)
    chunks = stream(task_spec, cfg.batch, cfg.trunc, stream_seed)
    log = MetricsLog()
    state = net.init_state(cfg.batch)
    smoothed = 0.0
    last_loss = float("nan")
    last_acc = float("nan")
    skipped = 0
    labels_seen = 0
    t_start = time.time()
    n_updates = cfg.n_updates()
    try:
        for update in range(1, n_updates + 1):
            chunk = next(chunks)
            tensors = net.wrap_state(state)
            parts, labels = [], []
            for t in range(cfg.trunc):
                ctx, tensors = net.step(tensors, chunk.symbols[:, t])
                rows = np.flatnonzero(chunk.mask[:, t])
                if rows.size:
                    parts.append(net.output(ctx, rows))
                    labels.append(chunk.labels[rows, t])
            state = net.unwrap_state(tensors)
            if parts:
                logits = parts[0] if len(parts) == 1 else ad.concat_rows(parts)
                y = np.concatenate(labels)
                loss = ad.softmax_xent(logits, y)
                net.zero_grads()
                ad.backward(loss)
                ad.adam_step(net.params, net.grads(), opt, cfg.clip_norm)
                correct = logits.data.argmax(axis=1) == y
                for c in correct:
                    smoothed = 0.98 * smoothed + 0.02 * float(c)
                labels_seen += y.size
                last_loss = float(loss.data)
                last_acc = float(correct.mean())
            else:
                skipped += 1
            if update % cfg.log_every == 0 or update == n_updates:
                log.add(update, update * cfg.batch * cfg.trunc,
                        last_loss, last_acc, smoothed)
    except ad.NonFiniteError as exc:
        log.summary = {"status": "diverged", "error": str(exc),
                       "config": asdict(cfg)}
        raise TrainingDiverged(f"update {len(log.rows)}: {exc}", log) from exc
    log.summary = {
        "status": "ok",
        "config": asdict(cfg),
        "updates": n_updates,
        "symbols_seen": n_updates * cfg.batch * cfg.trunc,
        "updates_skipped_no_label": skipped,
        "labels_seen": labels_seen,
        "final_smoothed_accuracy": smoothed,
        "wall_time_s": time.time() - t_start,
        "n_params": net.n_params(),
    }
    log.network = net
    return log


# ---------------------------------------------------------------------------
# actor-critic
# ---------------------------------------------------------------------------

@dataclass
class RlConfig:
    arch: str = "chain"
    task: str = "tmaze"
    env: dict = field(default_factory=dict)
    rollout: int = 300
    block: int = 20
    gamma: float = 0.99
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    steps: int = 200_000
    alpha: float = 1e-3
    eps: float = 1e-6
    seed: int = 0
    k: int = 8
    width: int = 64
    base: float = 2.0
    viewport: int = 32
    hidden: int = 256
    embed: int = 64
    grad_pass_depth: int = 1
    clip_norm: float | None = None

    def validate(self) -> None:
        if not 1 <= self.block <= self.rollout:
            raise ValueError("block interval must be in [1, rollout]")
        if self.rollout < 1 or self.steps < 1:
            raise ValueError("rollout and steps must be positive")

    def network_spec(self, obs_dim: int) -> NetworkSpec:
        return NetworkSpec(memory=self.arch, head="actor_critic",
                           in_dim=obs_dim, n_out=5, k=self.k, width=self.width,
                           base=self.base, viewport=self.viewport,
                           hidden=self.hidden, embed=self.embed,
                           grad_pass_depth=self.grad_pass_depth)


def _sample_action(rng, probs) -> int:
    u = rng.random()
    return min(int(np.searchsorted(np.cumsum(probs), u)), len(probs) - 1)


def train_actor_critic(cfg: RlConfig) -> MetricsLog:
    """Single-process n-step advantage actor-critic over fixed rollouts.

    One Adam update per `rollout` env steps with returns bootstrapped at the
    rollout end, value regression and an entropy bonus; recurrent-state
    gradients are severed every `block` steps inside the rollout. Episode
    boundaries reset both the environment and the memory state; the smoothed
    metric consumes per-episode returns.
    """
    cfg.validate()
    root = as_seed_sequence(cfg.seed)
    init_seed, env_seed, act_seed = root.spawn(3)
    env = make_env(cfg.task, seed=env_seed, **cfg.env)
    obs_dim = int(np.prod(env.obs_shape))
    net = build_network(cfg.network_spec(obs_dim), init_seed)
    opt = ad.AdamState(alpha=cfg.alpha, eps=cfg.eps)
    act_rng = rng_from(act_seed)
    log = MetricsLog()
    episode_returns = []
    smoothed = 0.0
    ep_return = 0.0
    obs = env.reset()
    state = net.wrap_state(net.init_state(1))
    steps_done = 0
    update = 0
    t_start = time.time()
    try:
        while steps_done < cfg.steps:
            logit_nodes, value_nodes = [], []
            actions, rewards, dones = [], [], []
            for t in range(cfg.rollout):
                if t > 0 and t % cfg.block == 0:
                    state = net.detach_state(state)
                ctx, state = net.step(state, obs.reshape(1, -1))
                logits, value = net.policy_value(ctx)
                z = logits.data[0]
                p = np.exp(z - z.max())
                p /= p.sum()
                a = _sample_action(act_rng, p)
                res = env.step(a)
                logit_nodes.append(logits)
                value_nodes.append(value)
                actions.append(a)
                rewards.append(res.reward)
                dones.append(res.done)
                ep_return += res.reward
                obs = res.observation
                steps_done += 1
                if res.done:
                    episode_returns.append(ep_return)
                    smoothed = 0.98 * smoothed + 0.02 * ep_return
                    ep_return = 0.0
                    obs = env.reset()
                    state = net.wrap_state(net.init_state(1))
            if dones[-1]:
                boot = 0.0
            else:
                boot_ctx, _ = net.step(net.detach_state(state), obs.reshape(1, -1))
                _, boot_value = net.policy_value(boot_ctx)
                boot = float(boot_value.data[0, 0])
            returns = np.empty(cfg.rollout)
            acc = boot
            for t in range(cfg.rollout - 1, -1, -1):
                if dones[t]:
                    acc = 0.0
                acc = rewards[t] + cfg.gamma * acc
                returns[t] = acc
            values = np.array([v.data[0, 0] for v in value_nodes])
            advantages = returns - values
            logits_cat = ad.concat_rows(logit_nodes)
            values_cat = ad.concat_rows(value_nodes)
            pg = ad.softmax_xent(logits_cat, actions, weights=advantages)
            err = ad.sub(values_cat, ad.constant(returns[:, None]))
            v_loss = ad.mean_all(ad.mul(err, err))
            ent = ad.entropy_mean(logits_cat)
            loss = ad.add(ad.add(pg, ad.scale(v_loss, cfg.value_coef)),
                          ad.scale(ent, -cfg.entropy_coef))
            net.zero_grads()
            ad.backward(loss)
            ad.adam_step(net.params, net.grads(), opt, cfg.clip_norm)
            # rebase the carried state onto fresh leaves so the finished
            # rollout's graph can be collected (rollouts are the BPTT window)
            state = net.wrap_state(net.unwrap_state(state))
            update += 1
            last_ep = episode_returns[-1] if episode_returns else 0.0
            log.add(update, steps_done, float(loss.data), last_ep, smoothed)
    except ad.NonFiniteError as exc:
        log.summary = {"status": "diverged", "error": str(exc),
                       "config": asdict(cfg)}
        raise TrainingDiverged(f"update {update}: {exc}", log) from exc
    log.summary = {
        "status": "ok",
        "config": asdict(cfg),
        "updates": update,
        "env_steps": steps_done,
        "episodes": len(episode_returns),
        "mean_return_last_100": float(np.mean(episode_returns[-100:])) if episode_returns else float("nan"),
        "smoothed_return": smoothed,
        "wall_time_s": time.time() - t_start,
        "n_params": net.n_params(),
    }
    log.episode_returns = episode_returns
    log.network = net
    return log


# ---------------------------------------------------------------------------
# hyperparameter sampling (the published free-parameter value sets)
# ---------------------------------------------------------------------------

HYPERPARAM_SPACE = {
    "batch": (4, 8, 16, 32, 64, 128),
    "alpha": (5e-7, 1e-3),          # log-uniform range
    "eps": (5e-7, 1e-3),            # log-uniform range
    "hidden": (16, 32, 64),
    "lstm_width": (8, 16, 32, 64, 96),
    "pool_width": (8, 16, 24, 32, 48),
    "k": (4, 6, 8, 10, 12),
    "viewport": (4, 6, 10, 16),
    "base": (1.5, 2.0, 3.0),
}


def sample_hyperparams(arch: str, rng: np.random.Generator,
                       space: dict = HYPERPARAM_SPACE) -> dict:
    """One draw of the architecture-appropriate free parameters."""
    if arch not in ("chain", "parallel", "lstm"):
        raise ValueError(f"unknown architecture {arch!r}")

    def log_uniform(lo, hi):
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    draw = {
        "arch": arch,
        "batch": int(rng.choice(space["batch"])),
        "alpha": log_uniform(*space["alpha"]),
        "eps": log_uniform(*space["eps"]),
        "hidden": int(rng.choice(space["hidden"])),
    }
    if arch == "lstm":
        draw["width"] = int(rng.choice(space["lstm_width"]))
    else:
        draw["width"] = int(rng.choice(space["pool_width"]))
        draw["k"] = int(rng.choice(space["k"]))
        draw["viewport"] = int(rng.choice(space["viewport"]))
        draw["base"] = float(rng.choice(space["base"]))
    return draw
