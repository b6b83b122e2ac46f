"""Memory systems under comparison and the networks built around them.

Three interchangeable recurrent memories:

- a chain of low-pass filtering pools, where pool n smooths the already
  updated pool n-1 within the same timestep (temporally tiled responses);
- a parallel bank of the same pools, all filtering the input directly
  (the control arrangement, no tiling);
- a standard LSTM.

Pool nets are read through per-pool affine "viewports" and a unifying
"summariser" layer. Gradients are blocked into all pools past
``grad_pass_depth`` right before the viewports read them, so only the
fastest pools backpropagate into the input machinery.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .seeding import rng_from


def smoothing_coefficients(base: float, k: int) -> np.ndarray:
    """[base^-1, base^-2, ..., base^-k]; strictly decreasing in (0, 1)."""
    if base <= 1.0:
        raise ValueError("decay base must exceed 1")
    if k < 1:
        raise ValueError("pool count must be at least 1")
    return float(base) ** -np.arange(1, k + 1, dtype=np.float64)


def pool_chain_step(state: np.ndarray, embedding: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """One chain update: p_n = a_n * p_{n-1,new} + (1-a_n) * p_n. Plain numpy."""
    state = np.asarray(state, dtype=np.float64)
    embedding = np.asarray(embedding, dtype=np.float64)
    if state.shape != (len(coeffs),) + embedding.shape:
        raise ValueError(f"state {state.shape} does not match embedding {embedding.shape}")
    out = np.empty_like(state)
    prev = embedding
    for n, a in enumerate(coeffs):
        out[n] = a * prev + (1.0 - a) * state[n]
        prev = out[n]
    return out


def parallel_bank_step(state: np.ndarray, embedding: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """One bank update: every pool filters the embedding independently."""
    state = np.asarray(state, dtype=np.float64)
    embedding = np.asarray(embedding, dtype=np.float64)
    if state.shape != (len(coeffs),) + embedding.shape:
        raise ValueError(f"state {state.shape} does not match embedding {embedding.shape}")
    a = np.asarray(coeffs, dtype=np.float64).reshape((-1,) + (1,) * embedding.ndim)
    return a * embedding + (1.0 - a) * state


def random_orthonormal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random orthonormal matrix via QR with sign fixing."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def lstm_cell(g_input: ad.Tensor, g_forget: ad.Tensor, g_output: ad.Tensor,
              candidate: ad.Tensor, c_prev: ad.Tensor):
    """Gated cell update: c = g_in*cand + g_f*c_prev, h = g_out*tanh(c)."""
    c = ad.add(ad.mul(g_input, candidate), ad.mul(g_forget, c_prev))
    h = ad.mul(g_output, ad.tanh(c))
    return h, c


@dataclass
class NetworkSpec:
    """Shape of a full model; which fields matter depends on memory/head."""

    memory: str = "chain"          # chain | parallel | lstm
    head: str = "classifier"       # classifier | actor_critic
    in_dim: int = 8                # alphabet size, or flattened observation size
    n_out: int = 4                 # classes, or actions
    k: int = 8                     # number of pools
    width: int = 16                # D: pool width / LSTM size
    base: float = 2.0              # b: pool decay base
    viewport: int = 8              # V
    hidden: int = 32               # M: summariser width / post-LSTM hidden layer
    embed: int = 0                 # input embedding width; 0 = feed one-hot directly
    grad_pass_depth: int = 1
    inter_pool: str = "identity"   # identity | orthonormal_tanh

    def validate(self) -> None:
        if self.memory not in ("chain", "parallel", "lstm"):
            raise ValueError(f"unknown memory kind {self.memory!r}")
        if self.head not in ("classifier", "actor_critic"):
            raise ValueError(f"unknown head {self.head!r}")
        if self.memory != "lstm":
            if self.base <= 1.0:
                raise ValueError("decay base must exceed 1")
            if self.k < 1:
                raise ValueError("pool count must be at least 1")
        if self.inter_pool not in ("identity", "orthonormal_tanh"):
            raise ValueError(f"unknown inter-pool transform {self.inter_pool!r}")
        if self.memory == "parallel" and self.head == "classifier" and self.embed == 0:
            # the bank always filters a learned embedding of the input
            raise ValueError("parallel classifier requires embed > 0")


def padded_identity(rows: int, cols: int) -> np.ndarray:
    return np.eye(rows, cols)


class Network:
    """A parameterized model: step() advances memory, heads read it out."""

    def __init__(self, spec: NetworkSpec, seed):
        spec.validate()
        self.spec = spec
        self.params: dict[str, ad.Tensor] = {}
        self._fixed: dict[str, np.ndarray] = {}
        rng = rng_from(seed)
        s = spec
        self.coeffs = None if s.memory == "lstm" else smoothing_coefficients(s.base, s.k)

        def affine(name, fan_in, fan_out, bias=True):
            bound = 1.0 / np.sqrt(fan_in)
            self._add(name + ".w", rng.uniform(-bound, bound, (fan_in, fan_out)))
            if bias:
                self._add(name + ".b", np.zeros(fan_out))

        inj_scale = 0.5 if s.head == "actor_critic" else 1.0 / s.base
        if s.head == "actor_critic":
            affine("embed", s.in_dim, s.embed)
            feat_in = s.embed
        elif s.embed > 0:
            self._add("embed.w", rng.uniform(-1.0 / np.sqrt(s.in_dim),
                                             1.0 / np.sqrt(s.in_dim), (s.in_dim, s.embed)))
            feat_in = s.embed
        else:
            feat_in = s.in_dim

        if s.memory == "lstm":
            # orthonormal recurrent blocks keep gradients alive over the long
            # paths these tasks need; the input block stays fan-in scaled
            d = s.width
            w = np.empty((feat_in + d, 4 * d))
            bound = 1.0 / np.sqrt(feat_in)
            w[:feat_in] = rng.uniform(-bound, bound, (feat_in, 4 * d))
            for gate in range(4):
                w[feat_in:, gate * d:(gate + 1) * d] = random_orthonormal(d, rng)
            self._add("lstm.w", w)
            bias = np.zeros(4 * d)
            bias[d:2 * d] = 1.0  # forget gate open at init
            self._add("lstm.b", bias)
            affine("hidden", s.width, s.hidden)
            if s.embed == 0 and s.head != "actor_critic":
                self._fixed["onehot"] = np.eye(s.in_dim)
        else:
            self._add("inject.w", inj_scale * padded_identity(feat_in, s.width))
            if s.inter_pool == "orthonormal_tanh":
                for n in range(2, s.k + 1):
                    self._fixed[f"q{n}"] = random_orthonormal(s.width, rng)
            for n in range(s.k + 1):
                affine(f"viewport{n}", s.width, s.viewport)
            affine("summarise", (s.k + 1) * s.viewport, s.hidden)

        if s.head == "classifier":
            affine("out", s.hidden, s.n_out)
        else:
            affine("policy", s.hidden, s.n_out)
            affine("value", s.hidden, 1)

    def _add(self, name: str, data: np.ndarray) -> None:
        self.params[name] = ad.Tensor(data)

    def n_params(self) -> int:
        return sum(t.data.size for t in self.params.values())

    # -- recurrent state ----------------------------------------------------

    def init_state(self, batch: int):
        """All-zero recurrent state (pools start empty)."""
        d = self.spec.width
        if self.spec.memory == "lstm":
            return [np.zeros((batch, d)), np.zeros((batch, d))]
        return [np.zeros((batch, d)) for _ in range(self.spec.k)]

    @staticmethod
    def wrap_state(arrays):
        return [ad.constant(a) for a in arrays]

    @staticmethod
    def unwrap_state(tensors):
        return [t.data for t in tensors]

    @staticmethod
    def detach_state(tensors):
        return [ad.stop_gradient(t) for t in tensors]

    # -- forward ------------------------------------------------------------

    def _input_vector(self, inp) -> ad.Tensor:
        s = self.spec
        if s.head == "actor_critic":
            x = inp if isinstance(inp, ad.Tensor) else ad.constant(inp)
            return ad.relu(ad.add(ad.matmul(x, self.params["embed.w"]),
                                  self.params["embed.b"]))
        if s.embed > 0:
            return ad.take_rows(self.params["embed.w"], inp)
        return None  # one-hot path: callers gather rows of the next weight

    def step(self, state, inp):
        """Advance one timestep. Returns (ctx, new_state) of graph tensors.

        For pool memories ctx is [p0, p1, ..., pk]; for LSTM it is the
        hidden output. `inp` is an int id array (batch,) for symbol inputs
        or a (batch, in_dim) array/Tensor for dense observations.
        """
        s = self.spec
        if s.memory == "lstm":
            x = self._input_vector(inp)
            if x is None:
                x = ad.take_rows(ad.constant(self._fixed["onehot"]), inp)
            h_prev, c_prev = state
            z = ad.add(ad.matmul(ad.concat_cols([x, h_prev]), self.params["lstm.w"]),
                       self.params["lstm.b"])
            d = s.width
            g_i = ad.sigmoid(ad.slice_cols(z, 0, d))
            g_f = ad.sigmoid(ad.slice_cols(z, d, 2 * d))
            cand = ad.tanh(ad.slice_cols(z, 2 * d, 3 * d))
            g_o = ad.sigmoid(ad.slice_cols(z, 3 * d, 4 * d))
            h, c = lstm_cell(g_i, g_f, g_o, cand, c_prev)
            return h, [h, c]

        x = self._input_vector(inp)
        if x is None:
            p0 = ad.take_rows(self.params["inject.w"], inp)
        else:
            p0 = ad.matmul(x, self.params["inject.w"])
        pools = []
        if s.memory == "chain":
            prev = p0
            for n in range(1, s.k + 1):
                incoming = prev
                if s.inter_pool == "orthonormal_tanh" and n >= 2:
                    incoming = ad.tanh(ad.matmul(prev, ad.constant(self._fixed[f"q{n}"])))
                p = ad.lerp(incoming, state[n - 1], float(self.coeffs[n - 1]))
                pools.append(p)
                prev = p
        else:
            for n in range(1, s.k + 1):
                pools.append(ad.lerp(p0, state[n - 1], float(self.coeffs[n - 1])))
        return [p0] + pools, pools

    def _features(self, ctx, rows=None) -> ad.Tensor:
        s = self.spec
        if s.memory == "lstm":
            h = ctx if rows is None else ad.take_rows(ctx, rows)
            return ad.relu(ad.add(ad.matmul(h, self.params["hidden.w"]),
                                  self.params["hidden.b"]))
        views = []
        for n, p in enumerate(ctx):
            if n > s.grad_pass_depth:
                p = ad.stop_gradient(p)
            if rows is not None:
                p = ad.take_rows(p, rows)
            w = self.params[f"viewport{n}.w"]
            b = self.params[f"viewport{n}.b"]
            views.append(ad.relu(ad.add(ad.matmul(p, w), b)))
        cat = ad.concat_cols(views)
        return ad.relu(ad.add(ad.matmul(cat, self.params["summarise.w"]),
                              self.params["summarise.b"]))

    def output(self, ctx, rows=None) -> ad.Tensor:
        """Classifier logits for the given step context."""
        feats = self._features(ctx, rows)
        return ad.add(ad.matmul(feats, self.params["out.w"]), self.params["out.b"])

    def policy_value(self, ctx):
        """Actor-critic heads: (action logits, state value)."""
        feats = self._features(ctx)
        logits = ad.add(ad.matmul(feats, self.params["policy.w"]), self.params["policy.b"])
        value = ad.add(ad.matmul(feats, self.params["value.w"]), self.params["value.b"])
        return logits, value

    def grads(self) -> dict:
        return {name: ad.grad_or_zeros(t) for name, t in self.params.items()}

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None


def build_network(spec: NetworkSpec, seed) -> Network:
    return Network(spec, seed)


# ---------------------------------------------------------------------------
# parameter checkpoints: "name rows[xcols] hex-of-little-endian-float64" lines
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = "lprnn-params 1"


def save_params(path, params: dict) -> None:
    with open(path, "w") as f:
        f.write(f"{CHECKPOINT_MAGIC} {len(params)}\n")
        for name, tensor in params.items():
            arr = tensor.data if isinstance(tensor, ad.Tensor) else np.asarray(tensor)
            shape = "x".join(str(d) for d in arr.shape)
            f.write(f"{name} {shape} {arr.astype('<f8').tobytes().hex()}\n")


def load_params(path) -> dict:
    with open(path) as f:
        header = f.readline().split()
        if " ".join(header[:2]) != CHECKPOINT_MAGIC:
            raise ValueError(f"not a parameter checkpoint: {path}")
        count = int(header[2])
        out = {}
        for _ in range(count):
            name, shape, hexdata = f.readline().split()
            dims = tuple(int(d) for d in shape.split("x")) if shape != "-" else ()
            arr = np.frombuffer(bytes.fromhex(hexdata), dtype="<f8").reshape(dims)
            out[name] = arr.astype(np.float64)
    return out


def restore_params(network: Network, saved: dict) -> None:
    for name, tensor in network.params.items():
        if name not in saved:
            raise ValueError(f"checkpoint missing parameter {name}")
        if saved[name].shape != tensor.data.shape:
            raise ValueError(f"checkpoint shape mismatch for {name}")
        tensor.data[...] = saved[name]
