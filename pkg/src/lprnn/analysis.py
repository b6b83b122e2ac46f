"""Signal-processing views of the pool memories.

Impulse responses and their peak lags (the temporal-tiling evidence), the
upper-triangular diffusion-matrix form of the chain, the batched linear
operator built from its powers, and memory-content traces for strings fed
through a chain.

Two operator conventions exist because the chain recurrence and its
single-matrix form disagree about the input injection coefficient (a_1
versus 1-a_1). Both are kept; "canonical" matches the per-pool recurrence
used everywhere else and is the default. The two coincide exactly at b=2,
where a_1 = 1-a_1.
"""

import string
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .memory import pool_chain_step, random_orthonormal, smoothing_coefficients

CSV_SCHEMA = "lprnn-csv v1"


@dataclass
class ImpulseResponse:
    kind: str                 # chain | parallel
    base: float
    k: int
    horizon: int
    curves: np.ndarray        # (k, horizon); lag t is column t-1, lags start at 1

    def normalized(self) -> np.ndarray:
        """Per-pool curves scaled so each maximum is exactly 1."""
        peaks = self.curves.max(axis=1, keepdims=True)
        return self.curves / peaks


def impulse_response(kind: str, base: float, k: int, horizon: int) -> ImpulseResponse:
    """Feed a unit value then zeros into scalar pools, recording every lag."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if kind not in ("chain", "parallel"):
        raise ValueError(f"unknown memory kind {kind!r}")
    coeffs = smoothing_coefficients(base, k)
    x = np.zeros((horizon, 1))
    x[0, 0] = 1.0
    scan = _kernels.chain_scan if kind == "chain" else _kernels.parallel_scan
    curves = scan(x, coeffs)[:, :, 0].T.copy()
    return ImpulseResponse(kind, base, k, horizon, curves)


def peak_lags(resp: ImpulseResponse) -> np.ndarray:
    """Argmax lag per pool, ties resolved toward the smaller lag."""
    return np.argmax(resp.curves, axis=1) + 1


def streaming_peak_lags(base: float, k: int, horizon: int) -> np.ndarray:
    """Chain peak lags without storing curves; slow pools peak very late."""
    coeffs = smoothing_coefficients(base, k)
    lags, _ = _kernels.chain_peaks(coeffs, horizon)
    return lags


def peak_horizon(base: float, k: int) -> int:
    """A horizon safely past the slowest pool's peak (about the sum of the
    pools' time constants, doubled)."""
    total = sum(float(base) ** n for n in range(1, k + 1))
    return max(64, int(2.0 * total))


@dataclass
class DiffusionOperator:
    """Linear form of the chain on scalar inputs: Y_t = x_t*A + Y_{t-1}@M."""

    base: float
    k: int
    convention: str           # canonical | appendix
    M: np.ndarray             # (k, k) upper triangular
    A: np.ndarray             # (k,) injection row


def diffusion_operator(base: float, k: int, convention: str = "canonical") -> DiffusionOperator:
    if base <= 1.0:
        raise ValueError("decay base must exceed 1")
    if k < 1:
        raise ValueError("pool count must be at least 1")
    if convention not in ("canonical", "appendix"):
        raise ValueError(f"unknown convention {convention!r}")
    b = float(base)
    m = np.zeros((k, k))
    for i in range(1, k + 1):
        prod = 1.0
        for j in range(i, k + 1):
            if j > i:
                prod *= b ** -j
            m[i - 1, j - 1] = (1.0 - b ** -i) * prod
    if convention == "canonical":
        a = np.cumprod(b ** -np.arange(1.0, k + 1.0))
    else:
        a = m[0].copy()
    return DiffusionOperator(b, k, convention, m, a)


def batch_operator(op: DiffusionOperator, n_steps: int) -> np.ndarray:
    """J whose row r (1-indexed) is A @ M^(r-1); maps reversed inputs to Y_T."""
    j = np.empty((n_steps, op.k))
    row = op.A.copy()
    for r in range(n_steps):
        j[r] = row
        row = row @ op.M
    return j


def step_recurrence(op: DiffusionOperator, xs: np.ndarray) -> np.ndarray:
    """Final pool contents by stepping the convention's own recurrence."""
    xs = np.asarray(xs, dtype=np.float64)
    if op.convention == "canonical":
        coeffs = smoothing_coefficients(op.base, op.k)
        state = np.zeros((op.k, 1))
        for x in xs:
            state = pool_chain_step(state, np.array([x]), coeffs)
        return state[:, 0].copy()
    y = np.zeros(op.k)
    x_vec = np.zeros(op.k)
    for x in xs:
        x_vec[0] = x
        y = (x_vec + y) @ op.M
    return y


def batch_apply(op: DiffusionOperator, xs: np.ndarray):
    """(Y_T, J): apply the whole input sequence as one linear map."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 1:
        raise ValueError("batch_apply expects a scalar sequence")
    j = batch_operator(op, len(xs))
    return xs[::-1] @ j, j


# ---------------------------------------------------------------------------
# memory-content traces
# ---------------------------------------------------------------------------

TRACE_ALPHABET = string.ascii_lowercase


def encode_text(text: str, alphabet: str = TRACE_ALPHABET) -> np.ndarray:
    """One-hot rows for each character; unknown characters are an error."""
    lookup = {ch: i for i, ch in enumerate(alphabet)}
    rows = np.zeros((len(text), len(alphabet)))
    for t, ch in enumerate(text):
        if ch not in lookup:
            raise ValueError(f"symbol {ch!r} not in the trace alphabet")
        rows[t, lookup[ch]] = 1.0
    return rows


def memory_trace(text: str, base: float = 2.0, k: int = 6, tail: int = 0,
                 inter_pool: str = "identity", seed: int = 0,
                 alphabet: str = TRACE_ALPHABET) -> np.ndarray:
    """Pool contents per timestep as text feeds in one-hot, then `tail`
    zero-input steps. Rows are timesteps, columns the k pools concatenated."""
    coeffs = smoothing_coefficients(base, k)
    x = encode_text(text, alphabet)
    total = len(text) + tail
    d = len(alphabet)
    if total == 0:
        return np.zeros((0, k * d))
    full = np.zeros((total, d))
    full[:len(text)] = x
    if inter_pool == "identity":
        pools = _kernels.chain_scan(full, coeffs)
        return pools.reshape(total, k * d)
    if inter_pool != "orthonormal_tanh":
        raise ValueError(f"unknown inter-pool transform {inter_pool!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    qs = [random_orthonormal(d, rng) for _ in range(k - 1)]
    out = np.zeros((total, k, d))
    state = np.zeros((k, d))
    for t in range(total):
        prev = full[t]
        for n in range(k):
            incoming = prev if n == 0 else np.tanh(qs[n - 1] @ prev)
            state[n] = coeffs[n] * incoming + (1.0 - coeffs[n]) * state[n]
            prev = state[n]
        out[t] = state
    return out.reshape(total, k * d)


def trace_difference(text_a: str, text_b: str, **kwargs) -> np.ndarray:
    """Absolute difference of two traces (inputs must be the same length)."""
    if len(text_a) != len(text_b):
        raise ValueError("difference traces need equal-length inputs")
    a = memory_trace(text_a, **kwargs)
    b = memory_trace(text_b, **kwargs)
    return np.abs(a - b)


# ---------------------------------------------------------------------------
# artifact emission
# ---------------------------------------------------------------------------

def write_impulse_csv(path, resp: ImpulseResponse) -> None:
    norm = resp.normalized()
    with open(path, "w") as f:
        f.write(f"# {CSV_SCHEMA} impulse kind={resp.kind} base={resp.base} k={resp.k}\n")
        f.write("pool,lag,value,normalized_value\n")
        for n in range(resp.k):
            for t in range(resp.horizon):
                f.write(f"{n + 1},{t + 1},{float(resp.curves[n, t])!r},{float(norm[n, t])!r}\n")


def write_matrix_csv(path, matrix: np.ndarray, kind: str) -> None:
    matrix = np.atleast_2d(matrix)
    with open(path, "w") as f:
        f.write(f"# {CSV_SCHEMA} {kind} rows={matrix.shape[0]} cols={matrix.shape[1]}\n")
        for row in matrix:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as f:
        header = f.readline()
        if not header.startswith(f"# {CSV_SCHEMA}"):
            raise ValueError(f"not a matrix csv: {path}")
        rows = [[float(v) for v in line.split(",")] for line in f if line.strip()]
    return np.array(rows)


def write_pgm(path, matrix: np.ndarray) -> None:
    """Plain-text grayscale dump; dark = large magnitude."""
    matrix = np.atleast_2d(np.abs(matrix))
    peak = matrix.max()
    scaled = np.zeros_like(matrix) if peak == 0 else matrix / peak
    pixels = (255 - np.round(scaled * 255)).astype(int)
    h, w = pixels.shape
    with open(path, "w") as f:
        f.write(f"P2\n{w} {h}\n255\n")
        for row in pixels:
            f.write(" ".join(str(int(v)) for v in row) + "\n")
