"""Reverse-mode automatic differentiation over dense float64 arrays.

The graph is built eagerly: every operation computes its value on creation
and records its parents plus a backward closure, so a fresh graph exists per
training chunk or rollout (which is exactly what truncated backpropagation
needs - state entering a chunk is a plain leaf and gradients stop there).
``backward`` walks the recorded graph once in reverse topological order.

All values are checked for NaN/Inf as they are produced; a non-finite
intermediate raises :class:`NonFiniteError` immediately.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class NonFiniteError(FloatingPointError):
    """A forward value or gradient contains NaN or Inf."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if not arr.flags.c_contiguous:  # ascontiguousarray would promote 0-d to 1-d
        arr = np.ascontiguousarray(arr)
    return arr


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by {what}")


class Tensor:
    """A node in the computation graph: a float64 array plus backward hooks."""

    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, _parents=(), _bwd=None):
        self.data = _as_array(data)
        self.grad = None
        self._parents = _parents
        self._bwd = _bwd

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__


def constant(data) -> Tensor:
    """Leaf tensor; gradients may reach it but stop there."""
    return Tensor(data)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
    else:
        t.grad += g


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shapes {a.data.shape} x {b.data.shape}")
    out_data = a.data @ b.data
    _check_finite(out_data, "matmul")
    out = Tensor(out_data, (a, b))

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out._bwd = bwd
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also accepts a rank-1 bias broadcast over rows."""
    a, b = _lift(a), _lift(b)
    bias = a.data.ndim == 2 and b.data.ndim == 1
    if not bias and a.data.shape != b.data.shape:
        raise ValueError(f"add shapes {a.data.shape} + {b.data.shape}")
    if bias and a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"bias add shapes {a.data.shape} + {b.data.shape}")
    out_data = a.data + b.data
    _check_finite(out_data, "add")
    out = Tensor(out_data, (a, b))

    def bwd(g):
        _accum(a, g)
        _accum(b, g.sum(axis=0) if bias else g)

    out._bwd = bwd
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shapes {a.data.shape} - {b.data.shape}")
    out_data = a.data - b.data
    _check_finite(out_data, "sub")
    out = Tensor(out_data, (a, b))

    def bwd(g):
        _accum(a, g)
        _accum(b, -g)

    out._bwd = bwd
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shapes {a.data.shape} * {b.data.shape}")
    out_data = a.data * b.data
    _check_finite(out_data, "mul")
    out = Tensor(out_data, (a, b))

    def bwd(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    out._bwd = bwd
    return out


def scale(a: Tensor, s: float) -> Tensor:
    a = _lift(a)
    out_data = a.data * s
    _check_finite(out_data, "scale")
    out = Tensor(out_data, (a,))

    def bwd(g):
        _accum(a, g * s)

    out._bwd = bwd
    return out


def lerp(new: Tensor, old: Tensor, a: float) -> Tensor:
    """a*new + (1-a)*old; the pool update primitive."""
    new, old = _lift(new), _lift(old)
    if new.data.shape != old.data.shape:
        raise ValueError(f"lerp shapes {new.data.shape} vs {old.data.shape}")
    out_data = _kernels.lerp(new.data, old.data, a)
    _check_finite(out_data, "lerp")
    out = Tensor(out_data, (new, old))

    def bwd(g):
        _accum(new, g * a)
        _accum(old, g * (1.0 - a))

    out._bwd = bwd
    return out


def tanh(a: Tensor) -> Tensor:
    a = _lift(a)
    t = np.tanh(a.data)
    _check_finite(t, "tanh")
    out = Tensor(t, (a,))

    def bwd(g):
        _accum(a, g * (1.0 - t * t))

    out._bwd = bwd
    return out


def sigmoid(a: Tensor) -> Tensor:
    a = _lift(a)
    x = a.data
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    _check_finite(s, "sigmoid")
    out = Tensor(s, (a,))

    def bwd(g):
        _accum(a, g * s * (1.0 - s))

    out._bwd = bwd
    return out


def relu(a: Tensor) -> Tensor:
    a = _lift(a)
    out_data = np.maximum(a.data, 0.0)
    _check_finite(out_data, "relu")
    out = Tensor(out_data, (a,))

    def bwd(g):
        _accum(a, g * (a.data > 0.0))

    out._bwd = bwd
    return out


def concat_cols(parts) -> Tensor:
    parts = [_lift(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=1)
    out = Tensor(out_data, tuple(parts))
    widths = [p.data.shape[1] for p in parts]

    def bwd(g):
        lo = 0
        for p, w in zip(parts, widths):
            _accum(p, g[:, lo:lo + w])
            lo += w

    out._bwd = bwd
    return out


def concat_rows(parts) -> Tensor:
    parts = [_lift(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=0)
    out = Tensor(out_data, tuple(parts))
    heights = [p.data.shape[0] for p in parts]

    def bwd(g):
        lo = 0
        for p, h in zip(parts, heights):
            _accum(p, g[lo:lo + h])
            lo += h

    out._bwd = bwd
    return out


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    a = _lift(a)
    if not (0 <= lo < hi <= a.data.shape[1]):
        raise ValueError(f"slice [{lo}:{hi}] of width {a.data.shape[1]}")
    out = Tensor(a.data[:, lo:hi], (a,))

    def bwd(g):
        full = np.zeros_like(a.data)
        full[:, lo:hi] = g
        _accum(a, full)

    out._bwd = bwd
    return out


def take_rows(a: Tensor, idx) -> Tensor:
    """Gather rows by integer index; the one-hot projection in disguise."""
    a = _lift(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(a.data[idx], (a,))

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accum(a, full)

    out._bwd = bwd
    return out


def stop_gradient(a: Tensor) -> Tensor:
    """Pass the value forward, propagate zero gradient backward."""
    a = _lift(a)
    return Tensor(a.data, (), None)


def sum_all(a: Tensor) -> Tensor:
    a = _lift(a)
    out = Tensor(a.data.sum(), (a,))

    def bwd(g):
        _accum(a, np.full_like(a.data, float(g)))

    out._bwd = bwd
    return out


def mean_all(a: Tensor) -> Tensor:
    a = _lift(a)
    n = a.data.size
    out = Tensor(a.data.sum() / n, (a,))

    def bwd(g):
        _accum(a, np.full_like(a.data, float(g) / n))

    out._bwd = bwd
    return out


def _row_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: Tensor, labels, weights=None) -> Tensor:
    """Mean over rows of w_i * cross-entropy(softmax(logits_i), labels_i).

    labels are integer class ids; weights (optional) are per-row constants,
    which is how the policy-gradient term reuses this op (weight = advantage).
    """
    logits = _lift(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise ValueError(f"xent shapes {logits.data.shape} labels {labels.shape}")
    n, _ = logits.data.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    p = _row_softmax(logits.data)
    picked = p[np.arange(n), labels]
    losses = -np.log(np.maximum(picked, 1e-300))
    out_data = np.asarray((w * losses).mean())
    _check_finite(out_data, "softmax_xent")
    out = Tensor(out_data, (logits,))

    def bwd(g):
        gz = p.copy()
        gz[np.arange(n), labels] -= 1.0
        gz *= (float(g) / n) * w[:, None]
        _accum(logits, gz)

    out._bwd = bwd
    return out


def entropy_mean(logits: Tensor) -> Tensor:
    """Mean over rows of the softmax entropy; the exploration bonus."""
    logits = _lift(logits)
    p = _row_softmax(logits.data)
    logp = np.log(np.maximum(p, 1e-300))
    h = -(p * logp).sum(axis=1)
    out = Tensor(np.asarray(h.mean()), (logits,))
    n = logits.data.shape[0]

    def bwd(g):
        # dH/dz_k = -p_k (log p_k + H)
        gz = -p * (logp + h[:, None]) * (float(g) / n)
        _accum(logits, gz)

    out._bwd = bwd
    return out


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def _toposort(root: Tensor):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable node."""
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    order = _toposort(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


def grad_or_zeros(t: Tensor) -> np.ndarray:
    """A parameter reachable only through stop-gradient gets exactly zero."""
    return np.zeros_like(t.data) if t.grad is None else t.grad


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Bias-corrected Adam accumulators, keyed like the parameter dict."""

    alpha: float
    eps: float
    beta1: float = 0.9
    beta2: float = 0.999
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, clip_norm: float | None = None) -> None:
    """One Adam update in place. clip_norm, if set, rescales the global norm."""
    if clip_norm is not None:
        total = 0.0
        for g in grads.values():
            total += float((g * g).sum())
        norm = np.sqrt(total)
        if norm > clip_norm:
            factor = clip_norm / norm
            grads = {k: g * factor for k, g in grads.items()}
    state.step += 1
    t = state.step
    lr_t = state.alpha * np.sqrt(1.0 - state.beta2 ** t) / (1.0 - state.beta1 ** t)
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        _kernels.adam_update(p.data, g, state.m[name], state.v[name],
                             lr_t, state.beta1, state.beta2, state.eps)
        _check_finite(p.data, f"adam update of {name}")


# ---------------------------------------------------------------------------
# finite-difference checking
# ---------------------------------------------------------------------------

def gradient_check(fn, inputs, h: float = 1e-6) -> float:
    """Max relative error between backward() and central finite differences.

    fn maps a list of Tensors to a scalar Tensor and must be deterministic.
    The relative error denominator is clamped at 1e-3 so near-zero gradient
    entries are compared on an absolute scale.
    """
    if h <= 0:
        raise ValueError("perturbation h must be positive")
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    tensors = [Tensor(x) for x in arrays]
    loss = fn(tensors)
    backward(loss)
    analytic = [grad_or_zeros(t) for t in tensors]

    worst = 0.0
    for i, x in enumerate(arrays):
        flat = x.ravel()
        num = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            f_plus = float(fn([Tensor(a) for a in arrays]).data)
            flat[j] = orig - h
            f_minus = float(fn([Tensor(a) for a in arrays]).data)
            flat[j] = orig
            num[j] = (f_plus - f_minus) / (2.0 * h)
        a = analytic[i].ravel()
        denom = np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-3)
        err = float((np.abs(a - num) / denom).max()) if flat.size else 0.0
        worst = max(worst, err)
    return worst
