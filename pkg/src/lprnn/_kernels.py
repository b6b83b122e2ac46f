"""Hot numeric kernels.

The recurrence scans and the optimizer inner loop dominate runtime, so they
are compiled with numba when available. Setting the environment variable
``LPRNN_PURE_NUMPY=1`` (or numba being absent) selects a pure numpy/scipy
fallback with identical semantics. ``benchmarks/bench_kernels.py`` compares
the two paths.
"""

import os

import numpy as np

PURE_NUMPY_ENV = "LPRNN_PURE_NUMPY"


def _numba_wanted() -> bool:
    return os.environ.get(PURE_NUMPY_ENV, "").strip().lower() not in ("1", "true", "yes")


USING_NUMBA = False
if _numba_wanted():
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False


# ---------------------------------------------------------------------------
# jit-compilable loop implementations
# ---------------------------------------------------------------------------

def _chain_scan_loop(x, coeffs):
    # x: (T, D) inputs, coeffs: (k,) per-pool smoothing fractions.
    # Pool n filters the *already updated* pool n-1 within the same step.
    T, D = x.shape
    k = coeffs.shape[0]
    out = np.empty((T, k, D))
    state = np.zeros((k, D))
    for t in range(T):
        for d in range(D):
            prev = x[t, d]
            for n in range(k):
                a = coeffs[n]
                v = a * prev + (1.0 - a) * state[n, d]
                state[n, d] = v
                prev = v
        out[t] = state
    return out


def _parallel_scan_loop(x, coeffs):
    # Every pool filters the raw input independently.
    T, D = x.shape
    k = coeffs.shape[0]
    out = np.empty((T, k, D))
    state = np.zeros((k, D))
    for t in range(T):
        for d in range(D):
            for n in range(k):
                a = coeffs[n]
                state[n, d] = a * x[t, d] + (1.0 - a) * state[n, d]
        out[t] = state
    return out


def _chain_peaks_loop(coeffs, horizon):
    # Streaming impulse-response argmax per pool; O(k) memory so very long
    # horizons (slow pools peak late) stay cheap. Lag counting starts at 1.
    k = coeffs.shape[0]
    state = np.zeros(k)
    best_val = np.full(k, -1.0)
    best_lag = np.zeros(k, dtype=np.int64)
    for t in range(1, horizon + 1):
        prev = 1.0 if t == 1 else 0.0
        for n in range(k):
            a = coeffs[n]
            v = a * prev + (1.0 - a) * state[n]
            state[n] = v
            prev = v
            if v > best_val[n]:
                best_val[n] = v
                best_lag[n] = t
    return best_lag, best_val


def _lerp_loop(x, y, a):
    # a*x + (1-a)*y with one temporary instead of three; inputs contiguous.
    out = np.empty(x.shape)
    xf = x.ravel()
    yf = y.ravel()
    of = out.ravel()
    b = 1.0 - a
    for i in range(of.shape[0]):
        of[i] = a * xf[i] + b * yf[i]
    return out


def _adam_update_loop(p, g, m, v, lr_t, beta1, beta2, eps):
    # In-place bias-corrected Adam step; lr_t = alpha * sqrt(1-b2^t)/(1-b1^t).
    pf = p.ravel()
    gf = g.ravel()
    mf = m.ravel()
    vf = v.ravel()
    for i in range(pf.shape[0]):
        mf[i] = beta1 * mf[i] + (1.0 - beta1) * gf[i]
        vf[i] = beta2 * vf[i] + (1.0 - beta2) * gf[i] * gf[i]
        pf[i] -= lr_t * mf[i] / (np.sqrt(vf[i]) + eps)


# ---------------------------------------------------------------------------
# pure numpy/scipy fallbacks
# ---------------------------------------------------------------------------

def _ema_filter(x, a, y_prev):
    """One exponential-smoothing pass along axis 0, carrying the last output."""
    from scipy.signal import lfilter

    y, _ = lfilter([a], [1.0, -(1.0 - a)], x, axis=0, zi=y_prev[None, :] * (1.0 - a))
    return y, y[-1]


def _chain_scan_numpy(x, coeffs):
    T, D = x.shape
    k = coeffs.shape[0]
    out = np.empty((T, k, D))
    signal = x
    for n in range(k):
        signal, _ = _ema_filter(signal, float(coeffs[n]), np.zeros(D))
        out[:, n, :] = signal
    return out


def _parallel_scan_numpy(x, coeffs):
    T, D = x.shape
    k = coeffs.shape[0]
    out = np.empty((T, k, D))
    for n in range(k):
        out[:, n, :], _ = _ema_filter(x, float(coeffs[n]), np.zeros(D))
    return out


def _chain_peaks_numpy(coeffs, horizon, block=65536):
    k = coeffs.shape[0]
    best_val = np.full(k, -1.0)
    best_lag = np.zeros(k, dtype=np.int64)
    states = [np.zeros(1) for _ in range(k)]
    done = 0
    while done < horizon:
        n_steps = min(block, horizon - done)
        signal = np.zeros((n_steps, 1))
        if done == 0:
            signal[0, 0] = 1.0
        for n in range(k):
            signal, states[n] = _ema_filter(signal, float(coeffs[n]), states[n])
            i = int(np.argmax(signal[:, 0]))
            if signal[i, 0] > best_val[n]:
                best_val[n] = signal[i, 0]
                best_lag[n] = done + i + 1
        done += n_steps
    return best_lag, best_val


def _lerp_numpy(x, y, a):
    return a * x + (1.0 - a) * y


def _adam_update_numpy(p, g, m, v, lr_t, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= lr_t * m / (np.sqrt(v) + eps)


if USING_NUMBA:
    chain_scan = njit(cache=True)(_chain_scan_loop)
    parallel_scan = njit(cache=True)(_parallel_scan_loop)
    chain_peaks = njit(cache=True)(_chain_peaks_loop)
    lerp = njit(cache=True)(_lerp_loop)
    adam_update = njit(cache=True)(_adam_update_loop)
else:
    chain_scan = _chain_scan_numpy
    parallel_scan = _parallel_scan_numpy
    chain_peaks = _chain_peaks_numpy
    lerp = _lerp_numpy
    adam_update = _adam_update_numpy

FALLBACKS = {
    "chain_scan": _chain_scan_numpy,
    "parallel_scan": _parallel_scan_numpy,
    "chain_peaks": _chain_peaks_numpy,
    "lerp": _lerp_numpy,
    "adam_update": _adam_update_numpy,
}
