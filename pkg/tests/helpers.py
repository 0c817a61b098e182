"""Independent oracles shared by the test modules."""

import numpy as np


def dense_oracle(weights, biases, x, output="identity", low=None, high=None):
    """Forward pass with explicit scalar loops, no numpy matmul."""
    h = [float(v) for v in x]
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        fan_in, fan_out = w.shape
        z = []
        for j in range(fan_out):
            acc = float(b[j])
            for i in range(fan_in):
                acc += h[i] * float(w[i, j])
            z.append(acc)
        h = [max(v, 0.0) for v in z] if k < last else z
    h = np.array(h)
    if output == "tanh":
        h = (high + low) / 2 + (high - low) / 2 * np.tanh(h)
    return h


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at array x (x is restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    """Normwise relative error: max|a-b| / max(max|a|, max|b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.abs(a - b).max() / scale)
