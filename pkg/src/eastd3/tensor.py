"""Dense fp64 MLPs with hand-written reverse-mode gradients, Adam, and checkpoints.

Networks take either a single vector ``(in,)`` or a batch ``(B, in)``.  The
backward pass returns the gradient of ``sum(upstream * y)`` with respect to
every parameter and to the input, so losses choose their own reduction by
scaling ``upstream``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

OUTPUT_ACTIVATIONS = ("identity", "tanh")


class ShapeError(ValueError):
    """Input or parameter shapes do not match the network architecture."""


class Mlp:
    """Feed-forward net: ReLU hidden layers, identity or bounded-tanh output.

    Weights are stored ``(fan_in, fan_out)`` so a batch forward is ``x @ W + b``.
    With ``output="tanh"`` the output is ``center + half_range * tanh(z)``,
    mapping onto ``[low, high]``.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        output: str = "identity",
        low: np.ndarray | None = None,
        high: np.ndarray | None = None,
    ):
        sizes = tuple(int(n) for n in layer_sizes)
        if len(sizes) < 2 or any(n <= 0 for n in sizes):
            raise ShapeError(f"layer_sizes must hold >= 2 positive ints, got {sizes}")
        if output not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {output!r}")
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ShapeError("need one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ShapeError(
                    f"layer {i}: got W{w.shape} b{b.shape}, "
                    f"expected W{(sizes[i], sizes[i + 1])} b{(sizes[i + 1],)}"
                )
        self.layer_sizes = sizes
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.output = output
        if output == "tanh":
            if low is None or high is None:
                raise ValueError("tanh output needs action bounds")
            low = np.broadcast_to(np.asarray(low, dtype=np.float64), (sizes[-1],)).copy()
            high = np.broadcast_to(np.asarray(high, dtype=np.float64), (sizes[-1],)).copy()
            if not np.all(low < high):
                raise ValueError("require low < high elementwise")
            self.low, self.high = low, high
            self._center = (high + low) / 2.0
            self._half = (high - low) / 2.0
        else:
            self.low = self.high = None

    # -- construction -----------------------------------------------------
    @classmethod
    def random(cls, layer_sizes, rng: np.random.Generator, output="identity", low=None, high=None):
        """Weights and biases uniform in +-1/sqrt(fan_in)."""
        sizes = tuple(int(n) for n in layer_sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes, weights, biases, output, low, high)

    @classmethod
    def zeros(cls, layer_sizes, output="identity", low=None, high=None):
        sizes = tuple(int(n) for n in layer_sizes)
        weights = [np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(o) for o in sizes[1:]]
        return cls(sizes, weights, biases, output, low, high)

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output,
            self.low,
            self.high,
        )

    # -- parameters -------------------------------------------------------
    @property
    def params(self) -> list[np.ndarray]:
        """Parameter arrays layer-major, weights then biases (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self) -> int:
        return param_count(self.layer_sizes)

    def same_architecture(self, other: "Mlp") -> bool:
        return self.layer_sizes == other.layer_sizes and self.output == other.output

    # -- forward / backward -----------------------------------------------
    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise ShapeError(f"expected input dim {self.layer_sizes[0]}, got shape {x.shape}")
        return x, single

    def forward(self, x, batch_invariant: bool = False) -> np.ndarray:
        """Evaluate the net.

        BLAS results for a row can depend on which other rows share the call.
        ``batch_invariant=True`` uses a plain summation loop instead, so each
        row's output is bit-identical however the batch is composed.
        """
        y, _ = self.forward_cached(x, batch_invariant)
        return y

    __call__ = forward

    def forward_cached(self, x, batch_invariant: bool = False):
        """Forward pass that also returns the activations needed by :meth:`backward`."""
        h, single = self._check_input(x)
        inputs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = (np.einsum("bi,io->bo", h, w) if batch_invariant else h @ w) + b
            h = np.maximum(z, 0.0) if i < last else z
        if self.output == "tanh":
            t = np.tanh(h)
            y = np.clip(self._center + self._half * t, self.low, self.high)
        else:
            t = None
            y = h
        cache = (inputs, t, single)
        return (y[0] if single else y), cache

    def backward(self, cache, upstream):
        """Return ``(param_grads, input_grad)`` for ``sum(upstream * y)``.

        ``param_grads`` follows :attr:`params` order.
        """
        inputs, t, single = cache
        g = np.asarray(upstream, dtype=np.float64)
        if single:
            g = g[None, :] if g.ndim == 1 else g
        expected = (inputs[0].shape[0], self.layer_sizes[-1])
        if g.shape != expected:
            raise ShapeError(f"upstream shape {g.shape} does not match output {expected}")
        if t is not None:
            g = g * self._half * (1.0 - t * t)
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        for i in range(len(self.weights) - 1, -1, -1):
            h = inputs[i]
            grads[2 * i] = h.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (h > 0.0)
        return grads, (g[0] if single else g)


def mlp_forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def mlp_backward(net: Mlp, x, upstream):
    """Gradients of ``sum(upstream * net(x))`` w.r.t. parameters and ``x``."""
    _, cache = net.forward_cached(x)
    return net.backward(cache, upstream)


def param_count(layer_sizes: Sequence[int]) -> int:
    return sum((i + 1) * o for i, o in zip(layer_sizes[:-1], layer_sizes[1:]))


def flatten_params(net: Mlp) -> np.ndarray:
    return np.concatenate([p.ravel() for p in net.params])


def unflatten_params(vec, template: Mlp) -> Mlp:
    """Build a net shaped like ``template`` from a flat parameter vector."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (template.n_params,):
        raise ShapeError(f"expected {template.n_params} parameters, got {vec.shape}")
    weights, biases = [], []
    pos = 0
    for i, o in zip(template.layer_sizes[:-1], template.layer_sizes[1:]):
        weights.append(vec[pos : pos + i * o].reshape(i, o).copy())
        pos += i * o
        biases.append(vec[pos : pos + o].copy())
        pos += o
    return Mlp(template.layer_sizes, weights, biases, template.output, template.low, template.high)


def load_flat_params(net: Mlp, vec) -> None:
    """Overwrite ``net``'s parameters in place from a flat vector."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (net.n_params,):
        raise ShapeError(f"expected {net.n_params} parameters, got {vec.shape}")
    pos = 0
    for p in net.params:
        p[...] = vec[pos : pos + p.size].reshape(p.shape)
        pos += p.size


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("mse of empty input")
    return float(np.mean((pred - target) ** 2))


def soft_update(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """Polyak-average ``source`` into ``target`` in place and return it."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if not target.same_architecture(source):
        raise ShapeError("soft_update needs identical architectures")
    for t, s in zip(target.params, source.params):
        if tau == 1.0:
            t[...] = s
        else:
            t += tau * (s - t)
    return target


@dataclass
class AdamState:
    """Adam moments for one list of parameter arrays."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]):
    """One bias-corrected Adam descent step, updating ``params`` in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeError("params, grads and Adam moments must align")
    for k, (p, g, m) in enumerate(zip(params, grads, state.m)):
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeError(f"array {k}: param {p.shape}, grad {g.shape}, moment {m.shape}")
        if not np.all(np.isfinite(g)):
            bad = np.unravel_index(np.argmax(~np.isfinite(g)), g.shape)
            raise FloatingPointError(f"non-finite gradient in array {k} at index {tuple(int(i) for i in bad)}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# -- checkpoints ------------------------------------------------------------
def save_mlp(net: Mlp, path) -> None:
    """Header line ``mlp <n_layers> <sizes...>`` then raw little-endian fp64 params."""
    header = "mlp {} {}\n".format(len(net.weights), " ".join(str(n) for n in net.layer_sizes))
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        for p in net.params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_mlp(path, output="identity", low=None, high=None) -> Mlp:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    fields = data[:nl].decode("utf-8").split()
    if not fields or fields[0] != "mlp":
        raise ValueError(f"{path}: not an mlp checkpoint")
    n_layers = int(fields[1])
    sizes = [int(s) for s in fields[2:]]
    if len(sizes) != n_layers + 1:
        raise ValueError(f"{path}: header lists {len(sizes)} sizes for {n_layers} layers")
    flat = np.frombuffer(data, dtype="<f8", offset=nl + 1).astype(np.float64)
    template = Mlp.zeros(sizes, output, low, high)
    return unflatten_params(flat, template)
