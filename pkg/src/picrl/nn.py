"""Small dense networks with hand-written backward passes, Adam, and target updates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from picrl.utils.validation import check_rng

ACTIVATIONS = ("relu", "tanh", "softmax", "none")


class DenseNet:
    """Feed-forward net ``x -> act_k(... act_1(x W_1 + b_1) ...)``.

    ``sizes`` lists layer widths including input and output; ``activations`` has
    one tag per affine layer. Weights are stored as (fan_in, fan_out) matrices.
    """

    def __init__(self, sizes, activations, seed=None):
        sizes = [int(s) for s in sizes]
        activations = list(activations)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if len(activations) != len(sizes) - 1:
            raise ValueError("need exactly one activation per layer")
        for i, act in enumerate(activations):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            if act == "softmax" and i != len(activations) - 1:
                raise ValueError("softmax is only allowed on the final layer")
        self.sizes = sizes
        self.activations = activations
        rng = check_rng(seed)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-lim, lim, size=fan_out))

    @property
    def params(self) -> list:
        """Parameter arrays in a fixed order: W_0, b_0, W_1, b_1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def param_names(self) -> list:
        names = []
        for i in range(len(self.weights)):
            names += [f"layer{i}.weight", f"layer{i}.bias"]
        return names

    def same_architecture(self, other: "DenseNet") -> bool:
        return self.sizes == other.sizes and self.activations == other.activations

    def forward(self, x):
        """Return ``(output, cache)``; ``x`` is one input vector or a batch."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input has {x.shape[1]} features, net expects {self.sizes[0]}")
        inputs, outs = [], []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(h)
            z = h @ w + b
            if act == "relu":
                h = np.maximum(z, 0.0)
            elif act == "tanh":
                h = np.tanh(z)
            elif act == "softmax":
                e = np.exp(z - z.max(axis=1, keepdims=True))
                h = e / e.sum(axis=1, keepdims=True)
            else:
                h = z
            outs.append(h)
        cache = {"inputs": inputs, "outputs": outs, "squeeze": squeeze}
        return (h[0] if squeeze else h), cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Reverse-mode pass. Returns ``(param_grads, grad_input)``.

        ``param_grads`` follows the order of :attr:`params`.
        """
        g = np.asarray(grad_out, dtype=float)
        if cache["squeeze"] and g.ndim == 1:
            g = g[None, :]
        if g.shape != cache["outputs"][-1].shape:
            raise ValueError(f"output gradient shape {g.shape} != {cache['outputs'][-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            act, out = self.activations[i], cache["outputs"][i]
            if act == "relu":
                g = g * (out > 0)
            elif act == "tanh":
                g = g * (1.0 - out ** 2)
            elif act == "softmax":
                g = out * (g - np.sum(g * out, axis=1, keepdims=True))
            grads[2 * i] = cache["inputs"][i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, (g[0] if cache["squeeze"] else g)

    def copy(self) -> "DenseNet":
        clone = DenseNet.__new__(DenseNet)
        clone.sizes = list(self.sizes)
        clone.activations = list(self.activations)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "activations": self.activations,
            "params": [p.ravel().tolist() for p in self.params],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseNet":
        net = cls.__new__(cls)
        net.sizes = [int(s) for s in data["sizes"]]
        net.activations = list(data["activations"])
        flat = data["params"]
        net.weights, net.biases = [], []
        for i, (fi, fo) in enumerate(zip(net.sizes[:-1], net.sizes[1:])):
            net.weights.append(np.array(flat[2 * i], dtype=float).reshape(fi, fo))
            net.biases.append(np.array(flat[2 * i + 1], dtype=float).reshape(fo))
        return net

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def forward(net: DenseNet, x):
    return net.forward(x)


def backward(net: DenseNet, cache, grad_out):
    return net.backward(cache, grad_out)


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])

    def to_dict(self) -> dict:
        return {"m": [a.ravel().tolist() for a in self.m], "v": [a.ravel().tolist() for a in self.v],
                "shapes": [list(a.shape) for a in self.m], "step": self.step,
                "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    @classmethod
    def from_dict(cls, data: dict) -> "AdamState":
        shapes = data["shapes"]
        m = [np.array(a, dtype=float).reshape(s) for a, s in zip(data["m"], shapes)]
        v = [np.array(a, dtype=float).reshape(s) for a, s in zip(data["v"], shapes)]
        return cls(m, v, data["step"], data["beta1"], data["beta2"], data["eps"])


def adam_step(params, grads, lr: float, state: AdamState, names=None):
    """In-place Adam update with bias correction; returns ``params``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and Adam state must have the same length")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ValueError(f"gradient {i} has shape {g.shape}, parameter has {params[i].shape}")
        if not np.all(np.isfinite(g)):
            label = names[i] if names else f"tensor {i}"
            raise FloatingPointError(f"non-finite gradient in {label}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


@dataclass
class Optimizer:
    """A network bundled with its Adam state and learning rate."""

    net: DenseNet
    lr: float
    state: AdamState = field(default=None)

    def __post_init__(self):
        if self.state is None:
            self.state = AdamState.like(self.net.params)

    def step(self, grads):
        adam_step(self.net.params, grads, self.lr, self.state, self.net.param_names())


def soft_update(target: DenseNet, online: DenseNet, sigma: float) -> DenseNet:
    """``target <- sigma * online + (1 - sigma) * target`` elementwise, in place."""
    if not target.same_architecture(online):
        raise ValueError("target and online networks differ in architecture")
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")
    for t, o in zip(target.params, online.params):
        t *= 1.0 - sigma
        t += sigma * o
    return target


def hard_update(target: DenseNet, online: DenseNet) -> DenseNet:
    if not target.same_architecture(online):
        raise ValueError("target and online networks differ in architecture")
    for t, o in zip(target.params, online.params):
        t[...] = o
    return target


def mlp(in_dim: int, out_dim: int, hidden=(64, 64), out_activation="none", seed=None) -> DenseNet:
    """ReLU MLP with the given head activation."""
    sizes = [in_dim, *hidden, out_dim]
    acts = ["relu"] * len(hidden) + [out_activation]
    return DenseNet(sizes, acts, seed=seed)
