"""Fully connected Q-network with hand-written backprop and Adam, in float64."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StaleCacheError(RuntimeError):
    pass


class ArchitectureError(ValueError):
    pass


@dataclass(eq=False)
class QNetwork:
    """ReLU MLP; ``weights[i]`` has shape (fan_in, fan_out)."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    version: int = 0  # bumped whenever parameters change

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)


def init_network(sizes, rng: np.random.Generator | int) -> QNetwork:
    """He-uniform weights and zero biases."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2:
        raise ArchitectureError("a network needs at least an input and an output layer")
    if min(sizes) < 1:
        raise ArchitectureError(f"zero-width layer in {sizes}")
    rng = np.random.default_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetwork(sizes, weights, biases)


@dataclass
class ForwardCache:
    net_id: int
    version: int
    activations: list[np.ndarray]  # input followed by each hidden activation
    pre: list[np.ndarray]  # hidden pre-activations


def forward(net: QNetwork, x: np.ndarray, cache: bool = False):
    """Q-values for a state (1-D) or a batch of states (2-D)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.sizes[0]:
        raise ArchitectureError(f"input has {h.shape[1]} features, network expects {net.sizes[0]}")
    acts, pres = [h], []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        if i < last:
            pres.append(z)
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    out = h[0] if single else h
    if cache:
        return out, ForwardCache(id(net), net.version, acts, pres)
    return out


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def backward(net: QNetwork, cache: ForwardCache, upstream: np.ndarray) -> list[np.ndarray]:
    """Gradients in ``net.params()`` order (W0, b0, W1, b1, ...)."""
    if cache.net_id != id(net) or cache.version != net.version:
        raise StaleCacheError("forward cache does not belong to the current parameters")
    g = np.asarray(upstream, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    grads: list[np.ndarray] = []
    for i in range(len(net.weights) - 1, -1, -1):
        a = cache.activations[i]
        grads.append(g.sum(axis=0))
        grads.append(a.T @ g)
        if i:
            g = (g @ net.weights[i].T) * (cache.pre[i - 1] > 0)
    grads.reverse()
    return grads


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_network(cls, net: QNetwork, lr: float = 3e-4, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in net.params()],
                   v=[np.zeros_like(p) for p in net.params()], **kw)


def adam_step(net: QNetwork, grads: list[np.ndarray], state: AdamState) -> None:
    """Bias-corrected Adam update applied in place."""
    params = net.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ArchitectureError("gradient shapes do not match the network")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    net.version += 1
    if not all(np.all(np.isfinite(p)) for p in params):
        raise FloatingPointError("non-finite parameters after Adam update")


def copy_params(src: QNetwork, dst: QNetwork) -> None:
    if src.sizes != dst.sizes:
        raise ArchitectureError(f"cannot copy {src.sizes} into {dst.sizes}")
    for s, d in zip(src.params(), dst.params()):
        d[...] = s
    dst.version += 1


def clone(net: QNetwork) -> QNetwork:
    return QNetwork(net.sizes, [w.copy() for w in net.weights], [b.copy() for b in net.biases])


def finite_difference_grads(net: QNetwork, x: np.ndarray, loss_fn, h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``loss_fn(forward(net, x))`` for every parameter."""
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up = loss_fn(forward(net, x))
            p[idx] = old - h
            down = loss_fn(forward(net, x))
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def gradient_check(net: QNetwork, x: np.ndarray, target: np.ndarray, h: float = 1e-5,
                   samples: int | None = None, rng: np.random.Generator | int = 0) -> float:
    """Max relative error between backprop and central differences of the MSE loss.

    With ``samples`` set, only that many randomly chosen entries per parameter
    array are differenced.
    """
    rng = np.random.default_rng(rng)
    pred, cache = forward(net, x, cache=True)
    _, upstream = mse_loss(pred, target)
    analytic = backward(net, cache, upstream)
    worst = 0.0
    for p, g in zip(net.params(), analytic):
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if samples is not None and samples < flat.size:
            idx = rng.choice(flat.size, size=samples, replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            up = mse_loss(forward(net, x), target)[0]
            flat[i] = old - h
            down = mse_loss(forward(net, x), target)[0]
            flat[i] = old
            num = (up - down) / (2 * h)
            a = g.reshape(-1)[i]
            worst = max(worst, abs(a - num) / max(abs(a) + abs(num), 1e-7))
    return worst
