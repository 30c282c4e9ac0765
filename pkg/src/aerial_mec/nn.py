"""Minimal fully-connected networks with hand-written backprop and Adam."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

CHECKPOINT_FORMAT_VERSION = 1
ACTIVATIONS = ("relu", "sigmoid", "identity")


class StaleCacheError(RuntimeError):
    """Backward pass requested with a cache from before the last parameter change."""


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # split form avoids overflow for large |z|
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activation_grad(name, z, a, grad):
    if name == "relu":
        return grad * (z > 0)
    if name == "sigmoid":
        return grad * a * (1.0 - a)
    return grad


@dataclass
class ForwardCache:
    inputs: list
    pre: list
    post: list
    version: int
    squeeze: bool


class MLP:
    """Feed-forward network: ReLU hidden layers and a configurable output activation.

    Weights are stored as (fan_in, fan_out) matrices so a batch of row vectors
    maps as ``x @ W + b``.
    """

    def __init__(self, sizes, output_activation="identity", rng=None, hidden_activation="relu",
                 dtype=np.float64):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output_activation not in ACTIVATIONS or hidden_activation not in ACTIVATIONS:
            raise ValueError("unknown activation")
        self.sizes = [int(s) for s in sizes]
        self.activations = [hidden_activation] * (len(sizes) - 2) + [output_activation]
        rng = np.random.default_rng() if rng is None else rng
        self._allocate(np.dtype(dtype))
        for w, b in zip(self.weights, self.biases):
            bound = 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        self.version = 0

    def _allocate(self, dtype) -> None:
        """One contiguous buffer; weights and biases are views into it."""
        shapes = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            shapes.extend(((fan_in, fan_out), (fan_out,)))
        self.flat = np.zeros(sum(int(np.prod(s)) for s in shapes), dtype=dtype)
        views, offset = [], 0
        for shape in shapes:
            n = int(np.prod(shape))
            views.append(self.flat[offset:offset + n].reshape(shape))
            offset += n
        self.weights, self.biases = views[0::2], views[1::2]

    @property
    def dtype(self):
        return self.flat.dtype

    @property
    def params(self) -> list:
        """Flat parameter list [W0, b0, W1, b1, ...] (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def touch(self) -> None:
        """Mark parameters as modified; invalidates outstanding forward caches."""
        self.version += 1

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = list(self.sizes)
        clone.activations = list(self.activations)
        clone._allocate(self.dtype)
        clone.flat[...] = self.flat
        clone.version = 0
        return clone

    def forward(self, x, keep_cache=True):
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.sizes[0]}")
        inputs, pre, post = [], [], []
        a = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(a)
            z = a @ w + b
            a = _activate(act, z)
            pre.append(z)
            post.append(a)
        out = a[0] if squeeze else a
        if not keep_cache:
            return out
        return out, ForwardCache(inputs, pre, post, self.version, squeeze)

    def __call__(self, x):
        return self.forward(x, keep_cache=False)

    def split(self, flat) -> list:
        """Views of a flat vector shaped like :attr:`params`."""
        views, offset = [], 0
        for p in self.params:
            views.append(flat[offset:offset + p.size].reshape(p.shape))
            offset += p.size
        return views

    def backward(self, cache: ForwardCache, grad_out, param_grads=True):
        """Reverse-mode pass.

        Returns ``(grad_flat, grad_input)``; ``grad_flat`` is laid out like
        :attr:`flat` (use :meth:`split` for per-layer views) or None when
        ``param_grads`` is False.
        """
        if cache.version != self.version:
            raise StaleCacheError("parameters changed since this forward pass")
        g = np.asarray(grad_out, dtype=self.dtype)
        if cache.squeeze:
            g = g[None, :]
        if g.shape != cache.post[-1].shape:
            raise ValueError(f"output gradient shape {g.shape} != {cache.post[-1].shape}")
        grad_flat = np.empty_like(self.flat) if param_grads else None
        views = self.split(grad_flat) if param_grads else None
        for i in reversed(range(len(self.weights))):
            g = _activation_grad(self.activations[i], cache.pre[i], cache.post[i], g)
            if param_grads:
                np.matmul(cache.inputs[i].T, g, out=views[2 * i])
                np.sum(g, axis=0, out=views[2 * i + 1])
            g = g @ self.weights[i].T
        grad_in = g[0] if cache.squeeze else g
        return grad_flat, grad_in

    def soft_update_from(self, online: "MLP", tau: float) -> None:
        """target <- tau * online + (1 - tau) * target, in place."""
        if online.sizes != self.sizes:
            raise ValueError("network shapes differ")
        self.flat *= 1.0 - tau
        self.flat += tau * online.flat
        self.touch()

def soft_update(target: MLP, online: MLP, tau: float) -> MLP:
    target.soft_update_from(online, tau)
    return target


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params), **kw)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> None:
    """Bias-corrected Adam descent step, applied in place to ``params``."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter / gradient shape mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    step = lr / (1.0 - b1 ** state.t)
    c2 = 1.0 - b2 ** state.t
    scratch = np.empty_like(params)
    state.m *= b1
    np.multiply(grads, 1.0 - b1, out=scratch)
    state.m += scratch
    state.v *= b2
    np.multiply(grads, grads, out=scratch)
    scratch *= 1.0 - b2
    state.v += scratch
    np.multiply(state.v, 1.0 / c2, out=scratch)
    np.sqrt(scratch, out=scratch)
    scratch += state.eps
    np.divide(state.m, scratch, out=scratch)
    scratch *= step
    params -= scratch


def save_checkpoint(path, networks: dict, extra: dict | None = None) -> None:
    """Write named networks to an ``.npz`` with a JSON header describing shapes."""
    meta = {"format_version": CHECKPOINT_FORMAT_VERSION, "networks": {}, "extra": extra or {}}
    arrays = {}
    for name, net in networks.items():
        meta["networks"][name] = {"sizes": net.sizes, "activations": net.activations}
        for i, p in enumerate(net.params):
            arrays[f"{name}/{i}"] = p
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[dict, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format {meta.get('format_version')}")
        nets = {}
        for name, desc in meta["networks"].items():
            net = MLP.__new__(MLP)
            net.sizes = list(desc["sizes"])
            net.activations = list(desc["activations"])
            n_layers = len(net.sizes) - 1
            flat = [data[f"{name}/{i}"] for i in range(2 * (len(net.sizes) - 1))]
            net._allocate(flat[0].dtype)
            for view, arr in zip(net.params, flat):
                view[...] = arr
            net.version = 0
            nets[name] = net
    return nets, meta["extra"]
