"""Dense ReLU networks with explicit backpropagation, and Adam."""
from __future__ import annotations

import numpy as np


class MLP:
    """Fully connected net: ReLU on every hidden layer, linear output.

    Parameters are stored as a flat list ``[W0, b0, W1, b1, ...]`` with
    ``W`` of shape (fan_in, fan_out), initialized U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        rng = np.random.default_rng() if rng is None else rng
        self.params = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: np.ndarray):
        """Returns ``(output, cache)``; the cache feeds :meth:`backward`."""
        acts = [x]
        h = x
        for k in range(self.n_layers):
            W, b = self.params[2 * k], self.params[2 * k + 1]
            h = h @ W + b
            if k < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of a scalar loss given ``dL/d(output)``.

        Returns ``(param_grads, dL/d(input))``.
        """
        grads = [None] * len(self.params)
        g = grad_out
        for k in reversed(range(self.n_layers)):
            if k < self.n_layers - 1:
                g = g * (cache[k + 1] > 0)
            grads[2 * k] = cache[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.params[2 * k].T
        return grads, g

    def copy(self) -> "MLP":
        new = MLP.__new__(MLP)
        new.sizes = self.sizes
        new.params = [p.copy() for p in self.params]
        return new

    def load_params(self, params):
        if len(params) != len(self.params) or any(a.shape != b.shape for a, b in zip(params, self.params)):
            raise ValueError("parameter shapes do not match network")
        self.params = [np.array(p, dtype=float) for p in params]


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """Polyak averaging in place: target <- (1 - tau) target + tau online."""
    for pt, po in zip(target.params, online.params):
        pt *= 1.0 - tau
        pt += tau * po


def clip_by_global_norm(grads, max_norm: float | None):
    if max_norm is None:
        return grads, None
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        grads = [g * scale for g in grads]
    return grads, norm


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1 - b1**self.t, 1 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def rebind(self, params):
        """Point at a new parameter list of identical shapes (after a load)."""
        self.params = params
