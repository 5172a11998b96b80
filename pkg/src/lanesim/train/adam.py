"""Adam optimizer over named parameter Values."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, named_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params}

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def grads_finite(self) -> bool:
        return all(p.grad is None or np.all(np.isfinite(p.grad)) for _, p in self.params)

    def clip_global_norm(self, max_norm: float):
        total = 0.0
        for _, p in self.params:
            if p.grad is not None:
                total += float(np.sum(p.grad * p.grad))
        norm = np.sqrt(total)
        if norm > max_norm and norm > 0:
            scale = max_norm / norm
            for _, p in self.params:
                if p.grad is not None:
                    p.grad = p.grad * scale
        return norm

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for n, p in self.params:
            if p.grad is None:
                continue
            m = self.m[n] = b1 * self.m[n] + (1 - b1) * p.grad
            v = self.v[n] = b2 * self.v[n] + (1 - b2) * (p.grad * p.grad)
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
