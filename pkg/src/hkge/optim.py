"""Adam and Adagrad over :class:`~hkge.autograd.Parameter` lists."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


class Optimizer:
    def __init__(self, params, lr: float):
        if lr <= 0:
            raise ConfigurationError("learning rate must be positive")
        self.params = list(params)
        self.lr = lr

    def _check(self):
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient in parameter {p.name!r}")

    def step(self):
        self._check()
        for i, p in enumerate(self.params):
            self._update(i, p)
            p.zero_grad()

    def _update(self, i, p):
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        super().step()

    def _update(self, i, p):
        g = p.grad
        m, v = self.m[i], self.v[i]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * g * g
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Adagrad(Optimizer):
    def __init__(self, params, lr=1e-2, eps=1e-10):
        super().__init__(params, lr)
        self.eps = eps
        self.sum_sq = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p):
        g = p.grad
        acc = self.sum_sq[i]
        acc += g * g
        p.value -= self.lr * g / np.sqrt(acc + self.eps)


OPTIMIZERS = {"adam": Adam, "adagrad": Adagrad}


def make_optimizer(name: str, params, lr: float) -> Optimizer:
    try:
        cls = OPTIMIZERS[name.lower()]
    except KeyError:
        raise ConfigurationError(f"unknown optimizer {name!r}") from None
    return cls(params, lr=lr)
