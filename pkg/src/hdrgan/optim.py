"""Adam optimizer and the halving learning-rate schedule."""

import numpy as np


class Adam:
    """Standard Adam with bias correction, acting in place on a named
    parameter dict.  State arrays stay in the parameter dtype."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self._v = {n: np.zeros_like(p.data) for n, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data = p.data - (lr * update).astype(p.data.dtype)


def lr_at_epoch(base, epoch, decay_factor=0.5, decay_every=50):
    """Learning rate after applying the halving schedule at ``epoch``."""
    return base * decay_factor ** (epoch // decay_every)
