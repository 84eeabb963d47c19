"""Adam optimizer operating on Tensor leaves.

State lives outside the tensors so the same parameters can be driven by
independent optimizers (generator vs discriminator).  ``adam_step`` consumes
accumulated gradients and zeroes them afterwards.
"""

from __future__ import annotations

import numpy as np

from .tensor import ContractError, Tensor


class AdamState:
    """Per-parameter Adam state: moment estimates, step count, hyperparameters."""

    def __init__(self, shape, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon


def adam_step(params, states):
    """One bias-corrected Adam update for each parameter; grads are zeroed."""
    if len(params) != len(states):
        raise ContractError(f"{len(params)} params but {len(states)} states")
    for p, s in zip(params, states):
        if p.grad is None:
            raise ContractError("adam_step on a parameter with no accumulated gradient")
        g = p.grad
        s.t += 1
        s.m = s.beta1 * s.m + (1.0 - s.beta1) * g
        s.v = s.beta2 * s.v + (1.0 - s.beta2) * (g * g)
        m_hat = s.m / (1.0 - s.beta1 ** s.t)
        v_hat = s.v / (1.0 - s.beta2 ** s.t)
        p.data -= s.lr * m_hat / (np.sqrt(v_hat) + s.epsilon)
        p.grad = None


class Adam:
    """Convenience wrapper pairing a parameter list with AdamStates."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        for p in self.params:
            if not isinstance(p, Tensor) or not p.requires_grad:
                raise ContractError("Adam expects requires_grad leaf tensors")
        self.states = [AdamState(p.shape, lr, beta1, beta2, epsilon) for p in self.params]

    def step(self):
        adam_step(self.params, self.states)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def grad_norm(params):
    """Global L2 norm over all accumulated gradients (missing grads count as 0)."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def clip_grad_norm(params, max_norm):
    """Scale all gradients so their global L2 norm is at most max_norm."""
    norm = grad_norm(params)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm
