"""Adam optimizer."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, OptimizationError


@dataclass
class AdamState:
    """First/second moment estimates and step count."""

    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def copy(self):
        return AdamState(self.t, {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update.

    Parameters
    ----------
    params, grads : dict of str -> ndarray
        Same keys and shapes. ``params`` is not modified.
    state : AdamState

    Returns
    -------
    new_params : dict of str -> ndarray
    new_state : AdamState
    """
    for name, g in grads.items():
        if name not in params or params[name].shape != np.shape(g):
            raise DimensionError(f"gradient for {name!r} does not match its parameter")
        if not np.all(np.isfinite(g)):
            raise OptimizationError(f"non-finite gradient for parameter {name!r}")
    t = state.t + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = grads.get(name)
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        if g is None:
            g = np.zeros_like(p)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_params[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(t, m_new, v_new)


class Adam:
    """Stateful wrapper applying :func:`adam_step` to named Tensors in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, state=None):
        self.params = dict(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = state if state is not None else AdamState()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        values = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        new, self.state = adam_step(values, grads, self.state, self.lr,
                                    self.beta1, self.beta2, self.eps)
        for k, p in self.params.items():
            p.data = new[k]
