from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        shapes = [np.shape(getattr(p, "value", p)) for p in params]
        return cls([np.zeros(s) for s in shapes], [np.zeros(s) for s in shapes], 0)


def adam_step(params, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update applied in place to ``p.value``.

    Gradients are reset to zero afterwards. A leaf created with
    ``Tape.leaf(array)`` shares storage with ``array``, so the caller's
    parameter array is updated too.
    """
    if len(state.m) != len(params):
        raise ValueError(f"optimizer state tracks {len(state.m)} params, got {len(params)}")
    for i, p in enumerate(params):
        if p.grad is None:
            raise ValueError(f"parameter {i} (node {p.node_id}) has no gradient")
        if state.m[i].shape != p.value.shape:
            raise ValueError(f"parameter {i}: state shape {state.m[i].shape} != {p.value.shape}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for i, p in enumerate(params):
        g = p.grad
        state.m[i] *= beta1
        state.m[i] += (1.0 - beta1) * g
        state.v[i] *= beta2
        state.v[i] += (1.0 - beta2) * g * g
        p.value -= lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + eps)
        p.grad = np.zeros_like(p.value)
