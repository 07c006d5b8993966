"""Adaptive-moment optimizer and exponential moving average over NetParams."""

from dataclasses import dataclass

import numpy as np

from .net import Gradients, NetParams, zeros_like_params


@dataclass
class AdamState:
    m: NetParams
    v: NetParams
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float


def init_adam(params: NetParams, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(zeros_like_params(params), zeros_like_params(params), 0,
                     lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: NetParams, grads: Gradients):
    """One bias-corrected update, in place. Returns (state, params)."""
    for (_, g) in grads.slots():
        if not np.isfinite(g).all():
            raise ValueError("non-finite gradients")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for (_, p), (_, g), (_, m), (_, v) in zip(params.slots(), grads.slots(),
                                              state.m.slots(), state.v.slots()):
        if p.shape != g.shape:
            raise ValueError("gradient/parameter shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state, params


def ema_update(ema: NetParams, live: NetParams, decay: float) -> NetParams:
    """ema <- decay * ema + (1 - decay) * live, elementwise and in place."""
    if not 0.0 <= decay <= 1.0:
        raise ValueError("decay must lie in [0, 1]")
    for (_, e), (_, p) in zip(ema.slots(), live.slots()):
        if e.shape != p.shape:
            raise ValueError("ema/live shape mismatch")
        e *= decay
        e += (1.0 - decay) * p
    return ema
