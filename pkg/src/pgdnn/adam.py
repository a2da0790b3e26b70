"""Adam with bias-corrected moments (Kingma & Ba, Algorithm 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .network import NetworkParams

LEARNING_RATE = 0.01
BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-6


class NonFiniteGradient(FloatingPointError):
    pass


@numba.njit(error_model="numpy", cache=True)
def _update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    # Fused elementwise update over flat views; no fastmath, so results match
    # the plain numpy expression order.
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPSILON


def adam_init(params: NetworkParams, **hyper) -> AdamState:
    arrays = params.arrays()
    return AdamState([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0, **hyper)


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState):
    """One Adam update.  Parameters and moments are updated in place and
    returned for convenience."""
    g_arrays = grads.arrays()
    for i, g in enumerate(g_arrays):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in parameter array {i} at step {state.t + 1}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params.arrays(), g_arrays, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if not (p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
            raise ValueError("parameters and moments must be C-contiguous for in-place updates")
        _update(
            p.reshape(-1),
            np.ascontiguousarray(g).reshape(-1),
            m.reshape(-1),
            v.reshape(-1),
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
            bc1,
            bc2,
        )
    return params, state
