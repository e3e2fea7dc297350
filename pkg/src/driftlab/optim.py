"""AdamW with global-norm gradient clipping.

Weight decay is decoupled (applied to the parameters directly, not
mixed into the moments). optim_step is pure: it never mutates its
inputs and identical inputs produce identical outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .net import ParamVector


@dataclass(frozen=True)
class OptimState:
    m: np.ndarray
    v: np.ndarray
    step: int
    learning_rate: float
    weight_decay: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_grad_norm: float = 0.01


def init_optim(
    n_params: int,
    learning_rate: float,
    weight_decay: float = 1e-4,
    max_grad_norm: float = 0.01,
) -> OptimState:
    return OptimState(
        m=np.zeros(n_params),
        v=np.zeros(n_params),
        step=0,
        learning_rate=float(learning_rate),
        weight_decay=float(weight_decay),
        max_grad_norm=float(max_grad_norm),
    )


def clip_global_norm(grads: np.ndarray, max_norm: float):
    """Scale the whole gradient so its L2 norm is at most max_norm."""
    norm = float(np.linalg.norm(grads))
    if max_norm > 0 and norm > max_norm:
        return grads * (max_norm / norm), norm
    return grads.copy(), norm


def optim_step(params: ParamVector, grads: np.ndarray, state: OptimState):
    """One AdamW update; returns (new_params, new_state)."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.values.shape:
        raise ValueError("gradient shape does not match parameter shape")
    g, _ = clip_global_norm(grads, state.max_grad_norm)
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    update = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    decayed = params.values * (1.0 - state.learning_rate * state.weight_decay)
    new_values = decayed - update
    return params.with_values(new_values), replace(state, m=m, v=v, step=step)
