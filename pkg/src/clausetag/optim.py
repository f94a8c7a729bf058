"""ADAM optimizer over named parameter dicts, shared by both taggers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np


@dataclass
class AdamConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class AdamState:
    """First/second moment accumulators plus the step counter."""

    def __init__(self, params: Mapping[str, np.ndarray]):
        self.m: Dict[str, np.ndarray] = {
            k: np.zeros_like(v) for k, v in params.items()}
        self.v: Dict[str, np.ndarray] = {
            k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params: Dict[str, np.ndarray],
              grads: Mapping[str, np.ndarray],
              state: AdamState,
              cfg: AdamConfig) -> None:
    """One bias-corrected ADAM update, in place.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps)
    """
    state.t += 1
    t = state.t
    b1, b2 = cfg.beta1, cfg.beta2
    for name, theta in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        theta -= cfg.alpha * m_hat / (np.sqrt(v_hat) + cfg.eps)
