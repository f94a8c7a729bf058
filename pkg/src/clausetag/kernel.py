"""Minimal dense float64 kernel.

Forward operations used by the taggers, their hand-derived backward
counterparts, and a central-finite-difference gradient checker. Everything is
built on numpy float64 arrays; every op validates that its output is finite.

Conventions:
  * vectors are 1-D arrays, matrices 2-D, word blocks 3-D (clauses, words, dim)
  * a backward function takes the upstream gradient of a scalar loss and
    returns gradients in the same order as the forward inputs
"""

from __future__ import annotations

from typing import Callable, Dict, Mapping

import numpy as np

from .errors import DegenerateInputError, DimensionError, NumericError

DTYPE = np.float64

# Gate blocks of an LSTM cell, in the fixed order used for serialization.
LSTM_PARAM_KEYS = (
    "W_xi", "W_hi", "b_i",
    "W_xf", "W_hf", "b_f",
    "W_xo", "W_ho", "b_o",
    "W_xg", "W_hg", "b_g",
)


def as_array(x) -> np.ndarray:
    """Coerce to a float64 ndarray without copying when already one."""
    return np.asarray(x, dtype=DTYPE)


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains NaN/Inf")
    return arr


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------

def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two 2-D arrays."""
    a = as_array(a)
    b = as_array(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(
            f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    return check_finite("matmul output", a @ b)


def matmul_backward(a: np.ndarray, b: np.ndarray,
                    grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d(a@b)/da = g @ b.T, d(a@b)/db = a.T @ g."""
    grad_out = as_array(grad_out)
    if grad_out.shape != (a.shape[0], b.shape[1]):
        raise DimensionError(
            f"matmul upstream gradient {grad_out.shape} does not match "
            f"output shape {(a.shape[0], b.shape[1])}")
    return grad_out @ b.T, a.T @ grad_out


# ---------------------------------------------------------------------------
# elementwise nonlinearities
# ---------------------------------------------------------------------------

def tanh_elem(x: np.ndarray) -> np.ndarray:
    return check_finite("tanh output", np.tanh(as_array(x)))


def tanh_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Backward through tanh given the forward *output*."""
    return grad_out * (1.0 - out * out)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = as_array(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return check_finite("sigmoid output", out)


def sigmoid_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * out * (1.0 - out)


# ---------------------------------------------------------------------------
# masked softmax over a vector
# ---------------------------------------------------------------------------

def softmax_vec(x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Masked, max-subtracted softmax of a 1-D score vector.

    Masked entries get exactly 0; the unmasked entries exp-normalize to 1.
    """
    x = as_array(x)
    if x.ndim != 1:
        raise DimensionError(f"softmax_vec expects a vector, got {x.shape}")
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise DimensionError(
                f"softmax mask {mask.shape} does not match scores {x.shape}")
    if not mask.any():
        raise DegenerateInputError("softmax over an all-masked vector")
    out = np.zeros_like(x)
    scores = x[mask]
    scores = scores - scores.max()
    e = np.exp(scores)
    out[mask] = e / e.sum()
    return check_finite("softmax output", out)


def softmax_vec_backward(probs: np.ndarray, mask: np.ndarray | None,
                         grad_out: np.ndarray) -> np.ndarray:
    """Backward of softmax_vec: ds_j = p_j * (g_j - sum_k g_k p_k)."""
    if mask is None:
        mask = np.ones(probs.shape, dtype=bool)
    grad = probs * (grad_out - np.dot(grad_out, probs))
    grad[~np.asarray(mask, dtype=bool)] = 0.0
    return grad


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------

def init_lstm_params(input_dim: int, hidden_dim: int,
                     rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Glorot-uniform gate matrices, zero biases."""
    params = {}
    for gate in ("i", "f", "o", "g"):
        params[f"W_x{gate}"] = glorot(rng, (input_dim, hidden_dim))
        params[f"W_h{gate}"] = glorot(rng, (hidden_dim, hidden_dim))
        params[f"b_{gate}"] = np.zeros(hidden_dim, dtype=DTYPE)
    return {k: params[k] for k in LSTM_PARAM_KEYS}


def glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


def lstm_cell_step(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                   params: Mapping[str, np.ndarray]):
    """One LSTM step.

    i = sig(x W_xi + h W_hi + b_i)     f = sig(x W_xf + h W_hf + b_f)
    o = sig(x W_xo + h W_ho + b_o)     g = tanh(x W_xg + h W_hg + b_g)
    c = f * c_prev + i * g             h = o * tanh(c)

    Returns (h, c, cache) where cache carries everything the backward
    pass needs.
    """
    x = as_array(x)
    h_prev = as_array(h_prev)
    c_prev = as_array(c_prev)
    hidden = h_prev.shape[0]
    if params["W_xi"].shape != (x.shape[0], hidden):
        raise DimensionError(
            f"lstm step: x {x.shape} / hidden {hidden} do not match "
            f"W_xi {params['W_xi'].shape}")
    i = sigmoid(x @ params["W_xi"] + h_prev @ params["W_hi"] + params["b_i"])
    f = sigmoid(x @ params["W_xf"] + h_prev @ params["W_hf"] + params["b_f"])
    o = sigmoid(x @ params["W_xo"] + h_prev @ params["W_ho"] + params["b_o"])
    g = tanh_elem(x @ params["W_xg"] + h_prev @ params["W_hg"] + params["b_g"])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    check_finite("lstm cell state", c)
    cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev,
             "i": i, "f": f, "o": o, "g": g, "c": c, "tc": tc}
    return h, c, cache


def lstm_cell_backward(cache: dict, grad_h: np.ndarray, grad_c: np.ndarray,
                       params: Mapping[str, np.ndarray]):
    """Backward of one LSTM step.

    grad_h / grad_c are dL/dh and dL/dc flowing in from the step's outputs.
    Returns (grad_x, grad_h_prev, grad_c_prev, param_grads).
    """
    i, f, o, g = cache["i"], cache["f"], cache["o"], cache["g"]
    tc = cache["tc"]
    x, h_prev, c_prev = cache["x"], cache["h_prev"], cache["c_prev"]

    d_o = grad_h * tc
    d_c = grad_c + grad_h * o * (1.0 - tc * tc)
    d_i = d_c * g
    d_g = d_c * i
    d_f = d_c * c_prev
    grad_c_prev = d_c * f

    # pre-activation gradients
    dpre_i = d_i * i * (1.0 - i)
    dpre_f = d_f * f * (1.0 - f)
    dpre_o = d_o * o * (1.0 - o)
    dpre_g = d_g * (1.0 - g * g)

    grads = {
        "W_xi": np.outer(x, dpre_i), "W_hi": np.outer(h_prev, dpre_i), "b_i": dpre_i,
        "W_xf": np.outer(x, dpre_f), "W_hf": np.outer(h_prev, dpre_f), "b_f": dpre_f,
        "W_xo": np.outer(x, dpre_o), "W_ho": np.outer(h_prev, dpre_o), "b_o": dpre_o,
        "W_xg": np.outer(x, dpre_g), "W_hg": np.outer(h_prev, dpre_g), "b_g": dpre_g,
    }
    grad_x = (dpre_i @ params["W_xi"].T + dpre_f @ params["W_xf"].T
              + dpre_o @ params["W_xo"].T + dpre_g @ params["W_xg"].T)
    grad_h_prev = (dpre_i @ params["W_hi"].T + dpre_f @ params["W_hf"].T
                   + dpre_o @ params["W_ho"].T + dpre_g @ params["W_hg"].T)
    return grad_x, grad_h_prev, grad_c_prev, grads


# ---------------------------------------------------------------------------
# gradient accumulation
# ---------------------------------------------------------------------------

class GradStore:
    """Per-parameter gradient accumulators for one optimization step.

    Shapes are pinned at construction from the parameter dict; accumulating a
    gradient of the wrong shape is an error.
    """

    def __init__(self, params: Mapping[str, np.ndarray]):
        self._shapes = {k: np.shape(v) for k, v in params.items()}
        self.grads: Dict[str, np.ndarray] = {
            k: np.zeros(s, dtype=DTYPE) for k, s in self._shapes.items()}

    def add(self, name: str, grad: np.ndarray) -> None:
        if name not in self.grads:
            raise KeyError(f"unknown parameter {name!r}")
        grad = as_array(grad)
        if grad.shape != self._shapes[name]:
            raise DimensionError(
                f"gradient for {name!r} has shape {grad.shape}, "
                f"expected {self._shapes[name]}")
        self.grads[name] += grad

    def add_all(self, grads: Mapping[str, np.ndarray], prefix: str = "") -> None:
        for k, v in grads.items():
            self.add(prefix + k, v)

    def scale(self, factor: float) -> None:
        for v in self.grads.values():
            v *= factor

    def zero(self) -> None:
        for v in self.grads.values():
            v[...] = 0.0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.grads[name]

    def __iter__(self):
        return iter(self.grads)

    def items(self):
        return self.grads.items()


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def finite_difference_grads(f: Callable[[Mapping[str, np.ndarray]], float],
                            params: Mapping[str, np.ndarray],
                            eps: float = 1e-5) -> Dict[str, np.ndarray]:
    """Central-difference gradient estimate (f(t+e) - f(t-e)) / 2e.

    Perturbs one scalar entry at a time; params are restored afterwards.
    """
    work = {k: np.array(v, dtype=DTYPE, copy=True) for k, v in params.items()}
    out = {}
    for name, arr in work.items():
        num = np.zeros_like(arr)
        flat = arr.reshape(-1)
        nflat = num.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = float(f(work))
            flat[idx] = orig - eps
            f_minus = float(f(work))
            flat[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(
                    f"objective is not finite near parameter {name!r}")
            nflat[idx] = (f_plus - f_minus) / (2.0 * eps)
        out[name] = num
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   floor: float = 1e-6) -> float:
    """Max elementwise |a - n| / max(|a| + |n|, floor).

    The floor keeps central-difference roundoff (about 1e-11 for a unit-scale
    objective at eps=1e-5) from dominating elements whose true gradient is
    structurally tiny; such elements are effectively compared absolutely at
    the floor scale.
    """
    a = np.asarray(analytic, dtype=DTYPE)
    n = np.asarray(numeric, dtype=DTYPE)
    denom = np.maximum(np.abs(a) + np.abs(n), floor)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / denom))


def gradient_check(f: Callable[[Mapping[str, np.ndarray]], float],
                   params: Mapping[str, np.ndarray],
                   analytic: Mapping[str, np.ndarray],
                   eps: float = 1e-5) -> Dict[str, float]:
    """Compare analytic gradients against central finite differences.

    Returns the max relative error per parameter block.
    """
    numeric = finite_difference_grads(f, params, eps=eps)
    report = {}
    for name in params:
        if name not in analytic:
            raise KeyError(f"no analytic gradient supplied for {name!r}")
        report[name] = relative_error(analytic[name], numeric[name])
    return report
