"""Clause summarization: collapse a (clauses, words, dim) block into one
vector per clause.

Three strategies:
  * "none"      - plain average of the word vectors in each clause
  * "simple"    - each word scored in isolation by a learned vector, then
                  softmax-normalized within the clause
  * "recurrent" - words scored from a left-to-right intra-clause RNN hidden
                  state, so a word's weight depends on the words before it

Both attention strategies first project words to a lower dimension through
a tanh layer; scoring happens in that space, while the weighted sum is taken
over the original word vectors. All backward passes are hand-derived.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .kernel import softmax_vec, softmax_vec_backward

VARIANTS = ("none", "simple", "recurrent")


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def project(D: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Low-dimensional word representations: tanh(D . P), (c, w, p).

    Padded word slots stay exactly zero because their vectors are zero and
    the projection has no bias.
    """
    c, w, d = D.shape
    if P.ndim != 2 or P.shape[0] != d:
        raise DimensionError(
            f"projection {P.shape} does not match embedding dim {d}")
    return np.tanh(D.reshape(c * w, d) @ P).reshape(c, w, P.shape[1])


def project_backward(D: np.ndarray, D_low: np.ndarray,
                     grad_low: np.ndarray) -> np.ndarray:
    """Gradient of the projection matrix; word vectors are frozen."""
    c, w, d = D.shape
    p = D_low.shape[2]
    dpre = (grad_low * (1.0 - D_low * D_low)).reshape(c * w, p)
    return D.reshape(c * w, d).T @ dpre


# ---------------------------------------------------------------------------
# attention strategies
# ---------------------------------------------------------------------------

def uniform_attention(word_mask: np.ndarray) -> np.ndarray:
    """Uniform weights over unmasked words; all-padding rows are zero."""
    counts = word_mask.sum(axis=1)
    A = np.zeros(word_mask.shape, dtype=np.float64)
    for i in np.nonzero(counts)[0]:
        A[i, word_mask[i]] = 1.0 / counts[i]
    return A


def attend_simple(D_low: np.ndarray, s: np.ndarray,
                  word_mask: np.ndarray) -> np.ndarray:
    """Out-of-context attention: row i = masked softmax of D_low[i] . s."""
    c, w, p = D_low.shape
    if s.shape != (p,):
        raise DimensionError(
            f"scoring vector {s.shape} does not match projection width {p}")
    A = np.zeros((c, w), dtype=np.float64)
    scores = D_low @ s  # (c, w)
    for i in range(c):
        if word_mask[i].any():
            A[i] = softmax_vec(scores[i], word_mask[i])
    return A


def attend_simple_backward(D_low: np.ndarray, s: np.ndarray,
                           word_mask: np.ndarray, A: np.ndarray,
                           grad_A: np.ndarray):
    """Returns (grad_D_low, grad_s)."""
    c, w, p = D_low.shape
    grad_D_low = np.zeros_like(D_low)
    grad_s = np.zeros_like(s)
    for i in range(c):
        if not word_mask[i].any():
            continue
        dscore = softmax_vec_backward(A[i], word_mask[i], grad_A[i])
        grad_s += D_low[i].T @ dscore
        grad_D_low[i] = np.outer(dscore, s)
    return grad_D_low, grad_s


def attend_recurrent(D_low: np.ndarray, W_ih: np.ndarray, W_hh: np.ndarray,
                     s: np.ndarray, word_mask: np.ndarray):
    """Clause-context attention.

    Per clause, hidden states follow the plain RNN recurrence
        h_j = tanh(D_low[i, j] . W_ih + h_{j-1} . W_hh),   h_{-1} = 0,
    run left-to-right over the clause's real words only; the scores h_j . s
    are masked-softmaxed into row i. Returns (A, hidden) where hidden is the
    (c, w, p) stack of states (zero on padding), kept for the backward pass.
    """
    c, w, p = D_low.shape
    if W_ih.shape != (p, p) or W_hh.shape != (p, p) or s.shape != (p,):
        raise DimensionError(
            f"recurrent attention parameter shapes {W_ih.shape}, "
            f"{W_hh.shape}, {s.shape} do not match projection width {p}")
    A = np.zeros((c, w), dtype=np.float64)
    hidden = np.zeros((c, w, p), dtype=np.float64)
    for i in range(c):
        n = int(word_mask[i].sum())
        if n == 0:
            continue
        h = np.zeros(p, dtype=np.float64)
        for j in range(n):
            h = np.tanh(D_low[i, j] @ W_ih + h @ W_hh)
            hidden[i, j] = h
        scores = hidden[i] @ s
        A[i] = softmax_vec(scores, word_mask[i])
    return A, hidden


def attend_recurrent_backward(D_low: np.ndarray, W_ih: np.ndarray,
                              W_hh: np.ndarray, s: np.ndarray,
                              word_mask: np.ndarray, A: np.ndarray,
                              hidden: np.ndarray, grad_A: np.ndarray):
    """Backpropagation through time within each clause.

    Returns (grad_D_low, grad_W_ih, grad_W_hh, grad_s).
    """
    c, w, p = D_low.shape
    grad_D_low = np.zeros_like(D_low)
    grad_W_ih = np.zeros_like(W_ih)
    grad_W_hh = np.zeros_like(W_hh)
    grad_s = np.zeros_like(s)
    for i in range(c):
        n = int(word_mask[i].sum())
        if n == 0:
            continue
        dscore = softmax_vec_backward(A[i], word_mask[i], grad_A[i])
        grad_s += hidden[i, :n].T @ dscore[:n]
        dh_next = np.zeros(p, dtype=np.float64)
        for j in range(n - 1, -1, -1):
            dh = dscore[j] * s + dh_next
            du = dh * (1.0 - hidden[i, j] * hidden[i, j])
            h_prev = hidden[i, j - 1] if j > 0 else np.zeros(p)
            grad_W_ih += np.outer(D_low[i, j], du)
            grad_W_hh += np.outer(h_prev, du)
            grad_D_low[i, j] = du @ W_ih.T
            dh_next = du @ W_hh.T
    return grad_D_low, grad_W_ih, grad_W_hh, grad_s


# ---------------------------------------------------------------------------
# weighted sum
# ---------------------------------------------------------------------------

def summarize(D: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Row i of the result is A[i, :] . D[i, :, :], shape (c, d)."""
    if D.ndim != 3 or A.shape != D.shape[:2]:
        raise DimensionError(
            f"attention {A.shape} does not match word block {D.shape}")
    return np.einsum("cw,cwd->cd", A, D)


def summarize_backward(D: np.ndarray, A: np.ndarray, grad_out: np.ndarray):
    """Returns (grad_A, grad_D)."""
    grad_A = np.einsum("cd,cwd->cw", grad_out, D)
    grad_D = np.einsum("cw,cd->cwd", A, grad_out)
    return grad_A, grad_D


def summarize_average(D: np.ndarray, word_mask: np.ndarray) -> np.ndarray:
    """No-attention baseline: plain average over each clause's real words."""
    return summarize(D, uniform_attention(word_mask))
