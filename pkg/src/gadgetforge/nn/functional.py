"""Numpy reference operations with hand-written backward passes.

Shapes follow the row-vector convention: a linear map is ``x @ W`` with
``W`` of shape (in, out).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import LabelOutOfRange, OddModelDim, ShapeMismatch

MASK_NEG = -1e9
LN_EPS = 1e-5


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def positional_encoding(max_pos: int, d_model: int, dtype=np.float64) -> np.ndarray:
    """Sinusoidal table: sin on even columns, cos on odd, frequency 10000^(-2i/d_model)."""
    if d_model % 2:
        raise OddModelDim(f"d_model must be even, got {d_model}")
    pos = np.arange(max_pos, dtype=np.float64)[:, None]
    i = np.arange(d_model // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / d_model)
    pe = np.empty((max_pos, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(dtype)


# -- attention --------------------------------------------------------------------


def scaled_dot_attention(Q, K, V, key_mask=None, *, return_weights=False):
    """softmax(Q K^T / sqrt(d_k)) V over the last two axes.

    ``key_mask`` (broadcastable to the score shape, 1 = keep) adds a large
    negative bias to masked keys before the softmax.
    """
    Q, K, V = np.asarray(Q), np.asarray(K), np.asarray(V)
    if Q.shape[-1] != K.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise ShapeMismatch(f"Q {Q.shape}, K {K.shape}, V {V.shape}")
    scores = Q @ np.swapaxes(K, -1, -2) / np.sqrt(Q.shape[-1])
    if key_mask is not None:
        scores = scores + (1.0 - key_mask) * MASK_NEG
    P = softmax(scores)
    out = P @ V
    return (out, P) if return_weights else out


def attention_backward(dout, Q, K, V, P):
    """Gradients of ``scaled_dot_attention`` given its softmax weights ``P``."""
    scale = 1.0 / np.sqrt(Q.shape[-1])
    dV = np.swapaxes(P, -1, -2) @ dout
    dP = dout @ np.swapaxes(V, -1, -2)
    dS = P * (dP - (dP * P).sum(axis=-1, keepdims=True)) * scale
    dQ = dS @ K
    dK = np.swapaxes(dS, -1, -2) @ Q
    return dQ, dK, dV


@dataclass
class AttentionParams:
    W_Q: np.ndarray  # (h, d_model, d_k)
    W_K: np.ndarray
    W_V: np.ndarray
    W_O: np.ndarray  # (h * d_k, d_model)

    def __post_init__(self):
        h, d_model, d_k = self.W_Q.shape
        if self.W_K.shape != self.W_Q.shape or self.W_V.shape[:2] != (h, d_model):
            raise ShapeMismatch("per-head projections disagree")
        if self.W_O.shape != (h * self.W_V.shape[2], d_model):
            raise ShapeMismatch(f"W_O has shape {self.W_O.shape}")

    @property
    def heads(self) -> int:
        return self.W_Q.shape[0]


def multi_head_attention(X, params: AttentionParams, key_mask=None, *, return_cache=False):
    """Concat(head_1..head_h) W_O with head_i = Attention(X W_Q_i, X W_K_i, X W_V_i).

    ``X`` is (n, d_model) or batched (B, n, d_model); ``key_mask`` is (n,) or (B, n).
    """
    X = np.asarray(X)
    if X.shape[-1] != params.W_Q.shape[1]:
        raise ShapeMismatch(f"X last dim {X.shape[-1]} != d_model {params.W_Q.shape[1]}")
    batched = X.ndim == 3
    Xb = X if batched else X[None]
    Q = np.einsum("btd,hdk->bhtk", Xb, params.W_Q)
    K = np.einsum("btd,hdk->bhtk", Xb, params.W_K)
    V = np.einsum("btd,hdk->bhtk", Xb, params.W_V)
    km = None
    if key_mask is not None:
        km = np.asarray(key_mask, dtype=X.dtype)
        km = (km if batched else km[None])[:, None, None, :]
    heads, P = scaled_dot_attention(Q, K, V, km, return_weights=True)
    B, h, n, dv = heads.shape
    concat = heads.transpose(0, 2, 1, 3).reshape(B, n, h * dv)
    out = concat @ params.W_O
    if not batched:
        out = out[0]
    if return_cache:
        return out, (Xb, Q, K, V, P, concat, batched)
    return out


def multi_head_attention_backward(dout, params: AttentionParams, cache):
    Xb, Q, K, V, P, concat, batched = cache
    d = dout if batched else dout[None]
    B, n, _ = d.shape
    h = params.heads
    dW_O = np.einsum("btc,btd->cd", concat, d)
    dconcat = d @ params.W_O.T
    dheads = dconcat.reshape(B, n, h, -1).transpose(0, 2, 1, 3)
    dQ, dK, dV = attention_backward(dheads, Q, K, V, P)
    dW_Q = np.einsum("btd,bhtk->hdk", Xb, dQ)
    dW_K = np.einsum("btd,bhtk->hdk", Xb, dK)
    dW_V = np.einsum("btd,bhtk->hdk", Xb, dV)
    dX = (np.einsum("bhtk,hdk->btd", dQ, params.W_Q)
          + np.einsum("bhtk,hdk->btd", dK, params.W_K)
          + np.einsum("bhtk,hdk->btd", dV, params.W_V))
    if not batched:
        dX = dX[0]
    return dX, AttentionParams(dW_Q, dW_K, dW_V, dW_O)


# -- layer norm / linear -----------------------------------------------------------


def layer_norm(x, gain, bias, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * gain + bias, (xhat, inv, gain)


def layer_norm_backward(dy, cache):
    xhat, inv, gain = cache
    n = xhat.shape[-1]
    axes = tuple(range(dy.ndim - 1))
    dgain = (dy * xhat).sum(axis=axes)
    dbias = dy.sum(axis=axes)
    dxhat = dy * gain
    dx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    return dx, dgain, dbias


# -- recurrent cells (single step, reference form) ---------------------------------


@dataclass
class LstmState:
    C: np.ndarray
    a: np.ndarray


def lstm_step(x_t, state: LstmState, params: dict) -> LstmState:
    """One LSTM step; every gate matrix acts on [a_prev, x_t].

    ``params`` holds W_f, W_u, W_o, W_c of shape (H, H+E) and biases b_f,
    b_u, b_o, b_c of shape (H,).
    """
    x_t = np.asarray(x_t)
    H = params["W_f"].shape[0]
    if state.a.shape[-1] != H or params["W_f"].shape[1] != H + x_t.shape[-1]:
        raise ShapeMismatch("LSTM parameter shapes do not fit the input/state")
    z = np.concatenate([state.a, x_t], axis=-1)
    f = sigmoid(z @ params["W_f"].T + params["b_f"])
    i = sigmoid(z @ params["W_u"].T + params["b_u"])
    o = sigmoid(z @ params["W_o"].T + params["b_o"])
    c_tilde = np.tanh(z @ params["W_c"].T + params["b_c"])
    C = f * state.C + i * c_tilde
    return LstmState(C, o * np.tanh(C))


def gru_step(x_t, C_prev, params: dict):
    """One GRU step: C_t = i_t * C_prev + (1 - i_t) * C~_t.

    ``params``: W_u, W_r, W_h (H, E); U_u, U_r, U_h (H, H); b_u, b_r, b_h (H,).
    """
    x_t, C_prev = np.asarray(x_t), np.asarray(C_prev)
    if params["W_u"].shape[1] != x_t.shape[-1] or params["U_u"].shape[1] != C_prev.shape[-1]:
        raise ShapeMismatch("GRU parameter shapes do not fit the input/state")
    i = sigmoid(x_t @ params["W_u"].T + C_prev @ params["U_u"].T + params["b_u"])
    r = sigmoid(x_t @ params["W_r"].T + C_prev @ params["U_r"].T + params["b_r"])
    c_tilde = np.tanh(x_t @ params["W_h"].T + (r * C_prev) @ params["U_h"].T + params["b_h"])
    return i * C_prev + (1.0 - i) * c_tilde


# -- loss -------------------------------------------------------------------------------


def cross_entropy(logits, label: int):
    """Loss -log softmax(logits)[label] and its gradient softmax - onehot."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise LabelOutOfRange(f"label {label} outside [0, {logits.shape[-1]})")
    shifted = logits - logits.max()
    logz = np.log(np.exp(shifted).sum())
    p = np.exp(shifted - logz)
    grad = p.copy()
    grad[label] -= 1.0
    return float(logz - shifted[label]), grad


def batch_cross_entropy(logits, labels):
    """Mean cross-entropy over a batch and the gradient w.r.t. ``logits``."""
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise LabelOutOfRange(f"labels outside [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float((logz - shifted[rows, labels]).mean())
    grad = np.exp(shifted - logz[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n
