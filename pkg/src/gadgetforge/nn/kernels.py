"""Time-loop kernels for LSTM and GRU sequences.

Inputs are time-major and contiguous: ``X`` is (T, B, E), ``M`` is (T, B)
with 1.0 on real tokens and 0.0 on padding.  A padded step leaves the state
unchanged.  ``reverse`` walks t = T-1 .. 0; every cache is stored in
processing order, so step ``s`` touches time index ``T-1-s`` when reversed.

Gate packing:
    LSTM  W (4, H, H+E), b (4, H): forget, update, output, candidate;
          each acts on the concatenation [a_prev, x_t].
    GRU   W (3, H, E), U (3, H, H), b (3, H): update, reset, candidate.
"""

from __future__ import annotations

import numpy as np

from ._jit import maybe_njit


@maybe_njit
def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@maybe_njit
def lstm_seq_forward(X, M, W, b, reverse):
    T, B, E = X.shape
    H = W.shape[1]
    A = np.zeros((T + 1, B, H), dtype=X.dtype)
    C = np.zeros((T + 1, B, H), dtype=X.dtype)
    G = np.zeros((T, 4, B, H), dtype=X.dtype)
    Z = np.zeros((T, B, H + E), dtype=X.dtype)
    for s in range(T):
        t = T - 1 - s if reverse else s
        Z[s, :, :H] = A[s]
        Z[s, :, H:] = X[t]
        z = Z[s]
        f = _sigmoid(np.dot(z, W[0].T) + b[0])
        i = _sigmoid(np.dot(z, W[1].T) + b[1])
        o = _sigmoid(np.dot(z, W[2].T) + b[2])
        ct = np.tanh(np.dot(z, W[3].T) + b[3])
        c = f * C[s] + i * ct
        a = o * np.tanh(c)
        m = M[t].reshape(B, 1)
        C[s + 1] = m * c + (1.0 - m) * C[s]
        A[s + 1] = m * a + (1.0 - m) * A[s]
        G[s, 0] = f
        G[s, 1] = i
        G[s, 2] = o
        G[s, 3] = ct
    return A, C, G, Z


@maybe_njit
def lstm_seq_backward(dA_final, M, W, A, C, G, Z, reverse):
    T = G.shape[0]
    B = dA_final.shape[0]
    H = W.shape[1]
    E = W.shape[2] - H
    dW = np.zeros_like(W)
    db = np.zeros((4, H), dtype=W.dtype)
    dX = np.zeros((T, B, E), dtype=W.dtype)
    dA = dA_final.copy()
    dC = np.zeros((B, H), dtype=W.dtype)
    for s in range(T - 1, -1, -1):
        t = T - 1 - s if reverse else s
        m = M[t].reshape(B, 1)
        f = G[s, 0]
        i = G[s, 1]
        o = G[s, 2]
        ct = G[s, 3]
        c = f * C[s] + i * ct
        tc = np.tanh(c)
        da = m * dA
        dc = m * dC + da * o * (1.0 - tc * tc)
        dA_prev = (1.0 - m) * dA
        dC_prev = (1.0 - m) * dC + dc * f
        dzf = dc * C[s] * f * (1.0 - f)
        dzi = dc * ct * i * (1.0 - i)
        dzo = da * tc * o * (1.0 - o)
        dzc = dc * i * (1.0 - ct * ct)
        z = Z[s]
        dW[0] += np.dot(dzf.T, z)
        dW[1] += np.dot(dzi.T, z)
        dW[2] += np.dot(dzo.T, z)
        dW[3] += np.dot(dzc.T, z)
        db[0] += dzf.sum(axis=0)
        db[1] += dzi.sum(axis=0)
        db[2] += dzo.sum(axis=0)
        db[3] += dzc.sum(axis=0)
        dz = np.dot(dzf, W[0]) + np.dot(dzi, W[1]) + np.dot(dzo, W[2]) + np.dot(dzc, W[3])
        dA = dA_prev + dz[:, :H]
        dC = dC_prev
        dX[t] += dz[:, H:]
    return dW, db, dX


@maybe_njit
def gru_seq_forward(X, M, W, U, b, reverse):
    T, B, E = X.shape
    H = W.shape[1]
    C = np.zeros((T + 1, B, H), dtype=X.dtype)
    G = np.zeros((T, 3, B, H), dtype=X.dtype)
    for s in range(T):
        t = T - 1 - s if reverse else s
        x = X[t]
        prev = C[s]
        u = _sigmoid(np.dot(x, W[0].T) + np.dot(prev, U[0].T) + b[0])
        r = _sigmoid(np.dot(x, W[1].T) + np.dot(prev, U[1].T) + b[1])
        ch = np.tanh(np.dot(x, W[2].T) + np.dot(r * prev, U[2].T) + b[2])
        c = u * prev + (1.0 - u) * ch
        m = M[t].reshape(B, 1)
        C[s + 1] = m * c + (1.0 - m) * prev
        G[s, 0] = u
        G[s, 1] = r
        G[s, 2] = ch
    return C, G


@maybe_njit
def gru_seq_backward(dC_final, X, M, W, U, C, G, reverse):
    T, B, E = X.shape
    H = W.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros((3, H), dtype=W.dtype)
    dX = np.zeros((T, B, E), dtype=W.dtype)
    dC = dC_final.copy()
    for s in range(T - 1, -1, -1):
        t = T - 1 - s if reverse else s
        m = M[t].reshape(B, 1)
        x = X[t]
        prev = C[s]
        u = G[s, 0]
        r = G[s, 1]
        ch = G[s, 2]
        dc = m * dC
        dprev = (1.0 - m) * dC + dc * u
        dzu = dc * (prev - ch) * u * (1.0 - u)
        dzh = dc * (1.0 - u) * (1.0 - ch * ch)
        rp = r * prev
        drp = np.dot(dzh, U[2])
        dzr = drp * prev * r * (1.0 - r)
        dprev += drp * r + np.dot(dzu, U[0]) + np.dot(dzr, U[1])
        dW[0] += np.dot(dzu.T, x)
        dW[1] += np.dot(dzr.T, x)
        dW[2] += np.dot(dzh.T, x)
        dU[0] += np.dot(dzu.T, prev)
        dU[1] += np.dot(dzr.T, prev)
        dU[2] += np.dot(dzh.T, rp)
        db[0] += dzu.sum(axis=0)
        db[1] += dzr.sum(axis=0)
        db[2] += dzh.sum(axis=0)
        dX[t] += np.dot(dzu, W[0]) + np.dot(dzr, W[1]) + np.dot(dzh, W[2])
        dC = dprev
    return dW, dU, db, dX
