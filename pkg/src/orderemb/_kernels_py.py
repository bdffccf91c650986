"""Pure numpy implementations of the hot kernels.

Signature-compatible with the compiled ``orderemb._speedups`` extension;
``orderemb.kernels`` picks one of the two at import time. All arrays are
C-contiguous float64.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

# Cap on temporary elements for the chunked pairwise-penalty products.
_CHUNK_ELEMS = 4_000_000


def penalty_matrix(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """E[i, j] = || max(0, upper[j] - lower[i]) ||^2 for all row pairs."""
    n, d = lower.shape
    m = upper.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    rows = max(1, _CHUNK_ELEMS // max(1, m * d))
    for i0 in range(0, n, rows):
        i1 = min(n, i0 + rows)
        diff = upper[None, :, :] - lower[i0:i1, None, :]
        np.maximum(diff, 0.0, out=diff)
        np.square(diff, out=diff)
        out[i0:i1] = diff.sum(axis=2)
    return out


def penalty_matrix_backward(lower: np.ndarray, upper: np.ndarray,
                            weight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum_ij weight[i,j] * E[i,j] w.r.t. both embedding sets."""
    n, d = lower.shape
    m = upper.shape[0]
    d_lower = np.zeros((n, d), dtype=np.float64)
    d_upper = np.zeros((m, d), dtype=np.float64)
    rows = max(1, _CHUNK_ELEMS // max(1, m * d))
    for i0 in range(0, n, rows):
        i1 = min(n, i0 + rows)
        diff = upper[None, :, :] - lower[i0:i1, None, :]
        np.maximum(diff, 0.0, out=diff)
        w = weight[i0:i1]
        d_lower[i0:i1] = -2.0 * np.einsum("ij,ijk->ik", w, diff)
        d_upper += 2.0 * np.einsum("ij,ijk->jk", w, diff)
    return d_lower, d_upper


def gru_forward(Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh, X):
    """Run the gated recurrence over a T x word_dim input sequence.

    Returns (h_all, z_all, r_all, c_all): hidden states h_0..h_T stacked as
    a (T+1, H) array plus the per-step gate activations needed by backward.
    """
    T = X.shape[0]
    H = bz.shape[0]
    h_all = np.zeros((T + 1, H), dtype=np.float64)
    z_all = np.empty((T, H), dtype=np.float64)
    r_all = np.empty((T, H), dtype=np.float64)
    c_all = np.empty((T, H), dtype=np.float64)
    h = h_all[0]
    for t in range(T):
        x = X[t]
        z = _sigmoid(Wz @ x + Uz @ h + bz)
        r = _sigmoid(Wr @ x + Ur @ h + br)
        c = np.tanh(Wh @ x + Uh @ (r * h) + bh)
        h = (1.0 - z) * h + z * c
        z_all[t] = z
        r_all[t] = r
        c_all[t] = c
        h_all[t + 1] = h
    return h_all, z_all, r_all, c_all


def gru_backward(Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh, X,
                 h_all, z_all, r_all, c_all, d_h_last):
    """Backpropagate d_h_last (gradient at h_T) through the recurrence.

    Returns (dX, dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh).
    """
    T, word_dim = X.shape
    H = bz.shape[0]
    dX = np.zeros((T, word_dim), dtype=np.float64)
    dWz = np.zeros_like(Wz); dWr = np.zeros_like(Wr); dWh = np.zeros_like(Wh)
    dUz = np.zeros_like(Uz); dUr = np.zeros_like(Ur); dUh = np.zeros_like(Uh)
    dbz = np.zeros_like(bz); dbr = np.zeros_like(br); dbh = np.zeros_like(bh)
    dh = np.array(d_h_last, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        x = X[t]
        h_prev = h_all[t]
        z = z_all[t]; r = r_all[t]; c = c_all[t]
        dz = dh * (c - h_prev)
        dc = dh * z
        dh_prev = dh * (1.0 - z)
        da_h = dc * (1.0 - c * c)
        da_z = dz * z * (1.0 - z)
        rh = r * h_prev
        dWh += np.outer(da_h, x)
        dUh += np.outer(da_h, rh)
        dbh += da_h
        drh = Uh.T @ da_h
        dr = drh * h_prev
        dh_prev += drh * r
        da_r = dr * r * (1.0 - r)
        dWr += np.outer(da_r, x)
        dUr += np.outer(da_r, h_prev)
        dbr += da_r
        dh_prev += Ur.T @ da_r
        dWz += np.outer(da_z, x)
        dUz += np.outer(da_z, h_prev)
        dbz += da_z
        dh_prev += Uz.T @ da_z
        dX[t] = Wz.T @ da_z + Wr.T @ da_r + Wh.T @ da_h
        dh = dh_prev
    return dX, dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh


def adam_update(p, g, m, v, t, lr, b1, b2, eps):
    """In-place bias-corrected Adam step on flat float64 views."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * np.square(g)
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out
