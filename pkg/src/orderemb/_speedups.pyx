# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: pairwise order-violation penalties, the gated
recurrence forward/backward, and the Adam update.

Mirrors orderemb._kernels_py; see that module for the reference semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh, sqrt

cnp.import_array()

BACKEND = "compiled"


cdef inline double _sigmoid(double a) nogil:
    cdef double e
    if a >= 0.0:
        return 1.0 / (1.0 + exp(-a))
    e = exp(a)
    return e / (1.0 + e)


def penalty_matrix(double[:, ::1] lower, double[:, ::1] upper):
    """E[i, j] = || max(0, upper[j] - lower[i]) ||^2 for all row pairs."""
    cdef Py_ssize_t n = lower.shape[0], m = upper.shape[0], d = lower.shape[1]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double s, diff
    with nogil:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = upper[j, k] - lower[i, k]
                    if diff > 0.0:
                        s += diff * diff
                out[i, j] = s
    return out_arr


def penalty_matrix_backward(double[:, ::1] lower, double[:, ::1] upper,
                            double[:, ::1] weight):
    """Gradients of sum_ij weight[i,j] * E[i,j] w.r.t. both embedding sets."""
    cdef Py_ssize_t n = lower.shape[0], m = upper.shape[0], d = lower.shape[1]
    d_lower_arr = np.zeros((n, d), dtype=np.float64)
    d_upper_arr = np.zeros((m, d), dtype=np.float64)
    cdef double[:, ::1] d_lower = d_lower_arr
    cdef double[:, ::1] d_upper = d_upper_arr
    cdef Py_ssize_t i, j, k
    cdef double w, diff, g
    with nogil:
        for i in range(n):
            for j in range(m):
                w = weight[i, j]
                if w == 0.0:
                    continue
                for k in range(d):
                    diff = upper[j, k] - lower[i, k]
                    if diff > 0.0:
                        g = 2.0 * w * diff
                        d_upper[j, k] += g
                        d_lower[i, k] -= g
    return d_lower_arr, d_upper_arr


def gru_forward(double[:, ::1] Wz, double[:, ::1] Wr, double[:, ::1] Wh,
                double[:, ::1] Uz, double[:, ::1] Ur, double[:, ::1] Uh,
                double[::1] bz, double[::1] br, double[::1] bh,
                double[:, ::1] X):
    """Run the gated recurrence over a T x word_dim input sequence."""
    cdef Py_ssize_t T = X.shape[0], D = X.shape[1], H = bz.shape[0]
    h_all_arr = np.zeros((T + 1, H), dtype=np.float64)
    z_all_arr = np.empty((T, H), dtype=np.float64)
    r_all_arr = np.empty((T, H), dtype=np.float64)
    c_all_arr = np.empty((T, H), dtype=np.float64)
    cdef double[:, ::1] h_all = h_all_arr
    cdef double[:, ::1] z_all = z_all_arr
    cdef double[:, ::1] r_all = r_all_arr
    cdef double[:, ::1] c_all = c_all_arr
    rh_arr = np.empty(H, dtype=np.float64)
    cdef double[::1] rh = rh_arr
    cdef Py_ssize_t t, i, j
    cdef double az, ar, ah, z, r, c
    with nogil:
        for t in range(T):
            for i in range(H):
                az = bz[i]
                ar = br[i]
                for j in range(D):
                    az += Wz[i, j] * X[t, j]
                    ar += Wr[i, j] * X[t, j]
                for j in range(H):
                    az += Uz[i, j] * h_all[t, j]
                    ar += Ur[i, j] * h_all[t, j]
                z_all[t, i] = _sigmoid(az)
                r_all[t, i] = _sigmoid(ar)
            for j in range(H):
                rh[j] = r_all[t, j] * h_all[t, j]
            for i in range(H):
                ah = bh[i]
                for j in range(D):
                    ah += Wh[i, j] * X[t, j]
                for j in range(H):
                    ah += Uh[i, j] * rh[j]
                c = tanh(ah)
                c_all[t, i] = c
                z = z_all[t, i]
                h_all[t + 1, i] = (1.0 - z) * h_all[t, i] + z * c
    return h_all_arr, z_all_arr, r_all_arr, c_all_arr


def gru_backward(double[:, ::1] Wz, double[:, ::1] Wr, double[:, ::1] Wh,
                 double[:, ::1] Uz, double[:, ::1] Ur, double[:, ::1] Uh,
                 double[::1] bz, double[::1] br, double[::1] bh,
                 double[:, ::1] X,
                 double[:, ::1] h_all, double[:, ::1] z_all,
                 double[:, ::1] r_all, double[:, ::1] c_all,
                 double[::1] d_h_last):
    """Backpropagate d_h_last (gradient at h_T) through the recurrence."""
    cdef Py_ssize_t T = X.shape[0], D = X.shape[1], H = bz.shape[0]
    dX_arr = np.zeros((T, D), dtype=np.float64)
    dWz_arr = np.zeros((H, D), dtype=np.float64)
    dWr_arr = np.zeros((H, D), dtype=np.float64)
    dWh_arr = np.zeros((H, D), dtype=np.float64)
    dUz_arr = np.zeros((H, H), dtype=np.float64)
    dUr_arr = np.zeros((H, H), dtype=np.float64)
    dUh_arr = np.zeros((H, H), dtype=np.float64)
    dbz_arr = np.zeros(H, dtype=np.float64)
    dbr_arr = np.zeros(H, dtype=np.float64)
    dbh_arr = np.zeros(H, dtype=np.float64)
    cdef double[:, ::1] dX = dX_arr
    cdef double[:, ::1] dWz = dWz_arr, dWr = dWr_arr, dWh = dWh_arr
    cdef double[:, ::1] dUz = dUz_arr, dUr = dUr_arr, dUh = dUh_arr
    cdef double[::1] dbz = dbz_arr, dbr = dbr_arr, dbh = dbh_arr
    scratch = np.zeros((6, H), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    # scratch rows: 0=dh, 1=dh_prev, 2=da_z, 3=da_r, 4=da_h, 5=drh
    cdef Py_ssize_t t, i, j
    cdef double z, r, c, hp, dz, dc, dr, g
    for i in range(H):
        sc[0, i] = d_h_last[i]
    with nogil:
        for t in range(T - 1, -1, -1):
            for i in range(H):
                z = z_all[t, i]
                c = c_all[t, i]
                hp = h_all[t, i]
                dz = sc[0, i] * (c - hp)
                dc = sc[0, i] * z
                sc[1, i] = sc[0, i] * (1.0 - z)
                sc[4, i] = dc * (1.0 - c * c)
                sc[2, i] = dz * z * (1.0 - z)
            # a_h = Wh x + Uh (r*h_prev) + bh
            for i in range(H):
                sc[5, i] = 0.0
            for i in range(H):
                g = sc[4, i]
                dbh[i] += g
                for j in range(D):
                    dWh[i, j] += g * X[t, j]
                for j in range(H):
                    dUh[i, j] += g * r_all[t, j] * h_all[t, j]
                    sc[5, j] += Uh[i, j] * g
            for i in range(H):
                dr = sc[5, i] * h_all[t, i]
                sc[1, i] += sc[5, i] * r_all[t, i]
                r = r_all[t, i]
                sc[3, i] = dr * r * (1.0 - r)
            for i in range(H):
                g = sc[2, i]
                dbz[i] += g
                for j in range(D):
                    dWz[i, j] += g * X[t, j]
                for j in range(H):
                    dUz[i, j] += g * h_all[t, j]
                    sc[1, j] += Uz[i, j] * g
                g = sc[3, i]
                dbr[i] += g
                for j in range(D):
                    dWr[i, j] += g * X[t, j]
                for j in range(H):
                    dUr[i, j] += g * h_all[t, j]
                    sc[1, j] += Ur[i, j] * g
            for j in range(D):
                g = 0.0
                for i in range(H):
                    g += Wz[i, j] * sc[2, i] + Wr[i, j] * sc[3, i] + Wh[i, j] * sc[4, i]
                dX[t, j] = g
            for i in range(H):
                sc[0, i] = sc[1, i]
    return (dX_arr, dWz_arr, dWr_arr, dWh_arr, dUz_arr, dUr_arr, dUh_arr,
            dbz_arr, dbr_arr, dbh_arr)


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                long t, double lr, double b1, double b2, double eps):
    """In-place bias-corrected Adam step on flat float64 views."""
    cdef Py_ssize_t n = p.shape[0], i
    cdef double bc1 = 1.0 - b1 ** t
    cdef double bc2 = 1.0 - b2 ** t
    cdef double gi
    with nogil:
        for i in range(n):
            gi = g[i]
            # grouping matches the numpy backend bit for bit
            m[i] = b1 * m[i] + (1.0 - b1) * gi
            v[i] = b2 * v[i] + (1.0 - b2) * (gi * gi)
            p[i] -= lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)
