# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs

cnp.import_array()


def qr_growth(mats, q0, bint store=False):
    cdef double[:, :, ::1] A = np.ascontiguousarray(mats, dtype=np.float64)
    cdef Py_ssize_t T = A.shape[0], d = A.shape[1]
    q_arr = np.array(q0, dtype=np.float64, order="C")
    cdef Py_ssize_t k = q_arr.shape[1]
    cdef double[:, ::1] q = q_arr
    w_arr = np.empty((d, k))
    cdef double[:, ::1] w = w_arr
    sums_arr = np.zeros(k)
    cdef double[::1] sums = sums_arr
    cdef double[:, :, ::1] fr
    frames = None
    if store:
        frames = np.empty((T + 1, d, k))
        frames[0] = q_arr
        fr = frames
    cdef Py_ssize_t n, i, j, c, m
    cdef double acc, nrm
    for n in range(T):
        for i in range(d):
            for c in range(k):
                acc = 0.0
                for j in range(d):
                    acc = acc + A[n, i, j] * q[j, c]
                w[i, c] = acc
        # modified Gram-Schmidt, columns in order
        for c in range(k):
            for m in range(c):
                acc = 0.0
                for i in range(d):
                    acc = acc + w[i, m] * w[i, c]
                for i in range(d):
                    w[i, c] = w[i, c] - acc * w[i, m]
            nrm = 0.0
            for i in range(d):
                nrm = nrm + w[i, c] * w[i, c]
            nrm = sqrt(nrm)
            sums[c] = sums[c] + log(nrm)
            for i in range(d):
                w[i, c] = w[i, c] / nrm
        for i in range(d):
            for c in range(k):
                q[i, c] = w[i, c]
                if store:
                    fr[n + 1, i, c] = w[i, c]
    return sums_arr, q_arr, frames


def affine_forward(mats, src, x0):
    cdef double[:, :, ::1] A = np.ascontiguousarray(mats, dtype=np.float64)
    cdef double[:, :, ::1] S = np.ascontiguousarray(src, dtype=np.float64)
    x0a = np.ascontiguousarray(x0, dtype=np.float64)
    cdef Py_ssize_t T = A.shape[0], d = A.shape[1], Q = x0a.shape[0]
    out_arr = np.empty((T + 1, Q, d))
    cdef double[:, :, ::1] out = out_arr
    out_arr[0] = x0a
    cdef Py_ssize_t n, q, i, j
    cdef double acc
    for n in range(T):
        for q in range(Q):
            for i in range(d):
                acc = S[n, q, i]
                for j in range(d):
                    acc = acc + A[n, i, j] * out[n, q, j]
                out[n + 1, q, i] = acc
    return out_arr


def affine_backward(invmats, src, xT):
    cdef double[:, :, ::1] B = np.ascontiguousarray(invmats, dtype=np.float64)
    cdef double[:, :, ::1] S = np.ascontiguousarray(src, dtype=np.float64)
    xTa = np.ascontiguousarray(xT, dtype=np.float64)
    cdef Py_ssize_t T = B.shape[0], d = B.shape[1], Q = xTa.shape[0]
    out_arr = np.empty((T + 1, Q, d))
    cdef double[:, :, ::1] out = out_arr
    out_arr[T] = xTa
    cdef Py_ssize_t n, q, i, j
    cdef double acc
    for n in range(T - 1, -1, -1):
        for q in range(Q):
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc = acc + B[n, i, j] * (out[n + 1, q, j] - S[n, q, j])
                out[n, q, i] = acc
    return out_arr
