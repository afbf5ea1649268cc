# Compiled training and inference kernels.
#
# Mirrors _kernels_py: the matrix products go through BLAS dgemm and the
# sigmoid, residual and backward elementwise steps are fused into single
# passes over the hidden activations. The epoch loop runs without the GIL.

import numpy as np

from libc.math cimport exp, isinf, isnan
from scipy.linalg.cython_blas cimport dgemm


cdef inline void _hidden(const double[:, ::1] w1, const double[:, ::1] x, double[:, ::1] a) noexcept nogil:
    # a (U x H, C order) = x (U x n) @ w1.T; in column-major terms a' = w1' * x'
    cdef char ta = b'T'
    cdef char tb = b'N'
    cdef int m = w1.shape[0]
    cdef int n = x.shape[0]
    cdef int k = x.shape[1]
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, &w1[0, 0], &k, &x[0, 0], &k, &zero, &a[0, 0], &m)


def predict(const double[:, ::1] w1, const double[::1] b1, const double[::1] w2, double b2,
            const double[:, ::1] x):
    cdef Py_ssize_t n_rows = x.shape[0], n_hidden = w1.shape[0], k, i
    cdef double[:, ::1] a = np.empty((n_rows, n_hidden))
    out_arr = np.empty(n_rows)
    cdef double[::1] out = out_arr
    cdef double s
    with nogil:
        _hidden(w1, x, a)
        for k in range(n_rows):
            s = b2
            for i in range(n_hidden):
                s = s + w2[i] / (1.0 + exp(-(a[k, i] + b1[i])))
            out[k] = s
    return out_arr


def fit(double[:, ::1] w1, double[::1] b1, double[::1] w2, double[::1] b2,
        const double[:, ::1] x, const double[::1] z, const double[::1] weight,
        double eta, int max_epochs, double tol):
    cdef Py_ssize_t n_rows = x.shape[0], n_hidden = w1.shape[0], k, i
    cdef int n_in = x.shape[1], nh = w1.shape[0], nr = x.shape[0]
    cdef double[:, ::1] h = np.empty((n_rows, n_hidden))
    cdef double[::1] gw2 = np.empty(n_hidden)
    cdef double[::1] gb1 = np.empty(n_hidden)
    trace_arr = np.empty(max_epochs)
    cdef double[::1] trace = trace_arr
    cdef double e, r, d, hv, gb2, neg_eta = -eta
    cdef int j, stop = max_epochs, diverged = -1
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef double one = 1.0

    with nogil:
        for j in range(max_epochs):
            _hidden(w1, x, h)
            e = 0.0
            gb2 = 0.0
            for i in range(n_hidden):
                gw2[i] = 0.0
                gb1[i] = 0.0
            for k in range(n_rows):
                r = b2[0]
                for i in range(n_hidden):
                    hv = 1.0 / (1.0 + exp(-(h[k, i] + b1[i])))
                    h[k, i] = hv
                    r = r + hv * w2[i]
                r = r - z[k]
                e = e + 0.5 * weight[k] * r * r
                d = weight[k] * r
                gb2 = gb2 + d
                for i in range(n_hidden):
                    hv = h[k, i]
                    gw2[i] = gw2[i] + hv * d
                    # h now holds the hidden-layer delta for the W1 product
                    h[k, i] = d * w2[i] * hv * (1.0 - hv)
                    gb1[i] = gb1[i] + h[k, i]
            trace[j] = e
            if isnan(e) or isinf(e):
                diverged = j
                stop = j + 1
                break
            # w1 -= eta * delta.T @ x, written straight into w1 by dgemm
            dgemm(&tn, &tt, &n_in, &nh, &nr, &neg_eta, &x[0, 0], &n_in, &h[0, 0], &nh,
                  &one, &w1[0, 0], &n_in)
            for i in range(n_hidden):
                w2[i] = w2[i] - eta * gw2[i]
                b1[i] = b1[i] - eta * gb1[i]
            b2[0] = b2[0] - eta * gb2
            if j > 0 and trace[j - 1] - e < tol:
                stop = j + 1
                break
    return trace_arr[:stop], diverged
