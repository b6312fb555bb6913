# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner kernels for the masked factorized fit."""

import numpy as np


def masked_objective_grad(const double[:, ::1] gamma, const double[:, ::1] target,
                          const unsigned char[:, ::1] mask):
    """Fused value and gradient of the masked factorized fit.

    Exploits symmetry of the mask and target: each unordered pair is
    visited once. Matches the pure-numpy fallback to rounding error.
    """
    cdef Py_ssize_t K = gamma.shape[0]
    cdef Py_ssize_t r = gamma.shape[1]
    cdef Py_ssize_t j, l, c
    cdef double e, acc
    cdef double f = 0.0
    grad_np = np.zeros((K, r))
    cdef double[:, ::1] grad = grad_np
    for j in range(K):
        for l in range(j, K):
            if mask[j, l]:
                acc = 0.0
                for c in range(r):
                    acc += gamma[j, c] * gamma[l, c]
                e = acc - target[j, l]
                if j == l:
                    f += e * e
                    for c in range(r):
                        grad[j, c] += e * gamma[j, c]
                else:
                    f += 2.0 * e * e
                    for c in range(r):
                        grad[j, c] += e * gamma[l, c]
                        grad[l, c] += e * gamma[j, c]
    cdef double inv = 1.0 / (<double> K * <double> K)
    grad_np *= 4.0 * inv
    return f * inv, grad_np
