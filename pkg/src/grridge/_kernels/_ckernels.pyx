# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: weighted pool-adjacent-violators and per-group Gram sums."""

import numpy as np
cimport numpy as cnp

from scipy.linalg.cython_blas cimport dsyrk

cnp.import_array()


def pava(const double[::1] y, const double[::1] w, bint increasing=True):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i, j, stop, nb = 0
    cdef double sign = 1.0 if increasing else -1.0
    cdef double[::1] level = np.empty(n)
    cdef double[::1] weight = np.empty(n)
    cdef Py_ssize_t[::1] start = np.empty(n, dtype=np.intp)
    cdef double wsum
    out = np.empty(n)
    cdef double[::1] res = out

    for i in range(n):
        level[nb] = sign * y[i]
        weight[nb] = w[i]
        start[nb] = i
        nb += 1
        while nb > 1 and level[nb - 2] > level[nb - 1]:
            wsum = weight[nb - 2] + weight[nb - 1]
            level[nb - 2] = (weight[nb - 2] * level[nb - 2] + weight[nb - 1] * level[nb - 1]) / wsum
            weight[nb - 2] = wsum
            nb -= 1

    for j in range(nb):
        i = start[j]
        stop = start[j + 1] if j + 1 < nb else n
        while i < stop:
            res[i] = sign * level[j]
            i += 1
    return out


def group_gram(const double[:, ::1] M, const Py_ssize_t[::1] group_of, Py_ssize_t n_groups):
    """Sum of outer products of the rows of ``M`` per group, shape (G, n, n).

    Rows are gathered group by group with a counting sort, then each block is
    handed to a symmetric rank-k update (BLAS ``dsyrk``).
    """
    cdef Py_ssize_t p = M.shape[0]
    cdef Py_ssize_t n = M.shape[1]
    cdef Py_ssize_t k, a, b, g, pos
    out = np.zeros((n_groups, n, n))
    cdef double[:, :, ::1] A = out
    if p == 0 or n == 0:
        return out

    cdef Py_ssize_t[::1] offset = np.zeros(n_groups + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] fill = np.empty(n_groups, dtype=np.intp)
    for k in range(p):
        offset[group_of[k] + 1] += 1
    for g in range(n_groups):
        offset[g + 1] += offset[g]
        fill[g] = offset[g]
    cdef double[:, ::1] S = np.empty((p, n))
    for k in range(p):
        g = group_of[k]
        pos = fill[g]
        fill[g] += 1
        S[pos, :] = M[k, :]

    # a row-major c x n block is a column-major n x c matrix B; B B^T is the Gram
    cdef char uplo = b'U'
    cdef char trans = b'N'
    cdef int nn = <int>n, kk, lda = <int>n
    cdef double one = 1.0, zero = 0.0
    for g in range(n_groups):
        kk = <int>(offset[g + 1] - offset[g])
        if kk == 0:
            continue
        dsyrk(&uplo, &trans, &nn, &kk, &one, &S[offset[g], 0], &lda, &zero, &A[g, 0, 0], &nn)
        # column-major upper triangle is the row-major lower one; mirror it up
        for a in range(n):
            for b in range(a + 1, n):
                A[g, a, b] = A[g, b, a]
    return out
