# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched fiber kernels (LAPACK zheev loop plus small matmuls).

Same contracts as _fiber_np but restricted to flattened batches of shape
(nb, r, r). The wrappers in _kernels reshape grid fields to this layout.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from scipy.linalg.cython_lapack cimport zheev

cnp.import_array()

BACKEND = "cython"


def eigh_batch(cnp.ndarray[cnp.complex128_t, ndim=3] a):
    cdef Py_ssize_t nb = a.shape[0]
    cdef int r = <int> a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.empty((nb, r), dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] v = np.empty((nb, r, r), dtype=np.complex128)
    cdef double complex *buf
    cdef double complex *work
    cdef double *rwork
    cdef double complex wkopt
    cdef int lwork = -1, info = 0, n = r, lda = r
    cdef Py_ssize_t p, i, j

    if nb == 0:
        return w, v

    buf = <double complex *> malloc(r * r * sizeof(double complex))
    rwork = <double *> malloc(max(1, 3 * r - 2) * sizeof(double))
    if buf == NULL or rwork == NULL:
        free(buf)
        free(rwork)
        raise MemoryError

    # workspace query on the first matrix
    for i in range(r):
        for j in range(r):
            buf[i * r + j] = a[0, i, j]
    zheev("V", "L", &n, buf, &lda, &w[0, 0], &wkopt, &lwork, rwork, &info)
    lwork = <int> wkopt.real
    if lwork < 2 * r - 1:
        lwork = 2 * r - 1
    work = <double complex *> malloc(lwork * sizeof(double complex))
    if work == NULL:
        free(buf)
        free(rwork)
        raise MemoryError

    # The C-ordered buffer reads as the transpose in LAPACK's column-major
    # convention, i.e. conj(A). Its eigenvalues match A's and the returned
    # eigenvectors conjugate to A's, which the copy-out below undoes.
    for p in range(nb):
        for i in range(r):
            for j in range(r):
                buf[i * r + j] = a[p, i, j]
        zheev("V", "L", &n, buf, &lda, &w[p, 0], work, &lwork, rwork, &info)
        if info != 0:
            free(buf)
            free(work)
            free(rwork)
            raise np.linalg.LinAlgError("zheev failed at batch index %d" % p)
        for i in range(r):
            for j in range(r):
                v[p, i, j] = buf[i + j * r].conjugate()

    free(buf)
    free(work)
    free(rwork)
    return w, v


def apply_one(cnp.ndarray[cnp.float64_t, ndim=2] g,
              cnp.ndarray[cnp.complex128_t, ndim=3] v):
    cdef Py_ssize_t nb = v.shape[0]
    cdef int r = <int> v.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] out = np.empty((nb, r, r), dtype=np.complex128)
    cdef Py_ssize_t p, i, j, k
    cdef double complex acc
    for p in range(nb):
        for i in range(r):
            for j in range(r):
                acc = 0
                for k in range(r):
                    acc = acc + v[p, i, k] * g[p, k] * v[p, j, k].conjugate()
                out[p, i, j] = acc
    return out


def apply_two(cnp.ndarray[cnp.float64_t, ndim=3] k,
              cnp.ndarray[cnp.complex128_t, ndim=3] v,
              cnp.ndarray[cnp.complex128_t, ndim=3] a):
    cdef Py_ssize_t nb = v.shape[0]
    cdef int r = <int> v.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] out = np.empty((nb, r, r), dtype=np.complex128)
    cdef double complex *b
    cdef double complex *m
    cdef double complex *c
    cdef Py_ssize_t p, i, j, q
    cdef double complex acc

    b = <double complex *> malloc(r * r * sizeof(double complex))
    m = <double complex *> malloc(r * r * sizeof(double complex))
    c = <double complex *> malloc(r * r * sizeof(double complex))
    if b == NULL or m == NULL or c == NULL:
        free(b)
        free(m)
        free(c)
        raise MemoryError

    for p in range(nb):
        # b = v^H a
        for i in range(r):
            for j in range(r):
                acc = 0
                for q in range(r):
                    acc = acc + v[p, q, i].conjugate() * a[p, q, j]
                b[i * r + j] = acc
        # m = (b v) * k entrywise
        for i in range(r):
            for j in range(r):
                acc = 0
                for q in range(r):
                    acc = acc + b[i * r + q] * v[p, q, j]
                m[i * r + j] = acc * k[p, i, j]
        # c = v m
        for i in range(r):
            for j in range(r):
                acc = 0
                for q in range(r):
                    acc = acc + v[p, i, q] * m[q * r + j]
                c[i * r + j] = acc
        # out = c v^H
        for i in range(r):
            for j in range(r):
                acc = 0
                for q in range(r):
                    acc = acc + c[i * r + q] * v[p, j, q].conjugate()
                out[p, i, j] = acc

    free(b)
    free(m)
    free(c)
    return out
