# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled hot kernels: attack rotation, projection residue, LM Jacobian.

Zone blocks are small (tens of rows), so per-call Python/NumPy overhead
dominates; these loops plus direct BLAS calls remove it. Matrices must be
Fortran-ordered complex128 and index arrays int64, which is how the
projection operator stores them.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin
from scipy.linalg.cython_blas cimport zgemm, zgemv

cnp.import_array()

ctypedef double complex zcomplex


def rotate(const zcomplex[::1] z, const cnp.int64_t[::1] row_pmu,
           const double[::1] alpha):
    """Apply the inverse attack rotation: out[r] = exp(-j*alpha[row_pmu[r]]) * z[r]."""
    cdef Py_ssize_t m = z.shape[0]
    cdef Py_ssize_t n = alpha.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(m, dtype=np.complex128)
    ph_arr = np.empty(n, dtype=np.complex128)
    cdef zcomplex[::1] out = out_arr
    cdef zcomplex[::1] ph = ph_arr
    for i in range(n):
        ph[i] = cos(alpha[i]) - 1j * sin(alpha[i])
    for i in range(m):
        out[i] = z[i] * ph[row_pmu[i]]
    return out_arr


def project_out(const zcomplex[::1, :] q, const zcomplex[::1] v):
    """Residue of v against the orthonormal columns of q: v - q (q^H v)."""
    cdef int m = <int> q.shape[0]
    cdef int k = <int> q.shape[1]
    cdef int inc = 1
    cdef zcomplex one = 1.0
    cdef zcomplex zero = 0.0
    cdef zcomplex neg_one = -1.0
    cdef char trans_c = b'C'
    cdef char trans_n = b'N'

    r_arr = np.array(v, dtype=np.complex128, copy=True)
    cdef zcomplex[::1] r = r_arr
    if k == 0 or m == 0:
        return r_arr
    c_arr = np.empty(k, dtype=np.complex128)
    cdef zcomplex[::1] c = c_arr
    zgemv(&trans_c, &m, &k, &one, <zcomplex*> &q[0, 0], &m,
          <zcomplex*> &v[0], &inc, &zero, &c[0], &inc)
    zgemv(&trans_n, &m, &k, &neg_one, <zcomplex*> &q[0, 0], &m,
          &c[0], &inc, &one, &r[0], &inc)
    return r_arr


def pmu_norms_sq(const zcomplex[::1] r, const cnp.int64_t[::1] row_pmu,
                 Py_ssize_t n_slots):
    """Per-PMU squared residue norms: out[k] = sum over rows of PMU k of |r|^2."""
    cdef Py_ssize_t m = r.shape[0]
    cdef Py_ssize_t i
    out_arr = np.zeros(n_slots, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(m):
        out[row_pmu[i]] += r[i].real * r[i].real + r[i].imag * r[i].imag
    return out_arr


def lm_jacobian(const zcomplex[::1, :] q, const zcomplex[::1] w,
                const cnp.int64_t[::1] sup_rows, const cnp.int64_t[::1] sup_indptr):
    """Complex Jacobian columns of the projected residue w.r.t. support angles."""
    cdef int m = <int> w.shape[0]
    cdef int k = <int> q.shape[1]
    cdef int s = <int> (sup_indptr.shape[0] - 1)
    cdef Py_ssize_t t, p, row
    cdef zcomplex minus_j = -1j
    cdef zcomplex one = 1.0
    cdef zcomplex zero = 0.0
    cdef zcomplex neg_one = -1.0
    cdef char trans_c = b'C'
    cdef char trans_n = b'N'

    u_arr = np.zeros((m, s), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] u = u_arr
    for t in range(s):
        for p in range(sup_indptr[t], sup_indptr[t + 1]):
            row = sup_rows[p]
            u[row, t] = minus_j * w[row]
    if k == 0 or s == 0 or m == 0:
        return u_arr
    c_arr = np.empty((k, s), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] c = c_arr
    zgemm(&trans_c, &trans_n, &k, &s, &m, &one, <zcomplex*> &q[0, 0], &m,
          &u[0, 0], &m, &zero, &c[0, 0], &k)
    zgemm(&trans_n, &trans_n, &m, &s, &k, &neg_one, <zcomplex*> &q[0, 0], &m,
          &c[0, 0], &k, &one, &u[0, 0], &m)
    return u_arr
