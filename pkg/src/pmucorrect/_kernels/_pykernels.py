"""Pure-NumPy implementations of the hot numerical kernels.

Semantics must match ``_cykernels`` exactly; the test suite checks parity.
"""

from __future__ import annotations

import numpy as np


def rotate(z, row_pmu, alpha):
    """Apply the inverse attack rotation: out[r] = exp(-j*alpha[row_pmu[r]]) * z[r]."""
    return np.exp(-1j * np.asarray(alpha))[row_pmu] * z


def project_out(q, v):
    """Residue of v against the orthonormal columns of q: v - q (q^H v)."""
    if q.shape[1] == 0:
        return np.array(v, copy=True)
    return v - q @ (q.conj().T @ v)


def pmu_norms_sq(r, row_pmu, n_slots):
    """Per-PMU squared residue norms: out[k] = sum over rows of PMU k of |r|^2."""
    w = r.real * r.real + r.imag * r.imag
    return np.bincount(np.asarray(row_pmu), weights=w, minlength=n_slots)


def lm_jacobian(q, w, sup_rows, sup_indptr):
    """Complex Jacobian columns of the projected residue w.r.t. support angles.

    Column t is the projection residue of ``-j * w`` masked to the rows
    listed in ``sup_rows[sup_indptr[t]:sup_indptr[t+1]]``.
    """
    m = w.shape[0]
    s = len(sup_indptr) - 1
    u = np.zeros((m, s), dtype=np.complex128, order="F")
    for t in range(s):
        rows = sup_rows[sup_indptr[t] : sup_indptr[t + 1]]
        u[rows, t] = -1j * w[rows]
    if q.shape[1] and s:
        u -= q @ (q.conj().T @ u)
    return u
