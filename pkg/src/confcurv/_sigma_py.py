"""Pure numpy kernels for elementary symmetric functions.

These mirror the compiled routines in ``_sigma_ext.pyx`` and are used when
the extension is unavailable (or ``CONFCURV_PURE_PYTHON`` is set).
"""
import numpy as np


def esf_batch(lam, kmax):
    """sigma_0..sigma_kmax for every row of ``lam`` (shape (m, n))."""
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    m, n = lam.shape
    out = np.zeros((m, kmax + 1))
    out[:, 0] = 1.0
    for i in range(n):
        x = lam[:, i]
        for j in range(min(i + 1, kmax), 0, -1):
            out[:, j] += x * out[:, j - 1]
    return out


def esf_deleted_batch(lam, kmax):
    """sigma_j of each row with entry i removed; shape (m, n, kmax + 1)."""
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    m, n = lam.shape
    out = np.zeros((m, n, kmax + 1))
    out[:, :, 0] = 1.0
    for i in range(n):
        # entry i is skipped by zeroing its contribution
        x = np.broadcast_to(lam[:, i:i + 1], (m, n)).copy()
        x[:, i] = 0.0
        for j in range(min(i + 1, kmax), 0, -1):
            out[:, :, j] += x * out[:, :, j - 1]
    return out
