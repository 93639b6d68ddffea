"""Numpy fallback for the twisted-convolution kernels.

Mirrors the signatures in ``_kernels.pyx`` exactly; selected by
:mod:`nctorus.kernels` when the compiled module is unavailable.
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def bilinear_form(lower, a, b):
    """Row-wise B(a_r, b_r) = a_r^T L b_r for index arrays of shape (p, n)."""
    return np.einsum("ij,jk,ik->i", a.astype(np.float64), lower, b.astype(np.float64))


def twisted_products(ia, ca, ib, cb, lower, t):
    """All pairwise monomial products of two sparse elements.

    Returns ``(idx, coeff)`` with ``p*q`` rows ordered a-major, b-minor.
    No reduction is performed.
    """
    p, n = ia.shape
    q = ib.shape[0]
    if p == 0 or q == 0:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.complex128)
    fa = ia.astype(np.float64)
    fb = ib.astype(np.float64)
    phase = (fa @ lower) @ fb.T
    coeff = np.outer(ca, cb) * np.exp(1j * TWO_PI * t * phase)
    idx = (ia[:, None, :] + ib[None, :, :]).reshape(p * q, n)
    return idx, coeff.reshape(p * q)
