"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` mirrors every function
here with the same signature and must agree to rounding.
"""

import numpy as np

# below this angle sin(t)/t is replaced by its series
_SERIES_CUTOFF = 1e-8


def oblique_geodesic(a, xi, t):
    """Move every column of ``a`` along its great circle in direction ``xi``.

    Columns are rescaled to unit norm afterwards.
    """
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    nrm = np.sqrt(np.einsum("ij,ij->j", xi, xi))
    theta = t * nrm
    small = np.abs(theta) < _SERIES_CUTOFF
    # sin(t|xi|)/|xi| = t * sinc-like factor; series t(1 - theta^2/6) near 0
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(small, t * (1.0 - theta * theta / 6.0),
                        np.sin(theta) / np.where(nrm == 0.0, 1.0, nrm))
    out = a * np.cos(theta) + xi * coef
    moved = theta != 0.0
    if moved.any():
        out[:, moved] /= np.sqrt(np.einsum("ij,ij->j", out[:, moved], out[:, moved]))
    out[:, ~moved] = a[:, ~moved]
    return out


def oblique_transport(a, xi, t, psi):
    """Parallel transport of the columns of ``psi`` along the geodesics of ``oblique_geodesic``."""
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    nrm2 = np.einsum("ij,ij->j", xi, xi)
    nrm = np.sqrt(nrm2)
    theta = t * nrm
    proj = np.einsum("ij,ij->j", xi, psi)
    safe = np.where(nrm2 == 0.0, 1.0, nrm2)
    w = np.where(nrm2 == 0.0, 0.0, proj / safe)
    corr = a * (nrm * np.sin(theta)) + xi * (1.0 - np.cos(theta))
    return psi - corr * w


def min_norm_l1(x, b):
    """Smallest-magnitude element of ``sign-subdifferential(x) + b``, entrywise."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.where(x != 0.0, np.sign(x), -np.sign(b) * np.minimum(np.abs(b), 1.0))
    return c + b


def soft_threshold(v, thr):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def hard_threshold_columns(v, level):
    """Keep the ``level`` largest-magnitude entries of each column of ``v``."""
    v = np.asarray(v, dtype=float)
    d = v.shape[0]
    if level >= d:
        return v.copy()
    out = np.zeros_like(v)
    if level <= 0:
        return out
    # stable sort keeps ties deterministic: lower row index wins
    order = np.argsort(-np.abs(v), axis=0, kind="stable")[:level]
    cols = np.arange(v.shape[1])
    out[order, cols] = v[order, cols]
    return out


def smoothed_l1(x, eps):
    """Value and gradient of sum(sqrt(x**2 + eps**2))."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(x * x + eps * eps)
    return float(r.sum()), x / r
