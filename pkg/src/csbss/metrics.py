"""Separation and reconstruction scores.

With ``Y = S A`` the sources are identifiable up to relabeling and scaling,
which acts on the *rows* of ``A``: ``S -> S Pi D`` corresponds to
``A -> D^-1 Pi^T A``. The global system matrix is therefore
``P = A_true pinv(A_est)``, which maps true sources to estimated ones
(``S_est = S_true P``) and is a scaled permutation for a perfect estimate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

SNR_CAP_DB = 300.0


def amari_error(p_matrix) -> float:
    """Normalized Amari error in ``[0, 1]``; 0 iff ``p_matrix`` is a scaled permutation."""
    p = np.abs(np.asarray(p_matrix, dtype=float))
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("Amari error needs a square matrix")
    k = p.shape[0]
    row_max = p.max(axis=1)
    col_max = p.max(axis=0)
    if np.any(row_max == 0) or np.any(col_max == 0):
        raise ValueError("matrix has an all-zero row or column")
    if k == 1:
        return 0.0
    rows = (p.sum(axis=1) / row_max - 1.0).sum()
    cols = (p.sum(axis=0) / col_max - 1.0).sum()
    return float((rows + cols) / (2.0 * k * (k - 1)))


def snr_db(s_true_col, s_est_col) -> float:
    """SNR after the best scalar fit of the estimate, capped at ``SNR_CAP_DB``."""
    s = np.asarray(s_true_col, dtype=float)
    e = np.asarray(s_est_col, dtype=float)
    sig = float(s @ s)
    if sig == 0.0:
        raise ValueError("true signal is zero")
    ee = float(e @ e)
    c = float(s @ e) / ee if ee > 0 else 0.0
    err = s - c * e
    noise = float(err @ err)
    if noise <= sig * 10.0 ** (-SNR_CAP_DB / 10.0):
        return SNR_CAP_DB
    return float(min(SNR_CAP_DB, 10.0 * np.log10(sig / noise)))


@dataclass(frozen=True)
class Alignment:
    """``permutation[i]`` is the estimated source matched to true source ``i``."""

    permutation: tuple
    signs: np.ndarray
    scales: np.ndarray
    p_matrix: np.ndarray


def _best_permutation(mag: np.ndarray) -> tuple:
    k = mag.shape[0]
    if k <= 6:
        best = max(itertools.permutations(range(k)),
                   key=lambda perm: sum(mag[i, perm[i]] for i in range(k)))
        return tuple(best)
    # greedy: repeatedly take the largest remaining entry
    perm = [-1] * k
    work = mag.copy()
    for _ in range(k):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[i] = int(j)
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return tuple(perm)


def system_matrix(a_est, a_true) -> np.ndarray:
    a_est = np.asarray(getattr(a_est, "entries", a_est), dtype=float)
    a_true = np.asarray(getattr(a_true, "entries", a_true), dtype=float)
    sv = np.linalg.svd(a_est, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ValueError("estimated mixing matrix is rank-deficient")
    return a_true @ np.linalg.pinv(a_est)


def align(a_est, truth) -> Alignment:
    """Match estimated sources to true ones through the system matrix."""
    p = system_matrix(a_est, truth.a_true)
    if p.shape[0] != p.shape[1]:
        raise ValueError("permutation alignment needs the determined case")
    perm = _best_permutation(np.abs(p))
    vals = np.array([p[i, perm[i]] for i in range(p.shape[0])])
    return Alignment(perm, np.sign(vals), np.abs(vals), p)


def source_snrs(s_true, s_est, alignment: Alignment) -> np.ndarray:
    return np.array([snr_db(s_true[:, i], s_est[:, j]) for i, j in enumerate(alignment.permutation)])
