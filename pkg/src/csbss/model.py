"""Compressively sensed BSS problem data, cost and subgradients.

Each mixture ``i`` is observed as ``yhat_i = Phi_i D X a_i`` (plus noise).
The cost is

    f(X, A) = ||X||_1 + sum_i lam_i ||yhat_i - Phi_i D X a_i||^2

on ``R^{d x m} x OB(m, k)``. The smooth-part gradients follow the printed
operators, which carry no factor 2 from the square; see :func:`smooth_gradients`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import IteratePair, ObliquePoint, TangentPair, project_columns


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Linear map from length-``n`` mixtures to length-``p`` observations.

    Either a row selection (``indices``) or a dense ``p x n`` matrix.
    ``composed`` holds ``Phi @ D`` once the operator is bound to a dictionary.
    """

    kind: str
    n: int
    indices: np.ndarray | None = None
    matrix: np.ndarray | None = None
    composed: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "row_selection":
            idx = np.asarray(self.indices)
            if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
                raise ValueError("row selection needs a 1-D integer index array")
            if idx.size and (idx.min() < 0 or idx.max() >= self.n):
                raise ValueError("row selection index out of range")
            if np.unique(idx).size != idx.size:
                raise ValueError("row selection indices must be distinct")
            object.__setattr__(self, "indices", _frozen(idx, dtype=np.intp))
        elif self.kind == "dense":
            mat = np.asarray(self.matrix, dtype=float)
            if mat.ndim != 2 or mat.shape[1] != self.n:
                raise ValueError(f"dense sampling matrix must have {self.n} columns")
            object.__setattr__(self, "matrix", _frozen(mat))
        else:
            raise ValueError(f"unknown sampling operator kind {self.kind!r}")
        if self.composed is not None:
            object.__setattr__(self, "composed", _frozen(self.composed))

    @classmethod
    def rows(cls, indices, n: int) -> "SamplingOperator":
        return cls("row_selection", n, indices=np.asarray(indices))

    @classmethod
    def dense(cls, matrix) -> "SamplingOperator":
        matrix = np.asarray(matrix, dtype=float)
        return cls("dense", matrix.shape[1], matrix=matrix)

    @property
    def p(self) -> int:
        return len(self.indices) if self.kind == "row_selection" else self.matrix.shape[0]

    def as_matrix(self) -> np.ndarray:
        if self.kind == "dense":
            return np.array(self.matrix)
        out = np.zeros((self.p, self.n))
        out[np.arange(self.p), self.indices] = 1.0
        return out

    def apply(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "row_selection":
            return y[self.indices]
        return self.matrix @ y

    def bind(self, dictionary: np.ndarray) -> "SamplingOperator":
        if self.kind == "row_selection":
            comp = dictionary[self.indices]
        else:
            comp = self.matrix @ dictionary
        return replace(self, composed=comp)


def _is_identity(mat: np.ndarray) -> bool:
    return mat.shape[0] == mat.shape[1] and np.array_equal(mat, np.eye(mat.shape[0]))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Dictionary, per-mixture sampling operators, observations and weights."""

    dictionary: np.ndarray
    sampling_ops: tuple
    observations: tuple
    weights: np.ndarray
    m: int
    _rows: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        dic = _frozen(self.dictionary)
        if dic.ndim != 2:
            raise ValueError("dictionary must be a matrix")
        n, d = dic.shape
        if n > d:
            raise ValueError(f"dictionary must satisfy n <= d, got {n}x{d}")
        ops = tuple(self.sampling_ops)
        obs = tuple(_frozen(np.ravel(y)) for y in self.observations)
        w = _frozen(np.ravel(self.weights))
        k = len(ops)
        if len(obs) != k or w.size != k:
            raise ValueError("need one observation vector and one weight per sampling operator")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        bound = []
        for i, (op, y) in enumerate(zip(ops, obs)):
            if op.n != n:
                raise ValueError(f"sampling operator {i} expects length {op.n}, dictionary has {n} rows")
            if op.p != y.size:
                raise ValueError(f"observation {i} has length {y.size}, operator outputs {op.p}")
            bound.append(op if op.composed is not None else op.bind(dic))
        if int(self.m) <= 0:
            raise ValueError("number of sources m must be positive")
        object.__setattr__(self, "m", int(self.m))
        rows = None
        if _is_identity(dic) and all(op.kind == "row_selection" for op in bound):
            rows = tuple(op.indices for op in bound)
        object.__setattr__(self, "dictionary", dic)
        object.__setattr__(self, "sampling_ops", tuple(bound))
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_rows", rows)

    @property
    def n(self) -> int:
        return self.dictionary.shape[0]

    @property
    def d(self) -> int:
        return self.dictionary.shape[1]

    @property
    def k(self) -> int:
        return len(self.sampling_ops)

    @property
    def dims(self):
        return (self.n, self.d, self.m, self.k) + tuple(op.p for op in self.sampling_ops)

    def with_weights(self, weights) -> "ProblemInstance":
        return replace(self, weights=np.broadcast_to(np.asarray(weights, dtype=float), (self.k,)))

    # raw array kernels used by the solvers --------------------------------

    def forward(self, x: np.ndarray) -> list:
        """``[Phi_i D x for each mixture]``, each ``p_i x m``."""
        if self._rows is not None:
            return [x[idx] for idx in self._rows]
        return [op.composed @ x for op in self.sampling_ops]

    def adjoint_sum(self, terms: Sequence[np.ndarray]) -> np.ndarray:
        """``sum_i (Phi_i D)^T terms[i]`` for ``p_i x m`` terms."""
        if self._rows is not None:
            out = np.zeros((self.d, terms[0].shape[1]))
            for idx, t in zip(self._rows, terms):
                out[idx] += t
            return out
        out = self.sampling_ops[0].composed.T @ terms[0]
        for op, t in zip(self.sampling_ops[1:], terms[1:]):
            out += op.composed.T @ t
        return out

    def residuals_from(self, w: list, a: np.ndarray) -> list:
        return [wi @ a[:, i] - y for i, (wi, y) in enumerate(zip(w, self.observations))]

    def fidelity_from(self, res: list) -> float:
        return float(sum(lam * (r @ r) for lam, r in zip(self.weights, res)))

    def smooth_gradients(self, w: list, a: np.ndarray, res: list, weights=None):
        """Quadratic-term gradient ``B`` (d x m) and Riemannian mixing gradient (m x k)."""
        lam = self.weights if weights is None else weights
        terms = [lam[i] * np.outer(r, a[:, i]) for i, r in enumerate(res)]
        b = self.adjoint_sum(terms)
        g_a = np.column_stack([lam[i] * (wi.T @ r) for i, (wi, r) in enumerate(zip(w, res))])
        return b, project_columns(a, g_a)

    def check_iterate(self, it: IteratePair):
        if it.x.shape != (self.d, self.m) or it.a.shape != (self.m, self.k):
            raise ValueError(
                f"iterate shapes {it.x.shape}, {it.a.shape} do not match "
                f"instance (d, m, k) = ({self.d}, {self.m}, {self.k})"
            )


def _unpack(p: ProblemInstance, it: IteratePair):
    p.check_iterate(it)
    return np.asarray(it.x), np.asarray(it.a.entries)


def residuals(p: ProblemInstance, it: IteratePair) -> list:
    """``r_i = Phi_i D X a_i - yhat_i`` (model minus observation)."""
    x, a = _unpack(p, it)
    return p.residuals_from(p.forward(x), a)


def cost(p: ProblemInstance, it: IteratePair) -> float:
    x, a = _unpack(p, it)
    return float(np.abs(x).sum()) + p.fidelity_from(p.residuals_from(p.forward(x), a))


def euclidean_subgrad_smooth_part(p: ProblemInstance, it: IteratePair) -> np.ndarray:
    """``B = sum_i lam_i (Phi_i D)^T r_i a_i^T``, no factor 2."""
    x, a = _unpack(p, it)
    w = p.forward(x)
    b, _ = p.smooth_gradients(w, a, p.residuals_from(w, a))
    return b


def min_norm_subgradient(p: ProblemInstance, it: IteratePair) -> TangentPair:
    """Element of the Riemannian subdifferential with the smallest norm."""
    x, a = _unpack(p, it)
    w = p.forward(x)
    b, g_a = p.smooth_gradients(w, a, p.residuals_from(w, a))
    return TangentPair(kernels.min_norm_l1(x, b), g_a)


def reconstruct_sources(p: ProblemInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != p.d:
        raise ValueError(f"codes have {x.shape[0]} rows, dictionary has {p.d} atoms")
    return p.dictionary @ x



def implied_cost(p: ProblemInstance, it: IteratePair) -> float:
    """The objective whose exact subgradients are the operators above.

    Equal to ``cost`` with every weight halved.
    """
    x, a = _unpack(p, it)
    res = p.residuals_from(p.forward(x), a)
    return float(np.abs(x).sum()) + 0.5 * p.fidelity_from(res)


def weight_scale(p: ProblemInstance) -> float:
    """Reciprocal of ``max_i ||(Phi_i D)^T yhat_i||_inf``.

    At ``X = 0`` the smooth gradient entries are bounded by ``k * lam / weight_scale``,
    so weights of order ``weight_scale(p)`` are where the sparsity and data terms
    start to compete.
    """
    peak = max(np.abs(_adj_single(p, i, y)).max(initial=0.0) for i, y in enumerate(p.observations))
    return float(1.0 / peak) if peak > 0 else float("inf")


def _adj_single(p: ProblemInstance, i: int, y: np.ndarray) -> np.ndarray:
    if p._rows is not None:
        out = np.zeros(p.d)
        out[p._rows[i]] = y
        return out
    return p.sampling_ops[i].composed.T @ y
