"""Geometry of the unit sphere, the oblique manifold and the product
manifold ``R^{d x m} x OB(m, k)``.

Points and tangent vectors are small frozen dataclasses around read-only
numpy arrays. Solvers work on the raw arrays through :mod:`csbss.kernels`
and only wrap at their boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

MEMBERSHIP_TOL = 1e-10
RANK_TOL = 1e-12
# condition number beyond which an oblique iterate is reported as near rank-deficient
COND_LIMIT = 1e12


class PreconditionError(ValueError):
    """An input is off the manifold or not tangent where it must be."""


class GenerationError(RuntimeError):
    """Random point generation could not produce a full-rank matrix."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _check_unit(x, tol=MEMBERSHIP_TOL):
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise PreconditionError(f"point has norm {np.linalg.norm(x)!r}, expected 1")


def _check_tangent(x, v, name, tol=MEMBERSHIP_TOL):
    # tolerance scales with |v| so large tangent vectors are not rejected for rounding
    if abs(float(x @ v)) > tol * max(1.0, np.linalg.norm(v)):
        raise PreconditionError(f"{name} is not tangent at the base point")


@dataclass(frozen=True, eq=False)
class ObliquePoint:
    """Full-rank ``m x k`` matrix with unit-norm columns."""

    entries: np.ndarray

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2:
            raise PreconditionError("oblique point must be a 2-D matrix")
        if np.any(np.abs(np.linalg.norm(a, axis=0) - 1.0) > MEMBERSHIP_TOL):
            raise PreconditionError("oblique point columns must have unit norm")
        sv = np.linalg.svd(a, compute_uv=False)
        if a.shape[1] > a.shape[0] or sv[-1] <= RANK_TOL * sv[0]:
            raise PreconditionError("oblique point must have full column rank")
        object.__setattr__(self, "entries", a)

    @classmethod
    def _trusted(cls, a) -> "ObliquePoint":
        # skips the rank check; used for iterates produced by geodesic steps
        obj = object.__new__(cls)
        object.__setattr__(obj, "entries", _frozen(a))
        return obj

    @classmethod
    def from_matrix(cls, w) -> "ObliquePoint":
        """Normalize the columns of ``w`` and validate."""
        w = np.asarray(w, dtype=float)
        return cls(w / np.linalg.norm(w, axis=0))

    @property
    def shape(self):
        return self.entries.shape

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.entries))


@dataclass(frozen=True, eq=False)
class TangentPair:
    """Tangent vector ``(z, xi)`` to the product manifold."""

    z: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen(self.z))
        object.__setattr__(self, "xi", _frozen(self.xi))

    def __add__(self, other: "TangentPair") -> "TangentPair":
        return TangentPair(self.z + other.z, self.xi + other.xi)

    def __sub__(self, other: "TangentPair") -> "TangentPair":
        return TangentPair(self.z - other.z, self.xi - other.xi)

    def __neg__(self) -> "TangentPair":
        return TangentPair(-self.z, -self.xi)

    def __mul__(self, c: float) -> "TangentPair":
        return TangentPair(c * self.z, c * self.xi)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(riemannian_inner(self, self)))

    def is_tangent_at(self, a, tol=MEMBERSHIP_TOL) -> bool:
        a = a.entries if isinstance(a, ObliquePoint) else np.asarray(a)
        diag = np.einsum("ij,ij->j", a, self.xi)
        return bool(np.all(np.abs(diag) <= tol * max(1.0, np.abs(self.xi).max(initial=0.0))))


@dataclass(frozen=True, eq=False)
class IteratePair:
    """Optimization variable: sparse codes ``x`` (d x m) and mixing matrix ``a``."""

    x: np.ndarray
    a: ObliquePoint

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        if not isinstance(self.a, ObliquePoint):
            object.__setattr__(self, "a", ObliquePoint(self.a))
        if self.x.ndim != 2 or self.x.shape[1] != self.a.shape[0]:
            raise PreconditionError(
                f"x has shape {self.x.shape}, incompatible with mixing matrix {self.a.shape}"
            )


# --- unit sphere -----------------------------------------------------------


def sphere_geodesic(x, xi, t: float) -> np.ndarray:
    """Great circle through ``x`` with initial velocity ``xi``, evaluated at ``t``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_unit(x)
    _check_tangent(x, xi, "xi")
    return kernels.oblique_geodesic(x[:, None], xi[:, None], float(t))[:, 0]


def sphere_transport(x, xi, t: float, psi) -> np.ndarray:
    """Parallel transport of ``psi`` from ``x`` to ``sphere_geodesic(x, xi, t)``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    _check_unit(x)
    _check_tangent(x, xi, "xi")
    _check_tangent(x, psi, "psi")
    return kernels.oblique_transport(x[:, None], xi[:, None], float(t), psi[:, None])[:, 0]


# --- product manifold ------------------------------------------------------


def _check_pair_tangent(p: IteratePair, h: TangentPair, name: str):
    if h.z.shape != p.x.shape or h.xi.shape != p.a.shape:
        raise PreconditionError(f"{name} has the wrong shape for this base point")
    if not h.is_tangent_at(p.a):
        raise PreconditionError(f"{name} is not tangent at the base point")


def product_geodesic(p: IteratePair, h: TangentPair, t: float) -> IteratePair:
    """Linear step in the codes, great-circle step in each mixing column."""
    _check_pair_tangent(p, h, "h")
    a_new = kernels.oblique_geodesic(p.a.entries, h.xi, float(t))
    return IteratePair(p.x + t * h.z, ObliquePoint._trusted(a_new))


def product_transport(p: IteratePair, direction: TangentPair, t: float, v: TangentPair) -> TangentPair:
    _check_pair_tangent(p, direction, "direction")
    _check_pair_tangent(p, v, "v")
    xi = kernels.oblique_transport(p.a.entries, direction.xi, float(t), v.xi)
    return TangentPair(v.z, xi)


def project_columns(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Raw-array version of :func:`tangent_project`."""
    return w - a * np.einsum("ij,ij->j", a, w)


def tangent_project(a, w) -> np.ndarray:
    """Apply ``I - a_i a_i^T`` to column ``i`` of ``w``."""
    a = a.entries if isinstance(a, ObliquePoint) else np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.shape != a.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {a.shape}")
    return project_columns(a, w)


def riemannian_inner(u: TangentPair, v: TangentPair) -> float:
    if u.z.shape != v.z.shape or u.xi.shape != v.xi.shape:
        raise ValueError("tangent vectors have different shapes")
    return float(np.vdot(u.z, v.z) + np.vdot(u.xi, v.xi))


def random_oblique(m: int, k: int, rng_seed=None) -> ObliquePoint:
    """Columns drawn from a standard normal and normalized.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    for _ in range(100):
        w = rng.standard_normal((m, k))
        w /= np.linalg.norm(w, axis=0)
        sv = np.linalg.svd(w, compute_uv=False)
        if k <= m and sv[-1] > RANK_TOL * sv[0]:
            return ObliquePoint(w)
    raise GenerationError(f"no full-rank {m}x{k} oblique point after 100 draws")
