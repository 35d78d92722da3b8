"""Synthetic CS-BSS instances: sparse Laplacian sources, random mixing,
independent random row sampling per mixture, optional Gaussian noise.

All randomness flows from one integer seed through ``SeedSequence.spawn`` into
counter-based Philox streams, so a trial's instance does not depend on which
worker generated it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import IteratePair, ObliquePoint, random_oblique
from .model import ProblemInstance, SamplingOperator, weight_scale

DICTIONARY_KINDS = ("identity", "orthonormal_transform", "random_overcomplete")


@dataclass(frozen=True)
class GenSpec:
    n: int = 128
    d: int = 128
    m: int = 3
    k: int = 3
    nnz: int = 8
    p: tuple = (64, 64, 64)
    laplace_scale: float = 1.0
    dictionary_kind: str = "identity"
    noise_sigma: float = 0.0
    # instance weights are weight_factor * weight_scale(instance)
    weight_factor: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        p = tuple(int(v) for v in np.atleast_1d(self.p))
        if len(p) == 1 and self.k > 1:
            p = p * self.k
        object.__setattr__(self, "p", p)
        if min(self.n, self.d, self.m, self.k, self.nnz) < 1:
            raise ValueError("dimensions and nnz must be positive")
        if self.n > self.d:
            raise ValueError("need n <= d")
        if self.nnz > self.d:
            raise ValueError("nnz cannot exceed the number of atoms d")
        if len(p) != self.k or any(v < 1 or v > self.n for v in p):
            raise ValueError(f"need k={self.k} sample counts each in [1, n]")
        if self.m > self.k:
            raise ValueError("validation covers the determined/overdetermined case m <= k")
        if self.dictionary_kind not in DICTIONARY_KINDS:
            raise ValueError(f"dictionary_kind must be one of {DICTIONARY_KINDS}")
        if self.dictionary_kind == "identity" and self.n != self.d:
            raise ValueError("identity dictionary needs n == d")
        if self.dictionary_kind == "orthonormal_transform" and self.n != self.d:
            raise ValueError("orthonormal transform needs n == d")
        if self.noise_sigma < 0 or self.laplace_scale <= 0 or self.weight_factor <= 0:
            raise ValueError("noise_sigma >= 0, laplace_scale > 0 and weight_factor > 0 required")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["p"] = list(self.p)
        return out


@dataclass(frozen=True, eq=False)
class GroundTruth:
    x_true: np.ndarray
    a_true: ObliquePoint
    s_true: np.ndarray


def _streams(seed: int, count: int):
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def make_dictionary(kind: str, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "identity":
        return np.eye(n)
    if kind == "orthonormal_transform":
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        return q * np.sign(np.diag(r))
    atoms = rng.standard_normal((n, d))
    return atoms / np.linalg.norm(atoms, axis=0)


def generate(spec: GenSpec):
    """Build ``(ProblemInstance, GroundTruth)`` deterministically from ``spec.seed``."""
    r_dict, r_x, r_a, r_phi, r_noise = _streams(spec.seed, 5)
    dic = make_dictionary(spec.dictionary_kind, spec.n, spec.d, r_dict)
    x = np.zeros((spec.d, spec.m))
    for j in range(spec.m):
        support = r_x.choice(spec.d, size=spec.nnz, replace=False)
        x[support, j] = r_x.laplace(0.0, spec.laplace_scale, size=spec.nnz)
        # a Laplacian draw of exactly 0 would break the nnz contract
        x[support[x[support, j] == 0.0], j] = spec.laplace_scale
    a = random_oblique(spec.m, spec.k, r_a)
    ops = [SamplingOperator.rows(np.sort(r_phi.choice(spec.n, size=pi, replace=False)), spec.n)
           for pi in spec.p]
    empty = [np.zeros(pi) for pi in spec.p]
    draft = ProblemInstance(dic, ops, empty, np.ones(spec.k), spec.m)
    obs = draft.residuals_from(draft.forward(x), a.entries)
    if spec.noise_sigma > 0:
        obs = [y + r_noise.normal(0.0, spec.noise_sigma, size=y.size) for y in obs]
    inst = ProblemInstance(dic, draft.sampling_ops, obs, np.ones(spec.k), spec.m)
    inst = inst.with_weights(spec.weight_factor * weight_scale(inst))
    truth = GroundTruth(x, a, dic @ x)
    return inst, truth


def initial_point(m: int, k: int, d: int, seed: int):
    """``X = 0`` and a random oblique mixing matrix, from a stream disjoint from ``generate``."""
    rng = _streams(seed, 6)[5]
    return IteratePair(np.zeros((d, m)), random_oblique(m, k, rng))
