import numpy as np
import pytest

from csbss.geometry import IteratePair, ObliquePoint, random_oblique, sphere_geodesic, tangent_project
from csbss.model import (
    ProblemInstance,
    SamplingOperator,
    cost,
    euclidean_subgrad_smooth_part,
    implied_cost,
    min_norm_subgradient,
    reconstruct_sources,
    residuals,
    weight_scale,
)
from csbss.synth import GenSpec, generate

from conftest import random_instance, random_iterate


def _toy():
    p = ProblemInstance(np.eye(1), [SamplingOperator.rows([0], 1)], [np.array([2.0])], [1.0], 1)
    return p, IteratePair(np.ones((1, 1)), ObliquePoint(np.ones((1, 1))))


def test_scalar_toy():
    p, it = _toy()
    assert cost(p, it) == 2.0
    np.testing.assert_array_equal(residuals(p, it)[0], [-1.0])


def test_cost_and_residuals_at_zero_codes(rng):
    p = random_instance(rng)
    it = IteratePair(np.zeros((p.d, p.m)), random_oblique(p.m, p.k, rng))
    expect = sum(lam * (y @ y) for lam, y in zip(p.weights, p.observations))
    assert cost(p, it) == pytest.approx(expect, rel=1e-14)
    for r, y in zip(residuals(p, it), p.observations):
        np.testing.assert_array_equal(r, -y)


@pytest.mark.parametrize("dictionary_kind", ["identity", "orthonormal_transform", "random_overcomplete"])
def test_ground_truth_is_exact(dictionary_kind):
    d = 40 if dictionary_kind == "random_overcomplete" else 32
    inst, truth = generate(GenSpec(n=32, d=d, nnz=4, p=(20, 20, 20), dictionary_kind=dictionary_kind, seed=3))
    gt = IteratePair(truth.x_true, truth.a_true)
    assert cost(inst, gt) == np.abs(truth.x_true).sum()
    for r in residuals(inst, gt):
        np.testing.assert_array_equal(r, 0.0)
    np.testing.assert_array_equal(euclidean_subgrad_smooth_part(inst, gt), 0.0)


def test_smooth_part_at_zero_single_mixture(rng):
    dic = rng.standard_normal((6, 8))
    op = SamplingOperator.dense(rng.standard_normal((4, 6)))
    y = rng.standard_normal(4)
    p = ProblemInstance(dic, [op], [y], [1.7], 1)
    a = ObliquePoint(np.ones((1, 1)))
    b = euclidean_subgrad_smooth_part(p, IteratePair(np.zeros((8, 1)), a))
    expect = -1.7 * np.outer(dic.T @ op.matrix.T @ y, a.entries[:, 0])
    np.testing.assert_allclose(b, expect, rtol=1e-13)


def _half_quadratic(p, x, a):
    res = [op.composed @ x @ a[:, i] - y for i, (op, y) in enumerate(zip(p.sampling_ops, p.observations))]
    return 0.5 * sum(lam * (r @ r) for lam, r in zip(p.weights, res))


@pytest.mark.parametrize("dense", [False, True])
def test_smooth_part_matches_finite_differences(rng, dense):
    p = random_instance(rng, dense=dense)
    it = random_iterate(rng, p)
    b = euclidean_subgrad_smooth_part(p, it)
    x, a = np.array(it.x), it.a.entries
    h = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        fd[idx] = (_half_quadratic(p, x + e, a) - _half_quadratic(p, x - e, a)) / (2 * h)
    np.testing.assert_allclose(b, fd, rtol=1e-5, atol=1e-8)


def test_min_norm_zero_codes_inside_box():
    rng = np.random.default_rng(5)
    p = random_instance(rng, weights=np.full(3, 1e-3))
    it = IteratePair(np.zeros((p.d, p.m)), random_oblique(p.m, p.k, rng))
    assert np.abs(euclidean_subgrad_smooth_part(p, it)).max() <= 1.0
    np.testing.assert_array_equal(min_norm_subgradient(p, it).z, 0.0)


def test_min_norm_dense_codes(rng):
    p = random_instance(rng)
    it = random_iterate(rng, p)
    g = min_norm_subgradient(p, it)
    np.testing.assert_allclose(g.z, np.sign(it.x) + euclidean_subgrad_smooth_part(p, it), rtol=1e-15)


def test_min_norm_against_grid_search(rng):
    grid = np.linspace(-1.0, 1.0, 10_001)
    for _ in range(5):
        p = random_instance(rng)
        it = random_iterate(rng, p, dense_x=False)
        b = euclidean_subgrad_smooth_part(p, it)
        g = min_norm_subgradient(p, it).z
        zeros = np.argwhere(np.asarray(it.x) == 0.0)
        assert len(zeros) > 0
        for i, j in zeros:
            brute = np.abs(grid + b[i, j]).min()
            assert abs(abs(g[i, j]) - brute) < 1e-4


def test_oblique_part_is_tangent_and_matches_geodesic_derivative(rng):
    for _ in range(5):
        p = random_instance(rng)
        it = random_iterate(rng, p)
        g = min_norm_subgradient(p, it)
        np.testing.assert_allclose(np.einsum("ij,ij->j", it.a.entries, g.xi), 0.0, atol=1e-10)
        xi = tangent_project(it.a, rng.standard_normal(it.a.shape))
        h = 1e-6

        def along(t):
            cols = [sphere_geodesic(it.a.entries[:, i], xi[:, i], t) for i in range(p.k)]
            return implied_cost(p, IteratePair(it.x, ObliquePoint(np.column_stack(cols))))

        fd = (along(h) - along(-h)) / (2 * h)
        assert np.vdot(g.xi, xi) == pytest.approx(fd, rel=1e-5)


def test_subgradient_inequality_in_codes(rng):
    p = random_instance(rng)
    for _ in range(20):
        it = random_iterate(rng, p, dense_x=False)
        g = min_norm_subgradient(p, it).z
        x2 = np.asarray(it.x) + 0.1 * rng.standard_normal(it.x.shape)
        lhs = implied_cost(p, IteratePair(x2, it.a))
        assert lhs >= implied_cost(p, it) + np.vdot(g, x2 - it.x) - 1e-8


def test_cost_invariant_under_signed_relabeling(rng):
    p = random_instance(rng)
    it = random_iterate(rng, p)
    q = np.eye(3)[[2, 0, 1]] * np.array([1.0, -1.0, 1.0])
    # X a_i is unchanged when X -> X q and A -> q^T A
    moved = IteratePair(it.x @ q, ObliquePoint(q.T @ it.a.entries))
    assert cost(p, moved) == pytest.approx(cost(p, it), rel=1e-13)


def test_reconstruct_sources(rng):
    p = random_instance(rng)
    np.testing.assert_array_equal(reconstruct_sources(p, np.zeros((p.d, p.m))), 0.0)
    x = rng.standard_normal((p.d, p.m))
    np.testing.assert_allclose(reconstruct_sources(p, x), np.asarray(p.dictionary) @ x)
    ident = ProblemInstance(np.eye(5), [SamplingOperator.rows([0, 1], 5)], [np.zeros(2)], [1.0], 2)
    x5 = rng.standard_normal((5, 2))
    np.testing.assert_array_equal(reconstruct_sources(ident, x5), x5)
    with pytest.raises(ValueError):
        reconstruct_sources(p, np.zeros((p.d + 1, p.m)))


def test_row_and_dense_operators_agree(rng):
    p = random_instance(rng, n=10, d=10, p=6)
    dense = ProblemInstance(p.dictionary, [SamplingOperator.dense(op.as_matrix()) for op in p.sampling_ops],
                            p.observations, p.weights, p.m)
    it = random_iterate(rng, p)
    assert cost(dense, it) == pytest.approx(cost(p, it), rel=1e-13)
    np.testing.assert_allclose(min_norm_subgradient(dense, it).z, min_norm_subgradient(p, it).z, rtol=1e-12)
    for op in p.sampling_ops:
        np.testing.assert_allclose(op.composed, op.as_matrix() @ p.dictionary, atol=1e-12)


def test_identity_fast_path_agrees_with_dense(rng):
    ident = ProblemInstance(np.eye(8), [SamplingOperator.rows([1, 4, 6], 8), SamplingOperator.rows([0, 2, 7], 8)],
                            [rng.standard_normal(3), rng.standard_normal(3)], [1.0, 2.0], 2)
    assert ident._rows is not None
    dense = ProblemInstance(np.eye(8), [SamplingOperator.dense(op.as_matrix()) for op in ident.sampling_ops],
                            ident.observations, ident.weights, 2)
    it = IteratePair(rng.standard_normal((8, 2)), random_oblique(2, 2, rng))
    assert cost(ident, it) == pytest.approx(cost(dense, it), rel=1e-14)
    np.testing.assert_allclose(min_norm_subgradient(ident, it).z, min_norm_subgradient(dense, it).z, atol=1e-14)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dictionary=np.ones((4, 3))),  # n > d
        dict(weights=[1.0, -1.0]),
        dict(observations=[np.zeros(2), np.zeros(3)]),
        dict(m=0),
    ],
)
def test_instance_validation(kwargs):
    base = dict(dictionary=np.eye(4), sampling_ops=[SamplingOperator.rows([0, 1], 4)] * 2,
                observations=[np.zeros(2), np.zeros(2)], weights=[1.0, 1.0], m=2)
    base.update(kwargs)
    with pytest.raises(ValueError):
        ProblemInstance(**base)


def test_sampling_operator_validation():
    with pytest.raises(ValueError):
        SamplingOperator.rows([0, 0], 3)
    with pytest.raises(ValueError):
        SamplingOperator.rows([3], 3)
    with pytest.raises(ValueError):
        SamplingOperator("fft", 3)


def test_shape_mismatch(rng):
    p = random_instance(rng)
    bad = IteratePair(np.zeros((p.d + 1, p.m)), random_oblique(p.m, p.k, rng))
    with pytest.raises(ValueError):
        cost(p, bad)


def test_weight_scale_bounds_zero_stationarity(rng):
    p = random_instance(rng)
    q = p.with_weights(weight_scale(p) / p.k)
    it = IteratePair(np.zeros((p.d, p.m)), random_oblique(p.m, p.k, rng))
    assert np.abs(euclidean_subgrad_smooth_part(q, it)).max() <= 1.0 + 1e-12
