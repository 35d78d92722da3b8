import numpy as np
import pytest

from csbss.csg import (
    LambdaSchedule,
    LineSearchError,
    SolverConfig,
    SolverState,
    _Objective,
    _run_stage,
    csg_solve,
    direction_update,
    hestenes_stiefel_mu,
    line_search,
)
from csbss.geometry import IteratePair, ObliquePoint, TangentPair, random_oblique, tangent_project
from csbss.model import ProblemInstance, SamplingOperator, implied_cost, min_norm_subgradient
from csbss.synth import GenSpec, generate, initial_point

from conftest import random_instance, random_iterate


def _tangent_triple(rng, it):
    def one():
        return TangentPair(rng.standard_normal(it.x.shape),
                           tangent_project(it.a, rng.standard_normal(it.a.shape)))
    return one(), one(), one()


def _ip(u, v):
    return np.vdot(u.z, v.z) + np.vdot(u.xi, v.xi)


def test_zero_observations_return_zero_codes():
    rng = np.random.default_rng(0)
    p = random_instance(rng)
    p = ProblemInstance(p.dictionary, p.sampling_ops, [np.zeros(o.size) for o in p.observations], p.weights, p.m)
    init = IteratePair(np.zeros((p.d, p.m)), random_oblique(p.m, p.k, rng))
    res = csg_solve(p, init)
    assert res.converged and res.total_inner_iters == 0
    np.testing.assert_array_equal(res.final.x, 0.0)
    assert res.final_cost == 0.0


def test_determined_toy_reaches_ground_truth_cost():
    spec = GenSpec(n=32, d=32, m=2, k=2, nnz=4, p=24, seed=0)
    inst, truth = generate(spec)
    res = csg_solve(inst, initial_point(2, 2, 32, 0))
    gt_cost = implied_cost(inst, IteratePair(truth.x_true, truth.a_true))
    assert res.final_cost <= gt_cost + 1e-3


def test_cost_history_monotone_and_on_manifold():
    for seed in range(5):
        inst, _ = generate(GenSpec(n=32, d=32, nnz=3, p=20, dictionary_kind="orthonormal_transform", seed=seed))
        res = csg_solve(inst, initial_point(3, 3, 32, seed))
        h = np.asarray(res.cost_history)
        assert np.all(np.diff(h) <= 0.0)
        np.testing.assert_allclose(np.linalg.norm(res.final.a.entries, axis=0), 1.0, atol=1e-8)


def test_final_cost_is_implied_cost_of_final_iterate():
    rng = np.random.default_rng(4)
    p = random_instance(rng)
    res = csg_solve(p, random_iterate(rng, p), SolverConfig(max_outer=3))
    assert res.final_cost == pytest.approx(implied_cost(p, res.final), abs=1e-12)


def test_continuation_stages_are_each_monotone():
    inst, _ = generate(GenSpec(n=32, d=32, nnz=3, p=20, seed=2))
    cfg = SolverConfig(lambda_schedule=LambdaSchedule("geometric", 0.1, 3))
    res = csg_solve(inst, initial_point(3, 3, 32, 2), cfg)
    assert len(res.stage_starts) == 3
    for seg in res.monotone_segments():
        assert np.all(np.diff(seg) <= 0.0)


def test_lambda_schedule_factors():
    assert LambdaSchedule.fixed().factors() == [1.0]
    np.testing.assert_allclose(LambdaSchedule("geometric", 0.01, 3).factors(), [0.01, 0.1, 1.0])
    with pytest.raises(ValueError):
        LambdaSchedule("cosine")


def test_deterministic_history():
    inst, _ = generate(GenSpec(n=32, d=32, nnz=3, p=20, seed=7))
    init = initial_point(3, 3, 32, 7)
    a, b = csg_solve(inst, init), csg_solve(inst, init)
    assert a.cost_history == b.cost_history
    np.testing.assert_array_equal(a.final.x, b.final.x)


def test_budgets_and_config_validation():
    cfg = SolverConfig()
    assert cfg.inner_budget(10, 3, 4) == 10 * 3 + 4 * 2 - 1
    assert cfg.reset_period(10, 3, 4) == 38
    with pytest.raises(ValueError):
        SolverConfig(armijo_c1=1.5)
    with pytest.raises(ValueError):
        SolverConfig(gradient_sign=0)
    inst, _ = generate(GenSpec(n=32, d=32, nnz=3, p=20, seed=1))
    res = csg_solve(inst, initial_point(3, 3, 32, 1), SolverConfig(max_iters=7))
    assert res.total_inner_iters <= 7 and not res.converged


def _scalar_toy(lam):
    p = ProblemInstance(np.eye(1), [SamplingOperator.rows([0], 1)], [np.array([2.0])], [lam], 1)
    return p, ObliquePoint(np.ones((1, 1)))


def test_line_search_brackets_exact_minimizer():
    for lam, x0 in ((4.0, 0.0), (1.0, 0.25), (10.0, -0.5)):
        p, a = _scalar_toy(lam)
        it = IteratePair(np.array([[x0]]), a)
        g = min_norm_subgradient(p, it)
        h = -g
        alpha, new = line_search(p, it, h, g, SolverConfig(orthant_snap=False))
        grid = np.linspace(0.0, 2.0, 200_001)
        vals = [implied_cost(p, IteratePair(np.array([[x0 + t * h.z[0, 0]]]), a)) for t in grid]
        best = grid[int(np.argmin(vals))]
        assert 0.5 * alpha <= best + 1e-4 and best <= alpha / 0.5 + 1e-4
        assert implied_cost(p, new) < implied_cost(p, it)


def test_line_search_snaps_sign_crossings_to_zero():
    p, a = _scalar_toy(10.0)
    it = IteratePair(np.array([[-0.5]]), a)
    g = min_norm_subgradient(p, it)
    alpha, new = line_search(p, it, -g, g)
    assert alpha == 1.0 and new.x[0, 0] == 0.0


def test_line_search_descent_in_smooth_region():
    rng = np.random.default_rng(9)
    p = random_instance(rng)
    it = random_iterate(rng, p)
    g = min_norm_subgradient(p, it)
    alpha, new = line_search(p, it, -g, g)
    assert alpha > 0 and implied_cost(p, new) < implied_cost(p, it)
    with pytest.raises(LineSearchError):
        line_search(p, it, g, g)


def test_hs_mu_examples():
    rng = np.random.default_rng(2)
    p = random_instance(rng)
    it = random_iterate(rng, p)
    g, tg, th = _tangent_triple(rng, it)
    assert hestenes_stiefel_mu(g, g, th) == 0.0
    diff = g - tg
    expect = _ip(g, diff) / _ip(th, diff)
    assert hestenes_stiefel_mu(g, tg, th) == pytest.approx(expect, rel=1e-12)
    # zero transported direction: degenerate denominator
    w = TangentPair(np.zeros_like(diff.z), np.zeros_like(diff.xi))
    assert hestenes_stiefel_mu(g, tg, w) == 0.0


def test_direction_update_examples():
    rng = np.random.default_rng(3)
    p = random_instance(rng)
    it = random_iterate(rng, p)
    g, tg, th = _tangent_triple(rng, it)
    zero = TangentPair(np.zeros(it.x.shape), np.zeros(it.a.shape))
    first = SolverState(it, zero, zero, inner_iter=1)
    out = direction_update(first, g, tg, th)
    np.testing.assert_array_equal(out.z, -g.z)
    later = SolverState(it, zero, zero, inner_iter=2)
    out = direction_update(later, g, g, th)  # mu = 0
    np.testing.assert_array_equal(out.z, -g.z)
    np.testing.assert_array_equal(out.xi, -g.xi)
    mu = hestenes_stiefel_mu(g, tg, th)
    out = direction_update(later, g, tg, th)
    np.testing.assert_allclose(out.z, -g.z + mu * th.z, rtol=1e-13)
    np.testing.assert_allclose(out.xi, -g.xi + mu * th.xi, rtol=1e-13)
    plus = direction_update(later, g, tg, th, SolverConfig(gradient_sign=1))
    np.testing.assert_allclose(plus.z, g.z + mu * th.z, rtol=1e-13)


class _Ridge(_Objective):
    """``0.5 ||X||^2`` in place of the l1 term: smooth and strongly convex in X."""

    def reg(self, x):
        return 0.5 * float(np.vdot(x, x))

    def subgrad(self, x, a, w, res):
        b, g_a = self.p.smooth_gradients(w, a, res, weights=self.lam)
        return x + b, g_a


def _ridge_solution(p, a):
    d, m = p.d, p.m
    lhs = np.eye(d * m)
    rhs = np.zeros((d, m))
    for i, (op, y) in enumerate(zip(p.sampling_ops, p.observations)):
        w = op.composed
        lhs += p.weights[i] * np.kron(w.T @ w, np.outer(a[:, i], a[:, i]))
        rhs += p.weights[i] * np.outer(w.T @ y, a[:, i])
    return np.linalg.solve(lhs, rhs.ravel()).reshape(d, m)


def test_smooth_surrogate_reduces_to_cg():
    rng = np.random.default_rng(6)
    for _ in range(3):
        p = random_instance(rng, n=16, d=16, m=3, k=3, p=10)
        a = random_oblique(3, 3, rng).entries
        obj = _Ridge(p, p.weights)
        cfg = SolverConfig(orthant_snap=False, outer_tol=1e-14, inner_reset_tol=1e-14)
        budget = 5 * p.d * p.m
        x, _, _, n_inner, _, _ = _run_stage(obj, np.zeros((p.d, p.m)), a.copy(), cfg, [], [],
                                            block="x", budget=budget)
        assert n_inner <= budget
        np.testing.assert_allclose(x, _ridge_solution(p, a), atol=1e-6)
