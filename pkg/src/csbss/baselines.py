"""Comparison solvers for the CS-BSS cost.

* ``alt_ist``      proximal-gradient (soft threshold) sweeps on X, Riemannian
                   steepest descent on A
* ``alt_iht``      as above with per-column hard thresholding on X
* ``alt_cg_csg``   conjugate subgradient on X alone, then Riemannian CG on A alone
* ``smoothing_cg`` Riemannian CG on the cost with ``|x|`` replaced by
                   ``sqrt(x**2 + eps**2)``

All of them work on the implied cost (weights halved, see :mod:`csbss.model`)
and report it in ``SolveResult.final_cost``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .csg import LambdaSchedule, SolveResult, SolverConfig, _Objective, _run_stage
from .geometry import IteratePair, ObliquePoint
from .model import ProblemInstance

log = logging.getLogger(__name__)

METHODS = ("alt_ist", "alt_iht", "alt_cg_csg", "smoothing_cg")

# power iteration underestimates the largest eigenvalue; the margin keeps 1/L a safe step
_LIPSCHITZ_MARGIN = 1.05


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "alt_ist"
    inner_iters_x: int = 20
    inner_iters_a: int = 3
    max_sweeps: int = 200
    threshold: float = 1.0
    sparsity_level: int | None = None
    smoothing_eps: float | None = None
    power_iters: int = 20
    outer_tol: float = 1e-6
    solver: SolverConfig = SolverConfig(lambda_schedule=LambdaSchedule.fixed())

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline {self.method!r}; expected one of {METHODS}")
        if min(self.inner_iters_x, self.inner_iters_a, self.max_sweeps, self.power_iters) < 1:
            raise ValueError("iteration counts must be positive")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.method == "alt_iht" and (self.sparsity_level is None or self.sparsity_level < 1):
            raise ValueError("alt_iht needs a positive sparsity_level")
        if self.smoothing_eps is not None and self.smoothing_eps <= 0:
            raise ValueError("smoothing_eps must be positive")


def soft_threshold(v, thr):
    """``sign(v) * max(|v| - thr, 0)`` entrywise."""
    return kernels.soft_threshold(v, float(thr))


def hard_threshold(v, level):
    """Keep the ``level`` largest-magnitude entries of each column."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return kernels.hard_threshold_columns(v[:, None], int(level))[:, 0]
    return kernels.hard_threshold_columns(v, int(level))


def quadratic_lipschitz(p: ProblemInstance, a: np.ndarray, weights, iters: int = 20) -> float:
    """Largest eigenvalue of ``X -> sum_i lam_i (Phi_i D)^T (Phi_i D) X a_i a_i^T`` by power iteration."""
    v = np.ones((p.d, p.m)) / np.sqrt(p.d * p.m)
    lam = np.asarray(weights, dtype=float)
    est = 0.0
    for _ in range(iters):
        w = p.forward(v)
        terms = [lam[i] * np.outer(wi @ a[:, i], a[:, i]) for i, wi in enumerate(w)]
        u = p.adjoint_sum(terms)
        est = float(np.linalg.norm(u))
        if est == 0.0:
            return 0.0
        v = u / est
    return est


def _quad_grad(obj: _Objective, x, a):
    w = obj.p.forward(x)
    res = obj.p.residuals_from(w, a)
    b, _ = obj.p.smooth_gradients(w, a, res, weights=obj.lam)
    return b, obj.fidelity(res)


def _a_steps(obj: _Objective, x, a, cfg: BaselineConfig, hist, steps, quadratic_only=False):
    """Riemannian steepest descent on A with X fixed (geodesic steps, Armijo)."""
    scfg = cfg.solver
    step = min(scfg.initial_step, scfg.max_step)
    f, w, res = obj.value(x, a)
    base = obj.reg(x) if quadratic_only else 0.0
    for _ in range(cfg.inner_iters_a):
        _, g = obj.p.smooth_gradients(w, a, res, weights=obj.lam)
        gg = float(np.vdot(g, g))
        if gg == 0.0:
            break
        alpha = step
        accepted = False
        for _ in range(scfg.max_backtracks):
            at = kernels.oblique_geodesic(a, -g, alpha)
            rt = obj.p.residuals_from(w, at)
            ft = obj.reg(x) + obj.fidelity(rt)
            if ft <= f - scfg.armijo_c1 * alpha * gg:
                accepted = True
                break
            alpha *= scfg.backtrack_factor
        if not accepted:
            break
        a, res, f = at, rt, ft
        hist.append(f - base)
        steps.append(alpha)
        step = min(alpha * scfg.step_growth, scfg.max_step)
    return a


def _finish(p, x, a, converged, sweeps, inner, hist, steps, starts, message):
    obj = _Objective(p, p.weights)
    return SolveResult(
        final=IteratePair(x, ObliquePoint._trusted(a)),
        converged=converged,
        outer_iters=sweeps,
        total_inner_iters=inner,
        final_cost=obj.value(x, a)[0],
        cost_history=hist,
        step_history=steps,
        stage_starts=starts,
        message=message,
    )


def _thresholding_solve(p: ProblemInstance, init: IteratePair, cfg: BaselineConfig, hard: bool,
                        update_a: bool = True) -> SolveResult:
    p.check_iterate(init)
    obj = _Objective(p, p.weights)
    x = np.array(init.x, dtype=float)
    a = np.array(init.a.entries, dtype=float)
    if hard:
        x = hard_threshold(x, cfg.sparsity_level)

    def tracked(xx, aa):
        # IHT is monotone in the quadratic term only
        f, _, res = obj.value(xx, aa)
        return obj.fidelity(res) if hard else f

    f0 = tracked(x, a)
    hist, steps = [f0], []
    inner = 0
    converged, message = False, "max_sweeps reached"
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        x_start, a_start = x, a
        lip = quadratic_lipschitz(p, a, obj.lam, cfg.power_iters) * _LIPSCHITZ_MARGIN
        if lip == 0.0:
            converged, message = True, "quadratic term vanishes"
            break
        for _ in range(cfg.inner_iters_x):
            b, _ = _quad_grad(obj, x, a)
            v = x - b / lip
            x = hard_threshold(v, cfg.sparsity_level) if hard else soft_threshold(v, cfg.threshold / lip)
            hist.append(tracked(x, a))
            steps.append(1.0 / lip)
            inner += 1
        if update_a:
            a = _a_steps(obj, x, a, cfg, hist, steps, quadratic_only=hard)
        if not np.isfinite(hist[-1]) or hist[-1] > 10.0 * max(f0, 1e-300):
            message = "diverged: cost grew more than 10x over its initial value"
            log.warning("%s: %s", "alt_iht" if hard else "alt_ist", message)
            break
        moved = np.linalg.norm(x - x_start) + np.linalg.norm(a - a_start)
        if moved <= cfg.outer_tol * (1.0 + np.linalg.norm(x) + np.linalg.norm(a)):
            converged, message = True, "iterate change below tolerance"
            break
    return _finish(p, x, a, converged, sweep, inner, hist, steps, [0], message)


def alt_ist_solve(p: ProblemInstance, init: IteratePair, cfg: BaselineConfig | None = None,
                  update_a: bool = True) -> SolveResult:
    """Soft-thresholding sweeps on X alternating with steepest descent on A.

    ``update_a=False`` keeps A at its initial value, which turns the solver
    into plain ISTA on the X subproblem.
    """
    cfg = cfg or BaselineConfig(method="alt_ist")
    return _thresholding_solve(p, init, cfg, hard=False, update_a=update_a)


def alt_iht_solve(p: ProblemInstance, init: IteratePair, cfg: BaselineConfig,
                  update_a: bool = True) -> SolveResult:
    if cfg.sparsity_level is None:
        raise ValueError("alt_iht needs a sparsity_level")
    if cfg.sparsity_level > p.d:
        raise ValueError("sparsity_level cannot exceed the number of atoms")
    return _thresholding_solve(p, init, cfg, hard=True, update_a=update_a)


def alt_cg_csg_solve(p: ProblemInstance, init: IteratePair, cfg: BaselineConfig | None = None,
                     update_a: bool = True) -> SolveResult:
    """Blockwise: conjugate subgradient on X, then Riemannian CG on A, per sweep.

    ``update_a=False`` leaves A at its initial value (X block only).
    """
    cfg = cfg or BaselineConfig(method="alt_cg_csg")
    p.check_iterate(init)
    obj = _Objective(p, p.weights)
    x = np.array(init.x, dtype=float)
    a = np.array(init.a.entries, dtype=float)
    hist, steps, starts = [], [], []
    inner = 0
    converged, message = False, "max_sweeps reached"
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        x_start, a_start = x, a
        starts.append(len(hist))
        x, a, _, n_x, _, _ = _run_stage(obj, x, a, cfg.solver, hist, steps, block="x",
                                        max_outer=1, max_inner=cfg.inner_iters_x)
        inner += n_x
        if update_a:
            starts.append(len(hist))
            x, a, _, n_a, _, _ = _run_stage(obj, x, a, cfg.solver, hist, steps, block="a",
                                            max_outer=1, max_inner=cfg.inner_iters_a)
            inner += n_a
        moved = np.linalg.norm(x - x_start) + np.linalg.norm(a - a_start)
        if moved <= cfg.outer_tol * (1.0 + np.linalg.norm(x) + np.linalg.norm(a)):
            converged, message = True, "iterate change below tolerance"
            break
    return _finish(p, x, a, converged, sweep, inner, hist, steps, starts, message)


def default_smoothing_eps(init: IteratePair) -> float:
    return 1e-4 * float(np.abs(init.x).max(initial=0.0)) + 1e-8


def smoothing_cg_solve(p: ProblemInstance, init: IteratePair, cfg: BaselineConfig | None = None) -> SolveResult:
    """Riemannian Hestenes-Stiefel CG on the smoothed cost."""
    cfg = cfg or BaselineConfig(method="smoothing_cg")
    p.check_iterate(init)
    eps = cfg.smoothing_eps if cfg.smoothing_eps is not None else default_smoothing_eps(init)
    obj = _Objective(p, p.weights, smooth_eps=eps)
    x = np.array(init.x, dtype=float)
    a = np.array(init.a.entries, dtype=float)
    hist, steps = [], []
    scfg = replace(cfg.solver, orthant_snap=False)
    x, a, outer, inner, converged, message = _run_stage(obj, x, a, scfg, hist, steps,
                                                        budget=scfg.max_iters)
    return _finish(p, x, a, converged, outer, inner, hist, steps, [0], message)


SOLVERS = {
    "alt_ist": alt_ist_solve,
    "alt_iht": alt_iht_solve,
    "alt_cg_csg": alt_cg_csg_solve,
    "smoothing_cg": smoothing_cg_solve,
}
