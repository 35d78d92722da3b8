"""Riemannian conjugate subgradient solver for the CS-BSS cost.

The solver minimizes ``||X||_1 + sum_i (lam_i / 2) ||r_i||^2`` (see
:func:`csbss.model.implied_cost`) over ``R^{d x m} x OB(m, k)``:

* outer iterations restart the search direction at the negative
  smallest-norm subgradient,
* inner iterations take a backtracking step along the geodesic, transport
  the previous subgradient and direction, and form a Hestenes-Stiefel
  update,
* the inner loop restarts early when the direction stops changing; the
  outer loop stops when the iterate stops moving.

Weights are fixed by default. They can instead follow a geometric continuation from ``ratio * lam`` up to the
instance weights ``lam``; each stage warm-starts from the previous one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import COND_LIMIT, IteratePair, ObliquePoint, TangentPair
from .model import ProblemInstance

log = logging.getLogger(__name__)


class LineSearchError(RuntimeError):
    """Raised by :func:`line_search` on a non-descent direction or exhausted backtracks."""


@dataclass(frozen=True)
class LambdaSchedule:
    """``fixed`` or ``geometric`` continuation of the mixture weights.

    With ``geometric``, stage ``t`` of ``stages`` uses
    ``lam * ratio ** (1 - t / (stages - 1))``.
    """

    kind: str = "geometric"
    ratio: float = 0.3
    stages: int = 3

    def __post_init__(self):
        if self.kind not in ("fixed", "geometric"):
            raise ValueError(f"unknown lambda schedule {self.kind!r}")
        if self.kind == "geometric" and not (0 < self.ratio <= 1 and self.stages >= 1):
            raise ValueError("geometric schedule needs 0 < ratio <= 1 and stages >= 1")

    def factors(self) -> list[float]:
        if self.kind == "fixed" or self.stages == 1:
            return [1.0]
        t = self.stages - 1
        return [self.ratio ** (1.0 - s / t) for s in range(self.stages)]

    @classmethod
    def fixed(cls) -> "LambdaSchedule":
        return cls("fixed", 1.0, 1)


@dataclass(frozen=True)
class SolverConfig:
    """Tuning for :func:`csg_solve`.

    ``max_inner`` and ``direction_reset_mod`` default to the manifold
    dimension ``d*m + k*(m-1)`` (minus one for ``max_inner``).
    ``inner_reset_tol`` and ``outer_tol`` are relative:
    ``tol * (1 + ||H||)`` and ``tol * (1 + ||X|| + ||A||)``.
    """

    max_outer: int = 200
    max_inner: int | None = None
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    step_growth: float = 2.0
    max_step: float = 1.0
    max_backtracks: int = 60
    inner_reset_tol: float = 1e-8
    outer_tol: float = 1e-6
    direction_reset_mod: int | None = None
    lambda_schedule: LambdaSchedule = field(default_factory=LambdaSchedule.fixed)
    # zero out code entries whose sign a trial step would flip, and drop
    # direction components that disagree in sign with -G
    orthant_snap: bool = True
    # cap on accepted steps over all stages; None for no cap
    max_iters: int | None = None
    # -1 gives H = -G + mu*tau(H); +1 gives H = G + mu*tau(H)
    gradient_sign: int = -1

    def __post_init__(self):
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.initial_step <= 0 or self.max_step <= 0:
            raise ValueError("step sizes must be positive")
        if self.step_growth < 1:
            raise ValueError("step_growth must be >= 1")
        if self.inner_reset_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or (self.max_inner is not None and self.max_inner < 1):
            raise ValueError("iteration counts must be positive")
        if self.gradient_sign not in (-1, 1):
            raise ValueError("gradient_sign must be -1 or +1")

    def inner_budget(self, d: int, m: int, k: int) -> int:
        if self.max_inner is not None:
            return self.max_inner
        return max(1, d * m + k * (m - 1) - 1)

    def reset_period(self, d: int, m: int, k: int) -> int:
        if self.direction_reset_mod is not None:
            return self.direction_reset_mod
        return d * m + k * (m - 1)


@dataclass
class SolverState:
    iterate: IteratePair
    direction: TangentPair
    last_subgrad: TangentPair
    inner_iter: int = 0
    outer_iter: int = 0
    cost_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)


@dataclass
class SolveResult:
    """Outcome of any solver in this package.

    ``final_cost`` is the implied cost at the instance weights;
    ``cost_history`` is the solver's own objective after every accepted step,
    and ``stage_starts`` marks where a new weight stage (or block) begins,
    since the objective changes there.
    """

    final: IteratePair
    converged: bool
    outer_iters: int
    total_inner_iters: int
    final_cost: float
    cost_history: list
    step_history: list = field(default_factory=list)
    stage_starts: list = field(default_factory=lambda: [0])
    message: str = ""

    def monotone_segments(self):
        bounds = list(self.stage_starts) + [len(self.cost_history)]
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            yield self.cost_history[lo:hi]


class _Objective:
    """Implied cost and its smallest-norm subgradient at fixed weights, on raw arrays.

    With ``smooth_eps`` the l1 term is replaced by ``sum(sqrt(x**2 + eps**2))``
    and the subgradient becomes the ordinary gradient.
    """

    def __init__(self, p: ProblemInstance, weights: np.ndarray, smooth_eps: float | None = None):
        self.p = p
        self.lam = np.asarray(weights, dtype=float)
        self.half = 0.5 * self.lam
        self.smooth_eps = smooth_eps

    def fidelity(self, res) -> float:
        return float(sum(h * (r @ r) for h, r in zip(self.half, res)))

    def reg(self, x) -> float:
        if self.smooth_eps is None:
            return float(np.abs(x).sum())
        return kernels.smoothed_l1(x, self.smooth_eps)[0]

    def value(self, x, a):
        w = self.p.forward(x)
        res = self.p.residuals_from(w, a)
        return self.reg(x) + self.fidelity(res), w, res

    def subgrad(self, x, a, w, res):
        b, g_a = self.p.smooth_gradients(w, a, res, weights=self.lam)
        if self.smooth_eps is None:
            return kernels.min_norm_l1(x, b), g_a
        return kernels.smoothed_l1(x, self.smooth_eps)[1] + b, g_a


def _inner(u, v) -> float:
    return float(np.vdot(u[0], v[0]) + np.vdot(u[1], v[1]))


def _armijo(obj: _Objective, x, a, f0, h, slope, step, cfg: SolverConfig, snap: bool):
    """Backtrack from ``step``; returns (alpha, x, a, w, res, f) or None.

    With ``snap`` code entries that a trial step would push through zero are
    set to zero instead.
    """
    hz, hxi = h
    move_x = bool(hz.any())
    move_a = bool(hxi.any())
    wx = obj.p.forward(x)
    wz = obj.p.forward(hz) if move_x else None
    alpha = step
    for _ in range(cfg.max_backtracks):
        if move_x:
            xt = x + alpha * hz
            crossed = (xt * x) < 0.0 if snap else None
            if crossed is not None and crossed.any():
                xt[crossed] = 0.0
                wt = obj.p.forward(xt)
            else:
                wt = [u + alpha * v for u, v in zip(wx, wz)]
        else:
            xt, wt = x, wx
        at = kernels.oblique_geodesic(a, hxi, alpha) if move_a else a
        res = obj.p.residuals_from(wt, at)
        ft = obj.reg(xt) + obj.fidelity(res)
        if ft <= f0 + cfg.armijo_c1 * alpha * slope:
            return alpha, xt, at, wt, res, ft
        alpha *= cfg.backtrack_factor
    return None


def _orthant_align(hz, gz):
    # keep only components pointing the same way as -g; elsewhere the l1 term
    # would grow at a rate <g, h> does not see
    return np.where(hz * gz < 0.0, hz, 0.0)


def hestenes_stiefel_mu(g_new: TangentPair, g_old_transported: TangentPair,
                        h_old_transported: TangentPair) -> float:
    """Hestenes-Stiefel coefficient; 0 when the denominator degenerates."""
    return _hs_mu((g_new.z, g_new.xi), (g_old_transported.z, g_old_transported.xi),
                  (h_old_transported.z, h_old_transported.xi))


def _hs_mu(g, tg, th) -> float:
    diff = (g[0] - tg[0], g[1] - tg[1])
    num = _inner(g, diff)
    den = _inner(th, diff)
    if abs(den) < 1e-14 * (abs(num) + 1.0):
        return 0.0
    return num / den


def _update_direction(g, tg, th, inner_iter, reset_mod, tol, sign):
    """Returns (direction, restart) where restart means the inner loop should end."""
    mu = _hs_mu(g, tg, th)
    steep = (-g[0], -g[1])
    h = (sign * g[0] + mu * th[0], sign * g[1] + mu * th[1])
    if reset_mod and inner_iter % reset_mod == 0:
        return steep, False
    change = math.sqrt(_inner((h[0] - th[0], h[1] - th[1]), (h[0] - th[0], h[1] - th[1])))
    if change < tol * (1.0 + math.sqrt(_inner(th, th))):
        return steep, True
    return h, False


def direction_update(state: SolverState, g_new: TangentPair, transported_g: TangentPair,
                     transported_h: TangentPair, cfg: SolverConfig | None = None) -> TangentPair:
    """New search direction at the new iterate.

    Steepest descent on the first inner iteration, every
    ``direction_reset_mod`` iterations, and when the conjugate update barely
    changes the transported direction.
    """
    cfg = cfg or SolverConfig()
    g = (g_new.z, g_new.xi)
    if state.inner_iter <= 1:
        return TangentPair(-g_new.z, -g_new.xi)
    d, m = g_new.z.shape
    k = g_new.xi.shape[1]
    h, _ = _update_direction(
        g, (transported_g.z, transported_g.xi), (transported_h.z, transported_h.xi),
        state.inner_iter, cfg.reset_period(d, m, k), cfg.inner_reset_tol, cfg.gradient_sign,
    )
    return TangentPair(h[0], h[1])


def line_search(p: ProblemInstance, it: IteratePair, h: TangentPair, g: TangentPair,
                cfg: SolverConfig | None = None):
    """Armijo backtracking along the product geodesic, on the implied cost.

    Returns ``(step, new_iterate)``.
    """
    cfg = cfg or SolverConfig()
    p.check_iterate(it)
    obj = _Objective(p, p.weights)
    x, a = np.asarray(it.x), np.asarray(it.a.entries)
    slope = _inner((g.z, g.xi), (h.z, h.xi))
    if not slope < 0:
        raise LineSearchError("direction is not a descent direction (<g, h> >= 0)")
    f0, _, _ = obj.value(x, a)
    out = _armijo(obj, x, a, f0, (np.asarray(h.z), np.asarray(h.xi)), slope,
                  min(cfg.initial_step, cfg.max_step), cfg, cfg.orthant_snap)
    if out is None:
        raise LineSearchError(f"no sufficient decrease after {cfg.max_backtracks} backtracks")
    alpha, xt, at, *_ = out
    return alpha, IteratePair(xt, ObliquePoint._trusted(at))


def _masked(g, block):
    if block == "x":
        return (g[0], np.zeros_like(g[1]))
    if block == "a":
        return (np.zeros_like(g[0]), g[1])
    return g


def _run_stage(obj: _Objective, x, a, cfg: SolverConfig, hist, steps, block=None,
               max_outer=None, max_inner=None, budget=None):
    """Nested conjugate subgradient loop at fixed weights.

    ``block`` restricts the motion to the codes (``"x"``) or the mixing
    matrix (``"a"``). ``budget`` caps the number of accepted steps.
    Returns ``(x, a, outer, inner, converged, message)``.
    """
    d, m = x.shape
    k = a.shape[1]
    n_outer = max_outer or cfg.max_outer
    n_inner = max_inner or cfg.inner_budget(d, m, k)
    reset_mod = cfg.reset_period(d, m, k)
    snap = cfg.orthant_snap and obj.smooth_eps is None and block != "a"
    f, w, res = obj.value(x, a)
    hist.append(f)
    step0 = min(cfg.initial_step, cfg.max_step)
    total_inner = 0
    message = "max_outer reached"
    converged = False
    outer = 0
    for outer in range(1, n_outer + 1):
        x_start, a_start = x, a
        g = _masked(obj.subgrad(x, a, w, res), block)
        if not np.any(g[0]) and not np.any(g[1]):
            converged, message = True, "zero subgradient"
            break
        h = (-g[0], -g[1])
        steepest = True
        failed = False
        for j in range(1, n_inner + 1):
            if budget is not None and total_inner >= budget:
                break
            slope = _inner(g, h)
            if not slope < 0:
                h, steepest = (-g[0], -g[1]), True
                slope = -_inner(g, g)
            out = _armijo(obj, x, a, f, h, slope, step0, cfg, snap)
            if out is None and not steepest:
                h, steepest = (-g[0], -g[1]), True
                out = _armijo(obj, x, a, f, h, -_inner(g, g), step0, cfg, snap)
            if out is None:
                failed = True
                break
            alpha, x_new, a_new, w, res, f = out
            hist.append(f)
            steps.append(alpha)
            total_inner += 1
            step0 = min(alpha * cfg.step_growth, cfg.max_step)
            g_new = _masked(obj.subgrad(x_new, a_new, w, res), block)
            tg = (g[0], kernels.oblique_transport(a, h[1], alpha, g[1]))
            th = (h[0], kernels.oblique_transport(a, h[1], alpha, h[1]))
            x, a = x_new, a_new
            h, restart = _update_direction(g_new, tg, th, j, reset_mod,
                                           cfg.inner_reset_tol, cfg.gradient_sign)
            steepest = restart
            if snap and not steepest:
                h = (_orthant_align(h[0], g_new[0]), h[1])
            g = g_new
            if restart:
                break
        moved = np.linalg.norm(a - a_start) + np.linalg.norm(x - x_start)
        small = moved <= cfg.outer_tol * (1.0 + np.linalg.norm(x) + np.linalg.norm(a))
        if failed:
            if small:
                converged, message = True, "no further decrease along steepest descent"
            else:
                message = "line search failed along steepest descent"
            break
        if small:
            converged, message = True, "iterate change below tolerance"
            break
        if budget is not None and total_inner >= budget:
            message = "iteration budget exhausted"
            break
    return x, a, outer, total_inner, converged, message


def csg_solve(p: ProblemInstance, init: IteratePair, cfg: SolverConfig | None = None) -> SolveResult:
    """Conjugate subgradient descent from ``init``."""
    cfg = cfg or SolverConfig()
    p.check_iterate(init)
    x = np.array(init.x, dtype=float)
    a = np.array(init.a.entries, dtype=float)
    hist: list = []
    steps: list = []
    starts: list = []
    outer_total = inner_total = 0
    converged, message = False, ""
    for factor in cfg.lambda_schedule.factors():
        starts.append(len(hist))
        obj = _Objective(p, p.weights * factor)
        left = None if cfg.max_iters is None else cfg.max_iters - inner_total
        x, a, n_out, n_in, converged, message = _run_stage(obj, x, a, cfg, hist, steps, budget=left)
        outer_total += n_out
        inner_total += n_in
        if not converged and message.startswith("line search"):
            log.warning("csg stage at weight factor %.3g: %s", factor, message)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        message += f"; mixing matrix near rank-deficient (cond={cond:.3g})"
        log.warning("csg: mixing matrix condition number %.3g", cond)
    final = IteratePair(x, ObliquePoint._trusted(a))
    obj = _Objective(p, p.weights)
    return SolveResult(
        final=final,
        converged=converged,
        outer_iters=outer_total,
        total_inner_iters=inner_total,
        final_cost=obj.value(x, a)[0],
        cost_history=hist,
        step_history=steps,
        stage_starts=starts,
        message=message,
    )
