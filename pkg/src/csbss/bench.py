"""Seeded multi-trial experiments over all solvers.

Trial ``t`` uses seed ``base_seed + t`` for both the instance and the shared
initial point, so every method in a trial starts from identical data. Trials
run in a bounded pool of worker processes (the solvers are GIL-bound Python
loops); rows are sorted by ``(trial, method order)`` before writing, so the
report does not depend on scheduling.

``report.csv`` is byte-reproducible: the ``runtime_ms`` column is left empty
unless ``record_runtime`` is set, and wall-clock times always go to
``timings.csv`` instead.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .baselines import SOLVERS as BASELINE_SOLVERS
from .baselines import BaselineConfig
from .csg import LambdaSchedule, SolverConfig, csg_solve
from .matio import write_matrix
from .metrics import _best_permutation, amari_error, snr_db
from .model import reconstruct_sources
from .synth import GenSpec, generate, initial_point

METHODS = ("csg", "alt_ist", "alt_iht", "alt_cg_csg", "smoothing_cg")
REPORT_HEADER = ("trial", "method", "amari", "snr_mean", "iters", "runtime_ms", "final_cost", "converged")
SEED_ENV = "CSBSS_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    gen: GenSpec = GenSpec()
    methods: tuple = METHODS
    trials: int = 1
    base_seed: int = 0
    solver_overrides: dict = field(default_factory=dict)
    output_dir: str = "results"
    threads: int = 1
    dump_iterates: bool = False
    record_runtime: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ConfigError("methods must not be empty")
        bad = [mth for mth in self.methods if mth not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s) {bad}; known: {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate method names")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        extra = set(self.solver_overrides) - set(METHODS)
        if extra:
            raise ConfigError(f"overrides given for unknown method(s): {sorted(extra)}")
        # fail early on bad overrides rather than inside a worker
        for mth in self.solver_overrides:
            solver_config(mth, self.solver_overrides[mth], self.gen)

    def to_dict(self) -> dict:
        return {
            "gen": {k: v for k, v in self.gen.to_dict().items() if k != "seed"},
            "methods": list(self.methods),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "solver_overrides": self.solver_overrides,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "dump_iterates": self.dump_iterates,
            "record_runtime": self.record_runtime,
        }


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(raw: dict, allowed: set, where: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _solver_from_map(raw: dict, base: SolverConfig, where: str) -> SolverConfig:
    _check_keys(raw, _field_names(SolverConfig), where)
    raw = dict(raw)
    if "lambda_schedule" in raw:
        sched = raw["lambda_schedule"]
        _check_keys(sched, _field_names(LambdaSchedule), f"{where}.lambda_schedule")
        raw["lambda_schedule"] = LambdaSchedule(**sched)
    try:
        return replace(base, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def solver_config(method: str, overrides: dict, gen: GenSpec):
    """Build the solver config for ``method`` from defaults plus ``overrides``."""
    if method == "csg":
        return _solver_from_map(overrides, SolverConfig(), f"solver_overrides.{method}")
    _check_keys(overrides, _field_names(BaselineConfig) - {"method"}, f"solver_overrides.{method}")
    raw = dict(overrides)
    base = BaselineConfig(method="alt_ist")
    if "solver" in raw:
        raw["solver"] = _solver_from_map(raw["solver"], base.solver, f"solver_overrides.{method}.solver")
    if method == "alt_iht":
        raw.setdefault("sparsity_level", gen.nnz)
    try:
        return BaselineConfig(method=method, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver_overrides.{method}: {exc}") from exc


def config_from_dict(raw: dict, environ=None) -> ExperimentConfig:
    _check_keys(raw, _field_names(ExperimentConfig), "config")
    raw = dict(raw)
    gen_raw = raw.pop("gen", {})
    _check_keys(gen_raw, _field_names(GenSpec) - {"seed"}, "gen")
    try:
        gen = GenSpec(**gen_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"gen: {exc}") from exc
    environ = os.environ if environ is None else environ
    if environ.get(SEED_ENV, "").strip():
        try:
            raw["base_seed"] = int(environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    for key, kind in (("trials", int), ("threads", int), ("base_seed", int)):
        if key in raw and (not isinstance(raw[key], kind) or isinstance(raw[key], bool)):
            raise ConfigError(f"{key} must be an integer")
    try:
        return ExperimentConfig(gen=gen, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, environ=None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw, environ)


@dataclass
class ReportRow:
    trial: int
    method: str
    amari: float
    snr_mean: float
    snr_per_source: list
    iters: int
    runtime_ms: float
    final_cost: float
    converged: bool
    message: str = ""


@dataclass
class ExperimentReport:
    rows: list
    seeds: list
    config: ExperimentConfig

    def csv_text(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(REPORT_HEADER)
        for r in self.rows:
            rt = _fmt(r.runtime_ms) if self.config.record_runtime else ""
            wr.writerow([r.trial, r.method, _fmt(r.amari), _fmt(r.snr_mean), r.iters, rt,
                         _fmt(r.final_cost), "true" if r.converged else "false"])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else format(float(v), ".17g")


def evaluate(inst, truth, x_est, a_est):
    """Return ``(amari, per-source SNRs)`` for an estimate; rank-deficient estimates score badly, not fail."""
    a_true = truth.a_true.entries
    p = a_true @ np.linalg.pinv(np.asarray(a_est))
    try:
        amari = amari_error(p)
    except ValueError:
        amari = 1.0
    perm = _best_permutation(np.abs(p))
    s_est = reconstruct_sources(inst, x_est)
    snrs = [snr_db(truth.s_true[:, i], s_est[:, j]) for i, j in enumerate(perm)]
    return amari, snrs


def _run_method(method, cfg_obj, inst, init):
    if method == "csg":
        return csg_solve(inst, init, cfg_obj)
    return BASELINE_SOLVERS[method](inst, init, cfg_obj)


def run_trial(cfg: ExperimentConfig, trial: int):
    seed = cfg.base_seed + trial
    spec = replace(cfg.gen, seed=seed)
    inst, truth = generate(spec)
    init = initial_point(spec.m, spec.k, spec.d, seed)
    rows, dumps = [], []
    for method in cfg.methods:
        scfg = solver_config(method, cfg.solver_overrides.get(method, {}), cfg.gen)
        t0 = time.perf_counter()
        try:
            res = _run_method(method, scfg, inst, init)
        except Exception as exc:  # one failed solve must not stop the experiment
            ms = (time.perf_counter() - t0) * 1e3
            rows.append(ReportRow(trial, method, math.nan, math.nan, [], 0, ms, math.nan, False,
                                  f"aborted: {type(exc).__name__}: {exc}"))
            continue
        ms = (time.perf_counter() - t0) * 1e3
        x_est, a_est = np.asarray(res.final.x), res.final.a.entries
        amari, snrs = evaluate(inst, truth, x_est, a_est)
        rows.append(ReportRow(trial, method, amari, float(np.mean(snrs)), snrs, res.total_inner_iters,
                              ms, res.final_cost, res.converged, res.message))
        if cfg.dump_iterates:
            dumps.append((method, x_est, a_est))
    return seed, rows, dumps


def _trial_job(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig, out_dir=None, write=True) -> ExperimentReport:
    out = Path(out_dir or cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if cfg.threads > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.threads, cfg.trials)) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    order = {mth: i for i, mth in enumerate(cfg.methods)}
    rows, seeds = [], []
    for seed, trial_rows, dumps in results:
        seeds.append(seed)
        rows.extend(trial_rows)
        if write and dumps:
            ddir = out / "dumps"
            ddir.mkdir(exist_ok=True)
            trial = seed - cfg.base_seed
            for method, x_est, a_est in dumps:
                write_matrix(ddir / f"trial{trial:04d}_{method}_X.txt", x_est)
                write_matrix(ddir / f"trial{trial:04d}_{method}_A.txt", a_est)
    rows.sort(key=lambda r: (r.trial, order[r.method]))
    report = ExperimentReport(rows, seeds, cfg)
    if write:
        write_outputs(report, out)
    return report


def write_outputs(report: ExperimentReport, out: Path) -> None:
    (out / "report.csv").write_text(report.csv_text())
    with open(out / "sources.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("trial", "method", "source", "snr"))
        for r in report.rows:
            for i, s in enumerate(r.snr_per_source):
                wr.writerow((r.trial, r.method, i, _fmt(s)))
    with open(out / "timings.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("trial", "method", "runtime_ms", "message"))
        for r in report.rows:
            wr.writerow((r.trial, r.method, f"{r.runtime_ms:.3f}", r.message))
    manifest = {
        "config": report.config.to_dict(),
        "seeds": report.seeds,
        "rows": len(report.rows),
        "versions": {
            "csbss": __version__,
            "kernel_backend": kernels.BACKEND,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "platform": platform.platform(),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


SUMMARY_HEADER = ("method", "metric", "count", "median", "q1", "q3", "min", "max")


def summarize_rows(rows) -> list:
    """Per-method box-plot statistics of ``amari`` and ``snr_mean`` from report rows (dicts)."""
    methods = []
    for r in rows:
        if r["method"] not in methods:
            methods.append(r["method"])
    out = []
    for mth in methods:
        for metric in ("amari", "snr_mean"):
            vals = np.array([float(r[metric]) for r in rows if r["method"] == mth])
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                out.append((mth, metric, 0) + (math.nan,) * 5)
                continue
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            out.append((mth, metric, int(vals.size), med, q1, q3, vals.min(), vals.max()))
    return out


def read_report(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != REPORT_HEADER:
            raise ConfigError(f"{path}: not a report file (header {rd.fieldnames})")
        return list(rd)


def summary_csv(summary) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SUMMARY_HEADER)
    for row in summary:
        wr.writerow(row[:3] + tuple(_fmt(v) for v in row[3:]))
    return buf.getvalue()
