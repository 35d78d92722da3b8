"""``csbss`` command line: gen, solve, bench, summarize.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import (
    METHODS,
    ConfigError,
    _check_keys,
    _field_names,
    _run_method,
    evaluate,
    load_config,
    read_report,
    run_experiment,
    solver_config,
    summarize_rows,
    summary_csv,
)
from .matio import MatrixFormatError, write_matrix
from .store import load_instance, save_instance
from .synth import GenSpec, generate, initial_point

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def cmd_gen(args) -> int:
    raw = _read_json(args.spec) if args.spec else {}
    _check_keys(raw, _field_names(GenSpec), "spec")
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        spec = GenSpec(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"spec: {exc}") from exc
    inst, truth = generate(spec)
    save_instance(args.out, inst, truth, spec.to_dict())
    print(f"wrote instance (n={spec.n}, d={spec.d}, m={spec.m}, k={spec.k}) to {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst, truth, meta = load_instance(args.instance)
    overrides = _read_json(args.overrides) if args.overrides else {}
    spec = GenSpec(**meta["spec"]) if meta.get("spec") else GenSpec(n=inst.n, d=inst.d, m=inst.m, k=inst.k,
                                                                       p=[op.p for op in inst.sampling_ops])
    cfg = solver_config(args.method, overrides, spec)
    seed = args.seed if args.seed is not None else spec.seed
    init = initial_point(inst.m, inst.k, inst.d, seed)
    res = _run_method(args.method, cfg, inst, init)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "X_hat.txt", res.final.x)
    write_matrix(out / "A_hat.txt", res.final.a.entries)
    summary = {
        "method": args.method,
        "init_seed": seed,
        "final_cost": res.final_cost,
        "iters": res.total_inner_iters,
        "outer_iters": res.outer_iters,
        "converged": res.converged,
        "message": res.message,
    }
    if truth is not None:
        amari, snrs = evaluate(inst, truth, np.asarray(res.final.x), res.final.a.entries)
        summary.update(amari=amari, snr_per_source=snrs, snr_mean=float(np.mean(snrs)))
    (out / "result.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    report = run_experiment(cfg)
    print(f"{len(report.rows)} rows written to {Path(cfg.output_dir) / 'report.csv'}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    text = summary_csv(summarize_rows(read_report(args.report)))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csbss", description="Compressively sensed blind source separation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance with ground truth")
    g.add_argument("--spec", help="JSON file with generator fields")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one method on a stored instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--overrides", help="JSON file with solver settings")
    s.add_argument("--seed", type=int, help="seed of the random initial point")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a multi-trial experiment")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.add_argument("--threads", type=int)
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("summarize", help="box-plot statistics per method")
    m.add_argument("report")
    m.add_argument("--out")
    m.set_defaults(func=cmd_summarize)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"csbss: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MatrixFormatError, KeyError, json.JSONDecodeError) as exc:
        print(f"csbss: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
