"""Time the compiled kernels against the numpy reference implementations.

    python benchmarks/bench_kernels.py [--repeat 5] [--number 2000]

Also times one full desk-scale solve with each backend by re-importing the
package with ``CSBSS_PURE_PYTHON`` set in a subprocess.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from csbss import _kernels_py as pure

try:
    from csbss import _kernels as compiled
except ImportError:
    compiled = None

SOLVE_SNIPPET = """
import time
from csbss import kernels
from csbss.csg import csg_solve
from csbss.synth import GenSpec, generate, initial_point
inst, _ = generate(GenSpec(seed=3))
init = initial_point(3, 3, 128, 3)
t0 = time.perf_counter()
res = csg_solve(inst, init)
print(kernels.BACKEND, time.perf_counter() - t0, res.total_inner_iters)
"""


def cases(rng):
    a = rng.standard_normal((3, 3))
    a /= np.linalg.norm(a, axis=0)
    xi = rng.standard_normal((3, 3))
    xi -= a * np.einsum("ij,ij->j", a, xi)
    psi = rng.standard_normal((3, 3))
    psi -= a * np.einsum("ij,ij->j", a, psi)
    x = rng.standard_normal((128, 3))
    x[rng.random(x.shape) < 0.8] = 0.0
    b = rng.standard_normal((128, 3))
    return {
        "oblique_geodesic": lambda k: k.oblique_geodesic(a, xi, 0.3),
        "oblique_transport": lambda k: k.oblique_transport(a, xi, 0.3, psi),
        "min_norm_l1": lambda k: k.min_norm_l1(x, b),
        "soft_threshold": lambda k: k.soft_threshold(b, 0.5),
        "hard_threshold_columns": lambda k: k.hard_threshold_columns(b, 8),
        "smoothed_l1": lambda k: k.smoothed_l1(b, 1e-3),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    ap.add_argument("--skip-solve", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(pure), repeat=args.repeat, number=args.number)) / args.number
        if compiled is None:
            print(f"{name:<24}{t_py * 1e6:>12.2f}{'n/a':>12}{'':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(compiled), repeat=args.repeat, number=args.number)) / args.number
        print(f"{name:<24}{t_py * 1e6:>12.2f}{t_cy * 1e6:>12.2f}{t_py / t_cy:>9.1f}x")
    if args.skip_solve:
        return
    print("\nfull desk-scale csg solve")
    for pure_flag in ("0", "1"):
        env = dict(os.environ, CSBSS_PURE_PYTHON=pure_flag)
        out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"  backend={out[0]:<8} {float(out[1]):.2f}s  ({out[2]} steps)")


if __name__ == "__main__":
    main()
