"""Compare the compiled kernels against the NumPy fallback.

Per-kernel timings call both modules directly; the end-to-end timings run a
solver in a fresh interpreter with and without ``ONESFW_PURE_PYTHON`` so the
whole package picks up the chosen backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from onesfw import _kernels_py as fallback
from onesfw import kernels

END_TO_END = """
import json, time
import numpy as np
from onesfw import kernels, oracles, solvers
from onesfw.constraints import UnitSimplex, BudgetedBox
out = {"backend": kernels.BACKEND}
q = oracles.oblivious_quadratic(10, noise=1.0)
t0 = time.perf_counter()
solvers.run_one_sfw(q, UnitSimplex(10), solvers.SolverConfig(T=%(T)d, seed=0))
out["one_sfw quadratic d=10"] = time.perf_counter() - t0
m = oracles.smoothed_multilinear(10)
t0 = time.perf_counter()
solvers.run_one_sfw(m, BudgetedBox(np.ones(10), 3.0),
                    solvers.SolverConfig(T=%(T_sm)d, mode="submodular_max", seed=0,
                                         record_exact_diagnostics=True))
out["one_sfw multilinear d=10 + diagnostics"] = time.perf_counter() - t0
print(json.dumps(out))
"""


def kernel_cases(rng):
    cases = []
    for dim in (10, 1000):
        d = rng.normal(size=dim)
        u = rng.uniform(0.5, 1.5, dim)
        lo = -u
        cases += [
            (f"lmo_simplex d={dim}", "lmo_simplex", (d, 1.0)),
            (f"lmo_l1 d={dim}", "lmo_l1", (d, 1.0)),
            (f"lmo_box d={dim}", "lmo_box", (d, lo, u)),
            (f"lmo_budgeted_box d={dim}", "lmo_budgeted_box", (d, u, float(u.sum() / 3))),
            (f"sfw_update d={dim}", "sfw_update", (d, u, lo, 0.3)),
            (f"fw_step d={dim}", "fw_step", (d, u, 0.1)),
        ]
    for dim in (6, 12):
        cases.append((f"multilinear_moments d={dim}", "multilinear_moments",
                      (rng.random(1 << dim), rng.uniform(0.2, 0.8, dim))))
    cases.append(("coverage_table d=12", "coverage_table",
                  ((rng.random((12, 50)) < 0.3).astype(np.uint8), rng.random(50))))
    cases.append(("max_pairwise_sqdist 400x8", "max_pairwise_sqdist", (rng.normal(size=(400, 8)),)))
    return cases


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def end_to_end(pure, quick):
    env = dict(os.environ)
    env.pop("ONESFW_PURE_PYTHON", None)
    if pure:
        env["ONESFW_PURE_PYTHON"] = "1"
    script = END_TO_END % {"T": 2000 if quick else 20000, "T_sm": 100 if quick else 1000}
    proc = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True,
                          check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="shorter end-to-end runs")
    args = parser.parse_args(argv)

    compiled = kernels.compiled_module()
    if compiled is None:
        print("compiled kernels are not built; only the fallback is available", file=sys.stderr)
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'compiled':>12s} {'fallback':>12s} {'speedup':>8s}")
    for label, name, call_args in kernel_cases(rng):
        fast = best_time(getattr(compiled, name), call_args, args.repeat)
        slow = best_time(getattr(fallback, name), call_args, args.repeat)
        print(f"{label:36s} {fast * 1e6:10.2f}us {slow * 1e6:10.2f}us {slow / fast:7.1f}x")

    print()
    fast, slow = end_to_end(False, args.quick), end_to_end(True, args.quick)
    print(f"{'end to end':36s} {fast.pop('backend'):>12s} {slow.pop('backend'):>12s}")
    for key in fast:
        print(f"{key:36s} {fast[key]:11.3f}s {slow[key]:11.3f}s {slow[key] / fast[key]:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
