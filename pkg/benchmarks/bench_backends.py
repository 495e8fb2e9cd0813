"""Compare the compiled expression core against the pure-NumPy fallback.

Two views: raw program evaluation across batch sizes (quadrature nodes are
small batches, consistency sweeps are large ones), and an end-to-end census
run in a subprocess with each backend forced.

Run:  python benchmarks/bench_backends.py
"""

import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gqlab import expr as ex  # noqa: E402
from gqlab import kernels  # noqa: E402
from gqlab.program import compile_expr  # noqa: E402

PROGRAMS = {
    "transport integrand": "(3/(2*pi))*c + 0*t",
    "transition phase": "exp(i*(x*y))",
    "disk leaf curve": "sqrt(2*c)*cos(t) + sqrt(2*c)*sin(t)*i",
    "map check residual": "exp(x/2)*cos(x*y) - log(x^2 + y^2 + 1)/(1 + y^2)",
}

BATCHES = (15, 240, 4096)
REPS = 400


def available_backends():
    out = ["pure"]
    try:
        import gqlab._progeval  # noqa: F401

        out.append("compiled")
    except ImportError:
        pass
    return out


def time_program(backend, prog, cols):
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(REPS):
            kernels.run_with(backend, prog, cols)
        best = min(best, (time.perf_counter() - t0) / REPS)
    return best


def main():
    backends = available_backends()
    print(f"active backend at import: {kernels.backend_name()}")
    print(f"{'program':<24}{'batch':>7}" + "".join(f"{b + ' us':>14}" for b in backends)
          + ("" if len(backends) < 2 else f"{'speedup':>10}"))
    rng = np.random.default_rng(0)
    for name, source in PROGRAMS.items():
        e = ex.parse_expr(source)
        names = tuple(sorted(ex.free_vars(e)))
        prog = compile_expr(e, names)
        for n in BATCHES:
            cols = rng.uniform(0.2, 2.0, size=(len(names), n)) + 0j
            times = [time_program(b, prog, cols) for b in backends]
            row = f"{name:<24}{n:>7}" + "".join(f"{t * 1e6:>14.2f}" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>10.2f}x"
            print(row)

    print("\nend-to-end: gqlab bs --example torus --k 3 (wall clock)")
    for backend, env_val in (("compiled", "0"), ("pure", "1")):
        if backend not in backends:
            continue
        env = dict(os.environ, GQLAB_PURE=env_val)
        t0 = time.perf_counter()
        subprocess.run(
            [sys.executable, "-m", "gqlab.cli", "bs", "--example", "torus",
             "--k", "3", "--json"],
            env=env,
            stdout=subprocess.DEVNULL,
            check=True,
        )
        print(f"  {backend:<9} {time.perf_counter() - t0:6.2f} s")


if __name__ == "__main__":
    main()
