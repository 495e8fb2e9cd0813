"""Backend selection and the array evaluation entry point.

At import we pick the compiled core if it built, else the pure-NumPy
fallback.  `GQLAB_PURE=1` in the environment forces the fallback (used by
the backend-comparison benchmark and by tests that need both).
"""

from __future__ import annotations

import os

import numpy as np

from . import _progeval_py
from .program import compile_expr

if os.environ.get("GQLAB_PURE", "") not in ("", "0"):
    _impl = _progeval_py
else:
    try:
        from . import _progeval as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _progeval_py

# The compiled stack is fixed-size; overly deep programs fall back per call.
_MAX_COMPILED_STACK = 64
# The point-at-a-time compiled loop wins on small batches (quadrature
# nodes); NumPy's vectorized ops win on large sweeps.  Crossover measured
# by benchmarks/bench_backends.py.
_BATCH_CROSSOVER = 256


def backend_name() -> str:
    return _impl.BACKEND


def run(prog, cols: np.ndarray) -> np.ndarray:
    if _impl is not _progeval_py and (
        prog.max_stack > _MAX_COMPILED_STACK or cols.shape[1] > _BATCH_CROSSOVER
    ):
        return _progeval_py.run_program(prog, cols)
    return _impl.run_program(prog, cols)


def run_with(backend: str, prog, cols: np.ndarray) -> np.ndarray:
    """Evaluate on an explicit backend ('pure' or 'compiled')."""
    if backend == "pure":
        return _progeval_py.run_program(prog, cols)
    if backend == "compiled":
        from . import _progeval  # noqa: F401  (ImportError if not built)

        return _progeval.run_program(prog, cols)
    raise ValueError(f"unknown backend {backend!r}")


def evaluate(e, values: dict):
    """Evaluate an expression at named scalars or 1-d arrays."""
    names = tuple(sorted(values))
    prog = compile_expr(e, names)
    scalar = all(np.ndim(values[k]) == 0 for k in names)
    n = 1
    for k in names:
        if np.ndim(values[k]) > 0:
            n = len(values[k])
            break
    cols = np.empty((len(names), n), dtype=np.complex128)
    for j, k in enumerate(names):
        cols[j] = values[k]
    out = run(prog, cols)
    return complex(out[0]) if scalar else out
