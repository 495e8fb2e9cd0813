"""Build script. Compiles the expression-evaluation core if Cython is present.

The compiled extension is optional: if it cannot be built (or imported at
runtime), gqlab falls back to a pure-NumPy evaluator with identical
semantics. `pip install -e . --no-build-isolation` is the intended dev
install.
"""

from setuptools import setup

ext_modules = []
include_dirs = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/gqlab/_progeval.pyx"],
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [np.get_include()]
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"gqlab: skipping compiled core ({exc!r}); pure backend will be used")

setup(ext_modules=ext_modules, include_dirs=include_dirs)
