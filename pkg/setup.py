"""Builds the optional compiled core.

The package works without it (a pure-Python core is selected at import
time), so the extension is skipped when Cython is unavailable or when
PQELIM_NO_EXT is set.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("PQELIM_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "pqelim._ccore",
                    sources=["src/pqelim/_ccore.pyx", "src/pqelim/pqe_core.c"],
                    include_dirs=["src/pqelim"],
                    extra_compile_args=["-O3", "-std=c11"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
