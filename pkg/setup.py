"""Build script for the optional compiled ADMM core.

The extension is marked optional: if Cython or a C compiler is missing the
install still succeeds and the package falls back to the NumPy inner loop.
Set SPARSEHESS_NO_EXT=1 to skip the extension entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SPARSEHESS_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "sparsehess._admm_cy",
                    ["src/sparsehess/_admm_cy.pyx"],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
