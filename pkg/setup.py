"""Build script for the optional compiled Dijkstra kernel.

If Cython or a C compiler is unavailable the package still installs and
falls back to the scipy-based kernel at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("GHFLAT_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("ghflat._core", ["src/ghflat/_core.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
