"""Build script for the optional compiled page-store kernel.

The package works without the extension (a pure-Python twin is selected
at import time), so a missing/failed Cython toolchain only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "seuss_sim.pagestore._kernel",
                ["src/seuss_sim/pagestore/_kernel.pyx"],
            )
        ],
        language_level=3,
    )
else:
    extensions = []

setup(ext_modules=extensions)
