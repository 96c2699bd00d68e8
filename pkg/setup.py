"""Build the optional FFTW-backed kernel extension.

The extension is marked optional: if Cython, numpy headers or libfftw3 are
missing the build is skipped and ``swave`` runs on its pure-Python kernels.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "swave._kernels._fftw_core",
                ["src/swave/_kernels/_fftw_core.pyx"],
                include_dirs=[np.get_include()],
                libraries=["fftw3", "m"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
