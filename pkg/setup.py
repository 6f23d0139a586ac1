"""Build script. The compiled kernel extension is optional: if Cython (or a C
compiler) is unavailable the package installs anyway and falls back to the
pure-numpy kernels at import time."""

import os

from setuptools import Extension, setup

_PYX = "src/tcamp/_kernels_cy.pyx"

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    if os.path.exists(_PYX):
        ext_modules = cythonize(
            [
                Extension(
                    "tcamp._kernels_cy",
                    [_PYX],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
except ImportError:
    pass

setup(ext_modules=ext_modules)
