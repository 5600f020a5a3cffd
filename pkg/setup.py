"""Build the optional compiled path kernel.

A failed compilation is not fatal: ``davislab.kernels`` falls back to the numpy
implementation at import time.
"""

import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DAVISLAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            Extension(
                "davislab._kernels",
                ["src/davislab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            ),
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
