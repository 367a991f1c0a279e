"""Build script for the optional compiled kernels.

The pure-Python kernels in ``tredkit._pykernels`` are used whenever the
extension is missing, so a failed compile leaves a working install.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("TREDKIT_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "tredkit._ckernels",
                    ["src/tredkit/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
