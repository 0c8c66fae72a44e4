"""Build script for the optional compiled kernel extension.

Set SSODLAB_NO_EXT=1 to skip compilation; the package then runs on the
pure NumPy fallback selected at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SSODLAB_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ssodlab.kernels._core",
                    ["src/ssodlab/kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
