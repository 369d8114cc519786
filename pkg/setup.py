"""Builds the optional compiled kernel extension.

Set KGEAUDIT_SKIP_EXT=1 to install without the extension; the package then
runs on the pure-numpy kernel backend.
"""

import os

from setuptools import setup

if os.environ.get("KGEAUDIT_SKIP_EXT") == "1":
    ext_modules = []
else:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "kgeaudit.kernels._ckernels",
                sources=["src/kgeaudit/kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
