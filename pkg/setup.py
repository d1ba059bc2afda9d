"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a pure-numpy
fallback is selected at import time).  To build the fast kernels in
place:

    python3 setup.py build_ext --inplace

Cython and a C compiler are required only for that step.
"""

import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/hdrgan/_kernels/_native.pyx"],
        language_level=3,
        annotate=False,
    )
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[numpy.get_include()],
)
