"""Build script for the compiled envelope-objective kernel.

The kernel is optional at runtime: renvar falls back to a numpy
implementation when the extension is absent, so a failed compile only
costs speed, not correctness.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "renvar._envelope_kernel",
        ["src/renvar/_envelope_kernel.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
