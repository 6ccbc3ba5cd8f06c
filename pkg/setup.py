"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-numpy twin is selected at
import time); the extension just speeds up the hot array-assembly loops.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "evanflow._kernels",
                ["src/evanflow/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover - build environment dependent
    print(f"evanflow: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
