"""Build script for the optional compiled training kernel.

When Cython or a C compiler is unavailable the package still installs and
falls back to the numpy implementation in ``_kernels_py``.
"""
import os
import sys

from setuptools import setup


def _extensions():
    if os.environ.get("RF_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "resilient_forecast._kernels",
        ["src/resilient_forecast/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
