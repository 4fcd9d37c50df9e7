"""Build script for the optional compiled kernels.

The kernels in ``src/twoflux/_core.py`` are plain Python annotated by
``_core.pxd``.  When Cython is available they are compiled; otherwise the
package installs without the extension and runs the same source interpreted.
Set ``TWOFLUX_NO_EXT=1`` to skip compilation on purpose.
"""
import os

import numpy as np
from setuptools import Extension, setup


def _extensions():
    if os.environ.get("TWOFLUX_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "twoflux._core",
        ["src/twoflux/_core.py"],
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
            "initializedcheck": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
