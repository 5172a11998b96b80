"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension: lanesim.kernels
falls back to a pure-numpy implementation when the compiled module is
missing (or when LANESIM_PURE=1 is set).
"""

import os

from setuptools import Extension, setup

try:
    if not os.path.exists("src/lanesim/kernels/_ckernels.pyx"):
        raise ImportError
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lanesim.kernels._ckernels",
                ["src/lanesim/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
