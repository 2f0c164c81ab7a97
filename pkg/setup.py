import os

import numpy as np
from setuptools import Extension, setup

npy_root = os.path.dirname(np.__file__)

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the fallback backend is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "polarflip._core",
                ["src/polarflip/_core.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[os.path.join(npy_root, "random", "lib"), os.path.join(npy_root, "_core", "lib")],
                libraries=["npyrandom", "npymath"],
                # no -ffast-math / FMA contraction: results must match the numpy fallback bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
