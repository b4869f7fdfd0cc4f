import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython/NumPy headers (or with
# MAFAT_NO_EXT=1) the package installs with the pure-Python fallback only.
ext_modules = []
if not os.environ.get("MAFAT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "mafat.kernels._ckernels",
                    ["src/mafat/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no -ffast-math / FMA contraction: results must match the NumPy path
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
