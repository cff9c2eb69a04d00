"""Build the optional Cython kernels; the package still installs without them."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("CTXVAL_PURE_PYTHON") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ctxval._jacobi",
                    ["src/ctxval/_jacobi.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
