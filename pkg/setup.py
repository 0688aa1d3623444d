"""Build script for the optional Cython kernels.

The package works without them; ``spde_reaction.kernels`` falls back to the
numpy implementations when the extension cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SPDE_REACTION_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "spde_reaction._kernels",
                ["src/spde_reaction/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
