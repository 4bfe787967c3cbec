"""Build script: compiles the optional Cython kernel for the Grassmann ascent.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed compile is downgraded to a warning rather than
aborting the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "pfcr.kernels._grassmann",
                sources=["src/pfcr/kernels/_grassmann.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    warnings.warn(f"Cython kernel not built ({exc}); pure-python fallback will be used")

setup(ext_modules=ext_modules)
