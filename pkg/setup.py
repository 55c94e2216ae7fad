"""Build script for the optional compiled scheduling kernel.

The package is fully functional without the extension (a vectorized numpy
kernel is selected at import time); the extension only speeds up the
per-frame scheduling loop. Build failures are therefore non-fatal.
"""

import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qacs._kernels",
                ["src/qacs/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # -ffp-contract=off keeps the scalar loop bit-identical to the
                # numpy kernel (no FMA contraction of a*b+c).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"qacs: skipping compiled kernel ({exc}); using numpy fallback\n")

setup(ext_modules=ext_modules)
