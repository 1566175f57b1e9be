"""Build script: compiles the optional rollout kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any compile failure downgrades to a warning instead of
aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        warnings.warn(f"Cython/numpy unavailable ({exc}); building pure-Python satmpc")
        return []
    ext = Extension(
        "satmpc._kernels._rollout_cy",
        ["src/satmpc/_kernels/_rollout_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


class OptionalBuildExt(build_ext):
    """Treat extension build failures as non-fatal."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"rollout kernel extension skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"building {ext.name} failed ({exc}); numpy fallback will be used")


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
