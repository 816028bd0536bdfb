"""Build script: compiles the optional C extension holding the hot kernels.

The extension is best-effort. If Cython or a C compiler is unavailable the
package installs anyway and falls back to the numpy kernel implementations
at import time (see lidd._core).
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that downgrades compilation failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the lidd._core.ckernels extension failed ({exc}); "
            "the pure-numpy kernels will be used instead.",
            file=sys.stderr,
        )


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"WARNING: {exc}; skipping C extension build.", file=sys.stderr)
        return []
    ext = Extension(
        "lidd._core.ckernels",
        sources=["src/lidd/_core/ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
