"""Build script for the optional compiled grid-evaluation kernel.

The package works without the extension: fairvote._kernels falls back to a
pure-numpy implementation at import time. Building is therefore best-effort;
any compiler or Cython failure downgrades to a source-only install.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise continue without it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: skipping compiled kernel ({exc}); "
                  "pure-python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: failed to compile {ext.name} ({exc}); "
                  "pure-python fallback will be used")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build environment without tools
        return []
    ext = Extension(
        "fairvote._kernels._grid_c",
        sources=["src/fairvote/_kernels/_grid_c.pyx"],
        include_dirs=[np.get_include()],
        # No -ffast-math / -march=native: the kernel must produce results
        # bit-identical to the numpy fallback on every platform.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
