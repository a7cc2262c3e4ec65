"""Builds the optional Cython kernels; the package falls back to numpy without them."""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "qfredkin._kernels._core",
                ["src/qfredkin/_kernels/_core.pyx"],
                extra_compile_args=["-O3", "-fcx-limited-range"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
