"""Build the compiled kernel extension.

The package still imports without it: ``greedybn.kernels`` falls back to the
numpy implementation when ``greedybn.kernels._core`` is missing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    cythonize = None

extensions = [
    Extension(
        "greedybn.kernels._core",
        ["src/greedybn/kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
    if cythonize
    else [],
)
