"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes the series kernels faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("crreflect._kernels", ["src/crreflect/_kernels.pyx"],
                   extra_compile_args=["-O2"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
