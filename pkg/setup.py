from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "fragcov._fastpath",
                ["src/fragcov/_fastpath.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython: the pure-Python backend is selected at import time.
    extensions = []

setup(ext_modules=extensions)
