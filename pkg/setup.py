import os

from setuptools import setup

ext_modules = []
if os.environ.get("QGEN_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            "src/qgen/_vm_c.pyx",
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        # No Cython: install pure-Python only, kernels fall back at import.
        ext_modules = []

setup(ext_modules=ext_modules)
