"""Build script: compiles the optional Cython jet kernel.

If Cython or a C compiler is unavailable the package installs pure-Python;
the kernel backend falls back automatically at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CONTACTCX_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize

        ext = Extension(
            "contactcx.kernels._cyjet",
            sources=["src/contactcx/kernels/_cyjet.pyx"],
            # keep plain IEEE per-op semantics so both backends match closely
            extra_compile_args=["-O2", "-ffp-contract=off"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
