"""Build the compiled search kernels; the package still installs without them."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("RHVRP_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/rhvrp/_kernels.py"],
            compiler_directives={"language_level": "3"},
            quiet=True,
        )
        for ext in ext_modules:
            ext.extra_compile_args = ["-O3"]
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
