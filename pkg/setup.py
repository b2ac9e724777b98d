# Builds the optional min-sum kernel. If Cython or a compiler is missing the
# package still installs and falls back to the numpy decoder.
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "uwbnbi.fbmcss._minsum_ext",
                ["src/uwbnbi/fbmcss/_minsum_ext.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
