import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: install the pure-Python fallback only
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [Extension(
            "fracocp._ext.kernels",
            ["src/fracocp/_ext/kernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            optional=True,  # a failed compile falls back to fracocp._ext.fallback
        )],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
