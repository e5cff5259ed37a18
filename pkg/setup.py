import os

import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# The numpy.random C distribution functions (ziggurat exponential/normal,
# next_double) are shipped as a static library that extensions must link.
npyrandom_dir = os.path.join(os.path.dirname(numpy.random.__file__), "lib")

extensions = [
    Extension(
        "affinet._core",
        ["src/affinet/_core.pyx"],
        include_dirs=[numpy.get_include()],
        library_dirs=[npyrandom_dir],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
