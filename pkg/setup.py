import numpy
from setuptools import Extension, setup

# The compiled kernel module is optional. If Cython or a C compiler is
# missing the install still succeeds and the package falls back to the
# numpy implementation at import time.
try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "vortexpair._fiberext",
                ["src/vortexpair/_fiberext.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
