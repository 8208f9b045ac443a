import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext_modules = [
    Extension(
        "wmdld._kernels",
        ["src/wmdld/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        # the package still works through the NumPy fallback
        optional=True,
    )
]

setup(ext_modules=cythonize(ext_modules, language_level=3))
