import numpy
from setuptools import setup
from Cython.Build import cythonize

extensions = cythonize(
    "src/satrl/_engine/_core.pyx",
    compiler_directives={
        "language_level": 3,
        "boundscheck": False,
        "wraparound": False,
        "cdivision": True,
        "initializedcheck": False,
    },
)

setup(
    ext_modules=extensions,
    include_dirs=[numpy.get_include()],
)
