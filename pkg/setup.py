import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "lowsig.kernels._ckernels",
        ["src/lowsig/kernels/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-fno-math-errno", "-ffp-contract=off", "-fopenmp"],
        extra_link_args=["-fopenmp"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
