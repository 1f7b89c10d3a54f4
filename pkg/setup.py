# Builds the compiled kernel core. The package also works without it
# (pure NumPy fallback is selected at import), so the extension build
# is best-effort: missing Cython just skips it.
#
# In-place build for development:
#    python setup.py build_ext --inplace

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "spikedrive._kernels._core",
                ["src/spikedrive/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
