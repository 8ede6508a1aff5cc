import os

from setuptools import Extension, setup

# The compiled kernels are an optimization; the package falls back to the
# numpy implementations in stochint._kernels.pykern when the build is
# unavailable.  Set STOCHINT_SKIP_EXT=1 to force a pure-python install.
ext_modules = []
if not os.environ.get("STOCHINT_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "stochint._kernels._ckern",
                    ["src/stochint/_kernels/_ckern.pyx"],
                    include_dirs=[numpy.get_include()],
                    # -ffp-contract=off keeps the C arithmetic aligned with
                    # the numpy fallback (no fused multiply-add).
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
