from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled kernels bit-compatible with the
# pure-Python fallback (no fused multiply-add reassociation).
extensions = [
    Extension(
        "unitailkit._kernels._core",
        ["src/unitailkit/_kernels/_core.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
