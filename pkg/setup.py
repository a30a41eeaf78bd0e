from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "stadium_limits._kernel_cy",
                ["src/stadium_limits/_kernel_cy.pyx"],
                # Keep results bit-identical to the pure-Python twin, which
                # the parity tests rely on: no auto-fma contraction and no
                # fusion of paired sin/cos calls into glibc sincos (1-ulp
                # discrepancies otherwise).
                extra_compile_args=[
                    "-O3",
                    "-ffp-contract=off",
                    "-fno-builtin-sincos",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                ],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-Python fallback is selected at import time when the compiled
    # kernel is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
