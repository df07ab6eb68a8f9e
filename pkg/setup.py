"""Build the optional compiled stepping kernel.

The extension is a pure speedup; if compilation is impossible the package
falls back to the numpy reference implementation at import time.
"""

import sys

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "spdemil._engine._speed",
                ["src/spdemil/_engine/_speed.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError as exc:
    print(f"spdemil: building without the compiled kernel ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
