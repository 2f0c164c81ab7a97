"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; setting
``POLARFLIP_PURE_PYTHON=1`` forces the numpy fallback in ``_pycore``.
"""

import os

if os.environ.get("POLARFLIP_PURE_PYTHON", "") not in ("", "0"):
    from polarflip import _pycore as impl

    COMPILED = False
else:
    try:
        from polarflip import _core as impl

        COMPILED = True
    except ImportError:
        from polarflip import _pycore as impl

        COMPILED = False

NAME = "cython" if COMPILED else "python"
