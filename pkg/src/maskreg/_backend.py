"""Select the likelihood kernel at import.

The compiled extension is used when it was built; setting
``MASKREG_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

if os.environ.get("MASKREG_PURE_PYTHON", "") not in ("", "0"):
    from ._kernel_py import cloud_logliks, point_logliks

    NAME = "python"
else:
    try:
        from ._kernel import cloud_logliks, point_logliks

        NAME = "compiled"
    except ImportError:
        from ._kernel_py import cloud_logliks, point_logliks

        NAME = "python"

__all__ = ["NAME", "cloud_logliks", "point_logliks"]
