"""Select the compiled kernels when built, else the numpy fallback.

Set ``FAIRLEVEL_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("FAIRLEVEL_PURE_PYTHON"):
    from fairlevel._kernels_py import breakpoint_scan, edge_search

    BACKEND = "python"
else:
    try:
        from fairlevel._kernels import breakpoint_scan, edge_search

        BACKEND = "cython"
    except ImportError:
        from fairlevel._kernels_py import breakpoint_scan, edge_search

        BACKEND = "python"

__all__ = ["BACKEND", "breakpoint_scan", "edge_search"]
