"""Backend selection for the sequential graph kernels and averaging sweeps.

The compiled extension is used when it imports; set ``TRIP_PURE_PYTHON=1``
to force the pure-Python implementations.
"""
import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("TRIP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

enumerate_triangles = _impl.enumerate_triangles
kruskal_forest = _impl.kruskal_forest
tree_propagate = _impl.tree_propagate
prefix_coverage = _impl.prefix_coverage
average_sweeps = _impl.average_sweeps

__all__ = [
    "BACKEND",
    "enumerate_triangles",
    "kruskal_forest",
    "tree_propagate",
    "prefix_coverage",
    "average_sweeps",
]
